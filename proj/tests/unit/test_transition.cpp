#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fracpb/errors.hpp"
#include "fracpb/specfun.hpp"
#include "fracpb/transition.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace fracpb;

namespace {

double max_abs(const Eigen::MatrixXd& m)
{
    return m.cwiseAbs().maxCoeff();
}

Eigen::MatrixXd nilpotent()
{
    Eigen::MatrixXd n(2, 2);
    n << 0, 1, 0, 0;
    return n;
}

// A(t) = N t
MatrixPolynomial nilpotent_ramp()
{
    return MatrixPolynomial(0.0, 2, {{1, nilpotent()}});
}

// Phi(t, s) for A(t) = N t, worked out by hand:
//   I (t-s)^(a-1)/G(a) + N [ a (t-s)^(2a)/G(2a+1) + s (t-s)^(2a-1)/G(2a) ]
Eigen::MatrixXd nilpotent_phi(double a, double t, double s)
{
    const double h = t - s;
    Eigen::MatrixXd out = Eigen::MatrixXd::Identity(2, 2) * std::pow(h, a - 1) / oracle::gamma(a);
    out += nilpotent() * (a * std::pow(h, 2 * a) / oracle::gamma(2 * a + 1) + s * std::pow(h, 2 * a - 1) / oracle::gamma(2 * a));
    return out;
}

// t^(a-1) sum_k (A t^a)^k / G((k+1)a) in 50 digits
Eigen::MatrixXd constant_phi(double a, const Eigen::MatrixXd& m, double t)
{
    return std::pow(t, a - 1) * oracle::matrix_series(a, a, m * std::pow(t, a), 120);
}

MatrixPolynomial random_polynomial(std::mt19937_64& g, Eigen::Index n, int degree, double bound)
{
    std::vector<MatrixPolynomial::Coefficient> c;
    for (int m = 0; m <= degree; ++m)
        c.push_back({m, oracle::random_matrix(g, n, n, bound)});
    return MatrixPolynomial(0.0, n, std::move(c));
}

} // namespace

TEST_CASE("nilpotent ramp terminates after two terms")
{
    for (double alpha : {0.3, 0.5, 0.7}) {
        CAPTURE(alpha);
        const auto phi = peano_baker_exact(nilpotent_ramp(), alpha, 1.0);
        CHECK(phi.terms_used == 2);
        CHECK(phi.terminated_exactly);
        CHECK(phi.tail_estimate == 0.0);
        CHECK(!phi.omitted);
        for (double t : {0.01, 0.25, 0.5, 1.0}) {
            const Eigen::MatrixXd ref = nilpotent_phi(alpha, t, 0.0);
            CHECK(max_abs(phi.eval(t) - ref) <= 1e-13 * max_abs(ref));
        }
    }
    const auto phi = peano_baker_exact(nilpotent_ramp(), 0.5, 1.0);
    CHECK(phi.eval(1.0)(0, 0) == doctest::Approx(0.5641895835477563).epsilon(1e-15));
    CHECK(phi.eval(1.0)(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("weighted value of Phi at the origin")
{
    // J^(1-a) Phi = I + N a t^(a+1) / G(a+2)
    for (double alpha : {0.3, 0.5, 0.7}) {
        const auto phi = peano_baker_exact(nilpotent_ramp(), alpha, 1.0);
        const auto w = rl_integral(phi.series, 1 - alpha);
        CHECK(max_abs(limit_at_origin(w) - Eigen::MatrixXd::Identity(2, 2)) == 0.0);
        for (double t : {0.2, 0.9}) {
            const Eigen::MatrixXd v = w.eval(t);
            CHECK(v(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
            CHECK(v(0, 1) == doctest::Approx(alpha * std::pow(t, alpha + 1) / oracle::gamma(alpha + 2)).epsilon(1e-13));
            CHECK(v(1, 0) == 0.0);
        }
    }
}

TEST_CASE("zero coefficient gives the bare kernel")
{
    const auto phi = peano_baker_exact(MatrixPolynomial(0.0, 3), 0.4, 2.0);
    CHECK(phi.terms_used == 1);
    CHECK(phi.terminated_exactly);
    const double t = 1.7;
    CHECK(max_abs(phi.eval(t) - Eigen::MatrixXd::Identity(3, 3) * std::pow(t, -0.6) / oracle::gamma(0.4)) <= 1e-15);
}

TEST_CASE("constant coefficient: terms are A^k t^((k+1)a-1) / G((k+1)a)")
{
    auto g = oracle::rng(11);
    const Eigen::MatrixXd a = oracle::random_matrix(g, 2, 2, 1.0);
    const double alpha = 0.6;
    const auto phi = peano_baker_exact(MatrixPolynomial::constant(0.0, a), alpha, 1.0);
    REQUIRE(phi.terms.size() >= 4);
    Eigen::MatrixXd power = Eigen::MatrixXd::Identity(2, 2);
    for (int k = 0; k < 4; ++k) {
        const auto& term = phi.terms[static_cast<std::size_t>(k)].terms();
        REQUIRE(term.size() == 1);
        CHECK(term[0].gamma == doctest::Approx((k + 1) * alpha).epsilon(1e-14));
        CHECK(max_abs(term[0].coeff - power / oracle::gamma((k + 1) * alpha)) <= 1e-14 * (1 + max_abs(power)));
        power = power * a;
    }
    for (double t : {0.1, 0.5, 1.0})
        CHECK(max_abs(phi.eval(t) - constant_phi(alpha, a, t)) <= 1e-11 * max_abs(constant_phi(alpha, a, t)));
}

TEST_CASE("Phi solves the Volterra equation for random polynomial coefficients")
{
    // Phi(t) = I t^(a-1)/G(a) + J^a (A Phi)(t), the right side by quadrature
    auto g = oracle::rng(3);
    for (int trial = 0; trial < 3; ++trial) {
        const auto a = random_polynomial(g, 2, 2, 1.0);
        const double alpha = oracle::uniform(g, 0.3, 0.9);
        CAPTURE(alpha);
        const auto phi = peano_baker_exact(a, alpha, 1.0);
        for (double t : {0.3, 1.0})
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const double rhs =
                        (i == j ? std::pow(t, alpha - 1) / oracle::gamma(alpha) : 0.0) +
                        oracle::rl_integral([&](double u) { return (a.eval(u) * phi.eval(u))(i, j); }, alpha, t);
                    CHECK(phi.eval(t)(i, j) == doctest::Approx(rhs).epsilon(1e-9));
                }
    }
}

TEST_CASE("verify_lemma4 on random coefficients")
{
    auto g = oracle::rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::Index n = 1 + trial % 3;
        const auto a = random_polynomial(g, n, trial % 3, 1.0);
        const double alpha = oracle::uniform(g, 0.2, 0.95);
        CAPTURE(trial);
        CAPTURE(alpha);
        const auto phi = peano_baker_exact(a, alpha, 1.0);
        const auto rep = verify_lemma4(phi, a);
        CHECK(rep.supported_on_tail());
        CHECK(rep.within_tail());
        CHECK(rep.initial_condition_error <= 1e-14);
        CHECK(phi.convergence.verdict == Verdict::converging);
    }
}

TEST_CASE("verify_lemma4 flags a corrupted series")
{
    const auto a = nilpotent_ramp();
    auto phi = peano_baker_exact(a, 0.5, 1.0);
    auto bumped = phi.series.terms();
    bumped.back().coeff *= 1.001;
    phi.series = FracPowerSeries(0.0, 2, 2, bumped);
    CHECK(!verify_lemma4(phi, a).supported_on_tail());
}

TEST_CASE("two-point transition matrix")
{
    const auto a = nilpotent_ramp();
    for (double alpha : {0.3, 0.5, 0.7}) {
        CAPTURE(alpha);
        const auto k = transition_kernel(a, alpha, 2.0);
        CHECK(k.terminated_exactly);
        for (double s : {0.0, 0.3, 1.0})
            for (double dt : {0.05, 0.5, 1.0}) {
                const double t = s + dt;
                const Eigen::MatrixXd ref = nilpotent_phi(alpha, t, s);
                CHECK(max_abs(two_point_phi(a, alpha, s, t) - ref) <= 1e-13 * max_abs(ref));
                CHECK(max_abs(k.kernel.eval(t, s) - ref) <= 1e-13 * max_abs(ref));
                CHECK(max_abs(k.kernel.at_anchor(s).eval(t) - ref) <= 1e-13 * max_abs(ref));
            }
    }
}

TEST_CASE("two-point matrix at the origin anchor equals the one-point matrix")
{
    auto g = oracle::rng(8);
    // the anchor powers (s - t0)^p get no Gamma damping, so keep A H^2 moderate
    const auto a = random_polynomial(g, 3, 2, 0.4);
    const auto phi = peano_baker_exact(a, 0.45, 1.2);
    const auto k = transition_kernel(a, 0.45, 1.2);
    for (double t : {0.2, 0.8, 1.2}) {
        CHECK(max_abs(two_point_phi(a, 0.45, 0.0, t) - phi.eval(t)) <= 1e-12 * max_abs(phi.eval(t)));
        CHECK(max_abs(k.kernel.eval(t, 0.0) - phi.eval(t)) <= 1e-12 * max_abs(phi.eval(t)));
    }
    // kernel vs re-anchored series at interior anchors
    for (double s : {0.4, 0.8}) {
        const double t = s + 0.4;
        const Eigen::MatrixXd ref = two_point_phi(a, 0.45, s, t);
        CHECK(max_abs(k.kernel.eval(t, s) - ref) <= 1e-10 * max_abs(ref));
    }
}

TEST_CASE("constant coefficient: Phi(t, s) depends on t - s only")
{
    auto g = oracle::rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::MatrixXd m = oracle::random_matrix(g, 2, 2, 1.5);
        const auto a = MatrixPolynomial::constant(0.0, m);
        for (double alpha : {0.4, 0.8}) {
            const double s = 0.3, t = 1.0;
            const Eigen::MatrixXd ref = constant_phi(alpha, m, t - s);
            CHECK(max_abs(two_point_phi(a, alpha, s, t) - ref) <= 1e-10 * std::max(1.0, max_abs(ref)));
            CHECK(max_abs(alpha_exp(alpha, m, t - s) - ref) <= 1e-10 * std::max(1.0, max_abs(ref)));
        }
    }
}

TEST_CASE("J^(1-a)_t Phi(t, tau) tends to I as tau approaches t")
{
    const auto a = nilpotent_ramp();
    const double alpha = 0.5, tau = 0.6;
    const auto phi = two_point_series(a, alpha, tau, 1.0);
    const auto w = rl_integral(phi.series, 1 - alpha);
    CHECK(max_abs(limit_at_origin(w) - Eigen::MatrixXd::Identity(2, 2)) == 0.0);
    double previous = INFINITY;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        const double err = max_abs(w.eval(tau + eps) - Eigen::MatrixXd::Identity(2, 2));
        // leading defect tau eps^a / G(1+a)
        CHECK(err == doctest::Approx(tau * std::pow(eps, alpha) / oracle::gamma(1 + alpha)).epsilon(0.05));
        CHECK(err < previous);
        previous = err;
    }
}

TEST_CASE("convergence reporting")
{
    SUBCASE("a fast series is reported as converging")
    {
        const auto phi = peano_baker_exact(MatrixPolynomial::constant(0.0, Eigen::MatrixXd::Identity(2, 2) * 0.5), 0.7, 1.0);
        CHECK(phi.convergence.verdict == Verdict::converging);
        CHECK(!phi.terminated_exactly);
        CHECK(phi.tail_estimate > 0.0);
        // includes the bound on A term_K, which may sit slightly above tol
        CHECK(phi.tail_estimate <= 1e-11);
        CHECK(phi.convergence.term_norms.size() == phi.convergence.ratios.size() + 1);
    }
    SUBCASE("the term cap with growing norms raises convergence_error")
    {
        TransitionOptions opts;
        opts.max_terms = 5;
        const auto big = MatrixPolynomial::constant(0.0, Eigen::MatrixXd::Identity(2, 2) * 8.0);
        try {
            peano_baker_exact(big, 0.5, 1.0, opts);
            FAIL("expected convergence_error");
        } catch (const convergence_error& e) {
            CHECK(!e.term_norms().empty());
        }
    }
    SUBCASE("the term cap with shrinking norms returns the truncation and its tail")
    {
        TransitionOptions opts;
        opts.max_terms = 6;
        const auto phi = peano_baker_exact(MatrixPolynomial::constant(0.0, Eigen::MatrixXd::Identity(2, 2) * 0.5), 0.7, 1.0, opts);
        CHECK(phi.terms_used == 6);
        CHECK(phi.tail_estimate > 1e-12);
        const Eigen::MatrixXd ref = constant_phi(0.7, Eigen::MatrixXd::Identity(2, 2) * 0.5, 1.0);
        CHECK(max_abs(phi.eval(1.0) - ref) <= phi.tail_estimate * 2);
    }
}

TEST_CASE("grid transition approaches the exact one")
{
    auto g = oracle::rng(21);
    const auto a = random_polynomial(g, 2, 2, 1.0);
    const double alpha = 0.6;
    const auto exact = peano_baker_exact(a, alpha, 1.0);
    double previous = 0.0;
    for (int n : {128, 256, 512}) {
        const Grid grid(0.0, 1.0, n);
        const auto approx = peano_baker_grid(SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), alpha);
        CHECK(approx.phi.left_exponent() == doctest::Approx(alpha));
        double err = 0.0;
        for (int i = 1; i <= n; ++i)
            if (grid.node(i) >= 0.05)
                err = std::max(err, max_abs(approx.phi.value(i) - exact.eval(grid.node(i))));
        MESSAGE("N=" << n << " max error " << err);
        CHECK(err > 0.0);
        if (previous > 0.0)
            CHECK(previous / err >= 3.0);
        previous = err;
    }
    CHECK(previous <= 1e-3);
}

TEST_CASE("grid transition is exact on a nilpotent ramp")
{
    const Grid grid(0.0, 1.0, 64);
    const auto a = nilpotent_ramp();
    const auto approx = peano_baker_grid(SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), 0.5);
    CHECK(approx.terminated_exactly);
    for (int i = 1; i <= 64; ++i)
        CHECK(max_abs(approx.phi.value(i) - nilpotent_phi(0.5, grid.node(i), 0.0)) <= 1e-12);
}

TEST_CASE("parameter checks")
{
    CHECK_THROWS_AS(peano_baker_exact(nilpotent_ramp(), 0.0, 1.0), domain_error);
    CHECK_THROWS_AS(peano_baker_exact(nilpotent_ramp(), 1.0, 1.0), domain_error);
    CHECK_THROWS_AS(peano_baker_exact(nilpotent_ramp(), 0.5, 0.0), domain_error);
    CHECK_THROWS_AS(two_point_phi(nilpotent_ramp(), 0.5, 0.5, 0.5), domain_error);
}
