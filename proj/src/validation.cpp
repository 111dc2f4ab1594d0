#include "fracpb/validation.hpp"

#include "fracpb/grid.hpp"
#include "fracpb/series.hpp"
#include "fracpb/solver.hpp"
#include "fracpb/specfun.hpp"
#include "fracpb/transition.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace fracpb {

bool ValidationReport::passed() const
{
    return failures() == 0;
}

std::size_t ValidationReport::failures() const
{
    return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const auto& c) { return !c.passed(); }));
}

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

using Gamma = std::function<double(double)>;

// Per-term relative error between two series: |C_a - C_b|_max / |C_b|_max for every
// exponent present in either. Mismatched exponent sets give infinity.
double termwise_error(const FracPowerSeries& a, const FracPowerSeries& b)
{
    if (a.terms().size() != b.terms().size())
        return inf;
    double worst = 0.0;
    for (std::size_t k = 0; k < a.terms().size(); ++k) {
        const auto& ta = a.terms()[k];
        const auto& tb = b.terms()[k];
        if (std::abs(ta.gamma - tb.gamma) > exponent_merge_tol)
            return inf;
        const double scale = tb.coeff.cwiseAbs().maxCoeff();
        worst = std::max(worst, (ta.coeff - tb.coeff).cwiseAbs().maxCoeff() / scale);
    }
    return worst;
}

Eigen::MatrixXd nilpotent_coefficient()
{
    Eigen::MatrixXd a1 = Eigen::MatrixXd::Zero(2, 2);
    a1(0, 1) = 1.0;
    return a1;
}

MatrixPolynomial nilpotent_system()
{
    return MatrixPolynomial(0.0, 2, {{1, nilpotent_coefficient()}});
}

FracPowerSeries nilpotent_phi(double alpha, const Gamma& g)
{
    Eigen::MatrixXd upper = Eigen::MatrixXd::Zero(2, 2);
    upper(0, 1) = alpha / g(2 * alpha + 1);
    return FracPowerSeries(0.0, 2, 2,
                           {{alpha, Eigen::MatrixXd::Identity(2, 2) / g(alpha)}, {2 * alpha + 1, upper}});
}

FracPowerSeries forced_solution(double alpha, const Gamma& g)
{
    return FracPowerSeries(0.0, 2, 1,
                           {{alpha, Eigen::Vector2d(0.0, 1.0 / g(alpha))},
                            {alpha + 1, Eigen::Vector2d(1.0 / g(alpha + 1), 0.0)},
                            {2 * alpha + 1, Eigen::Vector2d(alpha / g(2 * alpha + 1), 0.0)}});
}

IvpProblem forced_problem(double alpha)
{
    return {alpha,         0.0, 1.0, nilpotent_system(), Eigen::Vector2d(0.0, 1.0),
            FracPowerSeries::single(0.0, 1.0, Eigen::Vector2d(1.0, 0.0))};
}

MatrixPolynomial random_polynomial(std::mt19937_64& rng, Eigen::Index n, int degree)
{
    std::uniform_real_distribution<double> entry(-1.0, 1.0);
    std::vector<MatrixPolynomial::Coefficient> coeffs;
    for (int m = 0; m <= degree; ++m)
        coeffs.push_back({m, Eigen::MatrixXd::NullaryExpr(n, n, [&] { return entry(rng); })});
    return MatrixPolynomial(0.0, n, std::move(coeffs));
}

FracPowerSeries random_series(std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> gamma(0.1, 4.0);
    std::uniform_real_distribution<double> coeff(-2.0, 2.0);
    std::uniform_int_distribution<int> count(1, 6);
    std::vector<SeriesTerm> terms;
    for (int k = count(rng); k > 0; --k)
        terms.push_back({gamma(rng), Eigen::MatrixXd::Constant(1, 1, coeff(rng))});
    return FracPowerSeries(0.0, 1, 1, std::move(terms));
}

// max_i |f(t_i) - ref(t_i)| over nodes first..last.
template <class Ref>
double node_error(const SampledMatrixFunction& f, int first, int last, Ref&& ref)
{
    double worst = 0.0;
    for (int i = first; i <= last; ++i)
        worst = std::max(worst, (f.value(i) - ref(f.grid().node(i))).cwiseAbs().maxCoeff());
    return worst;
}

SampledMatrixFunction scalar_samples(const Grid& grid, const std::function<double(double)>& f)
{
    return SampledMatrixFunction::from_function(grid, [&](double t) { return Eigen::MatrixXd::Constant(1, 1, f(t)); });
}

class Runner
{
public:
    explicit Runner(const ValidationOptions& opts) : opts_(opts), rng_(opts.seed)
    {
        g_ = opts.reference_gamma ? opts.reference_gamma : Gamma([](double x) { return boost::math::tgamma(x); });
    }

    ValidationReport run()
    {
        series_algebra();
        transition();
        solver();
        grid_operators();
        grid_transition();
        if (opts_.full)
            differentiation_under_integral();
        return std::move(report_);
    }

private:
    void add(const char* suite, std::string name, double residual, double tolerance)
    {
        if (std::isnan(residual))
            residual = inf;
        report_.checks.push_back({suite, std::move(name), residual, tolerance});
    }

    // Wraps a check whose computation may throw: a throw is a failure, not an abort.
    template <class F>
    void guarded(const char* suite, const std::string& name, double tolerance, F&& f)
    {
        double residual;
        try {
            residual = f();
        } catch (const std::exception&) {
            residual = inf;
        }
        add(suite, name, residual, tolerance);
    }

    void series_algebra()
    {
        const char* suite = "series";
        const double gammas[] = {0.4, 1.0, 1.7, 2.5, 3.2};
        const double orders[] = {0.3, 0.5, 0.9, 1.4};

        guarded(suite, "power rule for J^a", 1e-12, [&] {
            double worst = 0.0;
            for (double gm : gammas)
                for (double a : orders) {
                    auto r = rl_integral(FracPowerSeries::single(0.0, gm, Eigen::MatrixXd::Ones(1, 1)), a);
                    auto ref = FracPowerSeries::single(0.0, gm + a, Eigen::MatrixXd::Constant(1, 1, g_(gm) / g_(gm + a)));
                    worst = std::max(worst, termwise_error(r, ref));
                }
            return worst;
        });

        guarded(suite, "power rule for D^a", 1e-12, [&] {
            double worst = 0.0;
            for (double gm : gammas)
                for (double a : {0.3, 0.5, 0.9}) {
                    if (gm - a <= 0.0)
                        continue;
                    auto r = rl_derivative(FracPowerSeries::single(0.0, gm, Eigen::MatrixXd::Ones(1, 1)), a);
                    auto ref = FracPowerSeries::single(0.0, gm - a, Eigen::MatrixXd::Constant(1, 1, g_(gm) / g_(gm - a)));
                    worst = std::max(worst, termwise_error(r, ref));
                }
            return worst;
        });

        guarded(suite, "D^a of the singular kernel vanishes", 0.0, [&] {
            double worst = 0.0;
            for (double a : {0.3, 0.5, 0.7})
                worst = std::max(worst, rl_derivative(FracPowerSeries::single(0.0, a, Eigen::MatrixXd::Ones(2, 2)), a)
                                            .max_coeff());
            return worst;
        });

        guarded(suite, "J^(1-a) of the normalized kernel is 1", 1e-12, [&] {
            double worst = 0.0;
            for (double a : {0.3, 0.5, 0.7}) {
                auto r = rl_integral(FracPowerSeries::single(0.0, a, Eigen::MatrixXd::Constant(1, 1, 1.0 / g_(a))), 1 - a);
                worst = std::max(worst, termwise_error(r, FracPowerSeries::single(0.0, 1.0, Eigen::MatrixXd::Ones(1, 1))));
            }
            return worst;
        });

        const int samples = opts_.full ? 200 : 40;
        guarded(suite, fmt::format("D^a J^a f = f on {} random series", samples), 1e-12, [&] {
            std::uniform_real_distribution<double> order(0.05, 0.95);
            double worst = 0.0;
            for (int k = 0; k < samples; ++k) {
                const auto f = random_series(rng_);
                const double a = order(rng_);
                worst = std::max(worst, termwise_error(rl_derivative(rl_integral(f, a), a), f));
            }
            return worst;
        });

        guarded(suite, fmt::format("J^b J^a f = J^(a+b) f on {} random series", samples), 1e-12, [&] {
            std::uniform_real_distribution<double> order(0.05, 1.5);
            double worst = 0.0;
            for (int k = 0; k < samples; ++k) {
                const auto f = random_series(rng_);
                const double a = order(rng_), b = order(rng_);
                worst = std::max(worst, termwise_error(rl_integral(rl_integral(f, a), b), rl_integral(f, a + b)));
            }
            return worst;
        });
    }

    void transition()
    {
        const char* suite = "transition";
        for (double alpha : {0.3, 0.5, 0.7}) {
            guarded(suite, fmt::format("closed-form Phi(t,0) of the nilpotent example, alpha={}", alpha), 1e-12, [&] {
                const auto phi = peano_baker_exact(nilpotent_system(), alpha, 1.0);
                if (phi.terms_used != 2 || !phi.terminated_exactly)
                    return inf;
                return termwise_error(phi.series, nilpotent_phi(alpha, g_));
            });
        }

        const int systems = opts_.full ? 20 : 5;
        std::vector<std::pair<MatrixPolynomial, double>> cases;
        std::uniform_int_distribution<int> dim(1, 3), degree(0, 2);
        std::uniform_real_distribution<double> order(0.2, 0.9);
        for (int k = 0; k < systems; ++k) {
            const auto n = dim(rng_);
            const int d = degree(rng_);
            cases.emplace_back(random_polynomial(rng_, n, d), order(rng_));
        }

        guarded(suite, fmt::format("D^alpha term_(k+1) = A term_k on {} random systems", systems), 1e-12, [&] {
            double worst = 0.0;
            for (const auto& [a, alpha] : cases) {
                const auto phi = peano_baker_exact(a, alpha, 1.0);
                for (std::size_t k = 0; k + 1 < phi.terms.size(); ++k)
                    worst = std::max(worst, termwise_error(rl_derivative(phi.terms[k + 1], alpha),
                                                           mul_poly(a, phi.terms[k])));
            }
            return worst;
        });

        guarded(suite, "truncation residual bounded by the tail estimate", 1.0, [&] {
            double worst = 0.0;
            for (const auto& [a, alpha] : cases) {
                const auto rep = verify_lemma4(peano_baker_exact(a, alpha, 1.0), a);
                if (!rep.supported_on_tail())
                    return inf;
                worst = std::max(worst, rep.tail_residual / (rep.tail_estimate + rep.roundoff_floor));
            }
            return worst;
        });

        guarded(suite, "J^(1-alpha) Phi -> I at the origin", 1e-12, [&] {
            double worst = 0.0;
            for (const auto& [a, alpha] : cases)
                worst = std::max(worst, verify_lemma4(peano_baker_exact(a, alpha, 1.0), a).initial_condition_error);
            return worst;
        });

        const int constant_cases = opts_.full ? 10 : 3;
        guarded(suite, fmt::format("constant A against the alpha-exponential ({} matrices)", constant_cases), 1e-9, [&] {
            std::uniform_real_distribution<double> entry(-1.0, 1.0);
            double worst = 0.0;
            for (int k = 0; k < constant_cases; ++k) {
                Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(2, 2, [&] { return entry(rng_); });
                a *= 1.5 / std::max(1.5, a.operatorNorm());
                for (double alpha : {0.4, 0.8}) {
                    const auto phi = peano_baker_exact(MatrixPolynomial::constant(0.0, a), alpha, 1.0);
                    for (double t : {0.25, 0.5, 1.0}) {
                        const Eigen::MatrixXd ref = alpha_exp(alpha, a, t);
                        worst = std::max(worst, (phi.eval(t) - ref).cwiseAbs().maxCoeff() /
                                                    std::max(1.0, ref.cwiseAbs().maxCoeff()));
                    }
                }
            }
            return worst;
        });
    }

    void solver()
    {
        const char* suite = "solver";
        for (double alpha : {0.3, 0.5, 0.7}) {
            guarded(suite, fmt::format("closed-form solution of the forced example, alpha={}", alpha), 1e-12, [&] {
                const auto sol = solve_inhomogeneous(forced_problem(alpha));
                return termwise_error(sol.series(), forced_solution(alpha, g_));
            });
        }

        guarded(suite, "forced example at t=1, alpha=0.5", 1e-9, [&] {
            const Eigen::VectorXd x = solve_inhomogeneous(forced_problem(0.5)).eval(1.0);
            return std::max(std::abs(x(0) - (0.5 / g_(2.0) + 1.0 / g_(1.5))), std::abs(x(1) - 1.0 / g_(0.5)));
        });

        guarded(suite, "residual and initial condition of the forced example", 0.0, [&] {
            const auto p = forced_problem(0.5);
            const auto rep = residual_check(p, solve_inhomogeneous(p));
            return std::max(rep.equation_residual - rep.roundoff_floor, 0.0) +
                   std::max(rep.initial_condition_error - 1e-15, 0.0);
        });

        guarded(suite, "grid solution of the forced example, N=512, t>=0.05", 1e-3, [&] {
            const auto p = forced_problem(0.5);
            const auto exact = solve_inhomogeneous(p);
            SolveOptions o;
            o.grid_intervals = 512;
            const auto grid = solve_inhomogeneous(p, o);
            const auto& s = grid.samples();
            double worst = 0.0;
            for (int i = 1; i <= s.grid().intervals(); ++i)
                if (s.grid().node(i) >= 0.05 - 1e-12)
                    worst = std::max(worst, (s.value(i).col(0) - exact.eval(s.grid().node(i))).cwiseAbs().maxCoeff());
            return worst;
        });
    }

    void grid_operators()
    {
        const char* suite = "grid";
        guarded(suite, "J^0.5 of 1, N=256", 1e-3, [&] {
            const Grid grid(0.0, 1.0, 256);
            const auto r = grid_rl_integral(SampledMatrixFunction::constant(grid, Eigen::MatrixXd::Ones(1, 1)), 0.5);
            return node_error(r, 1, grid.intervals(),
                              [&](double t) { return Eigen::MatrixXd::Constant(1, 1, std::sqrt(t) / g_(1.5)); });
        });

        guarded(suite, "J^0.5 of exp, N=256", 1e-3, [&] {
            const Grid grid(0.0, 1.0, 256);
            const auto r = grid_rl_integral(scalar_samples(grid, [](double t) { return std::exp(t); }), 0.5);
            return node_error(r, 1, grid.intervals(), [&](double t) {
                // J^0.5 e^t = sum_k t^(k + 0.5) / Gamma(k + 1.5)
                double s = 0.0;
                for (int k = 0; k < 30; ++k)
                    s += std::pow(t, k + 0.5) / g_(k + 1.5);
                return Eigen::MatrixXd::Constant(1, 1, s);
            });
        });

        for (double alpha : {0.3, 0.5, 0.7}) {
            const Grid grid(0.0, 1.0, 1024);
            const auto kernel = SampledMatrixFunction::constant(grid, Eigen::MatrixXd::Constant(1, 1, 1.0 / g_(alpha)), alpha);
            guarded(suite, fmt::format("J^(1-a) of the normalized kernel is 1, a={}, N=1024", alpha), 1e-6, [&] {
                return node_error(grid_rl_integral(kernel, 1.0 - alpha), 1, grid.intervals(),
                                  [](double) { return Eigen::MatrixXd::Ones(1, 1); });
            });
            guarded(suite, fmt::format("D^a of the kernel vanishes, a={}, N=1024", alpha), 1e-6, [&] {
                return node_error(grid_rl_derivative(kernel, alpha), 1, grid.intervals(),
                                  [](double) { return Eigen::MatrixXd::Zero(1, 1); });
            });
        }

        guarded(suite, "D^0.5 of a constant at t=1, N=1024", 1e-6, [&] {
            const Grid grid(0.0, 1.0, 1024);
            const auto d = grid_rl_derivative(SampledMatrixFunction::constant(grid, Eigen::MatrixXd::Constant(1, 1, 3.0)), 0.5);
            return std::abs(d.value(grid.intervals())(0, 0) - 3.0 / g_(0.5));
        });

        const auto smooth = [](double t) { return 0.7 + std::sin(3.0 * t + 0.4) + 0.5 * t * t; };
        guarded(suite, "D^a J^a f = f for smooth f, N=1024", 1e-4, [&] {
            const Grid grid(0.0, 1.0, 1024);
            double worst = 0.0;
            for (double a : {0.3, 0.6, 0.9}) {
                const auto f = scalar_samples(grid, smooth);
                const auto back = grid_rl_derivative(grid_rl_integral(f, a), a);
                worst = std::max(worst, node_error(back, 1, grid.intervals() - 1, [&](double t) {
                                     return Eigen::MatrixXd::Constant(1, 1, smooth(t));
                                 }));
            }
            return worst;
        });

        guarded(suite, "J^b J^a f = J^(a+b) f for smooth f, N=1024", 5e-4, [&] {
            const Grid grid(0.0, 1.0, 1024);
            const auto f = scalar_samples(grid, smooth);
            const auto twice = grid_rl_integral(grid_rl_integral(f, 0.3), 0.4);
            const auto once = grid_rl_integral(f, 0.7);
            double worst = 0.0;
            for (int i = 1; i <= grid.intervals(); ++i)
                worst = std::max(worst, std::abs(twice.value(i)(0, 0) - once.value(i)(0, 0)));
            return worst;
        });
    }

    void grid_transition()
    {
        const char* suite = "grid transition";
        guarded(suite, "grid Phi against the exact series, N=512, t>=0.05", 1e-3, [&] {
            const Grid grid(0.0, 1.0, 512);
            const auto a = nilpotent_system();
            const auto exact = peano_baker_exact(a, 0.5, 1.0);
            const auto g = peano_baker_grid(SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), 0.5);
            double worst = 0.0;
            for (int i = 1; i <= grid.intervals(); ++i)
                if (grid.node(i) >= 0.05 - 1e-12)
                    worst = std::max(worst, (g.phi.value(i) - exact.eval(grid.node(i))).cwiseAbs().maxCoeff());
            return worst;
        });

        guarded(suite, "grid Phi for A=I against the alpha-exponential, N=512", 1e-3, [&] {
            const Grid grid(0.0, 1.0, 512);
            const auto g = peano_baker_grid(SampledMatrixFunction::constant(grid, Eigen::MatrixXd::Identity(2, 2)), 0.5);
            double worst = 0.0;
            // compare regular factors: Phi(t) t^(1/2)
            for (int i = 1; i <= grid.intervals(); ++i) {
                const double t = grid.node(i);
                worst = std::max(worst, (g.phi.regular(i) - alpha_exp(0.5, Eigen::MatrixXd::Identity(2, 2), t) * std::sqrt(t))
                                            .cwiseAbs()
                                            .maxCoeff());
            }
            return worst;
        });

        if (!opts_.full)
            return;
        guarded(suite, "two-point Phi(t, 0.3) against a grid anchored at 0.3, N=512", 1e-3, [&] {
            const double s = 0.3;
            const Grid grid(s, 1.0, 512);
            const auto a = nilpotent_system();
            const auto g = peano_baker_grid(SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), 0.5);
            double worst = 0.0;
            for (int i = 1; i <= grid.intervals(); ++i)
                if (grid.node(i) >= s + 0.05 - 1e-12)
                    worst = std::max(worst, (g.phi.value(i) - two_point_phi(a, 0.5, s, grid.node(i))).cwiseAbs().maxCoeff());
            return worst;
        });
    }

    void differentiation_under_integral()
    {
        const char* suite = "under integral";
        const double alpha = 0.5;
        struct Case
        {
            const char* name;
            double exponent;
            std::function<double(double, double)> g;
        };
        const Case cases[] = {
            {"phi = 1", 1.0, [](double, double) { return 1.0; }},
            {"phi = (t-s)^(a-1)/Gamma(a)", alpha, [&](double, double) { return 1.0 / g_(alpha); }},
            {"phi = cos(t-s) exp(-s)", 1.0, [](double t, double s) { return std::cos(t - s) * std::exp(-s); }},
        };
        for (const auto& c : cases) {
            double coarse = inf, fine = inf;
            guarded(suite, fmt::format("differentiation under the integral, {}, N=512", c.name), 1e-3, [&] {
                coarse = check_diff_under_integral(TwoPointSample::from_function(Grid(0.0, 1.0, 512), c.exponent, c.g), alpha)
                             .residual;
                return coarse;
            });
            guarded(suite, fmt::format("differentiation under the integral, {}, N=1024 improves", c.name), 0.0, [&] {
                fine = check_diff_under_integral(TwoPointSample::from_function(Grid(0.0, 1.0, 1024), c.exponent, c.g), alpha)
                           .residual;
                // at the rounding floor there is nothing left to improve
                if (fine < coarse || std::max(fine, coarse) <= residual_floor)
                    return 0.0;
                return fine - coarse;
            });
        }
    }

    static constexpr double residual_floor = 1e-11;

    ValidationOptions opts_;
    std::mt19937_64 rng_;
    Gamma g_;
    ValidationReport report_;
};

} // namespace

ValidationReport run_validation(const ValidationOptions& opts)
{
    return Runner(opts).run();
}

std::string format_report(const ValidationReport& report)
{
    std::string out;
    for (const auto& c : report.checks)
        out += fmt::format("{} {:<16} {:<64} residual {:.3e}  tol {:.1e}\n", c.passed() ? "PASS" : "FAIL", c.suite,
                           c.name, c.residual, c.tolerance);
    out += fmt::format("{} checks, {} failed\n", report.checks.size(), report.failures());
    return out;
}

} // namespace fracpb
