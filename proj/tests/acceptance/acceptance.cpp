// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "fracpb/grid.hpp"
#include "fracpb/solver.hpp"
#include "fracpb/specfun.hpp"
#include "fracpb/text_output.hpp"
#include "fracpb/transition.hpp"
#include "fracpb/validation.hpp"
#include "oracles.hpp"

#include <fmt/format.h>
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace fracpb;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome
{
    bool passed;
    std::string detail;
};

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

double max_abs(const Eigen::MatrixXd& m)
{
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::abs(b);
}

Eigen::MatrixXd nilpotent()
{
    Eigen::MatrixXd n(2, 2);
    n << 0, 1, 0, 0;
    return n;
}

MatrixPolynomial nilpotent_ramp()
{
    return MatrixPolynomial(0.0, 2, {{1, nilpotent()}});
}

// coefficient of (gamma) at entry (i, j), 0 if absent
double coefficient(const FracPowerSeries& f, double gamma, int i, int j)
{
    for (const auto& t : f.terms())
        if (std::abs(t.gamma - gamma) <= exponent_merge_tol)
            return t.coeff(i, j);
    return 0.0;
}

Outcome nilpotent_transition()
{
    const auto start = Clock::now();
    double worst = 0.0;
    bool shape = true;
    for (double alpha : {0.3, 0.5, 0.7}) {
        const auto phi = peano_baker_exact(nilpotent_ramp(), alpha, 1.0);
        shape = shape && phi.terms_used == 2 && phi.terminated_exactly && phi.series.terms().size() == 2;
        const auto& t = phi.series.terms();
        shape = shape && std::abs(t[0].gamma - alpha) <= 1e-15 && std::abs(t[1].gamma - (2 * alpha + 1)) <= 1e-15;
        // diagonal 1/G(a), (1,2) entry a/G(2a+1), nothing else
        worst = std::max(worst, rel(coefficient(phi.series, alpha, 0, 0), 1 / oracle::gamma(alpha)));
        worst = std::max(worst, rel(coefficient(phi.series, alpha, 1, 1), 1 / oracle::gamma(alpha)));
        worst = std::max(worst, rel(coefficient(phi.series, 2 * alpha + 1, 0, 1), alpha / oracle::gamma(2 * alpha + 1)));
        shape = shape && coefficient(phi.series, alpha, 0, 1) == 0.0 && coefficient(phi.series, alpha, 1, 0) == 0.0;
        Eigen::MatrixXd upper_only = t[1].coeff;
        upper_only(0, 1) = 0.0;
        shape = shape && max_abs(upper_only) == 0.0;
    }
    const double elapsed = seconds_since(start);
    return {shape && worst <= 1e-12 && elapsed < 1.0,
            fmt::format("alpha in {{0.3, 0.5, 0.7}}: 2 terms, exact termination, max coeff rel err {:.1e}, {:.3f} s", worst,
                        elapsed)};
}

Outcome nilpotent_solution()
{
    double worst = 0.0;
    bool shape = true;
    for (double alpha : {0.3, 0.5, 0.7}) {
        const IvpProblem p{alpha, 0.0, 1.0, nilpotent_ramp(), Eigen::Vector2d(0, 1),
                           FracPowerSeries(0.0, 2, 1, {{1.0, Eigen::Vector2d(1, 0)}})};
        const auto sol = solve_inhomogeneous(p);
        const auto& x = sol.series();
        shape = shape && x.terms().size() == 3;
        worst = std::max(worst, rel(coefficient(x, alpha + 1, 0, 0), 1 / oracle::gamma(alpha + 1)));
        worst = std::max(worst, rel(coefficient(x, 2 * alpha + 1, 0, 0), alpha / oracle::gamma(2 * alpha + 1)));
        worst = std::max(worst, rel(coefficient(x, alpha, 1, 0), 1 / oracle::gamma(alpha)));
        shape = shape && coefficient(x, alpha, 0, 0) == 0.0 && coefficient(x, alpha + 1, 1, 0) == 0.0 &&
                coefficient(x, 2 * alpha + 1, 1, 0) == 0.0;
    }
    const IvpProblem p{0.5, 0.0, 1.0, nilpotent_ramp(), Eigen::Vector2d(0, 1),
                       FracPowerSeries(0.0, 2, 1, {{1.0, Eigen::Vector2d(1, 0)}})};
    const Eigen::VectorXd x = solve_inhomogeneous(p).eval(1.0);
    const double e1 = std::abs(x(0) - (0.5 / oracle::gamma(2.0) + 1 / oracle::gamma(1.5)));
    const double e2 = std::abs(x(1) - 1 / oracle::gamma(0.5));
    return {shape && worst <= 1e-12 && e1 <= 1e-9 && e2 <= 1e-9,
            fmt::format("closed form coeff rel err {:.1e}; x(1) at alpha 0.5: errors {:.1e}, {:.1e}", worst, e1, e2)};
}

Outcome operator_suite()
{
    const auto start = Clock::now();
    ValidationOptions opts;
    opts.full = true;
    const auto report = run_validation(opts);
    const double elapsed = seconds_since(start);
    return {report.passed() && elapsed < 30.0,
            fmt::format("{} checks, {} failed, {:.1f} s", report.checks.size(), report.failures(), elapsed)};
}

MatrixPolynomial random_polynomial(std::mt19937_64& g, Eigen::Index n, int degree, double bound)
{
    std::vector<MatrixPolynomial::Coefficient> c;
    for (int m = 0; m <= degree; ++m)
        c.push_back({m, oracle::random_matrix(g, n, n, bound)});
    return MatrixPolynomial(0.0, n, std::move(c));
}

Outcome telescoping()
{
    auto g = oracle::rng(2024);
    double worst = 0.0;
    int supported = 0, within = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 1 + trial % 3;
        const auto a = random_polynomial(g, n, trial % 3, 1.0);
        const double alpha = oracle::uniform(g, 0.2, 0.9);
        const auto phi = peano_baker_exact(a, alpha, 1.0);
        auto next = phi.terms;
        if (phi.omitted)
            next.push_back(*phi.omitted);
        for (std::size_t k = 0; k + 1 < next.size(); ++k) {
            const auto lhs = rl_derivative(next[k + 1], alpha);
            const auto rhs = mul_poly(a, phi.terms[k]);
            worst = std::max(worst, (lhs - rhs).max_coeff() / std::max(rhs.max_coeff(), 1e-300));
        }
        const auto rep = verify_lemma4(phi, a);
        supported += rep.supported_on_tail();
        within += rep.within_tail();
    }
    return {worst <= 1e-12 && supported == 20 && within == 20,
            fmt::format("20 random A: telescoping max rel err {:.1e}; residual on tail only {}/20, within tail_estimate {}/20",
                        worst, supported, within)};
}

Outcome constant_coefficients()
{
    auto g = oracle::rng(99);
    double worst = 0.0, worst_oracle = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd m = oracle::random_matrix(g, 2, 2, 1.0);
        m *= oracle::uniform(g, 0.1, 1.5) / m.norm();
        for (double alpha : {0.4, 0.8}) {
            const auto phi = peano_baker_exact(MatrixPolynomial::constant(0.0, m), alpha, 1.0);
            for (double t : {0.25, 0.5, 1.0}) {
                worst = std::max(worst, max_abs(phi.eval(t) - alpha_exp(alpha, m, t)));
                const Eigen::MatrixXd ref = std::pow(t, alpha - 1) * oracle::matrix_series(alpha, alpha, m * std::pow(t, alpha), 120);
                worst_oracle = std::max(worst_oracle, max_abs(phi.eval(t) - ref));
            }
        }
    }
    return {worst <= 1e-9 && worst_oracle <= 1e-9,
            fmt::format("10 A x 2 alpha x 3 t: max |Phi - alpha_exp| {:.1e}, vs 50-digit sum {:.1e}", worst, worst_oracle)};
}

Outcome differentiation_under_integral()
{
    const double alpha = 0.5;
    // residuals this small mean the scheme reproduces phi exactly; there is nothing left to converge
    constexpr double rounding_level = 1e-11;
    struct Case
    {
        const char* name;
        double exponent;
        std::function<double(double, double)> g;
    };
    const std::vector<Case> cases{{"phi = 1", 1.0, [](double, double) { return 1.0; }},
                                  {"kernel (t-s)^(a-1)/G(a)", alpha, [&](double, double) { return 1.0 / oracle::gamma(alpha); }}};
    bool ok = true;
    std::string detail;
    for (const auto& c : cases) {
        const double r512 = check_diff_under_integral(TwoPointSample::from_function(Grid(0, 1, 512), c.exponent, c.g), alpha).residual;
        const double r1024 = check_diff_under_integral(TwoPointSample::from_function(Grid(0, 1, 1024), c.exponent, c.g), alpha).residual;
        const bool decreases = r1024 < r512;
        const bool at_rounding = r512 <= rounding_level && r1024 <= rounding_level;
        ok = ok && r512 <= 1e-3 && (decreases || at_rounding);
        detail += fmt::format("{}: N=512 {:.1e}, N=1024 {:.1e}{}; ", c.name, r512, r1024,
                              decreases ? " (decreases)" : at_rounding ? " (rounding level, exact reproduction)" : " (does not decrease)");
    }
    const auto smooth = [](double t, double s) { return std::cos(t - s) * std::exp(-s); };
    const double s256 = check_diff_under_integral(TwoPointSample::from_function(Grid(0, 1, 256), 1.0, smooth), alpha).residual;
    const double s512 = check_diff_under_integral(TwoPointSample::from_function(Grid(0, 1, 512), 1.0, smooth), alpha).residual;
    ok = ok && s512 < s256;
    detail += fmt::format("smooth phi, N=256 -> 512: {:.1e} -> {:.1e}", s256, s512);
    return {ok, detail};
}

Outcome grid_agreement()
{
    const int n = 512;
    double worst = 0.0;
    for (double alpha : {0.3, 0.5, 0.7}) {
        const auto exact = peano_baker_exact(nilpotent_ramp(), alpha, 1.0);
        const Grid grid(0.0, 1.0, n);
        const auto a = nilpotent_ramp();
        const auto approx = peano_baker_grid(SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), alpha);
        for (int i = 1; i <= n; ++i)
            if (grid.node(i) >= 0.05)
                worst = std::max(worst, max_abs(approx.phi.value(i) - exact.eval(grid.node(i))));
    }
    return {worst <= 1e-3, fmt::format("N=512, t >= 0.05, alpha in {{0.3, 0.5, 0.7}}: max error {:.1e}", worst)};
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

int run(const std::string& args, const std::filesystem::path& out)
{
    const std::string cmd = "'" FRACPB_CLI "' " + args + " >'" + out.string() + "' 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

Outcome command_line()
{
    const auto dir = std::filesystem::temp_directory_path();
    const std::string golden = slurp(FRACPB_SOURCE_DIR "/tests/golden/nilpotent_forced_4.csv");
    const std::string solve = "solve '" FRACPB_SOURCE_DIR "/problems/nilpotent_forced.yaml' --samples 4";
    const int s1 = run(solve, dir / "fracpb_accept_1.csv");
    const int s2 = run(solve, dir / "fracpb_accept_2.csv");
    const bool stable = s1 == 0 && s2 == 0 && slurp(dir / "fracpb_accept_1.csv") == golden &&
                        slurp(dir / "fracpb_accept_2.csv") == golden;
    const int v = run("validate --full", dir / "fracpb_accept_validate.txt");
    return {stable && v == 0 && !golden.empty(),
            fmt::format("golden CSV {}, validate --full exit {}", stable ? "byte-identical on two runs" : "MISMATCH", v)};
}

} // namespace

int main()
{
    const auto start = Clock::now();
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"nilpotent transition matrix", nilpotent_transition},
        {"nilpotent forced solution", nilpotent_solution},
        {"operator identity suite", operator_suite},
        {"Peano-Baker telescoping residual", telescoping},
        {"constant coefficients vs alpha-exponential", constant_coefficients},
        {"differentiation under the integral", differentiation_under_integral},
        {"grid vs exact transition", grid_agreement},
        {"command line end to end", command_line},
    };
    int failed = 0, k = 0;
    for (const auto& [name, check] : criteria) {
        ++k;
        Outcome o;
        const auto t = Clock::now();
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.passed;
        std::printf("%s %d %s: %s [%.1f s]\n", o.passed ? "PASS" : "FAIL", k, name, o.detail.c_str(), seconds_since(t));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed in %.1f s\n", k - failed, criteria.size(), seconds_since(start));
    return failed == 0 ? 0 : 1;
}
