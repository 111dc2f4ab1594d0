// fracpb: solve linear fractional systems D^alpha x = A(t) x + u(t) from problem files.

#include "fracpb/errors.hpp"
#include "fracpb/problem_file.hpp"
#include "fracpb/solver.hpp"
#include "fracpb/specfun.hpp"
#include "fracpb/text_output.hpp"
#include "fracpb/transition.hpp"
#include "fracpb/validation.hpp"

#include <CLI11.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

enum Exit { ok = 0, input_error = 1, not_converged = 2, validation_failed = 3 };

std::optional<double> env_tolerance()
{
    const char* raw = std::getenv("FRAC_TOL");
    if (raw == nullptr || *raw == '\0')
        return std::nullopt;
    char* end = nullptr;
    const double v = std::strtod(raw, &end);
    if (*end != '\0' || !(v > 0.0))
        throw fracpb::domain_error(fmt::format("FRAC_TOL must be a positive number, got '{}'", raw));
    return v;
}

// flag > problem file > FRAC_TOL > built-in default
fracpb::TransitionOptions transition_options(const fracpb::ProblemFile& file, std::optional<double> tol_flag)
{
    fracpb::TransitionOptions opts;
    if (tol_flag)
        opts.tol = *tol_flag;
    else if (file.tol)
        opts.tol = *file.tol;
    else if (auto env = env_tolerance())
        opts.tol = *env;
    if (file.max_terms)
        opts.max_terms = *file.max_terms;
    return opts;
}

void print_summary(const char* what, const fracpb::TransitionSummary& s)
{
    std::cerr << fmt::format("{}: terms_used={} terminated_exactly={} tail_estimate={:.3e} verdict={}\n", what,
                             s.terms_used, s.terminated_exactly ? "yes" : "no", s.tail_estimate,
                             fracpb::to_string(s.convergence.verdict));
}

struct SolveArgs
{
    std::string file;
    int samples = 10;
    std::string out;
    bool closed_form = false;
    std::optional<int> grid;
    bool include_origin = false;
    std::optional<double> tol;
};

int cmd_solve(const SolveArgs& args)
{
    const auto file = fracpb::load_problem(args.file);
    fracpb::SolveOptions opts;
    opts.transition = transition_options(file, args.tol);
    opts.grid_intervals = args.grid ? args.grid : file.grid;

    const auto& p = file.problem;
    const auto sol = fracpb::solve(p, opts);
    print_summary("transition", sol.transition);
    if (sol.kernel)
        print_summary("forced response", *sol.kernel);

    const auto csv = fracpb::trajectory_csv(sol, p.t0, p.horizon, args.samples, args.include_origin);
    if (args.out.empty()) {
        std::cout << csv;
    } else {
        std::ofstream out(args.out, std::ios::binary);
        out << csv;
        if (!out)
            throw fracpb::domain_error(fmt::format("cannot write '{}'", args.out));
    }
    if (args.closed_form) {
        if (sol.path != fracpb::SolutionPath::exact)
            throw fracpb::domain_error("--closed-form needs the exact path (polynomial A, no --grid)");
        if (args.out.empty())
            std::cout << '\n';
        std::cout << fracpb::closed_form_text(sol.series());
    }
    return ok;
}

struct PhiArgs
{
    std::string file;
    double t = 0.0;
    std::optional<double> s;
    std::optional<int> grid;
    std::optional<double> tol;
};

int cmd_phi(const PhiArgs& args)
{
    const auto file = fracpb::load_problem(args.file);
    const auto& p = file.problem;
    const double s = args.s.value_or(p.t0);
    if (s < p.t0)
        throw fracpb::domain_error(fmt::format("s = {} precedes t0 = {}", s, p.t0));
    if (!(args.t > s) || args.t > p.horizon)
        throw fracpb::domain_error(fmt::format("need s < t <= horizon, got s = {}, t = {}", s, args.t));
    const auto opts = transition_options(file, args.tol);
    const auto& a = std::get<fracpb::MatrixPolynomial>(p.a);

    Eigen::MatrixXd value;
    fracpb::TransitionSummary summary;
    const auto grid_n = args.grid ? args.grid : file.grid;
    if (grid_n) {
        const fracpb::Grid grid(s, p.horizon, *grid_n);
        const auto g = fracpb::peano_baker_grid(
            fracpb::SampledMatrixFunction::from_function(grid, [&](double t) { return a.eval(t); }), p.alpha, opts);
        value = g.phi.interpolate(args.t);
        summary = {g.terms_used, g.terminated_exactly, g.tail_estimate, g.convergence};
    } else {
        const auto phi = fracpb::two_point_series(a, p.alpha, s, p.horizon, opts);
        value = phi.eval(args.t);
        summary = {phi.terms_used, phi.terminated_exactly, phi.tail_estimate, phi.convergence};
    }
    std::cout << fracpb::format_matrix(value);
    std::cout << fmt::format("terms_used: {}\nterminated_exactly: {}\ntail_estimate: {}\n", summary.terms_used,
                             summary.terminated_exactly ? "yes" : "no", fracpb::format_number(summary.tail_estimate));
    std::cout << fmt::format("leading behaviour: (t - s)^{} (singular as t -> s)\n",
                             fracpb::format_number(p.alpha - 1.0));
    return ok;
}

int cmd_validate(bool full, bool corrupt_gamma)
{
    fracpb::ValidationOptions opts;
    opts.full = full;
    if (corrupt_gamma)
        opts.reference_gamma = [](double x) { return boost::math::tgamma(x) * (1.0 + 1e-6); };
    const auto report = fracpb::run_validation(opts);
    std::cout << fracpb::format_report(report);
    return report.passed() ? ok : validation_failed;
}

int cmd_ml(double alpha, double beta, double z, std::optional<double> tol)
{
    fracpb::SeriesOptions opts;
    if (tol)
        opts.tol = *tol;
    else if (auto env = env_tolerance())
        opts.tol = *env;
    const fracpb::MlParams params{alpha, beta};
    params.validate();
    std::cout << fmt::format("{:.16g}\n", fracpb::mittag_leffler(params, z, opts));
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Solve linear fractional-order systems D^alpha x = A(t) x + u(t) (Riemann-Liouville)"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* solve = app.add_subcommand("solve", "Solve the problem in a file and write the trajectory as CSV");
    solve->add_option("file", solve_args.file, "Problem file")->required();
    solve->add_option("--samples", solve_args.samples, "Equally spaced sample times in (t0, T]")
        ->check(CLI::PositiveNumber);
    solve->add_option("--out", solve_args.out, "CSV destination (default: stdout)");
    solve->add_flag("--closed-form", solve_args.closed_form, "Also print the exact series");
    solve->add_option("--grid", solve_args.grid, "Use the grid path with N intervals")->check(CLI::Range(4, 1 << 20));
    solve->add_flag("--include-origin", solve_args.include_origin,
                    "Add a row at t0 holding the regular factor and an exponent column");
    solve->add_option("--tol", solve_args.tol, "Series truncation tolerance")->check(CLI::PositiveNumber);

    PhiArgs phi_args;
    auto* phi = app.add_subcommand("phi", "Print the state-transition matrix Phi(t, s)");
    phi->add_option("file", phi_args.file, "Problem file")->required();
    phi->add_option("--t", phi_args.t, "Evaluation time")->required();
    phi->add_option("--s", phi_args.s, "Anchor (default t0)");
    phi->add_option("--grid", phi_args.grid, "Use the grid path with N intervals")->check(CLI::Range(4, 1 << 20));
    phi->add_option("--tol", phi_args.tol, "Series truncation tolerance")->check(CLI::PositiveNumber);

    bool full = false, corrupt_gamma = false;
    auto* validate = app.add_subcommand("validate", "Run the operator-identity suites");
    validate->add_flag("--full", full, "Include the slower checks");
    validate->add_flag("--corrupt-gamma", corrupt_gamma, "Negative control: perturb the reference Gamma")->group("");

    double ml_alpha = 0.0, ml_beta = 0.0, ml_z = 0.0;
    std::optional<double> ml_tol;
    auto* ml = app.add_subcommand("ml", "Evaluate the Mittag-Leffler function E_{alpha,beta}(z)");
    ml->add_option("alpha", ml_alpha)->required();
    ml->add_option("beta", ml_beta)->required();
    ml->add_option("z", ml_z)->required();
    ml->add_option("--tol", ml_tol, "Series tolerance")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? ok : input_error;
    }

    try {
        if (*solve)
            return cmd_solve(solve_args);
        if (*phi)
            return cmd_phi(phi_args);
        if (*validate)
            return cmd_validate(full, corrupt_gamma);
        return cmd_ml(ml_alpha, ml_beta, ml_z, ml_tol);
    } catch (const fracpb::convergence_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        if (!e.term_norms().empty()) {
            std::cerr << "term norms:";
            for (double v : e.term_norms())
                std::cerr << ' ' << fmt::format("{:.3e}", v);
            std::cerr << '\n';
        }
        return not_converged;
    } catch (const fracpb::parse_error& e) {
        std::cerr << (*solve ? solve_args.file : phi_args.file) << ": error: " << e.what() << '\n';
        return input_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return input_error;
    }
}
