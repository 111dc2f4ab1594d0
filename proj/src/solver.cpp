#include "fracpb/solver.hpp"

#include "fracpb/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fracpb {

namespace {

bool close(double a, double b)
{
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

bool same_grid(const Grid& a, const Grid& b)
{
    return a.intervals() == b.intervals() && close(a.t0(), b.t0()) && close(a.t_end(), b.t_end());
}

bool uses_exact_path(const IvpProblem& p, const SolveOptions& opts)
{
    if (std::holds_alternative<SampledMatrixFunction>(p.a))
        return false;
    if (opts.grid_intervals)
        return false;
    if (p.u && std::holds_alternative<SampledMatrixFunction>(*p.u))
        throw std::invalid_argument(
            "sampled input with a polynomial coefficient matrix needs the grid path (set grid_intervals)");
    return true;
}

Grid grid_for(const IvpProblem& p, const SolveOptions& opts)
{
    if (const auto* s = std::get_if<SampledMatrixFunction>(&p.a)) {
        if (opts.grid_intervals && *opts.grid_intervals != s->grid().intervals())
            throw std::invalid_argument("grid_intervals disagrees with the sampled coefficient grid");
        return s->grid();
    }
    return Grid(p.t0, p.horizon, opts.grid_intervals.value_or(512));
}

SampledMatrixFunction sampled_coefficients(const IvpProblem& p, const Grid& grid)
{
    if (const auto* s = std::get_if<SampledMatrixFunction>(&p.a))
        return *s;
    const auto& poly = std::get<MatrixPolynomial>(p.a);
    return SampledMatrixFunction::from_function(grid, [&](double t) { return poly.eval(t); });
}

SampledMatrixFunction sampled_input(const InputSource& u, const Grid& grid)
{
    if (const auto* s = std::get_if<SampledMatrixFunction>(&u)) {
        if (!same_grid(s->grid(), grid))
            throw dimension_error("sampled input lives on a different grid than the coefficients");
        return *s;
    }
    const auto& series = std::get<FracPowerSeries>(u);
    return SampledMatrixFunction::from_function(grid, [&](double t) { return series.eval(t); });
}

Eigen::MatrixXd coefficient_at(const IvpProblem& p, int i, const Grid& grid)
{
    if (const auto* s = std::get_if<SampledMatrixFunction>(&p.a))
        return s->value(i);
    return std::get<MatrixPolynomial>(p.a).eval(grid.node(i));
}

Eigen::MatrixXd input_at(const InputSource& u, int i, const Grid& grid)
{
    if (const auto* s = std::get_if<SampledMatrixFunction>(&u))
        return s->value(i);
    return std::get<FracPowerSeries>(u).eval(grid.node(i));
}

TransitionSummary summarize(const TransitionMatrix& phi)
{
    return {phi.terms_used, phi.terminated_exactly, phi.tail_estimate, phi.convergence};
}

TransitionSummary summarize(const GridTransition& phi)
{
    return {phi.terms_used, phi.terminated_exactly, phi.tail_estimate, phi.convergence};
}

// sum_k (J^alpha A)^k J^alpha u on the grid, with the Peano-Baker stopping rule.
std::pair<SampledMatrixFunction, TransitionSummary> grid_forced_response(const SampledMatrixFunction& a,
                                                                         const SampledMatrixFunction& u,
                                                                         double alpha, const TransitionOptions& opts)
{
    auto is_zero = [](const SampledMatrixFunction& f) {
        return std::all_of(f.regular().begin(), f.regular().end(), [](const auto& m) { return m.isZero(0.0); });
    };
    TransitionSummary summary;
    SampledMatrixFunction term = grid_rl_integral(u, alpha);
    SampledMatrixFunction sum = term;
    summary.convergence.term_norms.push_back(term.sup_norm());
    summary.terms_used = 1;
    if (is_zero(term)) {
        summary.terminated_exactly = true;
        summary.convergence.verdict = Verdict::converging;
        return {sum, summary};
    }
    for (;;) {
        auto next = grid_rl_integral(multiply(a, term), alpha);
        if (is_zero(next)) {
            summary.terminated_exactly = true;
            break;
        }
        const double norm = next.sup_norm();
        auto& norms = summary.convergence.term_norms;
        norms.push_back(norm);
        summary.convergence.ratios.push_back(norms[norms.size() - 2] > 0.0 ? norm / norms[norms.size() - 2]
                                                                          : std::numeric_limits<double>::infinity());
        if (norm < opts.tol || summary.terms_used == opts.max_terms) {
            summary.tail_estimate = std::max(norm, multiply(a, term).sup_norm());
            if (norm >= opts.tol && summary.convergence.ratios.back() >= 1.0)
                throw convergence_error(fmt::format("grid forced response: term cap {} reached", opts.max_terms),
                                        norms);
            break;
        }
        sum = sum + next;
        term = std::move(next);
        ++summary.terms_used;
    }
    const auto& r = summary.convergence.ratios;
    if (summary.terminated_exactly ||
        (r.size() >= 3 && std::all_of(r.end() - 3, r.end(), [](double x) { return x < 1.0; })))
        summary.convergence.verdict = Verdict::converging;
    else if (!r.empty() && r.back() >= 1.0)
        summary.convergence.verdict = Verdict::diverging;
    return {sum, summary};
}

} // namespace

Eigen::Index IvpProblem::dim() const
{
    if (const auto* poly = std::get_if<MatrixPolynomial>(&a))
        return poly->dim();
    return std::get<SampledMatrixFunction>(a).rows();
}

void IvpProblem::validate() const
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw domain_error(fmt::format("alpha must lie in (0, 1), got {}", alpha));
    if (!(std::isfinite(t0) && std::isfinite(horizon) && horizon > t0))
        throw domain_error(fmt::format("horizon {} must exceed t0 {}", horizon, t0));
    const auto n = dim();
    if (const auto* poly = std::get_if<MatrixPolynomial>(&a)) {
        if (!close(poly->origin(), t0))
            throw dimension_error("coefficient polynomial must be expanded about t0");
    } else {
        const auto& s = std::get<SampledMatrixFunction>(a);
        if (s.rows() != s.cols())
            throw dimension_error("sampled coefficient matrix must be square");
        if (!close(s.grid().t0(), t0) || !close(s.grid().t_end(), horizon))
            throw dimension_error("sampled coefficient grid must span [t0, horizon]");
        if (s.left_exponent() != 1.0)
            throw domain_error("sampled coefficient matrix must be regular");
    }
    if (x0.size() != n)
        throw dimension_error(fmt::format("x0 has {} entries, expected {}", x0.size(), n));
    if (!x0.allFinite())
        throw domain_error("x0 must be finite");
    if (!u)
        return;
    if (const auto* series = std::get_if<FracPowerSeries>(&*u)) {
        if (series->rows() != n || series->cols() != 1)
            throw dimension_error(fmt::format("input series must be {}x1", n));
        if (!close(series->origin(), t0))
            throw dimension_error("input series must be anchored at t0");
        if (!series->empty() && series->leading_gamma() < 1.0 - exponent_merge_tol)
            throw domain_error("input must be continuous on [t0, T]: every exponent must be >= 1");
    } else {
        const auto& s = std::get<SampledMatrixFunction>(*u);
        if (s.rows() != n || s.cols() != 1)
            throw dimension_error(fmt::format("sampled input must be {}x1", n));
        if (s.left_exponent() != 1.0)
            throw domain_error("sampled input must be regular (continuous)");
    }
}

Eigen::VectorXd Solution::eval(double t) const
{
    if (const auto* s = std::get_if<FracPowerSeries>(&representation))
        return s->eval(t).col(0);
    return std::get<SampledMatrixFunction>(representation).interpolate(t).col(0);
}

Solution solve_homogeneous(const IvpProblem& p, const SolveOptions& opts)
{
    p.validate();
    if (p.u)
        throw std::invalid_argument("solve_homogeneous: problem has an input term; use solve_inhomogeneous");
    const double n = static_cast<double>(p.dim());
    const double x0_norm = p.x0.cwiseAbs().maxCoeff();
    const Eigen::MatrixXd x0 = p.x0;

    if (uses_exact_path(p, opts)) {
        auto phi = peano_baker_exact(std::get<MatrixPolynomial>(p.a), p.alpha, p.horizon, opts.transition);
        Solution sol{phi.series.right_multiply(x0), SolutionPath::exact, summarize(phi)};
        sol.residual_bound = n * phi.tail_estimate * x0_norm;
        return sol;
    }
    const Grid grid = grid_for(p, opts);
    auto phi = peano_baker_grid(sampled_coefficients(p, grid), p.alpha, opts.transition);
    Solution sol{phi.phi.right_multiply(x0), SolutionPath::grid, summarize(phi)};
    sol.residual_bound = n * phi.tail_estimate * x0_norm;
    return sol;
}

Solution solve_inhomogeneous(const IvpProblem& p, const SolveOptions& opts)
{
    p.validate();
    if (!p.u)
        throw std::invalid_argument("solve_inhomogeneous: problem has no input term");
    const double n = static_cast<double>(p.dim());
    const double x0_norm = p.x0.cwiseAbs().maxCoeff();
    const Eigen::MatrixXd x0 = p.x0;

    if (uses_exact_path(p, opts)) {
        const auto& a = std::get<MatrixPolynomial>(p.a);
        const auto& u = std::get<FracPowerSeries>(*p.u);
        auto phi = peano_baker_exact(a, p.alpha, p.horizon, opts.transition);
        auto kernel = transition_kernel(a, p.alpha, p.horizon, opts.transition);
        Solution sol{phi.series.right_multiply(x0) + kernel.kernel.convolve(u), SolutionPath::exact,
                     summarize(phi)};
        sol.kernel = TransitionSummary{kernel.terms_used, kernel.terminated_exactly, kernel.tail_estimate,
                                       kernel.convergence};
        sol.residual_bound = n * phi.tail_estimate * x0_norm;
        if (!kernel.terminated_exactly)
            sol.residual_bound += kernel.residual_generator.convolve(u).sup_bound(p.horizon);
        return sol;
    }

    const Grid grid = grid_for(p, opts);
    const auto a = sampled_coefficients(p, grid);
    auto phi = peano_baker_grid(a, p.alpha, opts.transition);
    auto [forced, summary] = grid_forced_response(a, sampled_input(*p.u, grid), p.alpha, opts.transition);
    Solution sol{phi.phi.right_multiply(x0) + forced, SolutionPath::grid, summarize(phi)};
    sol.kernel = summary;
    sol.residual_bound = n * (phi.tail_estimate * x0_norm + summary.tail_estimate);
    return sol;
}

Solution solve(const IvpProblem& p, const SolveOptions& opts)
{
    return p.u ? solve_inhomogeneous(p, opts) : solve_homogeneous(p, opts);
}

ResidualReport residual_check(const IvpProblem& p, const Solution& sol)
{
    p.validate();
    ResidualReport rep{sol.path};
    rep.residual_bound = sol.residual_bound;

    if (sol.path == SolutionPath::exact) {
        const auto* a = std::get_if<MatrixPolynomial>(&p.a);
        if (a == nullptr)
            throw std::invalid_argument("residual_check: exact solution needs a polynomial coefficient matrix");
        const auto& x = sol.series();
        const double h = p.horizon;
        const auto dx = rl_derivative(x, p.alpha);
        const auto ax = mul_poly(*a, x);
        FracPowerSeries r = dx - ax;
        double scale = dx.sup_bound(h) + ax.sup_bound(h);
        if (p.u) {
            const auto* u = std::get_if<FracPowerSeries>(&*p.u);
            if (u == nullptr)
                throw std::invalid_argument("residual_check: exact solution needs a series input");
            r = r - *u;
            scale += u->sup_bound(h);
        }
        rep.equation_residual = r.sup_bound(h);
        rep.roundoff_floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
        const Eigen::MatrixXd start = limit_at_origin(rl_integral(x, 1.0 - p.alpha));
        rep.initial_condition_error = (start.col(0) - p.x0).cwiseAbs().maxCoeff();
        rep.residual = std::move(r);
        return rep;
    }

    const auto& x = sol.samples();
    const Grid& grid = x.grid();
    const auto dx = grid_rl_derivative(x, p.alpha);
    // on the scale of the regular factor, as the samples are stored
    const double weight_exponent = 1.0 - std::min(x.left_exponent(), 1.0);
    rep.node_residuals.assign(static_cast<std::size_t>(grid.intervals()) + 1, std::numeric_limits<double>::quiet_NaN());
    for (int i = 1; i < grid.intervals(); ++i) {
        Eigen::MatrixXd r = dx.value(i) - coefficient_at(p, i, grid) * x.value(i);
        if (p.u)
            r -= input_at(*p.u, i, grid);
        const double w = std::pow(grid.node(i) - grid.t0(), weight_exponent);
        rep.node_residuals[static_cast<std::size_t>(i)] = w * r.cwiseAbs().maxCoeff();
        rep.equation_residual = std::max(rep.equation_residual, rep.node_residuals[static_cast<std::size_t>(i)]);
    }
    const auto weighted = grid_rl_integral(x, 1.0 - p.alpha);
    // left exponent of the weighted integral is alpha + (1 - alpha) = 1: regular(0) is the value at t0
    rep.initial_condition_error = (weighted.regular(0).col(0) - p.x0).cwiseAbs().maxCoeff();
    return rep;
}

} // namespace fracpb
