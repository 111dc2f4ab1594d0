#pragma once

#include "fracpb/grid.hpp"
#include "fracpb/series.hpp"
#include "fracpb/transition.hpp"

#include <Eigen/Dense>

#include <optional>
#include <variant>
#include <vector>

namespace fracpb {

using CoefficientSource = std::variant<MatrixPolynomial, SampledMatrixFunction>;
using InputSource = std::variant<FracPowerSeries, SampledMatrixFunction>;

/// D^alpha x = A(t) x + u(t) on (t0, T] with the weighted initial condition
/// J^{1-alpha} x |_{t = t0} = x0.
///
/// x0 is not x(t0): for x0 != 0 the solution behaves like (t - t0)^(alpha - 1)
/// and is unbounded at t0.
struct IvpProblem
{
    double alpha;
    double t0;
    double horizon;
    CoefficientSource a;
    Eigen::VectorXd x0;
    std::optional<InputSource> u;

    Eigen::Index dim() const;
    /// Throws domain_error / dimension_error on inconsistent data.
    void validate() const;
};

struct SolveOptions
{
    TransitionOptions transition;
    /// Force the grid path with this many intervals (polynomial A is sampled).
    std::optional<int> grid_intervals;
};

enum class SolutionPath { exact, grid };

struct TransitionSummary
{
    int terms_used = 0;
    bool terminated_exactly = false;
    double tail_estimate = 0.0;
    ConvergenceReport convergence;
};

struct Solution
{
    std::variant<FracPowerSeries, SampledMatrixFunction> representation;
    SolutionPath path;
    TransitionSummary transition;
    /// Present when an input term was integrated against Phi(t, tau).
    std::optional<TransitionSummary> kernel;
    /// Bound on the equation residual left by truncating the series.
    double residual_bound = 0.0;

    /// x(t) for t in (t0, T]; the grid path interpolates the regular factor.
    Eigen::VectorXd eval(double t) const;
    const FracPowerSeries& series() const { return std::get<FracPowerSeries>(representation); }
    const SampledMatrixFunction& samples() const { return std::get<SampledMatrixFunction>(representation); }
};

/// x(t) = Phi(t, t0) x0. Throws std::invalid_argument when the problem has an input.
Solution solve_homogeneous(const IvpProblem& p, const SolveOptions& opts = {});

/// x(t) = Phi(t, t0) x0 + int_{t0}^t Phi(t, tau) u(tau) dtau.
///
/// Exact path (polynomial A, series u with exponents >= 1): the input is convolved
/// with the two-point transition kernel term by term through Beta integrals.
/// Grid path: the integral is accumulated as the Neumann series
/// sum_k (J^alpha A)^k J^alpha u of the same recursion.
Solution solve_inhomogeneous(const IvpProblem& p, const SolveOptions& opts = {});

/// Dispatches on the presence of u.
Solution solve(const IvpProblem& p, const SolveOptions& opts = {});

struct ResidualReport
{
    SolutionPath path;
    /// Exact path: sup bound of D^alpha x - A x - u. Grid path: max over interior nodes of
    /// (t - t0)^(1 - sigma) |D^alpha x - A x - u|, sigma the left exponent of x (capped at 1).
    double equation_residual = 0.0;
    /// max |lim_{t->t0+} J^{1-alpha} x - x0|.
    double initial_condition_error = 0.0;
    double residual_bound = 0.0;
    /// Grid path: the weighted residual per node (NaN at both ends). The first few nodes
    /// carry an O(1) layer when the regular factor has fractional powers of (t - t0):
    /// the piecewise-linear product rule loses its order there.
    std::vector<double> node_residuals;
    /// Rounding allowance for the exact path (0 on the grid path).
    double roundoff_floor = 0.0;
    /// Exact path only: the residual series itself.
    std::optional<FracPowerSeries> residual;
};

ResidualReport residual_check(const IvpProblem& p, const Solution& sol);

} // namespace fracpb
