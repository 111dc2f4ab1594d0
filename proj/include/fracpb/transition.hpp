#pragma once

#include "fracpb/grid.hpp"
#include "fracpb/series.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string_view>
#include <vector>

namespace fracpb {

enum class Verdict { converging, inconclusive, diverging };

std::string_view to_string(Verdict v);

/// Heuristic convergence evidence for a Peano-Baker series: norms of the
/// successive terms (including the first omitted one) and their ratios.
struct ConvergenceReport
{
    std::vector<double> term_norms;
    std::vector<double> ratios;
    Verdict verdict = Verdict::inconclusive;
};

struct TransitionOptions
{
    double tol = 1e-12;
    int max_terms = 64;
};

/// Truncated state-transition matrix Phi(t, origin) as a closed-form series.
struct TransitionMatrix
{
    FracPowerSeries series;
    double alpha = 0.0;
    double horizon = 0.0;
    int terms_used = 0;
    bool terminated_exactly = false;
    /// max of the first omitted term's sup bound and that of the residual A * term_K
    /// it leaves in the equation; 0 when the series terminated exactly.
    double tail_estimate = 0.0;
    /// Kept terms J^{k o alpha} A, k = 0 .. terms_used - 1.
    std::vector<FracPowerSeries> terms;
    /// First omitted term (absent when the series terminated exactly).
    std::optional<FracPowerSeries> omitted;
    ConvergenceReport convergence;

    Eigen::MatrixXd eval(double t) const { return series.eval(t); }
};

/// Phi(t, t0) for a polynomial coefficient matrix, built with the exact power rules:
/// term_0 = I (t-t0)^(alpha-1) / Gamma(alpha), term_{k+1} = J^alpha (A term_k).
///
/// Stops when a candidate term is identically zero, when its sup bound over
/// (t0, horizon] drops below tol, or after max_terms kept terms. Throws
/// convergence_error when the cap is reached while the last norm ratio is >= 1.
TransitionMatrix peano_baker_exact(const MatrixPolynomial& a, double alpha, double horizon,
                                   const TransitionOptions& opts = {});

/// The grid counterpart of peano_baker_exact for sampled coefficients.
struct GridTransition
{
    SampledMatrixFunction phi; ///< left exponent alpha
    int terms_used = 0;
    bool terminated_exactly = false;
    double tail_estimate = 0.0;
    ConvergenceReport convergence;
};

GridTransition peano_baker_grid(const SampledMatrixFunction& a, double alpha, const TransitionOptions& opts = {});

/// Outcome of checking D^alpha Phi = A Phi and J^{1-alpha} Phi -> I at the origin.
struct Lemma4Report
{
    /// max coefficient of (D^alpha Phi - A Phi) + A term_K: what remains after the
    /// omitted term's contribution is accounted for; rounding level when the
    /// construction is consistent.
    double kept_residual = 0.0;
    /// sup bound of D^alpha Phi - A Phi.
    double tail_residual = 0.0;
    double tail_estimate = 0.0;
    /// Rounding allowance: 64 eps (|D^alpha Phi| + |A Phi|) in the sup-bound norm.
    double roundoff_floor = 0.0;
    /// max |lim_{t->t0+} J^{1-alpha} Phi(t) - I| (infinite if the limit diverges).
    double initial_condition_error = 0.0;
    FracPowerSeries residual;

    bool supported_on_tail() const { return kept_residual <= roundoff_floor; }
    bool within_tail() const { return tail_residual <= tail_estimate + roundoff_floor; }
};

Lemma4Report verify_lemma4(const TransitionMatrix& phi, const MatrixPolynomial& a);

/// Value of lim_{t -> origin+} f(t): the sum of the gamma = 1 coefficients, zero
/// contributions from gamma > 1 and +inf entries when a singular term is present.
Eigen::MatrixXd limit_at_origin(const FracPowerSeries& f);

/// Phi(., s) as a series anchored at s. A is re-expanded in powers of (t - s).
TransitionMatrix two_point_series(const MatrixPolynomial& a, double alpha, double s, double horizon,
                                  const TransitionOptions& opts = {});

/// Phi(t, s) for t > s.
Eigen::MatrixXd two_point_phi(const MatrixPolynomial& a, double alpha, double s, double t,
                              const TransitionOptions& opts = {});

/// Phi(t, s) for all t0 <= s < t <= horizon at once:
///   sum C_{gamma,p} (s - t0)^p (t - s)^(gamma - 1).
/// Built with the same recursion as two_point_series, keeping the dependence on
/// the anchor symbolic.
class TransitionKernel
{
public:
    struct Term
    {
        double gamma;
        int anchor_power;
        Eigen::MatrixXd coeff;
    };

    TransitionKernel(double origin, Eigen::Index dim, std::vector<Term> terms);

    double origin() const noexcept { return origin_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::vector<Term>& terms() const noexcept { return terms_; }
    bool empty() const noexcept { return terms_.empty(); }

    Eigen::MatrixXd eval(double t, double s) const;

    /// Phi(., s) as a series anchored at s.
    FracPowerSeries at_anchor(double s) const;

    /// int_{origin}^t Phi(t, tau) g(tau) dtau for g anchored at the kernel origin.
    FracPowerSeries convolve(const FracPowerSeries& g) const;

    /// sum |C|_max sup (s - t0)^p (t - s)^q over t0 <= s <= t <= horizon, q = max(gamma - 1, 0):
    /// each monomial at its own maximizer, H^(p+q) p^p q^q / (p+q)^(p+q).
    double sup_bound(double horizon) const;

    TransitionKernel operator+(const TransitionKernel& other) const;

private:
    double origin_;
    Eigen::Index dim_;
    std::vector<Term> terms_;
};

struct KernelExpansion
{
    TransitionKernel kernel;
    int terms_used = 0;
    bool terminated_exactly = false;
    double tail_estimate = 0.0;
    /// A(t) times the last kept term: the integrand of the residual left by truncation.
    TransitionKernel residual_generator;
    ConvergenceReport convergence;
};

KernelExpansion transition_kernel(const MatrixPolynomial& a, double alpha, double horizon,
                                  const TransitionOptions& opts = {});

} // namespace fracpb
