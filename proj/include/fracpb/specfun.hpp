#pragma once

#include <Eigen/Dense>

namespace fracpb {

/// Parameters (alpha, beta) of the two-parameter Mittag-Leffler function E_{alpha,beta}.
struct MlParams
{
    double alpha;
    double beta;

    /// Throws domain_error unless 0 < alpha <= 2 and beta > 0.
    void validate() const;
};

/// Stopping controls shared by the scalar and matrix series evaluators.
struct SeriesOptions
{
    double tol = 1e-12;
    int max_terms = 1000;
};

/// Gamma function. Throws pole_error at 0, -1, -2, ... and overflow_error when the
/// result is not a finite double.
double gamma(double x);

/// log|Gamma(x)|, thread safe (does not touch the global signgam).
double log_gamma(double x);

/// Complete beta function B(a, b) = Gamma(a)Gamma(b)/Gamma(a+b) for a, b > 0.
double beta(double a, double b);

/// Result of a scalar Mittag-Leffler summation together with its stopping data.
struct MlEvaluation
{
    double value = 0.0;
    int terms = 0;           ///< number of summed terms
    double tail_bound = 0.0; ///< rigorous bound on the omitted remainder
    double abs_sum = 0.0;    ///< sum of |term|, drives the rounding-error estimate
};

/// E_{alpha,beta}(z) = sum_k z^k / Gamma(alpha k + beta) by direct Taylor summation.
///
/// The sum stops once the next term and the geometric tail bound
/// |t_{k+1}| / (1 - r_{k+1}) are both below tol * max(1, |partial sum|). The term
/// ratio r_k = |z| Gamma(alpha k + beta) / Gamma(alpha k + alpha + beta) is
/// decreasing in k (log-convexity of Gamma), so the bound is a true upper bound
/// on the remainder once r < 1. Throws convergence_error when max_terms is hit.
///
/// Large negative z loses accuracy to cancellation; the abs_sum field of
/// mittag_leffler_detailed exposes how much.
MlEvaluation mittag_leffler_detailed(const MlParams& p, double z, const SeriesOptions& opts = {});

double mittag_leffler(const MlParams& p, double z, const SeriesOptions& opts = {});

/// Matrix Mittag-Leffler function sum_k M^k / Gamma(alpha k + beta).
///
/// Powers are accumulated as a running product (no eigendecomposition, so defective
/// matrices are fine). Stops when the max-norm of the running term stays below
/// tol * max(1, |S|_max) for three consecutive terms.
Eigen::MatrixXd matrix_ml(const MlParams& p, const Eigen::MatrixXd& m, const SeriesOptions& opts = {});

/// Matrix alpha-exponential e_alpha^{tA} = t^{alpha-1} E_{alpha,alpha}(A t^alpha), alpha in (0, 1].
/// Throws domain_error for t <= 0.
Eigen::MatrixXd alpha_exp(double alpha, const Eigen::MatrixXd& a, double t, const SeriesOptions& opts = {});

} // namespace fracpb
