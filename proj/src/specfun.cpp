#include "fracpb/specfun.hpp"

#include "fracpb/errors.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <fmt/format.h>

#include <cmath>
#include <limits>

namespace fracpb {

namespace {

// Largest x with a finite Gamma(x) in double precision.
constexpr double max_gamma_arg = 171.6243769563027;

bool is_nonpositive_integer(double x)
{
    return x <= 0.0 && std::floor(x) == x;
}

void require_square(const Eigen::MatrixXd& m, const char* what)
{
    if (m.rows() != m.cols())
        throw dimension_error(fmt::format("{}: matrix must be square, got {}x{}", what, m.rows(), m.cols()));
}

} // namespace

void MlParams::validate() const
{
    if (!(alpha > 0.0 && alpha <= 2.0))
        throw domain_error(fmt::format("Mittag-Leffler alpha must lie in (0, 2], got {}", alpha));
    if (!(beta > 0.0))
        throw domain_error(fmt::format("Mittag-Leffler beta must be positive, got {}", beta));
}

double gamma(double x)
{
    if (std::isnan(x))
        throw domain_error("gamma: NaN argument");
    if (is_nonpositive_integer(x))
        throw pole_error(fmt::format("gamma: pole at {}", x));
    if (x > max_gamma_arg)
        throw overflow_error(fmt::format("gamma: Gamma({}) overflows double", x));
    const double g = std::tgamma(x);
    if (!std::isfinite(g))
        throw overflow_error(fmt::format("gamma: Gamma({}) is not representable", x));
    return g;
}

double log_gamma(double x)
{
    if (is_nonpositive_integer(x))
        throw pole_error(fmt::format("log_gamma: pole at {}", x));
    return boost::math::lgamma(x);
}

double beta(double a, double b)
{
    if (!(a > 0.0 && b > 0.0))
        throw domain_error(fmt::format("beta: arguments must be positive, got ({}, {})", a, b));
    if (a + b < max_gamma_arg)
        return gamma(a) * gamma(b) / gamma(a + b);
    return std::exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b));
}

MlEvaluation mittag_leffler_detailed(const MlParams& p, double z, const SeriesOptions& opts)
{
    p.validate();
    MlEvaluation out;
    if (z == 0.0) {
        out.value = 1.0 / gamma(p.beta);
        out.terms = 1;
        out.abs_sum = std::abs(out.value);
        return out;
    }

    const double log_abs_z = std::log(std::abs(z));
    // |t_k| in log space so that neither z^k nor Gamma(alpha k + beta) overflows.
    auto log_abs_term = [&](int k) { return k * log_abs_z - log_gamma(p.alpha * k + p.beta); };
    auto sign = [&](int k) { return (z < 0.0 && (k % 2 == 1)) ? -1.0 : 1.0; };
    auto ratio = [&](int k) {
        return std::abs(z) * std::exp(log_gamma(p.alpha * k + p.beta) - log_gamma(p.alpha * (k + 1) + p.beta));
    };

    double sum = 0.0;
    double abs_sum = 0.0;
    for (int k = 0; k < opts.max_terms; ++k) {
        const double term = sign(k) * std::exp(log_abs_term(k));
        sum += term;
        abs_sum += std::abs(term);

        const double next = std::exp(log_abs_term(k + 1));
        const double r_next = ratio(k + 1);
        const double scale = std::max(1.0, std::abs(sum));
        if (next < opts.tol * scale && r_next < 1.0) {
            const double tail = next / (1.0 - r_next);
            if (tail < opts.tol * scale) {
                out.value = sum;
                out.terms = k + 1;
                out.tail_bound = tail;
                out.abs_sum = abs_sum;
                return out;
            }
        }
    }
    throw convergence_error(fmt::format("mittag_leffler: no convergence within {} terms (alpha={}, beta={}, z={})",
                                        opts.max_terms, p.alpha, p.beta, z));
}

double mittag_leffler(const MlParams& p, double z, const SeriesOptions& opts)
{
    return mittag_leffler_detailed(p, z, opts).value;
}

Eigen::MatrixXd matrix_ml(const MlParams& p, const Eigen::MatrixXd& m, const SeriesOptions& opts)
{
    p.validate();
    require_square(m, "matrix_ml");
    const auto n = m.rows();

    Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n) / gamma(p.beta);
    Eigen::MatrixXd sum = term;
    int small_in_a_row = 0;
    for (int k = 1; k < opts.max_terms; ++k) {
        const double factor = std::exp(log_gamma(p.alpha * (k - 1) + p.beta) - log_gamma(p.alpha * k + p.beta));
        term = (term * m) * factor;
        sum += term;
        const double scale = std::max(1.0, sum.cwiseAbs().maxCoeff());
        if (term.cwiseAbs().maxCoeff() < opts.tol * scale) {
            if (++small_in_a_row == 3)
                return sum;
        } else {
            small_in_a_row = 0;
        }
        if (!sum.allFinite())
            throw overflow_error("matrix_ml: partial sum overflowed");
    }
    throw convergence_error(fmt::format("matrix_ml: no convergence within {} terms", opts.max_terms));
}

Eigen::MatrixXd alpha_exp(double alpha, const Eigen::MatrixXd& a, double t, const SeriesOptions& opts)
{
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw domain_error(fmt::format("alpha_exp: alpha must lie in (0, 1], got {}", alpha));
    if (!(t > 0.0))
        throw domain_error(fmt::format("alpha_exp: t must be positive, got {}", t));
    require_square(a, "alpha_exp");
    const double t_alpha = std::pow(t, alpha);
    return std::pow(t, alpha - 1.0) * matrix_ml({alpha, alpha}, a * t_alpha, opts);
}

} // namespace fracpb
