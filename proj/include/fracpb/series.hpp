#pragma once

#include <Eigen/Dense>

#include <vector>

namespace fracpb {

/// Tolerance used to decide that two exponents are the same.
inline constexpr double exponent_merge_tol = 1e-12;
/// An exponent this close to a non-positive integer sits on a Gamma pole.
inline constexpr double gamma_pole_tol = 1e-9;

/// One term C * (t - origin)^(gamma - 1).
struct SeriesTerm
{
    double gamma;
    Eigen::MatrixXd coeff;
};

/// Finite generalized power series sum_j C_j (t - origin)^(gamma_j - 1) with matrix coefficients.
///
/// Invariants (established by the constructor): every gamma_j > 0, exponents are
/// strictly increasing after merging equal ones, and no coefficient is identically
/// zero. Column vectors are represented as rows x 1 series.
class FracPowerSeries
{
public:
    FracPowerSeries(double origin, Eigen::Index rows, Eigen::Index cols);
    FracPowerSeries(double origin, Eigen::Index rows, Eigen::Index cols, std::vector<SeriesTerm> terms);

    static FracPowerSeries single(double origin, double gamma, Eigen::MatrixXd coeff);

    double origin() const noexcept { return origin_; }
    Eigen::Index rows() const noexcept { return rows_; }
    Eigen::Index cols() const noexcept { return cols_; }
    const std::vector<SeriesTerm>& terms() const noexcept { return terms_; }
    bool empty() const noexcept { return terms_.empty(); }

    /// Smallest exponent; throws std::logic_error on an empty series.
    double leading_gamma() const;

    /// Value at t. Requires t > origin, or t >= origin when every gamma_j >= 1.
    Eigen::MatrixXd eval(double t) const;

    /// sum_j |C_j|_max * H^max(gamma_j - 1, 0) with H = horizon - origin.
    ///
    /// For a series whose exponents are all >= 1 this bounds the sup-norm over
    /// (origin, horizon]; singular terms contribute their coefficient size.
    double sup_bound(double horizon) const;

    /// Largest coefficient entry in absolute value (0 for the empty series).
    double max_coeff() const;

    FracPowerSeries operator+(const FracPowerSeries& other) const;
    FracPowerSeries operator-(const FracPowerSeries& other) const;
    FracPowerSeries operator*(double s) const;

    /// Every coefficient multiplied on the right by m (Phi * x0).
    FracPowerSeries right_multiply(const Eigen::MatrixXd& m) const;
    /// Every coefficient multiplied on the left by m.
    FracPowerSeries left_multiply(const Eigen::MatrixXd& m) const;
    /// Multiplication by (t - origin)^p, p >= 0.
    FracPowerSeries shifted(double p) const;

private:
    double origin_;
    Eigen::Index rows_;
    Eigen::Index cols_;
    std::vector<SeriesTerm> terms_;
};

inline FracPowerSeries operator*(double s, const FracPowerSeries& f)
{
    return f * s;
}

/// A(t) = sum_m A_m (t - origin)^m with square n x n coefficients.
class MatrixPolynomial
{
public:
    struct Coefficient
    {
        int power;
        Eigen::MatrixXd matrix;
    };

    MatrixPolynomial(double origin, Eigen::Index dim);
    MatrixPolynomial(double origin, Eigen::Index dim, std::vector<Coefficient> coeffs);

    static MatrixPolynomial constant(double origin, const Eigen::MatrixXd& a);

    double origin() const noexcept { return origin_; }
    Eigen::Index dim() const noexcept { return dim_; }
    const std::vector<Coefficient>& coeffs() const noexcept { return coeffs_; }
    bool is_zero() const noexcept { return coeffs_.empty(); }
    int degree() const;

    Eigen::MatrixXd eval(double t) const;

    /// The same function expanded in powers of (t - s).
    MatrixPolynomial reanchored(double s) const;

private:
    double origin_;
    Eigen::Index dim_;
    std::vector<Coefficient> coeffs_;
};

/// Riemann-Liouville integral of order a > 0 anchored at the series origin:
/// (gamma, C) -> (gamma + a, C Gamma(gamma) / Gamma(gamma + a)).
FracPowerSeries rl_integral(const FracPowerSeries& f, double order);

/// Riemann-Liouville derivative of order a in (0, 1):
/// (gamma, C) -> (gamma - a, C Gamma(gamma) / Gamma(gamma - a)).
///
/// A term landing on gamma - a = 0 is annihilated (Gamma pole). Throws domain_error
/// when a term would land on a negative, non-pole exponent.
FracPowerSeries rl_derivative(const FracPowerSeries& f, double order);

/// A(t) f(t); the term pair (m, A_m) x (gamma, C) contributes (gamma + m, A_m C).
FracPowerSeries mul_poly(const MatrixPolynomial& a, const FracPowerSeries& f);

/// Convolution int_{origin}^t K(t - tau) g(tau) dtau where the kernel's own origin is
/// ignored: K is read as a function of (t - tau). Term pairs combine through
/// B(a, b) (t - origin)^(a + b - 1). The result is anchored at g's origin.
FracPowerSeries power_convolve(const FracPowerSeries& kernel, const FracPowerSeries& g);

} // namespace fracpb
