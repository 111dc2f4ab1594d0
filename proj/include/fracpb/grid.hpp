#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

namespace fracpb {

/// Uniform grid t_i = t0 + i h, h = (T - t0) / N, N >= 4.
class Grid
{
public:
    Grid(double t0, double t_end, int intervals);

    double t0() const noexcept { return t0_; }
    double t_end() const noexcept { return t_end_; }
    int intervals() const noexcept { return n_; }
    double step() const noexcept { return (t_end_ - t0_) / n_; }
    double node(int i) const noexcept { return i == n_ ? t_end_ : t0_ + i * step(); }

private:
    double t0_;
    double t_end_;
    int n_;
};

/// Samples of a matrix function f on a grid.
///
/// f(t) = (t - t0)^(left_exponent - 1) * g(t) where g (the regular factor) is what
/// is stored; left_exponent = 1 means plain samples. Keeping the singular power
/// explicit means no sample is ever infinite.
class SampledMatrixFunction
{
public:
    SampledMatrixFunction(Grid grid, std::vector<Eigen::MatrixXd> regular, double left_exponent = 1.0);

    static SampledMatrixFunction from_function(const Grid& grid, const std::function<Eigen::MatrixXd(double)>& f);
    static SampledMatrixFunction constant(const Grid& grid, const Eigen::MatrixXd& value, double left_exponent = 1.0);

    const Grid& grid() const noexcept { return grid_; }
    Eigen::Index rows() const noexcept { return regular_.front().rows(); }
    Eigen::Index cols() const noexcept { return regular_.front().cols(); }
    double left_exponent() const noexcept { return left_exponent_; }
    const std::vector<Eigen::MatrixXd>& regular() const noexcept { return regular_; }
    const Eigen::MatrixXd& regular(int i) const { return regular_.at(static_cast<std::size_t>(i)); }

    /// False for results whose left endpoint is not computed (grid derivatives).
    bool left_defined() const noexcept { return left_defined_; }
    void mark_left_undefined();

    /// f(t_i). Throws domain_error at i = 0 when the left factor is singular or undefined.
    Eigen::MatrixXd value(int i) const;

    /// Linear interpolation of the regular factor, times the singular factor. t in (t0, T].
    Eigen::MatrixXd interpolate(double t) const;

    /// max over i >= 1 of |g_i|_max * (t_i - t0)^max(left_exponent - 1, 0).
    double sup_norm() const;

    /// Same function re-expressed with a smaller left exponent.
    SampledMatrixFunction with_left_exponent(double sigma) const;

    SampledMatrixFunction operator+(const SampledMatrixFunction& other) const;
    SampledMatrixFunction operator-(const SampledMatrixFunction& other) const;
    SampledMatrixFunction operator*(double s) const;
    SampledMatrixFunction right_multiply(const Eigen::MatrixXd& m) const;

private:
    Grid grid_;
    std::vector<Eigen::MatrixXd> regular_;
    double left_exponent_;
    bool left_defined_ = true;
};

/// Pointwise product a(t_i) f(t_i); a must be regular (left_exponent 1).
SampledMatrixFunction multiply(const SampledMatrixFunction& a, const SampledMatrixFunction& f);

/// Product-integration Riemann-Liouville integral of order a > 0.
///
/// The regular factor is interpolated piecewise linearly; the weight
/// (t_i - tau)^(a-1) (tau - t0)^(sigma-1) is integrated exactly through incomplete
/// beta moments. The result carries left exponent sigma + a. Second order in h
/// for a smooth regular factor, exact when the regular factor is linear.
SampledMatrixFunction grid_rl_integral(const SampledMatrixFunction& f, double order);

/// D^a f = d/dt J^(1-a) f with a in (0, 1).
///
/// The regular factor r of J^(1-a) f is differentiated by central differences
/// (one-sided second order at T) and combined through the product rule, so the
/// known singular power is differentiated analytically. The left endpoint is
/// marked undefined.
SampledMatrixFunction grid_rl_derivative(const SampledMatrixFunction& f, double order);

/// Samples of a scalar phi(t, s) = (t - s)^(exponent - 1) g(t, s) on the grid square
/// s <= t. Only the lower triangle of `regular` (row t index, column s index) is read.
struct TwoPointSample
{
    Grid grid;
    double exponent = 1.0;
    Eigen::MatrixXd regular;

    static TwoPointSample from_function(const Grid& grid, double exponent,
                                        const std::function<double(double, double)>& g);
};

/// Both sides of the fractional differentiation-under-the-integral rule
///   D^a int_{t0}^t phi(t,s) ds = int_{t0}^t D^a_t phi(t,s) ds + lim_{s->t-0} J^{1-a}_t phi(t,s)
/// evaluated at interior nodes.
struct DiffUnderIntegralReport
{
    double step = 0.0;
    double residual = 0.0;                  ///< max |lhs - rhs| over nodes 1..N-1
    std::vector<double> lhs;                ///< indexed by node, NaN at 0 and N
    std::vector<double> integral_term;      ///< int D^a_t phi ds
    std::vector<double> limit_term;         ///< limit from the known power at s = t
    std::vector<double> limit_one_step;     ///< the same quantity sampled at s = t - h
    double max_one_step_gap = 0.0;          ///< max |limit_term - limit_one_step|
};

/// Checks the rule on sampled phi. The caller asserts the smoothness and domination
/// hypotheses on phi; they are not verified. Requires exponent >= a so that the
/// t-derivative stays integrable in s.
DiffUnderIntegralReport check_diff_under_integral(const TwoPointSample& phi, double order);

} // namespace fracpb
