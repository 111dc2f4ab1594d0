#include "fracpb/grid.hpp"

#include "fracpb/errors.hpp"
#include "fracpb/specfun.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace fracpb {

namespace {

using boost_no_promote = boost::math::policies::policy<boost::math::policies::promote_double<false>>;

constexpr double exponent_tol = 1e-12;

// Dimensionless product-integration weights on [0, 1] for the weight
// x^(sigma-1) (1-x)^(order-1) against hat functions at x_l = l / i.
// rows[i][l], i = 1..n, l = 0..i (rows[0] is empty).
struct ProductWeights
{
    std::vector<std::vector<double>> rows;
};

// Cumulative moment function: below x = 0.5 the lower incomplete beta B_x(p, q),
// from 0.5 on the upper one. Differences of like-sided values stay accurate.
class MomentTable
{
public:
    MomentTable(double p, double q) : p_(p), q_(q)
    {
        if (p_ == 1.0)
            kind_ = Kind::unit_left;
        else if (q_ == 1.0)
            kind_ = Kind::unit_right;
        lower_half_ = lower(0.5);
        upper_half_ = upper(0.5);
    }

    // int_{xa}^{xb} x^(p-1) (1-x)^(q-1) dx
    double between(double xa, double fa, double xb, double fb) const
    {
        if (xb < 0.5)
            return fb - fa;
        if (xa >= 0.5)
            return fa - fb;
        return (lower_half_ - fa) + (upper_half_ - fb);
    }

    double cumulative(double x) const { return x < 0.5 ? lower(x) : upper(x); }

private:
    enum class Kind { general, unit_left, unit_right };

    double lower(double x) const
    {
        switch (kind_) {
        case Kind::unit_left:
            return (1.0 - std::pow(1.0 - x, q_)) / q_;
        case Kind::unit_right:
            return std::pow(x, p_) / p_;
        case Kind::general:
            break;
        }
        return boost::math::beta(p_, q_, x, boost_no_promote());
    }

    double upper(double x) const
    {
        switch (kind_) {
        case Kind::unit_left:
            return std::pow(1.0 - x, q_) / q_;
        case Kind::unit_right:
            return (1.0 - std::pow(x, p_)) / p_;
        case Kind::general:
            break;
        }
        return boost::math::betac(p_, q_, x, boost_no_promote());
    }

    double p_;
    double q_;
    Kind kind_ = Kind::general;
    double lower_half_ = 0.0;
    double upper_half_ = 0.0;
};

std::shared_ptr<const ProductWeights> build_weights(double sigma, double order, int n)
{
    auto w = std::make_shared<ProductWeights>();
    w->rows.resize(static_cast<std::size_t>(n) + 1);
    // x^(sigma-1) for the zeroth moment, x * x^(sigma-1) for the first.
    const MomentTable m0(sigma, order);
    const MomentTable m1(sigma + 1.0, order);
    std::vector<double> f0;
    std::vector<double> f1;
    for (int i = 1; i <= n; ++i) {
        auto& row = w->rows[static_cast<std::size_t>(i)];
        row.assign(static_cast<std::size_t>(i) + 1, 0.0);
        f0.resize(static_cast<std::size_t>(i) + 1);
        f1.resize(static_cast<std::size_t>(i) + 1);
        for (int l = 0; l <= i; ++l) {
            const double x = static_cast<double>(l) / i;
            f0[l] = m0.cumulative(x);
            f1[l] = m1.cumulative(x);
        }
        for (int l = 0; l < i; ++l) {
            const double xa = static_cast<double>(l) / i;
            const double xb = static_cast<double>(l + 1) / i;
            const double mom0 = m0.between(xa, f0[l], xb, f0[l + 1]);
            const double mom1 = m1.between(xa, f1[l], xb, f1[l + 1]);
            row[l] += i * (xb * mom0 - mom1);
            row[l + 1] += i * (mom1 - xa * mom0);
        }
    }
    return w;
}

// Weight tables are pure functions of (sigma, order, n); a small shared cache
// avoids rebuilding them for repeated operator applications.
std::shared_ptr<const ProductWeights> product_weights(double sigma, double order, int n)
{
    static std::mutex mutex;
    static std::map<std::tuple<double, double, int>, std::shared_ptr<const ProductWeights>> cache;

    const auto key = std::make_tuple(sigma, order, n);
    {
        std::lock_guard lock(mutex);
        if (auto it = cache.find(key); it != cache.end())
            return it->second;
    }
    auto w = build_weights(sigma, order, n);
    std::lock_guard lock(mutex);
    if (cache.size() >= 32)
        cache.clear();
    cache.emplace(key, w);
    return w;
}

// Samples packed column-wise: column i holds the flattened matrix at node i.
Eigen::MatrixXd pack(const std::vector<Eigen::MatrixXd>& samples)
{
    const auto size = samples.front().size();
    Eigen::MatrixXd out(size, static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.col(static_cast<Eigen::Index>(i)) = samples[i].reshaped();
    return out;
}

std::vector<Eigen::MatrixXd> unpack(const Eigen::MatrixXd& packed, Eigen::Index rows, Eigen::Index cols)
{
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(packed.cols()));
    for (Eigen::Index i = 0; i < packed.cols(); ++i)
        out.push_back(packed.col(i).reshaped(rows, cols));
    return out;
}

// Regular factor of J^order applied to (t - t0)^(sigma-1) g on nodes 0..n of
// a uniform grid; column l of `g` is the sample at node l.
Eigen::MatrixXd integrate_regular(const Eigen::MatrixXd& g, double sigma, double order)
{
    const int n = static_cast<int>(g.cols()) - 1;
    const auto w = product_weights(sigma, order, n);
    const double inv_gamma = 1.0 / gamma(order);
    Eigen::MatrixXd r(g.rows(), g.cols());
    r.col(0) = g.col(0) * (beta(sigma, order) * inv_gamma);
    for (int i = 1; i <= n; ++i) {
        const auto& row = w->rows[static_cast<std::size_t>(i)];
        const Eigen::Map<const Eigen::VectorXd> wi(row.data(), i + 1);
        r.col(i) = (g.leftCols(i + 1) * wi) * inv_gamma;
    }
    return r;
}

// d/dt of the regular factor: central differences inside, second-order one-sided
// at the ends (forward at node 0, backward at node n).
Eigen::MatrixXd differentiate(const Eigen::MatrixXd& r, double h)
{
    const auto n = r.cols() - 1;
    Eigen::MatrixXd d(r.rows(), r.cols());
    if (n == 1) {
        d.col(0) = d.col(1) = (r.col(1) - r.col(0)) / h;
        return d;
    }
    d.col(0) = (-3.0 * r.col(0) + 4.0 * r.col(1) - r.col(2)) / (2.0 * h);
    for (Eigen::Index i = 1; i < n; ++i)
        d.col(i) = (r.col(i + 1) - r.col(i - 1)) / (2.0 * h);
    d.col(n) = (3.0 * r.col(n) - 4.0 * r.col(n - 1) + r.col(n - 2)) / (2.0 * h);
    return d;
}

} // namespace

// ---------------------------------------------------------------------------

Grid::Grid(double t0, double t_end, int intervals) : t0_(t0), t_end_(t_end), n_(intervals)
{
    if (!(std::isfinite(t0) && std::isfinite(t_end) && t_end > t0))
        throw domain_error(fmt::format("grid needs t0 < T, got [{}, {}]", t0, t_end));
    if (intervals < 4)
        throw domain_error(fmt::format("grid needs at least 4 intervals, got {}", intervals));
}

SampledMatrixFunction::SampledMatrixFunction(Grid grid, std::vector<Eigen::MatrixXd> regular, double left_exponent)
    : grid_(grid), regular_(std::move(regular)), left_exponent_(left_exponent)
{
    if (regular_.size() != static_cast<std::size_t>(grid_.intervals()) + 1)
        throw dimension_error(fmt::format("sampled function needs {} samples, got {}", grid_.intervals() + 1,
                                          regular_.size()));
    for (const auto& m : regular_)
        if (m.rows() != regular_.front().rows() || m.cols() != regular_.front().cols())
            throw dimension_error("sampled function samples differ in shape");
    if (!(left_exponent_ > 0.0))
        throw domain_error(fmt::format("left exponent must be positive, got {}", left_exponent_));
}

SampledMatrixFunction SampledMatrixFunction::from_function(const Grid& grid,
                                                           const std::function<Eigen::MatrixXd(double)>& f)
{
    std::vector<Eigen::MatrixXd> v;
    v.reserve(static_cast<std::size_t>(grid.intervals()) + 1);
    for (int i = 0; i <= grid.intervals(); ++i)
        v.push_back(f(grid.node(i)));
    return SampledMatrixFunction(grid, std::move(v));
}

SampledMatrixFunction SampledMatrixFunction::constant(const Grid& grid, const Eigen::MatrixXd& value,
                                                      double left_exponent)
{
    return SampledMatrixFunction(grid, std::vector<Eigen::MatrixXd>(grid.intervals() + 1, value), left_exponent);
}

void SampledMatrixFunction::mark_left_undefined()
{
    left_defined_ = false;
    regular_.front().setConstant(std::numeric_limits<double>::quiet_NaN());
}

Eigen::MatrixXd SampledMatrixFunction::value(int i) const
{
    if (i == 0) {
        if (!left_defined_)
            throw domain_error("sampled function is undefined at the left endpoint");
        if (left_exponent_ < 1.0)
            throw domain_error("sampled function is singular at the left endpoint");
        return left_exponent_ == 1.0 ? regular_.front() : Eigen::MatrixXd::Zero(rows(), cols());
    }
    return regular(i) * std::pow(grid_.node(i) - grid_.t0(), left_exponent_ - 1.0);
}

Eigen::MatrixXd SampledMatrixFunction::interpolate(double t) const
{
    const double x = (t - grid_.t0()) / grid_.step();
    if (!(x > 0.0 && t <= grid_.t_end() * (1 + 1e-15) + 1e-15))
        throw domain_error(fmt::format("interpolate: t = {} outside (t0, T]", t));
    int i = std::min(static_cast<int>(std::floor(x)), grid_.intervals() - 1);
    if (i == 0 && !left_defined_)
        i = 1; // extrapolate from the first defined interval
    const double w = x - i;
    const Eigen::MatrixXd g = (1.0 - w) * regular(i) + w * regular(i + 1);
    return g * std::pow(t - grid_.t0(), left_exponent_ - 1.0);
}

double SampledMatrixFunction::sup_norm() const
{
    double s = 0.0;
    for (int i = 1; i <= grid_.intervals(); ++i) {
        const double scale = std::pow(grid_.node(i) - grid_.t0(), std::max(left_exponent_ - 1.0, 0.0));
        s = std::max(s, regular(i).cwiseAbs().maxCoeff() * scale);
    }
    return s;
}

SampledMatrixFunction SampledMatrixFunction::with_left_exponent(double sigma) const
{
    if (sigma > left_exponent_ + exponent_tol)
        throw domain_error("with_left_exponent: cannot raise the left exponent");
    if (std::abs(sigma - left_exponent_) <= exponent_tol)
        return *this;
    const double shift = left_exponent_ - sigma;
    std::vector<Eigen::MatrixXd> v = regular_;
    for (int i = 0; i <= grid_.intervals(); ++i)
        v[i] *= std::pow(grid_.node(i) - grid_.t0(), shift);
    SampledMatrixFunction out(grid_, std::move(v), sigma);
    if (!left_defined_)
        out.mark_left_undefined();
    return out;
}

SampledMatrixFunction SampledMatrixFunction::operator+(const SampledMatrixFunction& other) const
{
    if (grid_.intervals() != other.grid_.intervals() || grid_.t0() != other.grid_.t0() ||
        grid_.t_end() != other.grid_.t_end())
        throw dimension_error("sampled functions live on different grids");
    if (rows() != other.rows() || cols() != other.cols())
        throw dimension_error("sampled functions differ in shape");
    const double sigma = std::min(left_exponent_, other.left_exponent_);
    const auto a = with_left_exponent(sigma);
    const auto b = other.with_left_exponent(sigma);
    std::vector<Eigen::MatrixXd> v = a.regular_;
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] += b.regular_[i];
    SampledMatrixFunction out(grid_, std::move(v), sigma);
    if (!a.left_defined_ || !b.left_defined_)
        out.mark_left_undefined();
    return out;
}

SampledMatrixFunction SampledMatrixFunction::operator-(const SampledMatrixFunction& other) const
{
    return *this + other * -1.0;
}

SampledMatrixFunction SampledMatrixFunction::operator*(double s) const
{
    SampledMatrixFunction out = *this;
    for (auto& m : out.regular_)
        m *= s;
    return out;
}

SampledMatrixFunction SampledMatrixFunction::right_multiply(const Eigen::MatrixXd& m) const
{
    std::vector<Eigen::MatrixXd> v;
    v.reserve(regular_.size());
    for (const auto& g : regular_)
        v.push_back(g * m);
    SampledMatrixFunction out(grid_, std::move(v), left_exponent_);
    if (!left_defined_)
        out.mark_left_undefined();
    return out;
}

SampledMatrixFunction multiply(const SampledMatrixFunction& a, const SampledMatrixFunction& f)
{
    if (a.grid().intervals() != f.grid().intervals() || a.grid().t0() != f.grid().t0())
        throw dimension_error("multiply: different grids");
    if (a.cols() != f.rows())
        throw dimension_error("multiply: inner dimensions differ");
    std::vector<Eigen::MatrixXd> v;
    v.reserve(f.regular().size());
    for (std::size_t i = 0; i < f.regular().size(); ++i)
        v.push_back(a.regular()[i] * f.regular()[i]);
    SampledMatrixFunction out(f.grid(), std::move(v), a.left_exponent() + f.left_exponent() - 1.0);
    if (!a.left_defined() || !f.left_defined())
        out.mark_left_undefined();
    return out;
}

SampledMatrixFunction grid_rl_integral(const SampledMatrixFunction& f, double order)
{
    if (!(order > 0.0 && std::isfinite(order)))
        throw domain_error(fmt::format("grid_rl_integral: order must be positive, got {}", order));
    if (!f.left_defined())
        throw domain_error("grid_rl_integral: input is undefined at the left endpoint");
    const double sigma = f.left_exponent();
    const Eigen::MatrixXd r = integrate_regular(pack(f.regular()), sigma, order);
    return SampledMatrixFunction(f.grid(), unpack(r, f.rows(), f.cols()), sigma + order);
}

SampledMatrixFunction grid_rl_derivative(const SampledMatrixFunction& f, double order)
{
    if (!(order > 0.0 && order < 1.0))
        throw domain_error(fmt::format("grid_rl_derivative: order must lie in (0, 1), got {}", order));
    if (!f.left_defined())
        throw domain_error("grid_rl_derivative: input is undefined at the left endpoint");
    const Grid& grid = f.grid();
    const double h = grid.step();
    const Eigen::MatrixXd r = integrate_regular(pack(f.regular()), f.left_exponent(), 1.0 - order);
    const Eigen::MatrixXd dr = differentiate(r, h);

    // J^(1-a) f = (t - t0)^e r(t) with e = sigma - a.
    const double e = f.left_exponent() - order;
    Eigen::MatrixXd out(r.rows(), r.cols());
    double out_exponent = 1.0;
    for (Eigen::Index i = 1; i < r.cols(); ++i) {
        const double dt = grid.node(static_cast<int>(i)) - grid.t0();
        if (std::abs(e) <= exponent_tol) {
            out.col(i) = dr.col(i);
        } else if (e > 0.0) {
            out.col(i) = e * r.col(i) + dt * dr.col(i);
            out_exponent = e;
        } else {
            out.col(i) = (e * r.col(i) + dt * dr.col(i)) * std::pow(dt, e - 1.0);
        }
    }
    out.col(0).setZero();
    SampledMatrixFunction result(grid, unpack(out, f.rows(), f.cols()), out_exponent);
    result.mark_left_undefined();
    return result;
}

// ---------------------------------------------------------------------------

TwoPointSample TwoPointSample::from_function(const Grid& grid, double exponent,
                                             const std::function<double(double, double)>& g)
{
    const int n = grid.intervals();
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n + 1, n + 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= i; ++j)
            v(i, j) = g(grid.node(i), grid.node(j));
    return TwoPointSample{grid, exponent, std::move(v)};
}

DiffUnderIntegralReport check_diff_under_integral(const TwoPointSample& phi, double order)
{
    if (!(order > 0.0 && order < 1.0))
        throw domain_error(fmt::format("check_diff_under_integral: order must lie in (0, 1), got {}", order));
    const Grid& grid = phi.grid;
    const int n = grid.intervals();
    const double h = grid.step();
    const double sigma = phi.exponent;
    const double e = sigma - order;
    if (e < -exponent_tol)
        throw domain_error(fmt::format(
            "check_diff_under_integral: exponent {} below the order {} makes D_t phi non-integrable in s", sigma,
            order));
    if (phi.regular.rows() != n + 1 || phi.regular.cols() != n + 1)
        throw dimension_error("check_diff_under_integral: sample matrix does not match the grid");
    const Eigen::MatrixXd& g = phi.regular;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    DiffUnderIntegralReport rep;
    rep.step = h;
    rep.lhs.assign(n + 1, nan);
    rep.integral_term.assign(n + 1, nan);
    rep.limit_term.assign(n + 1, nan);
    rep.limit_one_step.assign(n + 1, nan);

    // Left side: F(t) = int_{t0}^t phi(t,s) ds = (t - t0)^sigma R(t), then D^a F.
    {
        const auto w = product_weights(1.0, sigma, n);
        std::vector<Eigen::MatrixXd> reg(n + 1, Eigen::MatrixXd(1, 1));
        reg[0](0, 0) = g(0, 0) / sigma;
        for (int i = 1; i <= n; ++i) {
            const auto& row = w->rows[i];
            double acc = 0.0;
            for (int l = 0; l <= i; ++l)
                acc += row[l] * g(i, l);
            reg[i](0, 0) = acc;
        }
        const SampledMatrixFunction big_f(grid, std::move(reg), sigma + 1.0);
        const auto d = grid_rl_derivative(big_f, order);
        for (int i = 1; i < n; ++i)
            rep.lhs[i] = d.value(i)(0, 0);
    }

    // Per source column s_j: J^{1-a}_t phi(., s_j) = (t - s_j)^e r_j(t) on the sub-grid
    // starting at s_j. The dimensionless weights are anchor independent.
    const auto w_col = product_weights(sigma, 1.0 - order, n);
    const double inv_gamma = 1.0 / gamma(1.0 - order);
    const double anchor_factor = gamma(sigma) / gamma(sigma + 1.0 - order);
    const bool critical = std::abs(e) <= exponent_tol;

    // dphi(i, j): regular factor of D^a_t phi(t_i, s_j) w.r.t. (t_i - s_j)^(e-1),
    // or plain values when e = 0.
    Eigen::MatrixXd dphi = Eigen::MatrixXd::Constant(n + 1, n + 1, nan);
    Eigen::VectorXd anchor_value(n + 1);
    for (int j = 0; j <= n; ++j) {
        const int m_max = n - j;
        Eigen::MatrixXd r(1, m_max + 1);
        r(0, 0) = g(j, j) * anchor_factor;
        for (int m = 1; m <= m_max; ++m) {
            const auto& row = w_col->rows[m];
            double acc = 0.0;
            for (int l = 0; l <= m; ++l)
                acc += row[l] * g(j + l, j);
            r(0, m) = acc * inv_gamma;
        }
        anchor_value(j) = r(0, 0);
        if (m_max == 0) {
            if (!critical)
                dphi(j, j) = e * r(0, 0);
            continue;
        }
        const Eigen::MatrixXd dr = differentiate(r, h);
        for (int m = 0; m <= m_max; ++m)
            dphi(j + m, j) = critical ? dr(0, m) : e * r(0, m) + m * h * dr(0, m);
        if (m_max < 2 && critical)
            dphi(j, j) = nan; // forward difference needs two further nodes
    }

    const auto w_s = product_weights(1.0, critical ? 1.0 : e, n);
    for (int i = 1; i < n; ++i) {
        if (critical && std::isnan(dphi(i, i)))
            dphi(i, i) = i >= 2 ? 2.0 * dphi(i, i - 1) - dphi(i, i - 2) : dphi(i, i - 1);
        const double span = grid.node(i) - grid.t0();
        const auto& row = w_s->rows[i];
        double acc = 0.0;
        for (int l = 0; l <= i; ++l)
            acc += row[l] * dphi(i, l);
        rep.integral_term[i] = acc * (critical ? span : std::pow(span, e));
        rep.limit_term[i] = critical ? anchor_value(i) : 0.0;
    }
    // s = t - h approximation of the limit, taken from column i - 1.
    for (int i = 1; i < n; ++i) {
        const int j = i - 1;
        const auto& row = w_col->rows[1];
        const double r1 = (row[0] * g(j, j) + row[1] * g(j + 1, j)) * inv_gamma;
        rep.limit_one_step[i] = std::pow(h, e) * r1;
    }

    for (int i = 1; i < n; ++i) {
        const double rhs = rep.integral_term[i] + rep.limit_term[i];
        rep.residual = std::max(rep.residual, std::abs(rep.lhs[i] - rhs));
        rep.max_one_step_gap = std::max(rep.max_one_step_gap, std::abs(rep.limit_term[i] - rep.limit_one_step[i]));
    }
    return rep;
}

} // namespace fracpb
