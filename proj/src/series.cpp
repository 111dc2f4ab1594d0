#include "fracpb/series.hpp"

#include "fracpb/errors.hpp"
#include "fracpb/specfun.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace fracpb {

namespace {

bool same_origin(double a, double b)
{
    return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a));
}

// Gamma(x) / Gamma(y) for positive x, y without intermediate overflow.
double gamma_ratio(double x, double y)
{
    if (x < 170.0 && y < 170.0)
        return gamma(x) / gamma(y);
    return std::exp(log_gamma(x) - log_gamma(y));
}

std::vector<SeriesTerm> normalize(std::vector<SeriesTerm> terms, Eigen::Index rows, Eigen::Index cols)
{
    for (const auto& t : terms) {
        if (!(std::isfinite(t.gamma) && t.gamma > 0.0))
            throw domain_error(fmt::format("series term exponent must be positive, got {}", t.gamma));
        if (t.coeff.rows() != rows || t.coeff.cols() != cols)
            throw dimension_error(fmt::format("series term is {}x{}, expected {}x{}", t.coeff.rows(), t.coeff.cols(),
                                              rows, cols));
        if (!t.coeff.allFinite())
            throw domain_error("series term has a non-finite coefficient");
    }
    std::stable_sort(terms.begin(), terms.end(), [](const SeriesTerm& a, const SeriesTerm& b) {
        return a.gamma < b.gamma;
    });

    std::vector<SeriesTerm> merged;
    merged.reserve(terms.size());
    for (auto& t : terms) {
        if (!merged.empty() && t.gamma - merged.back().gamma <= exponent_merge_tol)
            merged.back().coeff += t.coeff;
        else
            merged.push_back(std::move(t));
    }
    std::erase_if(merged, [](const SeriesTerm& t) { return t.coeff.isZero(0.0); });
    return merged;
}

} // namespace

FracPowerSeries::FracPowerSeries(double origin, Eigen::Index rows, Eigen::Index cols)
    : origin_(origin), rows_(rows), cols_(cols)
{
    if (rows <= 0 || cols <= 0)
        throw dimension_error("series dimensions must be positive");
    if (!std::isfinite(origin))
        throw domain_error("series origin must be finite");
}

FracPowerSeries::FracPowerSeries(double origin, Eigen::Index rows, Eigen::Index cols, std::vector<SeriesTerm> terms)
    : FracPowerSeries(origin, rows, cols)
{
    terms_ = normalize(std::move(terms), rows, cols);
}

FracPowerSeries FracPowerSeries::single(double origin, double gamma, Eigen::MatrixXd coeff)
{
    const auto r = coeff.rows();
    const auto c = coeff.cols();
    return FracPowerSeries(origin, r, c, {SeriesTerm{gamma, std::move(coeff)}});
}

double FracPowerSeries::leading_gamma() const
{
    if (terms_.empty())
        throw std::logic_error("leading_gamma of an empty series");
    return terms_.front().gamma;
}

Eigen::MatrixXd FracPowerSeries::eval(double t) const
{
    const double dt = t - origin_;
    const bool singular = !terms_.empty() && terms_.front().gamma < 1.0;
    if (dt < 0.0 || (dt == 0.0 && singular))
        throw domain_error(fmt::format("series evaluated at t = {} outside its domain (origin {})", t, origin_));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
    for (const auto& term : terms_)
        out += term.coeff * std::pow(dt, term.gamma - 1.0);
    return out;
}

double FracPowerSeries::sup_bound(double horizon) const
{
    const double h = horizon - origin_;
    if (!(h > 0.0))
        throw domain_error("sup_bound: horizon must exceed the origin");
    double s = 0.0;
    for (const auto& term : terms_)
        s += term.coeff.cwiseAbs().maxCoeff() * std::pow(h, std::max(term.gamma - 1.0, 0.0));
    return s;
}

double FracPowerSeries::max_coeff() const
{
    double m = 0.0;
    for (const auto& term : terms_)
        m = std::max(m, term.coeff.cwiseAbs().maxCoeff());
    return m;
}

FracPowerSeries FracPowerSeries::operator+(const FracPowerSeries& other) const
{
    if (!same_origin(origin_, other.origin_) || rows_ != other.rows_ || cols_ != other.cols_)
        throw dimension_error("series addition needs equal origin and shape");
    std::vector<SeriesTerm> all = terms_;
    all.insert(all.end(), other.terms_.begin(), other.terms_.end());
    return FracPowerSeries(origin_, rows_, cols_, std::move(all));
}

FracPowerSeries FracPowerSeries::operator-(const FracPowerSeries& other) const
{
    return *this + other * -1.0;
}

FracPowerSeries FracPowerSeries::operator*(double s) const
{
    std::vector<SeriesTerm> out = terms_;
    for (auto& t : out)
        t.coeff *= s;
    return FracPowerSeries(origin_, rows_, cols_, std::move(out));
}

FracPowerSeries FracPowerSeries::right_multiply(const Eigen::MatrixXd& m) const
{
    if (m.rows() != cols_)
        throw dimension_error(fmt::format("right_multiply: {}x{} series times {}x{} matrix", rows_, cols_, m.rows(),
                                          m.cols()));
    std::vector<SeriesTerm> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_)
        out.push_back({t.gamma, t.coeff * m});
    return FracPowerSeries(origin_, rows_, m.cols(), std::move(out));
}

FracPowerSeries FracPowerSeries::left_multiply(const Eigen::MatrixXd& m) const
{
    if (m.cols() != rows_)
        throw dimension_error(fmt::format("left_multiply: {}x{} matrix times {}x{} series", m.rows(), m.cols(), rows_,
                                          cols_));
    std::vector<SeriesTerm> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_)
        out.push_back({t.gamma, m * t.coeff});
    return FracPowerSeries(origin_, m.rows(), cols_, std::move(out));
}

FracPowerSeries FracPowerSeries::shifted(double p) const
{
    if (!(p >= 0.0))
        throw domain_error("shifted: power must be non-negative");
    std::vector<SeriesTerm> out = terms_;
    for (auto& t : out)
        t.gamma += p;
    return FracPowerSeries(origin_, rows_, cols_, std::move(out));
}

// ---------------------------------------------------------------------------

MatrixPolynomial::MatrixPolynomial(double origin, Eigen::Index dim) : origin_(origin), dim_(dim)
{
    if (dim <= 0)
        throw dimension_error("polynomial dimension must be positive");
}

MatrixPolynomial::MatrixPolynomial(double origin, Eigen::Index dim, std::vector<Coefficient> coeffs)
    : MatrixPolynomial(origin, dim)
{
    std::map<int, Eigen::MatrixXd> by_power;
    for (auto& c : coeffs) {
        if (c.power < 0)
            throw domain_error(fmt::format("polynomial power must be non-negative, got {}", c.power));
        if (c.matrix.rows() != dim || c.matrix.cols() != dim)
            throw dimension_error(fmt::format("polynomial coefficient of power {} is {}x{}, expected {}x{}", c.power,
                                              c.matrix.rows(), c.matrix.cols(), dim, dim));
        if (!c.matrix.allFinite())
            throw domain_error("polynomial coefficient is not finite");
        auto [it, inserted] = by_power.try_emplace(c.power, c.matrix);
        if (!inserted)
            it->second += c.matrix;
    }
    for (auto& [power, m] : by_power)
        if (!m.isZero(0.0))
            coeffs_.push_back({power, std::move(m)});
}

MatrixPolynomial MatrixPolynomial::constant(double origin, const Eigen::MatrixXd& a)
{
    if (a.rows() != a.cols())
        throw dimension_error("constant polynomial needs a square matrix");
    return MatrixPolynomial(origin, a.rows(), {{0, a}});
}

int MatrixPolynomial::degree() const
{
    return coeffs_.empty() ? -1 : coeffs_.back().power;
}

Eigen::MatrixXd MatrixPolynomial::eval(double t) const
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    const double dt = t - origin_;
    for (const auto& c : coeffs_)
        out += c.matrix * std::pow(dt, c.power);
    return out;
}

MatrixPolynomial MatrixPolynomial::reanchored(double s) const
{
    // (t - t0)^m = sum_i binom(m, i) (s - t0)^(m - i) (t - s)^i
    const double d = s - origin_;
    std::vector<Coefficient> out;
    for (const auto& c : coeffs_) {
        double binom = 1.0;
        for (int i = 0; i <= c.power; ++i) {
            if (i > 0)
                binom = binom * (c.power - i + 1) / i;
            out.push_back({i, c.matrix * (binom * std::pow(d, c.power - i))});
        }
    }
    return MatrixPolynomial(s, dim_, std::move(out));
}

// ---------------------------------------------------------------------------

FracPowerSeries rl_integral(const FracPowerSeries& f, double order)
{
    if (!(order > 0.0 && std::isfinite(order)))
        throw domain_error(fmt::format("rl_integral: order must be positive, got {}", order));
    std::vector<SeriesTerm> out;
    out.reserve(f.terms().size());
    for (const auto& t : f.terms())
        out.push_back({t.gamma + order, t.coeff * gamma_ratio(t.gamma, t.gamma + order)});
    return FracPowerSeries(f.origin(), f.rows(), f.cols(), std::move(out));
}

FracPowerSeries rl_derivative(const FracPowerSeries& f, double order)
{
    if (!(order > 0.0 && order < 1.0))
        throw domain_error(fmt::format("rl_derivative: order must lie in (0, 1), got {}", order));
    std::vector<SeriesTerm> out;
    out.reserve(f.terms().size());
    for (const auto& t : f.terms()) {
        const double g = t.gamma - order;
        const double nearest = std::round(g);
        if (nearest <= 0.0 && std::abs(g - nearest) <= gamma_pole_tol)
            continue; // 1/Gamma vanishes at the pole: the term is annihilated
        if (g < 0.0)
            throw domain_error(fmt::format(
                "rl_derivative: term with exponent {} maps to {}, which is not locally integrable", t.gamma, g));
        out.push_back({g, t.coeff * gamma_ratio(t.gamma, g)});
    }
    return FracPowerSeries(f.origin(), f.rows(), f.cols(), std::move(out));
}

FracPowerSeries mul_poly(const MatrixPolynomial& a, const FracPowerSeries& f)
{
    if (!same_origin(a.origin(), f.origin()))
        throw dimension_error(fmt::format("mul_poly: polynomial origin {} differs from series origin {}", a.origin(),
                                          f.origin()));
    if (a.dim() != f.rows())
        throw dimension_error(fmt::format("mul_poly: {}x{} polynomial times {}x{} series", a.dim(), a.dim(), f.rows(),
                                          f.cols()));
    std::vector<SeriesTerm> out;
    out.reserve(a.coeffs().size() * f.terms().size());
    for (const auto& c : a.coeffs())
        for (const auto& t : f.terms())
            out.push_back({t.gamma + c.power, c.matrix * t.coeff});
    return FracPowerSeries(f.origin(), a.dim(), f.cols(), std::move(out));
}

FracPowerSeries power_convolve(const FracPowerSeries& kernel, const FracPowerSeries& g)
{
    if (kernel.cols() != g.rows())
        throw dimension_error(fmt::format("power_convolve: {}x{} kernel against {}x{} series", kernel.rows(),
                                          kernel.cols(), g.rows(), g.cols()));
    std::vector<SeriesTerm> out;
    out.reserve(kernel.terms().size() * g.terms().size());
    for (const auto& k : kernel.terms())
        for (const auto& t : g.terms())
            out.push_back({k.gamma + t.gamma, (k.coeff * t.coeff) * beta(k.gamma, t.gamma)});
    return FracPowerSeries(g.origin(), kernel.rows(), g.cols(), std::move(out));
}

} // namespace fracpb
