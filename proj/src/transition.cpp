#include "fracpb/transition.hpp"

#include "fracpb/errors.hpp"
#include "fracpb/specfun.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace fracpb {

namespace {

void require_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw domain_error(fmt::format("fractional order alpha must lie in (0, 1), got {}", alpha));
}

double gamma_ratio(double x, double y)
{
    if (x < 170.0 && y < 170.0)
        return gamma(x) / gamma(y);
    return std::exp(log_gamma(x) - log_gamma(y));
}

template <class Term>
struct Recursion
{
    std::vector<Term> kept;
    std::optional<Term> omitted;
    bool exact = false;
    ConvergenceReport report;
};

// Runs term_{k+1} = next(term_k) with the shared stopping rule.
template <class Term, class Next, class Norm, class IsZero>
Recursion<Term> run_recursion(Term base, Next next, Norm norm, IsZero is_zero, const TransitionOptions& opts,
                              std::string_view what)
{
    if (opts.max_terms < 1)
        throw domain_error("max_terms must be at least 1");
    Recursion<Term> out;
    out.report.term_norms.push_back(norm(base));
    out.kept.push_back(std::move(base));
    bool capped = false;
    for (;;) {
        Term candidate = next(out.kept.back());
        if (is_zero(candidate)) {
            out.exact = true;
            break;
        }
        const double nc = norm(candidate);
        out.report.term_norms.push_back(nc);
        if (nc < opts.tol) {
            out.omitted = std::move(candidate);
            break;
        }
        if (static_cast<int>(out.kept.size()) == opts.max_terms) {
            out.omitted = std::move(candidate);
            capped = true;
            break;
        }
        out.kept.push_back(std::move(candidate));
    }

    auto& norms = out.report.term_norms;
    for (std::size_t k = 1; k < norms.size(); ++k)
        out.report.ratios.push_back(norms[k - 1] > 0.0 ? norms[k] / norms[k - 1]
                                                       : std::numeric_limits<double>::infinity());
    const auto& ratios = out.report.ratios;
    if (out.exact)
        out.report.verdict = Verdict::converging;
    else if (ratios.size() >= 3 && std::all_of(ratios.end() - 3, ratios.end(), [](double r) { return r < 1.0; }))
        out.report.verdict = Verdict::converging;
    else if (!ratios.empty() && ratios.back() >= 1.0)
        out.report.verdict = Verdict::diverging;
    else
        out.report.verdict = Verdict::inconclusive;

    if (capped && !ratios.empty() && ratios.back() >= 1.0)
        throw convergence_error(fmt::format("{}: term cap {} reached with last norm ratio {:.3g}", what,
                                            opts.max_terms, ratios.back()),
                                norms);
    return out;
}

FracPowerSeries base_term(double origin, Eigen::Index n, double alpha)
{
    return FracPowerSeries::single(origin, alpha, Eigen::MatrixXd::Identity(n, n) / gamma(alpha));
}

std::vector<TransitionKernel::Term> normalize_kernel(std::vector<TransitionKernel::Term> terms)
{
    std::stable_sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) {
        return a.anchor_power != b.anchor_power ? a.anchor_power < b.anchor_power : a.gamma < b.gamma;
    });
    std::vector<TransitionKernel::Term> out;
    for (auto& t : terms) {
        if (!out.empty() && out.back().anchor_power == t.anchor_power &&
            t.gamma - out.back().gamma <= exponent_merge_tol)
            out.back().coeff += t.coeff;
        else
            out.push_back(std::move(t));
    }
    std::erase_if(out, [](const auto& t) { return t.coeff.isZero(0.0); });
    return out;
}

// A(t) about a moving anchor s: terms (i, q, M) meaning M (t - s)^i (s - t0)^q.
std::vector<TransitionKernel::Term> anchored_coefficients(const MatrixPolynomial& a)
{
    std::vector<TransitionKernel::Term> out;
    for (const auto& c : a.coeffs()) {
        double binom = 1.0;
        for (int i = 0; i <= c.power; ++i) {
            if (i > 0)
                binom = binom * (c.power - i + 1) / i;
            // gamma field holds the (t - s) power i here
            out.push_back({static_cast<double>(i), c.power - i, c.matrix * binom});
        }
    }
    return out;
}

TransitionKernel kernel_mul(const std::vector<TransitionKernel::Term>& a_terms, const TransitionKernel& k)
{
    std::vector<TransitionKernel::Term> out;
    out.reserve(a_terms.size() * k.terms().size());
    for (const auto& a : a_terms)
        for (const auto& t : k.terms())
            out.push_back({t.gamma + a.gamma, t.anchor_power + a.anchor_power, a.coeff * t.coeff});
    return TransitionKernel(k.origin(), k.dim(), std::move(out));
}

TransitionKernel kernel_integral(const TransitionKernel& k, double order)
{
    std::vector<TransitionKernel::Term> out;
    out.reserve(k.terms().size());
    for (const auto& t : k.terms())
        out.push_back({t.gamma + order, t.anchor_power, t.coeff * gamma_ratio(t.gamma, t.gamma + order)});
    return TransitionKernel(k.origin(), k.dim(), std::move(out));
}

} // namespace

std::string_view to_string(Verdict v)
{
    switch (v) {
    case Verdict::converging:
        return "converging";
    case Verdict::inconclusive:
        return "inconclusive";
    case Verdict::diverging:
        return "diverging";
    }
    return "unknown";
}

TransitionMatrix peano_baker_exact(const MatrixPolynomial& a, double alpha, double horizon,
                                   const TransitionOptions& opts)
{
    require_alpha(alpha);
    if (!(horizon > a.origin()))
        throw domain_error(fmt::format("horizon {} must exceed the origin {}", horizon, a.origin()));

    auto rec = run_recursion(
        base_term(a.origin(), a.dim(), alpha),
        [&](const FracPowerSeries& term) { return rl_integral(mul_poly(a, term), alpha); },
        [&](const FracPowerSeries& term) { return term.sup_bound(horizon); },
        [](const FracPowerSeries& term) { return term.empty(); }, opts, "peano_baker_exact");

    FracPowerSeries sum(a.origin(), a.dim(), a.dim());
    for (const auto& t : rec.kept)
        sum = sum + t;

    TransitionMatrix out{std::move(sum), alpha, horizon};
    out.terms_used = static_cast<int>(rec.kept.size());
    out.terminated_exactly = rec.exact;
    out.omitted = std::move(rec.omitted);
    if (!rec.exact)
        out.tail_estimate =
            std::max(out.omitted->sup_bound(horizon), mul_poly(a, rec.kept.back()).sup_bound(horizon));
    out.terms = std::move(rec.kept);
    out.convergence = std::move(rec.report);
    return out;
}

GridTransition peano_baker_grid(const SampledMatrixFunction& a, double alpha, const TransitionOptions& opts)
{
    require_alpha(alpha);
    if (a.left_exponent() != 1.0 || !a.left_defined())
        throw domain_error("peano_baker_grid: coefficient samples must be regular");
    if (a.rows() != a.cols())
        throw dimension_error("peano_baker_grid: coefficient matrix must be square");
    const auto n = a.rows();

    auto is_zero = [](const SampledMatrixFunction& f) {
        return std::all_of(f.regular().begin(), f.regular().end(), [](const auto& m) { return m.isZero(0.0); });
    };
    auto rec = run_recursion(
        SampledMatrixFunction::constant(a.grid(), Eigen::MatrixXd::Identity(n, n) / gamma(alpha), alpha),
        [&](const SampledMatrixFunction& term) { return grid_rl_integral(multiply(a, term), alpha); },
        [](const SampledMatrixFunction& term) { return term.sup_norm(); }, is_zero, opts, "peano_baker_grid");

    SampledMatrixFunction sum = rec.kept.front();
    for (std::size_t k = 1; k < rec.kept.size(); ++k)
        sum = sum + rec.kept[k];

    GridTransition out{std::move(sum)};
    out.terms_used = static_cast<int>(rec.kept.size());
    out.terminated_exactly = rec.exact;
    if (rec.omitted)
        out.tail_estimate = std::max(rec.omitted->sup_norm(), multiply(a, rec.kept.back()).sup_norm());
    out.convergence = std::move(rec.report);
    return out;
}

Eigen::MatrixXd limit_at_origin(const FracPowerSeries& f)
{
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(f.rows(), f.cols());
    for (const auto& t : f.terms()) {
        if (t.gamma < 1.0 - exponent_merge_tol) {
            for (Eigen::Index i = 0; i < out.size(); ++i)
                if (t.coeff(i) != 0.0)
                    out(i) = std::copysign(std::numeric_limits<double>::infinity(), t.coeff(i));
        } else if (t.gamma <= 1.0 + exponent_merge_tol) {
            out += t.coeff;
        }
    }
    return out;
}

Lemma4Report verify_lemma4(const TransitionMatrix& phi, const MatrixPolynomial& a)
{
    const double h = phi.horizon;
    const auto d_phi = rl_derivative(phi.series, phi.alpha);
    const auto a_phi = mul_poly(a, phi.series);

    Lemma4Report rep{.residual = d_phi - a_phi};
    const auto tail_part = mul_poly(a, phi.terms.back());
    rep.kept_residual = (rep.residual + tail_part).max_coeff();
    rep.tail_residual = rep.residual.sup_bound(h);
    rep.tail_estimate = phi.tail_estimate;
    const double eps = std::numeric_limits<double>::epsilon();
    rep.roundoff_floor = 64.0 * eps * (d_phi.sup_bound(h) + a_phi.sup_bound(h));

    const auto weighted = rl_integral(phi.series, 1.0 - phi.alpha);
    const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(phi.series.rows(), phi.series.cols());
    rep.initial_condition_error = (limit_at_origin(weighted) - identity).cwiseAbs().maxCoeff();
    return rep;
}

TransitionMatrix two_point_series(const MatrixPolynomial& a, double alpha, double s, double horizon,
                                  const TransitionOptions& opts)
{
    if (s < a.origin())
        throw domain_error(fmt::format("anchor s = {} precedes the coefficient origin {}", s, a.origin()));
    return peano_baker_exact(a.reanchored(s), alpha, horizon, opts);
}

Eigen::MatrixXd two_point_phi(const MatrixPolynomial& a, double alpha, double s, double t,
                              const TransitionOptions& opts)
{
    if (!(t > s))
        throw domain_error(fmt::format("two_point_phi needs t > s, got t = {}, s = {}", t, s));
    return two_point_series(a, alpha, s, t, opts).eval(t);
}

// ---------------------------------------------------------------------------

TransitionKernel::TransitionKernel(double origin, Eigen::Index dim, std::vector<Term> terms)
    : origin_(origin), dim_(dim)
{
    for (const auto& t : terms) {
        if (!(t.gamma > 0.0) || t.anchor_power < 0)
            throw domain_error("kernel term has an invalid exponent");
        if (t.coeff.rows() != dim || t.coeff.cols() != dim)
            throw dimension_error("kernel term has the wrong shape");
    }
    terms_ = normalize_kernel(std::move(terms));
}

Eigen::MatrixXd TransitionKernel::eval(double t, double s) const
{
    const bool singular = std::any_of(terms_.begin(), terms_.end(), [](const Term& k) { return k.gamma < 1.0; });
    if (s < origin_ || t < s || (t == s && singular))
        throw domain_error(fmt::format("kernel evaluated at (t, s) = ({}, {}) outside its domain", t, s));
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (const auto& k : terms_)
        out += k.coeff * (std::pow(s - origin_, k.anchor_power) * std::pow(t - s, k.gamma - 1.0));
    return out;
}

FracPowerSeries TransitionKernel::at_anchor(double s) const
{
    if (s < origin_)
        throw domain_error("kernel anchor precedes its origin");
    std::vector<SeriesTerm> out;
    out.reserve(terms_.size());
    for (const auto& k : terms_)
        out.push_back({k.gamma, k.coeff * std::pow(s - origin_, k.anchor_power)});
    return FracPowerSeries(s, dim_, dim_, std::move(out));
}

FracPowerSeries TransitionKernel::convolve(const FracPowerSeries& g) const
{
    if (std::abs(g.origin() - origin_) > 1e-12 * std::max(1.0, std::abs(origin_)))
        throw dimension_error("kernel convolution needs an input anchored at the kernel origin");
    if (g.rows() != dim_)
        throw dimension_error("kernel convolution: input has the wrong number of rows");
    std::vector<SeriesTerm> out;
    out.reserve(terms_.size() * g.terms().size());
    // int (t - tau)^(gamma-1) (tau - t0)^(p + b - 1) dtau = B(gamma, p + b) (t - t0)^(gamma + p + b - 1)
    for (const auto& k : terms_)
        for (const auto& u : g.terms()) {
            const double b = u.gamma + k.anchor_power;
            out.push_back({k.gamma + b, (k.coeff * u.coeff) * beta(k.gamma, b)});
        }
    return FracPowerSeries(origin_, dim_, g.cols(), std::move(out));
}

double TransitionKernel::sup_bound(double horizon) const
{
    const double h = horizon - origin_;
    if (!(h > 0.0))
        throw domain_error("kernel sup_bound: horizon must exceed the origin");
    // sup of (s - t0)^p (t - s)^q over s + (t - s) <= H is H^(p+q) p^p q^q / (p+q)^(p+q)
    const auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
    double s = 0.0;
    for (const auto& k : terms_) {
        const double p = k.anchor_power, q = std::max(k.gamma - 1.0, 0.0);
        const double log_weight = xlogx(p) + xlogx(q) - xlogx(p + q);
        s += k.coeff.cwiseAbs().maxCoeff() * std::exp((p + q) * std::log(h) + log_weight);
    }
    return s;
}

TransitionKernel TransitionKernel::operator+(const TransitionKernel& other) const
{
    if (other.dim_ != dim_ || other.origin_ != origin_)
        throw dimension_error("kernel addition needs equal origin and dimension");
    std::vector<Term> all = terms_;
    all.insert(all.end(), other.terms_.begin(), other.terms_.end());
    return TransitionKernel(origin_, dim_, std::move(all));
}

KernelExpansion transition_kernel(const MatrixPolynomial& a, double alpha, double horizon,
                                  const TransitionOptions& opts)
{
    require_alpha(alpha);
    if (!(horizon > a.origin()))
        throw domain_error(fmt::format("horizon {} must exceed the origin {}", horizon, a.origin()));
    const auto n = a.dim();
    const auto a_terms = anchored_coefficients(a);

    TransitionKernel base(a.origin(), n, {{alpha, 0, Eigen::MatrixXd::Identity(n, n) / gamma(alpha)}});
    auto rec = run_recursion(
        std::move(base), [&](const TransitionKernel& k) { return kernel_integral(kernel_mul(a_terms, k), alpha); },
        [&](const TransitionKernel& k) { return k.sup_bound(horizon); },
        [](const TransitionKernel& k) { return k.empty(); }, opts, "transition_kernel");

    TransitionKernel sum(a.origin(), n, {});
    for (const auto& k : rec.kept)
        sum = sum + k;
    auto generator = kernel_mul(a_terms, rec.kept.back());

    KernelExpansion out{std::move(sum), static_cast<int>(rec.kept.size()), rec.exact, 0.0, std::move(generator),
                        std::move(rec.report)};
    if (!rec.exact)
        out.tail_estimate = std::max(rec.omitted->sup_bound(horizon), out.residual_generator.sup_bound(horizon));
    return out;
}

} // namespace fracpb
