#include "fracpb/text_output.hpp"

#include "fracpb/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace fracpb {

namespace {

// Regular factor and exponent of x at its origin: x ~ c (t - t0)^p.
std::pair<Eigen::VectorXd, double> origin_behaviour(const Solution& sol, Eigen::Index n)
{
    if (const auto* s = std::get_if<FracPowerSeries>(&sol.representation)) {
        if (s->empty())
            return {Eigen::VectorXd::Zero(n), 0.0};
        const double lead = s->leading_gamma();
        Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
        for (const auto& t : s->terms())
            if (t.gamma - lead <= exponent_merge_tol)
                c += t.coeff.col(0);
        if (lead > 1.0 + exponent_merge_tol)
            return {Eigen::VectorXd::Zero(n), 0.0};
        return {c, std::abs(lead - 1.0) <= exponent_merge_tol ? 0.0 : lead - 1.0};
    }
    const auto& g = std::get<SampledMatrixFunction>(sol.representation);
    if (!g.left_defined())
        throw domain_error("solution samples are undefined at t0");
    const double sigma = g.left_exponent();
    if (sigma > 1.0)
        return {Eigen::VectorXd::Zero(n), 0.0};
    return {g.regular(0).col(0), sigma == 1.0 ? 0.0 : sigma - 1.0};
}

} // namespace

std::string format_number(double x)
{
    if (x == 0.0)
        return "0";
    if (std::abs(x) >= 1e6)
        return fmt::format("{:.8e}", x);
    return fmt::format("{:.9g}", x);
}

std::vector<double> sample_times(double t0, double horizon, int samples)
{
    if (samples < 1)
        throw std::invalid_argument("sample count must be positive");
    std::vector<double> t(static_cast<std::size_t>(samples));
    for (int k = 1; k <= samples; ++k)
        t[static_cast<std::size_t>(k - 1)] = k == samples ? horizon : t0 + k * (horizon - t0) / samples;
    return t;
}

std::string trajectory_csv(const Solution& sol, double t0, double horizon, int samples, bool include_origin)
{
    const auto times = sample_times(t0, horizon, samples);
    const Eigen::Index n = sol.eval(times.front()).size();

    std::string out = "t";
    for (Eigen::Index i = 1; i <= n; ++i)
        out += fmt::format(",x{}", i);
    out += include_origin ? ",exponent\n" : "\n";

    if (include_origin) {
        const auto [c, p] = origin_behaviour(sol, n);
        out += format_number(t0);
        for (Eigen::Index i = 0; i < n; ++i)
            out += "," + format_number(c(i));
        out += "," + format_number(p) + "\n";
    }
    for (double t : times) {
        const Eigen::VectorXd x = sol.eval(t);
        out += format_number(t);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!std::isfinite(x(i)))
                throw overflow_error(fmt::format("solution is not finite at t = {}", t));
            out += "," + format_number(x(i));
        }
        out += include_origin ? ",0\n" : "\n";
    }
    return out;
}

std::string closed_form_text(const FracPowerSeries& x, const std::string& name)
{
    const std::string base =
        x.origin() == 0.0 ? std::string("t") : fmt::format("(t - {})", format_number(x.origin()));
    std::string out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            std::string lhs = x.cols() == 1 ? fmt::format("{}{}(t)", name, i + 1)
                                            : fmt::format("{}{}{}(t)", name, i + 1, j + 1);
            std::string rhs;
            for (const auto& t : x.terms()) {
                const double c = t.coeff(i, j);
                if (c == 0.0)
                    continue;
                if (!rhs.empty())
                    rhs += c < 0.0 ? " - " : " + ";
                else if (c < 0.0)
                    rhs += "-";
                rhs += fmt::format("{} * {}^{}", format_number(std::abs(c)), base, format_number(t.gamma - 1.0));
            }
            out += lhs + " = " + (rhs.empty() ? "0" : rhs) + "\n";
        }
    }
    return out;
}

std::string format_matrix(const Eigen::MatrixXd& m)
{
    std::string out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out += "[";
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            out += (j ? ", " : "") + format_number(m(i, j));
        out += "]\n";
    }
    return out;
}

} // namespace fracpb
