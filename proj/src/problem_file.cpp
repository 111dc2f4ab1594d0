#include "fracpb/problem_file.hpp"

#include "fracpb/errors.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace fracpb {

parse_error::parse_error(const std::string& what, int line)
    : std::runtime_error(line > 0 ? fmt::format("line {}: {}", line, what) : what), line_(line)
{
}

namespace {

int line_of(const YAML::Node& node)
{
    const auto mark = node.Mark();
    return mark.is_null() ? 0 : mark.line + 1;
}

[[noreturn]] void fail(const YAML::Node& node, const std::string& what)
{
    throw parse_error(what, line_of(node));
}

void reject_unknown(const YAML::Node& map, const std::set<std::string>& allowed, const char* where)
{
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (!allowed.count(key))
            fail(kv.first, fmt::format("unknown key '{}' in {}", key, where));
    }
}

YAML::Node require(const YAML::Node& map, const char* key, const char* where)
{
    auto node = map[key];
    if (!node)
        fail(map, fmt::format("missing key '{}' in {}", key, where));
    return node;
}

double real(const YAML::Node& node, const char* what)
{
    if (!node.IsScalar())
        fail(node, fmt::format("{} must be a number", what));
    double v;
    if (!YAML::convert<double>::decode(node, v) || !std::isfinite(v))
        fail(node, fmt::format("{} must be a finite number, got '{}'", what, node.Scalar()));
    return v;
}

int integer(const YAML::Node& node, const char* what)
{
    if (!node.IsScalar())
        fail(node, fmt::format("{} must be an integer", what));
    int v;
    if (!YAML::convert<int>::decode(node, v))
        fail(node, fmt::format("{} must be an integer, got '{}'", what, node.Scalar()));
    return v;
}

Eigen::VectorXd vector(const YAML::Node& node, const char* what)
{
    if (!node.IsSequence() || node.size() == 0)
        fail(node, fmt::format("{} must be a non-empty list of numbers", what));
    Eigen::VectorXd v(static_cast<Eigen::Index>(node.size()));
    for (std::size_t i = 0; i < node.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = real(node[i], what);
    return v;
}

Eigen::MatrixXd matrix(const YAML::Node& node, Eigen::Index n)
{
    if (!node.IsSequence() || node.size() != static_cast<std::size_t>(n))
        fail(node, fmt::format("matrix must have {} rows (n inferred from x0)", n));
    Eigen::MatrixXd m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = vector(node[static_cast<std::size_t>(i)], "matrix row");
        if (row.size() != n)
            fail(node[static_cast<std::size_t>(i)], fmt::format("matrix row {} has {} entries, expected {}", i + 1,
                                                                row.size(), n));
        m.row(i) = row.transpose();
    }
    return m;
}

ProblemFile parse_root(const YAML::Node& root)
{
    if (!root.IsMap())
        fail(root, "problem must be a mapping of keys to values");
    reject_unknown(root, {"alpha", "t0", "horizon", "A", "x0", "u", "grid", "tol", "max_terms"}, "problem");

    const double alpha = real(require(root, "alpha", "problem"), "alpha");
    const double t0 = root["t0"] ? real(root["t0"], "t0") : 0.0;
    const auto horizon_node = require(root, "horizon", "problem");
    const double horizon = real(horizon_node, "horizon");
    if (!(alpha > 0.0 && alpha < 1.0))
        fail(root["alpha"], fmt::format("alpha must lie in (0, 1), got {}", alpha));
    if (!(horizon > t0))
        fail(horizon_node, fmt::format("horizon {} must exceed t0 {}", horizon, t0));

    const auto x0_node = require(root, "x0", "problem");
    const Eigen::VectorXd x0 = vector(x0_node, "x0");
    const Eigen::Index n = x0.size();

    const auto a_node = require(root, "A", "problem");
    if (!a_node.IsSequence())
        fail(a_node, "A must be a list of {power, matrix} entries");
    std::vector<MatrixPolynomial::Coefficient> coeffs;
    std::set<int> powers;
    for (const auto& entry : a_node) {
        if (!entry.IsMap())
            fail(entry, "A entries must be mappings with keys power and matrix");
        reject_unknown(entry, {"power", "matrix"}, "A entry");
        const auto power_node = require(entry, "power", "A entry");
        const int power = integer(power_node, "power");
        if (power < 0)
            fail(power_node, "power must be non-negative");
        if (!powers.insert(power).second)
            fail(power_node, fmt::format("power {} appears twice in A", power));
        coeffs.push_back({power, matrix(require(entry, "matrix", "A entry"), n)});
    }

    IvpProblem problem{alpha, t0, horizon, MatrixPolynomial(t0, n, std::move(coeffs)), x0, std::nullopt};

    if (const auto u_node = root["u"]) {
        if (!u_node.IsSequence())
            fail(u_node, "u must be a list of {exponent, value} entries");
        std::vector<SeriesTerm> terms;
        for (const auto& entry : u_node) {
            if (!entry.IsMap())
                fail(entry, "u entries must be mappings with keys exponent and value");
            reject_unknown(entry, {"exponent", "value"}, "u entry");
            const auto exp_node = require(entry, "exponent", "u entry");
            const double exponent = real(exp_node, "exponent");
            if (exponent < 0.0)
                fail(exp_node, "u must be continuous on [t0, T]: exponent must be >= 0");
            const auto value_node = require(entry, "value", "u entry");
            const Eigen::VectorXd value = vector(value_node, "value");
            if (value.size() != n)
                fail(value_node, fmt::format("u value has {} entries, expected {}", value.size(), n));
            terms.push_back({exponent + 1.0, value});
        }
        problem.u = FracPowerSeries(t0, n, 1, std::move(terms));
    }

    ProblemFile file{std::move(problem), std::nullopt, std::nullopt, std::nullopt};
    if (const auto g = root["grid"]) {
        file.grid = integer(g, "grid");
        if (*file.grid < 4)
            fail(g, "grid must be at least 4 intervals");
    }
    if (const auto t = root["tol"]) {
        file.tol = real(t, "tol");
        if (!(*file.tol > 0.0))
            fail(t, "tol must be positive");
    }
    if (const auto m = root["max_terms"]) {
        file.max_terms = integer(m, "max_terms");
        if (*file.max_terms < 1)
            fail(m, "max_terms must be positive");
    }
    return file;
}

std::string number(double v)
{
    return fmt::format("{:.17g}", v);
}

std::string list(const Eigen::VectorXd& v)
{
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i)
        out += (i ? ", " : "") + number(v(i));
    return out + "]";
}

} // namespace

ProblemFile parse_problem(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw parse_error(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
    }
    try {
        return parse_root(root);
    } catch (const parse_error&) {
        throw;
    } catch (const YAML::Exception& e) {
        throw parse_error(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1);
    } catch (const std::exception& e) {
        // domain/dimension errors raised while building the problem
        throw parse_error(e.what(), 0);
    }
}

ProblemFile load_problem(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw parse_error(fmt::format("cannot open problem file '{}'", path), 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_problem(buf.str());
}

std::string serialize_problem(const ProblemFile& file)
{
    const auto& p = file.problem;
    const auto* a = std::get_if<MatrixPolynomial>(&p.a);
    if (a == nullptr)
        throw std::invalid_argument("serialize_problem: sampled coefficients have no file representation");

    std::string out;
    out += fmt::format("alpha: {}\nt0: {}\nhorizon: {}\n", number(p.alpha), number(p.t0), number(p.horizon));
    out += "A:\n";
    if (a->coeffs().empty())
        out += fmt::format("  - power: 0\n    matrix: [{}]\n", [&] {
            std::string rows;
            for (Eigen::Index i = 0; i < a->dim(); ++i)
                rows += (i ? ", " : "") + list(Eigen::VectorXd::Zero(a->dim()));
            return rows;
        }());
    for (const auto& c : a->coeffs()) {
        out += fmt::format("  - power: {}\n    matrix: [", c.power);
        for (Eigen::Index i = 0; i < c.matrix.rows(); ++i)
            out += (i ? ", " : "") + list(c.matrix.row(i).transpose());
        out += "]\n";
    }
    out += fmt::format("x0: {}\n", list(p.x0));
    if (p.u) {
        const auto* u = std::get_if<FracPowerSeries>(&*p.u);
        if (u == nullptr)
            throw std::invalid_argument("serialize_problem: sampled input has no file representation");
        out += "u:\n";
        for (const auto& t : u->terms())
            out += fmt::format("  - exponent: {}\n    value: {}\n", number(t.gamma - 1.0), list(t.coeff.col(0)));
    }
    if (file.grid)
        out += fmt::format("grid: {}\n", *file.grid);
    if (file.tol)
        out += fmt::format("tol: {}\n", number(*file.tol));
    if (file.max_terms)
        out += fmt::format("max_terms: {}\n", *file.max_terms);
    return out;
}

} // namespace fracpb
