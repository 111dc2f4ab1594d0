#pragma once

#include "fracpb/solver.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace fracpb {

/// Malformed problem document. line() is 1-based, 0 when unknown.
class parse_error : public std::runtime_error
{
public:
    parse_error(const std::string& what, int line);
    int line() const noexcept { return line_; }

private:
    int line_;
};

/// A problem definition as read from disk.
///
///     alpha: 0.5
///     t0: 0
///     horizon: 1
///     A:                      # A(t) = sum_m A_m (t - t0)^m
///       - power: 1
///         matrix: [[0, 1], [0, 0]]
///     x0: [0, 1]              # J^{1-alpha} x at t0, not x(t0)
///     u:                      # optional, u(t) = sum c (t - t0)^exponent
///       - exponent: 0
///         value: [1, 0]
///     grid: 512               # optional: force the sampled path
///     tol: 1e-12              # optional
///     max_terms: 64           # optional
///
/// Unknown keys are rejected; n is inferred from x0 and checked against every block.
struct ProblemFile
{
    IvpProblem problem;
    std::optional<int> grid;
    std::optional<double> tol;
    std::optional<int> max_terms;
};

ProblemFile parse_problem(const std::string& text);
ProblemFile load_problem(const std::string& path);

/// Inverse of parse_problem; doubles are written with 17 significant digits so
/// the result re-parses to an identical problem. Sampled A or u cannot be written.
std::string serialize_problem(const ProblemFile& file);

} // namespace fracpb
