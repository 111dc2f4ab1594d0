#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace fracpb {

struct ValidationCheck
{
    std::string suite;
    std::string name;
    double residual;
    double tolerance;

    bool passed() const { return residual <= tolerance; }
};

struct ValidationOptions
{
    /// Adds the differentiation-under-the-integral checks and larger random samples.
    bool full = false;
    std::uint64_t seed = 20240611;
    /// Gamma used to build reference values; defaults to an implementation
    /// independent of the library's. Replacing it is the negative-control hook.
    std::function<double(double)> reference_gamma;
};

struct ValidationReport
{
    std::vector<ValidationCheck> checks;

    bool passed() const;
    std::size_t failures() const;
};

/// Runs the operator-identity suites of the series algebra, the grid operators,
/// the transition matrix and the solver against their frozen tolerances.
ValidationReport run_validation(const ValidationOptions& opts = {});

/// One line per check plus a summary line.
std::string format_report(const ValidationReport& report);

} // namespace fracpb
