#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fracpb {

/// Argument outside the mathematical domain of an operation (t <= origin, x at a pole, ...).
class domain_error : public std::domain_error
{
public:
    using std::domain_error::domain_error;
};

/// Gamma evaluated at a non-positive integer.
class pole_error : public domain_error
{
public:
    using domain_error::domain_error;
};

/// Result not representable as a finite double.
class overflow_error : public std::overflow_error
{
public:
    using std::overflow_error::overflow_error;
};

/// Operands with incompatible dimensions or anchors.
class dimension_error : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A series did not meet its stopping rule within the configured term cap.
class convergence_error : public std::runtime_error
{
public:
    convergence_error(const std::string& what, std::vector<double> term_norms = {})
        : std::runtime_error(what), term_norms_(std::move(term_norms))
    {
    }

    const std::vector<double>& term_norms() const noexcept { return term_norms_; }

private:
    std::vector<double> term_norms_;
};

} // namespace fracpb
