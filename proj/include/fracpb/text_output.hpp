#pragma once

#include "fracpb/series.hpp"
#include "fracpb/solver.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fracpb {

/// 9 significant digits; scientific from |x| >= 1e6. Negative zero prints as 0.
std::string format_number(double x);

/// samples equally spaced points t0 + k (T - t0) / samples, k = 1 .. samples.
std::vector<double> sample_times(double t0, double horizon, int samples);

/// "t,x1,...,xn" followed by one row per sample time, LF line endings.
///
/// With include_origin a leading row at t0 is added together with an "exponent"
/// column: on that row x holds the regular factor c of x ~ c (t - t0)^exponent;
/// every other row has exponent 0 and plain values.
std::string trajectory_csv(const Solution& sol, double t0, double horizon, int samples,
                           bool include_origin = false);

/// One line per component: "x1(t) = c * (t - t0)^p + ...".
std::string closed_form_text(const FracPowerSeries& x, const std::string& name = "x");

/// Rows as "[a, b, ...]", one per line.
std::string format_matrix(const Eigen::MatrixXd& m);

} // namespace fracpb
