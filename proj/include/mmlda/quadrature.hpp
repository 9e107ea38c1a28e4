#pragma once

#include <functional>
#include <stdexcept>

namespace mmlda {

class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int evaluations = 0;
};

/// Globally adaptive Gauss-Kronrod (7/15) on [a, b], starting from
/// `initial_intervals` equal panels so narrow peaks are not missed. Throws
/// QuadratureError if the absolute tolerance is not met within max_intervals.
QuadratureResult integrate_gauss_kronrod(const std::function<double(double)>& f, double a,
                                         double b, double abs_tol, int max_intervals = 2000,
                                         int initial_intervals = 1);

/// Composite trapezoid rule with `points` equally spaced nodes.
double integrate_trapezoid(const std::function<double(double)>& f, double a, double b,
                           long points);

}  // namespace mmlda
