#include "mmlda/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

namespace mmlda {

namespace {

// Kronrod nodes on [0, 1]; odd indices are the embedded Gauss points.
constexpr double kNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Interval {
  double a, b, value, error;
  bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gk15(const std::function<double(double)>& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[7];
  double gauss = fc * kGaussWeights[3];
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kNodes[i];
    const double sum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[i] * sum;
    if (i % 2 == 1) gauss += kGaussWeights[i / 2] * sum;
  }
  return {a, b, kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace

QuadratureResult integrate_gauss_kronrod(const std::function<double(double)>& f, double a,
                                         double b, double abs_tol, int max_intervals,
                                         int initial_intervals) {
  if (initial_intervals < 1) throw QuadratureError("need at least one initial interval");
  std::priority_queue<Interval> heap;
  double total = 0.0, err = 0.0;
  const double width = (b - a) / initial_intervals;
  for (int k = 0; k < initial_intervals; ++k) {
    const double lo = a + width * k;
    const double hi = k + 1 == initial_intervals ? b : lo + width;
    Interval piece = gk15(f, lo, hi);
    total += piece.value;
    err += piece.error;
    heap.push(piece);
  }
  int evals = 15 * initial_intervals;
  int intervals = initial_intervals;
  while (err > abs_tol) {
    if (intervals >= max_intervals) {
      throw QuadratureError("Gauss-Kronrod did not converge: error estimate " +
                            std::to_string(err) + " after " + std::to_string(intervals) +
                            " intervals");
    }
    Interval worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Interval left = gk15(f, worst.a, mid);
    Interval right = gk15(f, mid, worst.b);
    evals += 30;
    ++intervals;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    if (!std::isfinite(total)) throw QuadratureError("integrand produced a non-finite value");
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  double sum = 0.0, esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  return {sum, esum, evals};
}

double integrate_trapezoid(const std::function<double(double)>& f, double a, double b,
                           long points) {
  if (points < 2) throw QuadratureError("trapezoid rule needs at least 2 points");
  const double h = (b - a) / static_cast<double>(points - 1);
  double s = 0.5 * (f(a) + f(b));
  for (long i = 1; i < points - 1; ++i) s += f(a + h * static_cast<double>(i));
  return s * h;
}

}  // namespace mmlda
