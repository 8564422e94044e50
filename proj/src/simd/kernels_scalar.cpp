#include "scalekit/simd/kernels.hpp"

#include <cmath>

namespace scalekit::kernels::detail {
namespace {

double weighted_sumsq(const double* x, const double* w, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = x[i] * w[i];
    s += t * t;
  }
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sumsq_diff(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return s;
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
  return m;
}

}  // namespace

const Table scalar_table{weighted_sumsq, dot, axpy, sumsq_diff, max_abs};

}  // namespace scalekit::kernels::detail
