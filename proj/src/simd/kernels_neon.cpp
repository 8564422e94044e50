#include "scalekit/simd/kernels.hpp"

#if defined(SCALEKIT_HAVE_NEON)
#include <arm_neon.h>

#include <cmath>

namespace scalekit::kernels::detail {
namespace {

double weighted_sumsq(const double* x, const double* w, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vmulq_f64(vld1q_f64(x + i), vld1q_f64(w + i));
    acc = vfmaq_f64(acc, t, t);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double t = x[i] * w[i];
    s += t * t;
  }
  return s;
}

double dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vfmaq_f64(acc, vld1q_f64(x + i), vld1q_f64(y + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += a * x[i];
}

double sumsq_diff(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t t = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    acc = vfmaq_f64(acc, t, t);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    const double t = x[i] - y[i];
    s += t * t;
  }
  return s;
}

double max_abs(const double* x, std::size_t n) {
  float64x2_t m = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) m = vmaxq_f64(m, vabsq_f64(vld1q_f64(x + i)));
  double r = vmaxvq_f64(m);
  for (; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
  return r;
}

}  // namespace

const Table neon_table{weighted_sumsq, dot, axpy, sumsq_diff, max_abs};

}  // namespace scalekit::kernels::detail
#endif
