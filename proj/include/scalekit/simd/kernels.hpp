#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

// Float inner loops used by the norm, residual and elimination code.
namespace scalekit::kernels {

enum class Backend { scalar, avx2, neon };

struct Table {
  double (*weighted_sumsq)(const double* x, const double* w, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*sumsq_diff)(const double* x, const double* y, std::size_t n);
  double (*max_abs)(const double* x, std::size_t n);
};

const Table& table(Backend b);
std::vector<Backend> available_backends();
Backend active_backend();
// Overrides runtime detection; returns false if the backend is not usable here.
bool force_backend(Backend b);
std::string_view backend_name(Backend b);

inline double weighted_sumsq(const double* x, const double* w, std::size_t n) {
  return table(active_backend()).weighted_sumsq(x, w, n);
}
inline double dot(const double* x, const double* y, std::size_t n) {
  return table(active_backend()).dot(x, y, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  table(active_backend()).axpy(a, x, y, n);
}
inline double sumsq_diff(const double* x, const double* y, std::size_t n) {
  return table(active_backend()).sumsq_diff(x, y, n);
}
inline double max_abs(const double* x, std::size_t n) { return table(active_backend()).max_abs(x, n); }

namespace detail {
extern const Table scalar_table;
#if defined(SCALEKIT_HAVE_AVX2)
extern const Table avx2_table;
#endif
#if defined(SCALEKIT_HAVE_NEON)
extern const Table neon_table;
#endif
}  // namespace detail

}  // namespace scalekit::kernels
