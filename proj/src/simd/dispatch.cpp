#include <atomic>

#include "scalekit/simd/kernels.hpp"

namespace scalekit::kernels {
namespace {

bool usable(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(SCALEKIT_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Backend::neon:
#if defined(SCALEKIT_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend detect() {
  if (usable(Backend::avx2)) return Backend::avx2;
  if (usable(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect()};
  return b;
}

}  // namespace

const Table& table(Backend b) {
  switch (b) {
#if defined(SCALEKIT_HAVE_AVX2)
    case Backend::avx2:
      return detail::avx2_table;
#endif
#if defined(SCALEKIT_HAVE_NEON)
    case Backend::neon:
      return detail::neon_table;
#endif
    default:
      return detail::scalar_table;
  }
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon})
    if (usable(b)) out.push_back(b);
  return out;
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

bool force_backend(Backend b) {
  if (!usable(b)) return false;
  current().store(b, std::memory_order_relaxed);
  return true;
}

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "?";
}

}  // namespace scalekit::kernels
