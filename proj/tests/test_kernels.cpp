#include <doctest.h>

#include <cmath>
#include <random>

#include "scalekit/simd/kernels.hpp"

using namespace scalekit::kernels;

TEST_CASE("every available backend agrees with the scalar reference") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto& ref = table(Backend::scalar);
  for (Backend b : available_backends()) {
    CAPTURE(backend_name(b));
    const auto& t = table(b);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 1001u}) {
      std::vector<double> x(n), y(n), w(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = u(rng), y[i] = u(rng), w[i] = std::exp(u(rng));
      const double tol = 1e-13 * (1.0 + n);
      CHECK(std::fabs(t.weighted_sumsq(x.data(), w.data(), n) - ref.weighted_sumsq(x.data(), w.data(), n)) <=
            tol * (1 + ref.weighted_sumsq(x.data(), w.data(), n)));
      CHECK(std::fabs(t.dot(x.data(), y.data(), n) - ref.dot(x.data(), y.data(), n)) <= tol * (1 + n));
      CHECK(std::fabs(t.sumsq_diff(x.data(), y.data(), n) - ref.sumsq_diff(x.data(), y.data(), n)) <=
            tol * (1 + n));
      CHECK(t.max_abs(x.data(), n) == ref.max_abs(x.data(), n));
      auto y1 = y, y2 = y;
      t.axpy(0.37, x.data(), y1.data(), n);
      ref.axpy(0.37, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(y1[i] - y2[i]) <= 1e-15 * (1 + std::fabs(y2[i])));
    }
  }
}

TEST_CASE("backend override") {
  const Backend before = active_backend();
  CHECK(force_backend(Backend::scalar));
  CHECK(active_backend() == Backend::scalar);
  force_backend(before);
  CHECK(active_backend() == before);
}
