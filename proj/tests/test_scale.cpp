#include <doctest.h>

#include <cmath>

#include "scalekit/scale.hpp"

using namespace scalekit;

TEST_CASE("level norm of unit vectors") {
  const auto E = ScaleSpace::sequence(1.0);
  CHECK(level_norm(E, Vector::unit(0), 5) == doctest::Approx(1.0));
  // e^2 written out independently of the weight code
  CHECK(level_norm(E, Vector::unit(2), 1) == doctest::Approx(7.38905609893065).epsilon(1e-12));
  CHECK(level_norm(E, Vector{}, 3) == 0.0);
  CHECK(level_norm(E, QVector::unit(2, Rational(1, 2)), 1) == doctest::Approx(0.5 * 7.38905609893065));
}

TEST_CASE("level norms are monotone in the level") {
  const auto E = ScaleSpace::sequence(0.7);
  const Vector x{0.3, -1.0, 2.0, 0.0, 1e-3};
  for (int m = 0; m < 6; ++m) CHECK(level_norm(E, x, m) <= level_norm(E, x, m + 1));
}

TEST_CASE("finite-dimensional scales are constant") {
  const auto F = ScaleSpace::finite(3);
  const Vector x{1.0, 2.0, 2.0};
  for (int m = 0; m < 4; ++m) CHECK(level_norm(F, x, m) == doctest::Approx(3.0));
  CHECK_THROWS_AS(level_norm(F, Vector{1, 2, 3, 4}, 0), DomainError);
  CHECK_THROWS_AS(embedding_spectrum(F, 0, 3), DomainError);
}

TEST_CASE("embedding spectrum") {
  const auto E = ScaleSpace::sequence(1.0);
  const auto s = embedding_spectrum(E, 0, 20);
  for (int k = 0; k < 20; ++k) CHECK(std::fabs(s[k] - std::pow(M_E, -k)) < 1e-12);
  CHECK(embedding_spectrum(ScaleSpace::sequence(2.0), 0, 1) == std::vector<double>{1.0});
  for (double eps : {0.5, 0.1, 1e-3, 1e-7}) {
    for (double delta : {0.5, 1.0, 2.0}) {
      const double expect = std::ceil(std::log(1.0 / eps) / delta);
      const double got = static_cast<double>(embedding_count_above(ScaleSpace::sequence(delta), eps));
      CHECK(std::fabs(got - expect) <= 1.0);
    }
  }
}

TEST_CASE("direct sums use the l2 combination") {
  const auto E = ScaleSpace::sequence(0.5);
  const auto S = direct_sum(E, E);
  for (int m = 0; m < 4; ++m)
    CHECK(level_norm(S, Point{Vector::unit(1), Vector::unit(1)}, m) ==
          doctest::Approx(std::sqrt(2.0) * std::exp(0.5 * m)));
  CHECK(level_norm(direct_sum(E, ScaleSpace::finite(0)), Point{Vector{1, 2}, Vector{}}, 2) ==
        doctest::Approx(level_norm(E, Vector{1, 2}, 2)));
}

TEST_CASE("truncation converges in every level") {
  const auto E = ScaleSpace::sequence(1.0);
  Vector x;
  for (std::size_t k = 0; k < 12; ++k) x.at(k) = std::exp(-3.0 * k);
  for (int m = 0; m < 3; ++m) {
    double prev = INFINITY;
    for (std::size_t n = 0; n <= 12; ++n) {
      const double t = truncation_tail(E, x, m, n);
      CHECK(t <= prev);
      prev = t;
    }
    CHECK(prev == 0.0);
  }
}

TEST_CASE("partial quadrant membership") {
  PartialQuadrant q{2, ScaleSpace::sequence(1.0)};
  auto r = quadrant_contains(q, Point{Vector{0.0, 1.0}, Vector{5.0}});
  CHECK(r.inside);
  CHECK(r.active == std::vector<std::size_t>{0});
  CHECK_FALSE(quadrant_contains(q, Point{Vector{-1.0, 1.0}, Vector{}}).inside);
  PartialQuadrant q0{0, ScaleSpace::sequence(1.0)};
  auto r0 = quadrant_contains(q0, Point{Vector{}, Vector{-3.0}});
  CHECK(r0.inside);
  CHECK(r0.active.empty());
  CHECK_THROWS_AS(quadrant_contains(q, Point{Vector{1, 1, 1}, Vector{}}), DomainError);
}

TEST_CASE("large weights do not overflow to nan") {
  const auto E = ScaleSpace::sequence(1.0);
  Vector x;
  x.at(900) = 1e-300;
  const double n = level_norm(E, x, 1);
  CHECK(std::isfinite(n));
  CHECK(n == doctest::Approx(std::exp(900.0 - 300.0 * std::log(10.0))).epsilon(1e-9));
}

TEST_CASE("rational parsing") {
  CHECK(parse_rational("1/8") == Rational(1, 8));
  CHECK(parse_rational("-0.125") == Rational(-1, 8));
  CHECK(parse_rational("1e-3") == Rational(1, 1000));
  CHECK(parse_rational("3") == Rational(3));
  CHECK(to_string(Rational(-6, 4)) == "-3/2");
  CHECK_THROWS(parse_rational("1/0"));
  CHECK_THROWS(parse_rational("abc"));
}
