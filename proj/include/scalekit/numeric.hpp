#pragma once

#include <gmpxx.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>

namespace scalekit {

using Rational = mpq_class;
using Complex = std::complex<double>;

enum class Regime { exact, floating };

inline const char* regime_name(Regime r) { return r == Regime::exact ? "exact" : "float"; }

// Raised when an exact (rational) evaluation meets a transcendental value.
struct InexactError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Tolerances {
  double zero = 1e-9;
  double sc1 = 1e-7;
  double chain = 1e-9;
  double idempotent = 1e-8;
  double fd2 = 1e-6;
  double cross_block = 1e-10;
};

inline Rational ratio(long num, long den = 1) {
  Rational q(num, den);
  q.canonicalize();
  return q;
}

Rational parse_rational(std::string_view text);
std::string to_string(const Rational& q);
Rational rational_from_double(double x);

inline double to_double(const Rational& q) { return q.get_d(); }
inline double to_double(double x) { return x; }

template <class S>
S from_rational(const Rational& q);
template <>
inline double from_rational<double>(const Rational& q) { return q.get_d(); }
template <>
inline Rational from_rational<Rational>(const Rational& q) { return q; }
template <>
inline Complex from_rational<Complex>(const Rational& q) { return {q.get_d(), 0.0}; }

template <class S>
S from_double(double x);
template <>
inline double from_double<double>(double x) { return x; }
template <>
inline Rational from_double<Rational>(double x) { return rational_from_double(x); }
template <>
inline Complex from_double<Complex>(double x) { return {x, 0.0}; }

inline double magnitude(double x) { return std::fabs(x); }
inline double magnitude(const Rational& q) { return std::fabs(q.get_d()); }
inline double magnitude(const Complex& z) { return std::abs(z); }

inline bool exactly_zero(double x) { return x == 0.0; }
inline bool exactly_zero(const Rational& q) { return sgn(q) == 0; }
inline bool exactly_zero(const Complex& z) { return z == Complex{}; }

template <class S>
inline constexpr bool is_exact_scalar = std::is_same_v<S, Rational>;

// exp for the scalar types; rational argument only when the result is rational (arg == 0)
template <class S>
S scalar_exp(const Rational& arg);
template <>
inline double scalar_exp<double>(const Rational& arg) { return std::exp(arg.get_d()); }
template <>
inline Complex scalar_exp<Complex>(const Rational& arg) { return {std::exp(arg.get_d()), 0.0}; }
template <>
inline Rational scalar_exp<Rational>(const Rational& arg) {
  if (sgn(arg) != 0) throw InexactError("exp of nonzero rational is irrational");
  return Rational(1);
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a > 0) == (b > 0))) ++q;
  return q;
}

}  // namespace scalekit
