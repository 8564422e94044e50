#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <utility>
#include <vector>

#include "scalekit/numeric.hpp"

namespace scalekit {

// Finite-support sequence; entries past the stored range are zero.
template <class S>
class BasicVector {
 public:
  BasicVector() = default;
  explicit BasicVector(std::vector<S> c, int level = 0) : c_(std::move(c)), level_(level) {}
  BasicVector(std::initializer_list<S> c) : c_(c) {}

  static BasicVector unit(std::size_t k, S value = S(1)) {
    BasicVector v;
    v.at(k) = value;
    return v;
  }

  std::size_t support() const { return c_.size(); }
  S operator[](std::size_t k) const { return k < c_.size() ? c_[k] : S{}; }
  S& at(std::size_t k) {
    if (k >= c_.size()) c_.resize(k + 1, S{});
    return c_[k];
  }
  const std::vector<S>& coeffs() const { return c_; }
  std::vector<S>& coeffs() { return c_; }

  int declared_level() const { return level_; }
  void set_declared_level(int m) { level_ = m; }

  BasicVector& trim() {
    while (!c_.empty() && exactly_zero(c_.back())) c_.pop_back();
    return *this;
  }
  bool is_zero() const {
    return std::all_of(c_.begin(), c_.end(), [](const S& s) { return exactly_zero(s); });
  }
  BasicVector truncated(std::size_t n) const {
    BasicVector r(*this);
    if (r.c_.size() > n) r.c_.resize(n);
    return r;
  }

  BasicVector& operator+=(const BasicVector& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), S{});
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  BasicVector& operator-=(const BasicVector& o) {
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), S{});
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  BasicVector& operator*=(const S& a) {
    for (auto& x : c_) x *= a;
    return *this;
  }
  friend BasicVector operator+(BasicVector a, const BasicVector& b) { return a += b; }
  friend BasicVector operator-(BasicVector a, const BasicVector& b) { return a -= b; }
  friend BasicVector operator*(const S& s, BasicVector a) { return a *= s; }
  friend BasicVector operator-(BasicVector a) { return a *= S(-1); }
  friend bool operator==(const BasicVector& a, const BasicVector& b) {
    const std::size_t n = std::max(a.support(), b.support());
    for (std::size_t i = 0; i < n; ++i)
      if (!(a[i] == b[i])) return false;
    return true;
  }

 private:
  std::vector<S> c_;
  int level_ = 0;
};

using Vector = BasicVector<double>;
using QVector = BasicVector<Rational>;
using CVector = BasicVector<Complex>;

template <class T, class S>
BasicVector<T> convert(const BasicVector<S>& v) {
  std::vector<T> out;
  out.reserve(v.support());
  for (const auto& x : v.coeffs()) {
    if constexpr (std::is_same_v<T, S>) {
      out.push_back(x);
    } else if constexpr (std::is_same_v<S, Rational>) {
      out.push_back(from_rational<T>(x));
    } else if constexpr (std::is_same_v<S, double>) {
      out.push_back(from_double<T>(x));
    } else {
      static_assert(std::is_same_v<T, double>, "complex converts only to double");
      out.push_back(x.real());
    }
  }
  return BasicVector<T>(std::move(out), v.declared_level());
}

// Tuple of vectors, one per block of a product space.
template <class S>
struct BasicPoint {
  std::vector<BasicVector<S>> blocks;

  BasicPoint() = default;
  explicit BasicPoint(std::vector<BasicVector<S>> b) : blocks(std::move(b)) {}
  BasicPoint(std::initializer_list<BasicVector<S>> b) : blocks(b) {}
  static BasicPoint zeros(std::size_t nblocks) { return BasicPoint(std::vector<BasicVector<S>>(nblocks)); }

  std::size_t size() const { return blocks.size(); }
  BasicVector<S>& operator[](std::size_t i) { return blocks[i]; }
  const BasicVector<S>& operator[](std::size_t i) const { return blocks[i]; }

  BasicPoint& operator+=(const BasicPoint& o) {
    if (o.size() > size()) blocks.resize(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) blocks[i] += o.blocks[i];
    return *this;
  }
  BasicPoint& operator-=(const BasicPoint& o) {
    if (o.size() > size()) blocks.resize(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) blocks[i] -= o.blocks[i];
    return *this;
  }
  BasicPoint& operator*=(const S& a) {
    for (auto& b : blocks) b *= a;
    return *this;
  }
  friend BasicPoint operator+(BasicPoint a, const BasicPoint& b) { return a += b; }
  friend BasicPoint operator-(BasicPoint a, const BasicPoint& b) { return a -= b; }
  friend BasicPoint operator*(const S& s, BasicPoint a) { return a *= s; }
  friend bool operator==(const BasicPoint& a, const BasicPoint& b) {
    const std::size_t n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      const BasicVector<S> za, zb;
      if (!((i < a.size() ? a.blocks[i] : za) == (i < b.size() ? b.blocks[i] : zb))) return false;
    }
    return true;
  }

  // Concatenation of block lists.
  friend BasicPoint concat(const BasicPoint& a, const BasicPoint& b) {
    BasicPoint r(a);
    r.blocks.insert(r.blocks.end(), b.blocks.begin(), b.blocks.end());
    return r;
  }
  BasicPoint slice(std::size_t from, std::size_t count) const {
    return BasicPoint(std::vector<BasicVector<S>>(blocks.begin() + static_cast<std::ptrdiff_t>(from),
                                                  blocks.begin() + static_cast<std::ptrdiff_t>(from + count)));
  }
};

using Point = BasicPoint<double>;
using QPoint = BasicPoint<Rational>;
using CPoint = BasicPoint<Complex>;

template <class T, class S>
BasicPoint<T> convert(const BasicPoint<S>& p) {
  BasicPoint<T> r;
  for (const auto& b : p.blocks) r.blocks.push_back(convert<T>(b));
  return r;
}

struct ScaleSpace {
  enum class Kind { finite, sequence };
  Kind kind = Kind::sequence;
  std::size_t dim = 0;
  double delta = 1.0;
  // Level m of this space is level m + level_offset of the underlying scale (E^j views).
  int level_offset = 0;

  static ScaleSpace finite(std::size_t n) { return {Kind::finite, n, 1.0, 0}; }
  static ScaleSpace sequence(double delta) { return {Kind::sequence, 0, delta, 0}; }

  bool is_finite() const { return kind == Kind::finite; }
  ScaleSpace shifted(int j) const {
    ScaleSpace s = *this;
    s.level_offset += j;
    return s;
  }
  double weight(int m, std::size_t k) const;
  bool same_model(const ScaleSpace& o) const {
    return kind == o.kind && dim == o.dim && (kind == Kind::finite || delta == o.delta);
  }
  friend bool operator==(const ScaleSpace&, const ScaleSpace&) = default;
};

struct ProductSpace {
  std::vector<ScaleSpace> blocks;

  ProductSpace() = default;
  explicit ProductSpace(std::vector<ScaleSpace> b) : blocks(std::move(b)) {}
  ProductSpace(std::initializer_list<ScaleSpace> b) : blocks(b) {}
  std::size_t size() const { return blocks.size(); }
  const ScaleSpace& operator[](std::size_t i) const { return blocks[i]; }
  ProductSpace shifted(int j) const {
    ProductSpace r(*this);
    for (auto& b : r.blocks) b = b.shifted(j);
    return r;
  }
  friend bool operator==(const ProductSpace&, const ProductSpace&) = default;
};

ProductSpace direct_sum(const ProductSpace& a, const ProductSpace& b);
inline ProductSpace direct_sum(const ScaleSpace& a, const ScaleSpace& b) { return ProductSpace{a, b}; }

double level_norm(const ScaleSpace& space, const Vector& x, int m);
double level_norm(const ScaleSpace& space, const QVector& x, int m);
double level_norm(const ScaleSpace& space, const CVector& x, int m);
double level_norm(const ProductSpace& space, const Point& x, int m);
double level_norm(const ProductSpace& space, const QPoint& x, int m);
double level_norm(const ProductSpace& space, const CPoint& x, int m);

// Singular values of the inclusion level m+1 -> level m.
std::vector<double> embedding_spectrum(const ScaleSpace& space, int m, std::size_t count);
// Number of embedding singular values strictly above eps.
std::size_t embedding_count_above(const ScaleSpace& space, double eps);
// Level-m norm of x minus its truncation to the first n coordinates.
double truncation_tail(const ScaleSpace& space, const Vector& x, int m, std::size_t n);

void check_membership(const ScaleSpace& space, std::size_t support);

struct PartialQuadrant {
  std::size_t corner_dim = 0;
  ScaleSpace complement = ScaleSpace::finite(0);
};

struct QuadrantMembership {
  bool inside = false;
  std::vector<std::size_t> active;
};

// w.blocks = {corner coordinates in R^n, complement part}
QuadrantMembership quadrant_contains(const PartialQuadrant& q, const Point& w, double tau = 1e-9);

}  // namespace scalekit
