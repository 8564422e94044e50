#include "scalekit/scale.hpp"

#include <cmath>
#include <limits>

#include "scalekit/simd/kernels.hpp"

namespace scalekit {

double ScaleSpace::weight(int m, std::size_t k) const {
  if (is_finite()) return 1.0;
  return std::exp(delta * static_cast<double>(m + level_offset) * static_cast<double>(k));
}

void check_membership(const ScaleSpace& space, std::size_t support) {
  if (space.is_finite() && support > space.dim)
    throw DomainError("vector support " + std::to_string(support) + " exceeds dimension " +
                      std::to_string(space.dim));
}

namespace {

double weighted_norm(const ScaleSpace& space, const std::vector<double>& mag, int m) {
  check_membership(space, mag.size());
  if (mag.empty()) return 0.0;
  const int lvl = m + space.level_offset;
  if (space.is_finite() || lvl == 0) return std::sqrt(kernels::dot(mag.data(), mag.data(), mag.size()));
  const double rate = space.delta * lvl;
  // weights stay finite below this index; past it, entries are accumulated in log space
  const double cap = 700.0 / std::fabs(rate);
  const std::size_t split = std::min<std::size_t>(mag.size(), static_cast<std::size_t>(cap));
  std::vector<double> w(split);
  for (std::size_t k = 0; k < split; ++k) w[k] = std::exp(rate * static_cast<double>(k));
  double s = kernels::weighted_sumsq(mag.data(), w.data(), split);
  for (std::size_t k = split; k < mag.size(); ++k) {
    if (mag[k] == 0.0) continue;
    const double t = std::exp(2.0 * (std::log(mag[k]) + rate * static_cast<double>(k)));
    s += t;
  }
  return std::sqrt(s);
}

template <class S>
std::vector<double> magnitudes(const BasicVector<S>& x) {
  std::vector<double> out;
  out.reserve(x.support());
  for (const auto& c : x.coeffs()) out.push_back(magnitude(c));
  return out;
}

template <class S>
double product_norm(const ProductSpace& space, const BasicPoint<S>& x, int m) {
  if (x.size() != space.size())
    throw DomainError("point has " + std::to_string(x.size()) + " blocks, space has " +
                      std::to_string(space.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double n = level_norm(space[i], x[i], m);
    s += n * n;
  }
  return std::sqrt(s);
}

}  // namespace

double level_norm(const ScaleSpace& space, const Vector& x, int m) {
  return weighted_norm(space, magnitudes(x), m);
}
double level_norm(const ScaleSpace& space, const QVector& x, int m) {
  return weighted_norm(space, magnitudes(x), m);
}
double level_norm(const ScaleSpace& space, const CVector& x, int m) {
  return weighted_norm(space, magnitudes(x), m);
}
double level_norm(const ProductSpace& space, const Point& x, int m) { return product_norm(space, x, m); }
double level_norm(const ProductSpace& space, const QPoint& x, int m) { return product_norm(space, x, m); }
double level_norm(const ProductSpace& space, const CPoint& x, int m) { return product_norm(space, x, m); }

ProductSpace direct_sum(const ProductSpace& a, const ProductSpace& b) {
  ProductSpace r(a);
  r.blocks.insert(r.blocks.end(), b.blocks.begin(), b.blocks.end());
  return r;
}

std::vector<double> embedding_spectrum(const ScaleSpace& space, int /*m*/, std::size_t count) {
  if (space.is_finite()) throw DomainError("embedding spectrum is not applicable to a finite-dimensional scale");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) out[k] = std::exp(-space.delta * static_cast<double>(k));
  return out;
}

std::size_t embedding_count_above(const ScaleSpace& space, double eps) {
  if (space.is_finite()) throw DomainError("embedding spectrum is not applicable to a finite-dimensional scale");
  if (eps >= 1.0) return 0;
  std::size_t k = 0;
  while (std::exp(-space.delta * static_cast<double>(k)) > eps) ++k;
  return k;
}

double truncation_tail(const ScaleSpace& space, const Vector& x, int m, std::size_t n) {
  Vector tail;
  for (std::size_t k = n; k < x.support(); ++k) tail.at(k) = x[k];
  return level_norm(space, tail, m);
}

QuadrantMembership quadrant_contains(const PartialQuadrant& q, const Point& w, double tau) {
  if (w.size() != 2) throw DomainError("quadrant point must have a corner block and a complement block");
  if (w[0].support() > q.corner_dim) throw DomainError("corner block exceeds quadrant corner dimension");
  check_membership(q.complement, w[1].support());
  QuadrantMembership r;
  r.inside = true;
  for (std::size_t j = 0; j < q.corner_dim; ++j) {
    const double x = w[0][j];
    if (x < -tau) r.inside = false;
    if (std::fabs(x) <= tau) r.active.push_back(j);
  }
  if (!r.inside) r.active.clear();
  return r;
}

}  // namespace scalekit
