#include "linalg.hpp"

#include <algorithm>

namespace scalekit::detail {

QRref rref(QMatrix m, std::size_t pivot_cols_limit) {
  QRref out;
  const std::size_t pc = std::min(m.cols, pivot_cols_limit);
  std::size_t row = 0;
  for (std::size_t col = 0; col < pc && row < m.rows; ++col) {
    std::size_t p = row;
    while (p < m.rows && sgn(m(p, col)) == 0) ++p;
    if (p == m.rows) continue;
    if (p != row)
      for (std::size_t c = 0; c < m.cols; ++c) std::swap(m(p, c), m(row, c));
    const Rational inv = 1 / m(row, col);
    for (std::size_t c = col; c < m.cols; ++c) m(row, c) *= inv;
    for (std::size_t r = 0; r < m.rows; ++r) {
      if (r == row || sgn(m(r, col)) == 0) continue;
      const Rational f = m(r, col);
      for (std::size_t c = col; c < m.cols; ++c)
        if (sgn(m(row, c)) != 0) m(r, c) -= f * m(row, c);
    }
    out.pivots.push_back(col);
    ++row;
  }
  out.m = std::move(m);
  return out;
}

std::vector<QVector> nullspace(const QRref& r, std::size_t cols) {
  std::vector<bool> is_pivot(cols, false);
  for (auto p : r.pivots) is_pivot[p] = true;
  std::vector<QVector> basis;
  for (std::size_t f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    QVector v;
    v.at(f) = 1;
    for (std::size_t i = 0; i < r.pivots.size(); ++i) {
      const Rational& a = r.m(i, f);
      if (sgn(a) != 0) v.at(r.pivots[i]) = -a;
    }
    basis.push_back(v.trim());
  }
  return basis;
}

QVector QEchelon::reduce(QVector v) const {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const Rational f = v[piv_[i]];
    if (sgn(f) == 0) continue;
    const auto& row = rows_[i].coeffs();
    for (std::size_t c = 0; c < row.size(); ++c)
      if (sgn(row[c]) != 0) v.at(c) -= f * row[c];
  }
  return v.trim();
}

bool QEchelon::insert(QVector v) {
  v = reduce(std::move(v));
  if (v.is_zero()) return false;
  std::size_t p = 0;
  while (sgn(v[p]) == 0) ++p;
  const Rational inv = 1 / v[p];
  v *= inv;
  for (auto& row : rows_) {
    const Rational f = row[p];
    if (sgn(f) == 0) continue;
    for (std::size_t c = 0; c < v.support(); ++c)
      if (sgn(v[c]) != 0) row.at(c) -= f * v[c];
    row.trim();
  }
  rows_.push_back(std::move(v));
  piv_.push_back(p);
  return true;
}

std::optional<QMatrix> inverse(const QMatrix& m) {
  const std::size_t n = m.rows;
  QMatrix aug(n, 2 * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) aug(r, c) = m(r, c);
    aug(r, n + r) = 1;
  }
  QRref red = rref(std::move(aug), n);
  if (red.pivots.size() != n) return std::nullopt;
  QMatrix inv(n, n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) inv(r, c) = red.m(r, n + c);
  return inv;
}

FloatRank float_rank(const Eigen::MatrixXd& a, double rel_tol) {
  FloatRank out;
  if (a.rows() == 0 || a.cols() == 0) {
    out.u = Eigen::MatrixXd::Identity(a.rows(), a.rows());
    out.v = Eigen::MatrixXd::Identity(a.cols(), a.cols());
    out.gap = INFINITY;
    return out;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  out.sigma = svd.singularValues();
  out.u = svd.matrixU();
  out.v = svd.matrixV();
  const double top = std::max(1.0, out.sigma.size() ? out.sigma(0) : 0.0);
  for (Eigen::Index i = 0; i < out.sigma.size(); ++i)
    if (out.sigma(i) > rel_tol * top) ++out.rank;
  const auto r = static_cast<Eigen::Index>(out.rank);
  if (r == out.sigma.size())
    out.gap = INFINITY;
  else if (r == 0)
    out.gap = 0.0;
  else
    out.gap = out.sigma(r - 1) / std::max(out.sigma(r), 1e-300);
  return out;
}

std::size_t span_rank(const std::vector<Vector>& vs, double rel_tol) {
  if (vs.empty()) return 0;
  std::size_t len = 0;
  for (const auto& v : vs) len = std::max(len, v.support());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(vs.size()));
  for (std::size_t j = 0; j < vs.size(); ++j) {
    double n = 0.0;
    for (double x : vs[j].coeffs()) n += x * x;
    n = std::sqrt(n);
    if (n == 0.0) continue;
    for (std::size_t i = 0; i < vs[j].support(); ++i)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = vs[j][i] / n;
  }
  return float_rank(m, rel_tol).rank;
}

}  // namespace scalekit::detail
