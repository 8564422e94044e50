#pragma once

// Dense helpers for the head blocks of the Fredholm procedure. Internal.

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "scalekit/scale.hpp"

namespace scalekit::detail {

struct QMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<Rational> a;
  QMatrix() = default;
  QMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c) {}
  Rational& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  const Rational& operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

struct QRref {
  QMatrix m;
  std::vector<std::size_t> pivots;  // pivot column of each nonzero row
};

QRref rref(QMatrix m, std::size_t pivot_cols_limit = static_cast<std::size_t>(-1));
// Basis of {x : A x = 0} from a reduced form with `cols` unknowns.
std::vector<QVector> nullspace(const QRref& r, std::size_t cols);

// Reduced echelon basis grown one vector at a time.
class QEchelon {
 public:
  bool insert(QVector v);
  QVector reduce(QVector v) const;
  std::size_t rank() const { return rows_.size(); }
  const std::vector<QVector>& rows() const { return rows_; }
  const std::vector<std::size_t>& pivots() const { return piv_; }

 private:
  std::vector<QVector> rows_;
  std::vector<std::size_t> piv_;
};

// Inverse of a square rational matrix; nullopt when singular.
std::optional<QMatrix> inverse(const QMatrix& m);

struct FloatRank {
  std::size_t rank = 0;
  double gap = 0.0;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd u, v;
};
FloatRank float_rank(const Eigen::MatrixXd& a, double rel_tol);

// Rank of a list of double vectors, relative tolerance on the largest singular value.
std::size_t span_rank(const std::vector<Vector>& vs, double rel_tol);

}  // namespace scalekit::detail
