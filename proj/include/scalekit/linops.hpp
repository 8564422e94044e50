#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "scalekit/scale.hpp"

namespace scalekit {

struct IndexUndecidable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// c * exp(-(rate*k + offset)) on lo <= k < hi
struct CoefTerm {
  Rational c{1};
  Rational rate{0};
  Rational offset{0};
  std::int64_t lo = 0;
  std::optional<std::int64_t> hi;

  bool active(std::int64_t k) const { return k >= lo && (!hi || k < *hi); }
  bool bounded() const { return hi.has_value(); }
};

class Coefficient {
 public:
  Coefficient() = default;
  static Coefficient constant(const Rational& c);
  static Coefficient exp_decay(const Rational& c, const Rational& rate, const Rational& offset = 0);
  static Coefficient from_terms(std::vector<CoefTerm> terms);

  const std::vector<CoefTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  template <class S>
  S eval(std::int64_t k) const {
    S out{};
    for (const auto& t : terms_) {
      if (!t.active(k)) continue;
      const Rational ex = -(t.rate * k + t.offset);
      out += from_rational<S>(t.c) * scalar_exp<S>(ex);
    }
    return out;
  }
  std::optional<Rational> eval_exact(std::int64_t k) const;
  // Exact when possible, otherwise the double value converted exactly; flags the loss.
  Rational eval_rational(std::int64_t k, bool& inexact) const;

  Coefficient operator*(const Coefficient& o) const;
  Coefficient operator+(const Coefficient& o) const;
  Coefficient scaled(const Rational& s) const;
  // k -> d(k + b)
  Coefficient shifted(std::int64_t b) const;
  Coefficient masked(std::int64_t lo, std::optional<std::int64_t> hi) const;

  // First index past which the coefficient vanishes, if any.
  std::optional<std::int64_t> support_end() const;
  std::vector<std::int64_t> breakpoints() const;
  double limit() const;
  std::optional<Rational> exact_limit() const;
  // sup_{k >= n} |d(k) - limit|, valid once n is past every breakpoint.
  double tail_deviation(std::int64_t n) const;
  // Upper bound for sup_{k >= from} |d(k)| e^{lambda k}; infinity when unbounded.
  double sup_weighted(double lambda, std::int64_t from = 0) const;
  bool all_rational_from(std::int64_t k) const;

  std::string describe() const;

 private:
  void normalize();
  std::vector<CoefTerm> terms_;
};

// Parses rules such as "exp(-k)", "1/8*exp(-2*k)", "3*[k<4]", "1 + exp(-k-1/2)".
Coefficient parse_coefficient(const std::string& rule);

struct RankOne {
  QVector lambda;
  QVector u;
  Vector lambda_d;
  Vector u_d;
  RankOne(QVector l, QVector v);
};

class ScOperator {
 public:
  ScOperator() : ScOperator(ScaleSpace::sequence(1.0), ScaleSpace::sequence(1.0)) {}
  ScOperator(ScaleSpace dom, ScaleSpace cod) : dom_(dom), cod_(cod) {}

  static ScOperator identity(const ScaleSpace& s);
  static ScOperator zero(const ScaleSpace& dom, const ScaleSpace& cod) { return ScOperator(dom, cod); }
  // (S^b x)_k = x_{k+b}: b > 0 is the left shift to the power b, b < 0 the right shift.
  static ScOperator shift(const ScaleSpace& s, std::int64_t b);
  static ScOperator diagonal(const ScaleSpace& s, const Coefficient& d);
  static ScOperator band(const ScaleSpace& dom, const ScaleSpace& cod, std::int64_t b, const Coefficient& d);
  static ScOperator rank_one(const ScaleSpace& dom, const ScaleSpace& cod, QVector lambda, QVector u,
                             bool inexact = false);

  const ScaleSpace& domain() const { return dom_; }
  const ScaleSpace& codomain() const { return cod_; }
  const std::map<std::int64_t, Coefficient>& bands() const { return bands_; }
  const std::vector<RankOne>& finite_rank() const { return finite_; }
  bool inexact_data() const { return inexact_; }
  // every entry is rational (no exp factors), so exact evaluation is possible
  bool rational_entries() const;
  bool is_finite_rank() const { return bands_.empty(); }
  bool is_zero() const { return bands_.empty() && finite_.empty(); }

  template <class S>
  BasicVector<S> apply(const BasicVector<S>& x) const;
  template <class S>
  BasicVector<S> apply_transpose(const BasicVector<S>& y) const;

  ScOperator operator+(const ScOperator& o) const;
  ScOperator operator-(const ScOperator& o) const { return *this + o.scaled(-1); }
  ScOperator scaled(const Rational& s) const;
  // this after inner
  ScOperator compose(const ScOperator& inner) const;
  ScOperator with_spaces(const ScaleSpace& dom, const ScaleSpace& cod) const;

  // Matrix entry (row r, column c).
  double entry(std::int64_t r, std::int64_t c) const;
  std::optional<Rational> entry_exact(std::int64_t r, std::int64_t c) const;

  // Closed-form bound of the operator norm from domain level m_in to codomain level m_out.
  double level_bound(int m_in, int m_out) const;
  bool certified_sc0() const;
  bool certified_scplus() const;

  std::string describe() const;

 private:
  void add_band(std::int64_t b, const Coefficient& d);
  void add_rank_one(QVector lambda, QVector u);
  ScaleSpace dom_, cod_;
  std::map<std::int64_t, Coefficient> bands_;
  std::vector<RankOne> finite_;
  bool inexact_ = false;
};

// Singular values of a level-m truncation compared against e^{-delta k} times the m -> m+1 bound.
struct CompactnessReport {
  bool ok = false;
  double bound = 0.0;
  std::vector<double> singular_values;
  double worst_ratio = 0.0;
};
CompactnessReport scplus_singular_check(const ScOperator& r, int m, std::size_t n = 40);

class BlockOperator {
 public:
  BlockOperator() = default;
  BlockOperator(ProductSpace dom, ProductSpace cod);
  static BlockOperator identity(const ProductSpace& s);
  static BlockOperator single(const ScOperator& op);

  const ProductSpace& domain() const { return dom_; }
  const ProductSpace& codomain() const { return cod_; }
  const std::optional<ScOperator>& block(std::size_t i, std::size_t j) const { return blocks_[i][j]; }
  void set(std::size_t i, std::size_t j, const ScOperator& op);
  void add(std::size_t i, std::size_t j, const ScOperator& op);

  template <class S>
  BasicPoint<S> apply(const BasicPoint<S>& x) const;

  BlockOperator operator+(const BlockOperator& o) const;
  BlockOperator operator-(const BlockOperator& o) const { return *this + o.scaled(-1); }
  BlockOperator scaled(const Rational& s) const;
  BlockOperator compose(const BlockOperator& inner) const;
  bool inexact_data() const;
  bool rational_entries() const;

  // Single-space form: finite blocks are prepended as leading coordinates.
  struct Flat {
    ScOperator op;
    std::vector<std::int64_t> dom_offsets, cod_offsets;
  };
  Flat flatten() const;

 private:
  ProductSpace dom_, cod_;
  std::vector<std::vector<std::optional<ScOperator>>> blocks_;
};

template <class S>
BasicVector<S> flatten_point(const BasicPoint<S>& p, const std::vector<std::int64_t>& offsets);
template <class S>
BasicPoint<S> unflatten_point(const BasicVector<S>& v, const ProductSpace& space,
                              const std::vector<std::int64_t>& offsets);

struct SplittingFragment {
  std::vector<std::size_t> pivots;
  std::vector<QVector> functionals;  // dual basis lambda_i with lambda_i(k_j) = delta_ij
  ScOperator projection;             // sum lambda_i (x) k_i
};
SplittingFragment split_off_finite_dim(const ScaleSpace& space, const std::vector<QVector>& basis);

struct LevelCertificate {
  int level = 0;
  std::int64_t head_rows = 0;
  double neumann_ratio = 0.0;
  std::size_t head_rank = 0;
  std::size_t kernel_dim = 0;
  std::size_t cokernel_dim = 0;
};

struct FredholmOptions {
  std::vector<int> levels{0, 1, 2, 3};
  bool force_float = false;
  double rank_tol = 1e-10;
  std::int64_t max_head = 4096;
  std::size_t max_tail = 4000;
};

struct FredholmSplitting {
  std::int64_t index = 0;
  std::int64_t principal_band = 0;
  Regime regime = Regime::exact;
  double rank_gap = 0.0;  // float regime: sigma_r / sigma_{r+1}
  std::vector<Vector> kernel, cokernel;
  std::vector<QVector> kernel_exact, cokernel_exact;  // filled in the exact regime
  bool kernel_truncated = false;
  ScOperator projection;
  std::vector<LevelCertificate> levels;
  bool levels_consistent = false;
  bool sample_only = false;
  std::string certificate;  // "closed-form" or "sampled"

  std::size_t kernel_dim() const { return kernel.size(); }
  std::size_t cokernel_dim() const { return cokernel.size(); }
};

FredholmSplitting fredholm_index(const ScOperator& t, const FredholmOptions& opt = {});
FredholmSplitting fredholm_index(const BlockOperator& t, const FredholmOptions& opt = {});

struct CompositionIndex {
  std::int64_t index = 0;
  std::int64_t sum_of_indices = 0;
  bool additive = false;
};
CompositionIndex compose_index(const ScOperator& t, const ScOperator& s, const FredholmOptions& opt = {});

struct PerturbationReport {
  std::int64_t index_t = 0;
  std::int64_t index_sum = 0;
  bool stable = false;
  bool kernels_level_independent = false;
  FredholmSplitting splitting;
};
PerturbationReport perturb_scplus_index(const ScOperator& t, const ScOperator& r, const FredholmOptions& opt = {});

struct RegularityCertificate {
  bool ok = false;
  Regime regime = Regime::exact;
  int level = 0;
  QVector k_exact, x0_exact, c_exact;
  Vector k, x0, c;
  bool c_zero = false;
  bool reassembles = false;
  double reassembly_residual = 0.0;
  double level_norm_e = 0.0;
  std::string detail;
};
RegularityCertificate regularity_lift(const ScOperator& t, const FredholmSplitting& split, const QVector& e, int m);

// Solves T x = y for y in the range; returns the solution with no component along the kernel.
struct SolveResult {
  bool solvable = false;
  Regime regime = Regime::floating;
  QVector x_exact, c_exact;  // exact regime
  Vector x, c;               // always filled
};
SolveResult solve_in_range(const ScOperator& t, const FredholmSplitting& split, const QVector& y);

// Y given as the range of an operator or as the joint kernel of finitely many functionals.
using RangeDescription = std::variant<ScOperator, std::vector<QVector>>;
std::vector<QVector> dense_complement(const ScaleSpace& space, const RangeDescription& y, std::size_t codim);

}  // namespace scalekit
