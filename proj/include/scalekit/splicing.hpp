#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scalekit/calculus.hpp"

namespace scalekit {

// Family of projections pi_v on the fiber E, v ranging over an open subset V of a partial quadrant in W.
// Parameters and fibers are points of product spaces.
class Splicing {
 public:
  Splicing(ProductSpace w, ProductSpace e, OpenSet v) : w_(std::move(w)), e_(std::move(e)), v_(std::move(v)) {}
  virtual ~Splicing() = default;

  const ProductSpace& parameter_space() const { return w_; }
  const ProductSpace& fiber() const { return e_; }
  const OpenSet& parameter_set() const { return v_; }
  virtual bool parameter_contains(const Point& v, double tau = 1e-9) const { return v_.contains(w_, v, tau); }

  virtual std::string kind() const = 0;
  virtual Point project(const Point& v, const Point& e) const = 0;
  virtual QPoint project(const QPoint& v, const QPoint& e) const;
  virtual CPoint project(const CPoint& v, const CPoint& e) const;
  // D Phi(v,e)(dv,de) for Phi(v,e) = pi_v(e)
  virtual Point d_project(const Point& v, const Point& dv, const Point& e, const Point& de) const = 0;
  virtual QPoint d_project(const QPoint& v, const QPoint& dv, const QPoint& e, const QPoint& de) const;

  // pi as a fixed operator on E when it does not depend on v.
  virtual std::optional<BlockOperator> constant_operator() const { return std::nullopt; }
  // pi_v as an operator on E at this v, when it has an exact structured form.
  virtual std::optional<BlockOperator> operator_at(const Point&) const { return constant_operator(); }
  // Rank of pi_v; nullopt when infinite.
  virtual std::optional<std::size_t> rank(const Point& v) const = 0;
  // Dimension of ker pi_v; nullopt when infinite.
  virtual std::optional<std::size_t> corank(const Point&) const { return std::nullopt; }
  virtual bool supports_exact() const { return false; }
  virtual bool supports_complex() const { return false; }

  virtual Point sample_parameter(std::mt19937_64& rng) const;
  virtual Point sample_fiber(const Point& v, std::mt19937_64& rng) const;

 protected:
  ProductSpace w_, e_;
  OpenSet v_;
};

using SplicingPtr = std::shared_ptr<const Splicing>;

// Reparameterization v -> R(v) with R(0+) = infinity, strictly decreasing.
struct GluingProfile {
  std::string name;
  std::function<double(double)> r, dr;
  std::function<Complex(Complex)> cr;  // optional analytic extension

  static GluingProfile exp_inv();  // R(v) = e^{1/v}
};

SplicingPtr trivial_splicing(const ProductSpace& w, const ProductSpace& e, OpenSet v = {});
SplicingPtr zero_splicing(const ProductSpace& w, const ProductSpace& e, OpenSet v = {});
// Orthogonal projection onto the span of basis (independent, finite support).
SplicingPtr const_rank_splicing(const ProductSpace& w, const ScaleSpace& e, const std::vector<QVector>& basis,
                                OpenSet v = {});
// Parameter v in [0, inf); pi_0 = 0, pi_v = orthogonal projection onto span u(v) where u(v) is a
// normalized Gaussian bump centred at index R(v), cut where it drops below double precision.
SplicingPtr rank_jump_splicing(double delta, const GluingProfile& profile = GluingProfile::exp_inv());
// u(v) jumps between unit vectors at integer crossings of R(v); the supplied v-derivative is zero.
SplicingPtr broken_rank_jump_splicing(double delta);
SplicingPtr complement_splicing(const SplicingPtr& s);
SplicingPtr product_splicing(const SplicingPtr& s, const SplicingPtr& t);
SplicingPtr whitney_sum(const SplicingPtr& s, const SplicingPtr& t);

// u(v) of a rank-jump splicing (empty at v = 0).
Vector rank_jump_vector(const Splicing& s, double v);
// <e, u(v)>, or <e, du/dv> with derivative set.
double rank_jump_pairing(const Splicing& s, double v, const Vector& e, bool derivative = false);

// ---------------------------------------------------------------- cores

// (v,e) in K^S at levels 0..m: v in V and |pi_v(e) - e|_j <= tau max(1, |e|_j) for j <= m.
bool core_contains(const Splicing& s, const Point& v, const Point& e, int m = 0, double tau = 1e-9);
bool core_contains(const Splicing& s, const QPoint& v, const QPoint& e);

// Joint map Phi(v,e) = pi_v(e) on W + E (blocks concatenated).
MapPtr joint_map(const SplicingPtr& s);
// r(v,e) = (v, pi_v(e)).
MapPtr retraction_map(const SplicingPtr& s);

// Open subset O of a splicing core.
struct LocalModel {
  SplicingPtr splicing;
  OpenSet open;  // over W + E; the corners of V are added automatically

  std::size_t parameter_blocks() const { return splicing->parameter_space().size(); }
  ProductSpace ambient() const;
  bool contains(const Point& v, const Point& e, double tau = 1e-9) const;
  bool contains(const Point& ve, double tau = 1e-9) const;
  double witness_radius(const Point& ve) const;
};

LocalModel whole_core(const SplicingPtr& s);

struct HatExtension {
  std::function<bool(const Point&)> contains;  // (v,e) with (v, pi_v e) in O
  MapPtr retraction;
};
HatExtension hat_extend(const LocalModel& m);

// ---------------------------------------------------------------- tangent splicing

struct TangentSample {
  Point v, dv, e, de;
};

struct TangentSplicing {
  SplicingPtr base;
  // P_{(v,dv)}(e,de) = (pi_v e, D Phi(v,e)(dv,de))
  std::pair<Point, Point> apply(const TangentSample& p) const;
  std::pair<QPoint, QPoint> apply(const QPoint& v, const QPoint& dv, const QPoint& e, const QPoint& de) const;
  double membership_residual(const TangentSample& p) const;
  bool contains(const TangentSample& p, double tau = 1e-9) const;
  // A tangent point of bi-level (m,k) projects to a base point of level m; k <= m required.
  static int base_level(int m, int k);
};

struct IdempotencyReport {
  std::size_t samples = 0;
  double worst = 0.0;
  bool exact = false;
  bool pass = false;
  double tol = 1e-8;
  std::uint64_t seed = 0;
};

struct TangentSplicingResult {
  TangentSplicing splicing;
  IdempotencyReport report;
};

// Certifies the joint map (sc1) and checks P o P = P at sampled tangent points.
TangentSplicingResult tangent_splicing(const SplicingPtr& s, std::size_t samples = 64, std::uint64_t seed = 0x5eed,
                                       double tol = 1e-8);
IdempotencyReport splicing_idempotency(const Splicing& s, std::size_t samples = 64, std::uint64_t seed = 0x5eed,
                                       double tol = 1e-9);

std::vector<TangentSample> sample_tangent_core(const Splicing& s, std::size_t n, std::uint64_t seed);

// ---------------------------------------------------------------- core maps

// f : O -> O' given by an extension to W + E; fhat = f o r.
class CoreMap {
 public:
  CoreMap(LocalModel src, LocalModel dst, MapPtr f);
  const LocalModel& source() const { return src_; }
  const LocalModel& target() const { return dst_; }
  const MapPtr& extension() const { return f_; }
  const MapPtr& hat() const { return hat_; }

 private:
  LocalModel src_, dst_;
  MapPtr f_, hat_;
};

CoreMap compose(const CoreMap& g, const CoreMap& f);

struct CoreTangentResult {
  TangentSample image;  // ((v', dv'), (e', de'))
  double core_residual = 0.0;   // |pi'_{v'} e' - e'|
  double map22_residual = 0.0;  // |de' - D Phi'(v',e')(dv',de')|
  bool in_target = false;
};

CoreTangentResult core_map_tangent(const CoreMap& f, const TangentSample& p, double tol = 1e-8);

struct CoreChainReport {
  ChainReport chain;
  double worst_map22 = 0.0;
  bool pass = false;
};
CoreChainReport core_chain_rule(const CoreMap& f, const CoreMap& g, const std::vector<TangentSample>& points,
                                Regime mode, double tol = 1e-9);

}  // namespace scalekit
