#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scalekit/linops.hpp"

namespace scalekit {

// Coordinate (block, index) of a product space.
struct Coord {
  std::size_t block = 0;
  std::size_t index = 0;
  friend auto operator<=>(const Coord&, const Coord&) = default;
};

// Open subset of a product of scales, optionally relative to a partial quadrant.
struct OpenSet {
  std::vector<Coord> corner;  // coordinates constrained to be >= 0
  std::optional<Point> center;
  double radius = INFINITY;  // level-0 ball around center
  std::function<bool(const Point&)> predicate;  // extra open condition, optional

  bool contains(const ProductSpace& space, const Point& x, double tau = 1e-9) const;
  // Radius of a level-0 ball around x that stays inside (relative to the quadrant).
  double witness_radius(const ProductSpace& space, const Point& x) const;
  std::vector<Coord> active_corners(const Point& x, double tau = 1e-9) const;
};

class PolynomialMap;

class ScMap {
 public:
  ScMap(ProductSpace dom, ProductSpace cod, OpenSet open = {})
      : dom_(std::move(dom)), cod_(std::move(cod)), open_(std::move(open)) {}
  virtual ~ScMap() = default;

  const ProductSpace& domain() const { return dom_; }
  const ProductSpace& codomain() const { return cod_; }
  const OpenSet& open_set() const { return open_; }
  bool contains(const Point& x, double tau = 1e-9) const { return open_.contains(dom_, x, tau); }

  virtual std::string kind() const = 0;
  virtual Point eval(const Point& x) const = 0;
  virtual QPoint eval(const QPoint& x) const;
  virtual CPoint eval(const CPoint& x) const;
  virtual Point tangent(const Point& x, const Point& h) const = 0;
  virtual QPoint tangent(const QPoint& x, const QPoint& h) const;
  virtual CPoint tangent(const CPoint& x, const CPoint& h) const;
  virtual std::optional<BlockOperator> jacobian(const Point& /*x*/) const { return std::nullopt; }
  // Exact polynomial normal form, when the map has one.
  virtual std::shared_ptr<const PolynomialMap> polynomial() const { return nullptr; }
  // Lowest input level at which the map is defined.
  virtual int min_input_level() const { return 0; }
  virtual bool supports_exact() const { return false; }
  virtual bool supports_complex() const { return false; }

 protected:
  ProductSpace dom_, cod_;
  OpenSet open_;
};

using MapPtr = std::shared_ptr<const ScMap>;

// Routes the three scalar overloads to templated eval_t / tangent_t of the derived class.
template <class D>
class ScMapImpl : public ScMap {
 public:
  using ScMap::ScMap;
  Point eval(const Point& x) const override { return self().template eval_t<double>(x); }
  QPoint eval(const QPoint& x) const override { return self().template eval_t<Rational>(x); }
  CPoint eval(const CPoint& x) const override { return self().template eval_t<Complex>(x); }
  Point tangent(const Point& x, const Point& h) const override { return self().template tangent_t<double>(x, h); }
  QPoint tangent(const QPoint& x, const QPoint& h) const override { return self().template tangent_t<Rational>(x, h); }
  CPoint tangent(const CPoint& x, const CPoint& h) const override { return self().template tangent_t<Complex>(x, h); }
  bool supports_exact() const override { return true; }
  bool supports_complex() const override { return true; }

 private:
  const D& self() const { return static_cast<const D&>(*this); }
};

class LinearMap : public ScMapImpl<LinearMap> {
 public:
  explicit LinearMap(BlockOperator a, OpenSet open = {});
  std::string kind() const override { return "linear"; }
  template <class S>
  BasicPoint<S> eval_t(const BasicPoint<S>& x) const { return a_.apply(x); }
  template <class S>
  BasicPoint<S> tangent_t(const BasicPoint<S>&, const BasicPoint<S>& h) const { return a_.apply(h); }
  std::optional<BlockOperator> jacobian(const Point&) const override { return a_; }
  std::shared_ptr<const PolynomialMap> polynomial() const override;
  bool supports_exact() const override { return a_.rational_entries(); }
  const BlockOperator& op() const { return a_; }

 private:
  BlockOperator a_;
};

using Monomial = std::vector<std::pair<Coord, unsigned>>;

struct PolyTerm {
  Coord out;
  Rational coeff;
  Monomial mono;
};

// Linear block operator plus finitely many monomial terms.
class PolynomialMap : public ScMapImpl<PolynomialMap> {
 public:
  PolynomialMap(ProductSpace dom, ProductSpace cod, std::optional<BlockOperator> linear, std::vector<PolyTerm> terms,
                OpenSet open = {}, bool inexact = false);
  std::string kind() const override { return "polynomial"; }

  template <class S>
  BasicPoint<S> eval_t(const BasicPoint<S>& x) const;
  template <class S>
  BasicPoint<S> tangent_t(const BasicPoint<S>& x, const BasicPoint<S>& h) const;
  std::optional<BlockOperator> jacobian(const Point& x) const override;
  std::shared_ptr<const PolynomialMap> polynomial() const override;
  bool supports_exact() const override { return !inexact_ && (!linear_ || linear_->rational_entries()); }

  const std::optional<BlockOperator>& linear() const { return linear_; }
  const std::vector<PolyTerm>& terms() const { return terms_; }
  bool inexact() const { return inexact_; }
  std::size_t degree() const;

  // Symbolic expansion of g after f.
  static PolynomialMap compose(const PolynomialMap& g, const PolynomialMap& f);

 private:
  std::optional<BlockOperator> linear_;
  std::vector<PolyTerm> terms_;
  bool inexact_ = false;
};

// g after f; the tangent is the product of the factors' tangents.
class ComposeMap : public ScMap {
 public:
  ComposeMap(MapPtr g, MapPtr f);
  std::string kind() const override { return "compose"; }
  Point eval(const Point& x) const override { return g_->eval(f_->eval(x)); }
  QPoint eval(const QPoint& x) const override { return g_->eval(f_->eval(x)); }
  CPoint eval(const CPoint& x) const override { return g_->eval(f_->eval(x)); }
  Point tangent(const Point& x, const Point& h) const override;
  QPoint tangent(const QPoint& x, const QPoint& h) const override;
  CPoint tangent(const CPoint& x, const CPoint& h) const override;
  std::optional<BlockOperator> jacobian(const Point& x) const override;
  std::shared_ptr<const PolynomialMap> polynomial() const override;
  int min_input_level() const override { return f_->min_input_level(); }
  bool supports_exact() const override { return g_->supports_exact() && f_->supports_exact(); }
  bool supports_complex() const override { return g_->supports_complex() && f_->supports_complex(); }
  const MapPtr& outer() const { return g_; }
  const MapPtr& inner() const { return f_; }

 private:
  MapPtr g_, f_;
};

// Composite whose derivative is computed without the chain rule: symbolic expansion
// when both factors are polynomial, complex-step differentiation otherwise.
class DirectCompositeMap : public ScMap {
 public:
  DirectCompositeMap(MapPtr g, MapPtr f);
  std::string kind() const override { return "direct-composite"; }
  Point eval(const Point& x) const override;
  QPoint eval(const QPoint& x) const override;
  Point tangent(const Point& x, const Point& h) const override;
  QPoint tangent(const QPoint& x, const QPoint& h) const override;
  bool supports_exact() const override { return poly_ && poly_->supports_exact(); }
  std::string method() const { return poly_ ? "symbolic" : "complex-step"; }

 private:
  MapPtr g_, f_;
  std::shared_ptr<const PolynomialMap> poly_;
};

// Map with hand-supplied evaluators (double, optionally complex).
class FunctionMap : public ScMap {
 public:
  using Eval = std::function<Point(const Point&)>;
  using Tangent = std::function<Point(const Point&, const Point&)>;
  using CEval = std::function<CPoint(const CPoint&)>;
  using Jacobian = std::function<std::optional<BlockOperator>(const Point&)>;
  FunctionMap(std::string name, ProductSpace dom, ProductSpace cod, Eval f, Tangent df, CEval cf = {},
              OpenSet open = {}, int min_level = 0);
  std::string kind() const override { return name_; }
  Point eval(const Point& x) const override { return f_(x); }
  CPoint eval(const CPoint& x) const override;
  Point tangent(const Point& x, const Point& h) const override { return df_(x, h); }
  int min_input_level() const override { return min_level_; }
  bool supports_complex() const override { return static_cast<bool>(cf_); }
  std::optional<BlockOperator> jacobian(const Point& x) const override { return jac_ ? jac_(x) : std::nullopt; }
  // Structured derivative, when the map has one.
  void set_jacobian(Jacobian j) { jac_ = std::move(j); }

 private:
  std::string name_;
  Eval f_;
  Tangent df_;
  CEval cf_;
  Jacobian jac_;
  int min_level_;
};

// Same evaluator as base, tangent replaced (negative controls).
class DerivativeOverrideMap : public ScMap {
 public:
  DerivativeOverrideMap(MapPtr base, FunctionMap::Tangent df);
  std::string kind() const override { return "derivative-override"; }
  Point eval(const Point& x) const override { return base_->eval(x); }
  QPoint eval(const QPoint& x) const override { return base_->eval(x); }
  CPoint eval(const CPoint& x) const override { return base_->eval(x); }
  Point tangent(const Point& x, const Point& h) const override { return df_(x, h); }
  bool supports_complex() const override { return base_->supports_complex(); }

 private:
  MapPtr base_;
  FunctionMap::Tangent df_;
};

// ---------------------------------------------------------------- verification

struct Sc1Direction {
  Point direction;
  std::vector<double> q;
  double extrapolated = 0.0;
  bool pass = false;
  std::string reason;
};

struct Sc1Report {
  bool pass = false;
  std::uint64_t seed = 0;
  double tol = 1e-7;
  std::vector<double> radii;
  std::vector<Sc1Direction> directions;
  double worst_final_q = 0.0;
  std::string failure;
};

struct Sc1Options {
  std::uint64_t seed = 0x5eed;
  double tol = 1e-7;
  std::size_t random_directions = 8;
  int first_exponent = 3;
  int last_exponent = 12;
  int level = 0;  // residual measured at this level, increments at level + 1
};

std::vector<double> default_radii(const Sc1Options& opt = {});
// Coordinate directions plus seeded random finite-support directions, made inward at active corners.
std::vector<Point> default_directions(const ScMap& f, const Point& x, const Sc1Options& opt = {});

Sc1Report sc1_verify(const ScMap& f, const Point& x, const std::vector<Point>& directions,
                     const std::vector<double>& radii, const Sc1Options& opt = {});
Sc1Report sc1_verify(const ScMap& f, const Point& x, const Sc1Options& opt = {});

struct TangentPoint {
  Point base;
  Point direction;
};

class CertifiedMap {
 public:
  static CertifiedMap certify(MapPtr f, const std::vector<Point>& points, const Sc1Options& opt = {});
  const ScMap& map() const { return *f_; }
  const MapPtr& ptr() const { return f_; }
  const std::vector<Sc1Report>& reports() const { return reports_; }

 private:
  CertifiedMap(MapPtr f, std::vector<Sc1Report> r) : f_(std::move(f)), reports_(std::move(r)) {}
  MapPtr f_;
  std::vector<Sc1Report> reports_;
};

TangentPoint tangent_map(const CertifiedMap& f, const TangentPoint& p);

struct ChainPoint {
  double residual = 0.0;
  bool exact_equal = false;
};

struct ChainReport {
  bool pass = false;
  Regime regime = Regime::floating;
  std::string method;
  double worst = 0.0;
  bool composite_verified = false;
  std::vector<ChainPoint> points;
  std::string failure;
};

ChainReport chain_rule_verify(const MapPtr& f, const MapPtr& g, const std::vector<TangentPoint>& points,
                              Regime mode, double tol = 1e-9, const Sc1Options& sc1 = {});
ChainReport chain_rule_verify_exact(const MapPtr& f, const MapPtr& g,
                                    const std::vector<std::pair<QPoint, QPoint>>& points);

struct LevelCkReport {
  bool applicable = true;
  bool pass = false;
  bool converse_applicable = true;
  int k = 1, m = 0;
  std::string method;
  double worst = 0.0;
  std::string note;
};

LevelCkReport level_ck_check(const ScMap& f, int k, int m, const std::vector<Point>& points, const Sc1Options& opt = {});

// Growth of |f(x_n) - f(0)|_m / |x_n|_m over unit inputs concentrated at coordinate n.
struct Sc0Probe {
  bool bounded = true;
  std::vector<double> ratios;
};
Sc0Probe sc0_probe(const ScMap& f, int m, std::size_t block = 0, std::size_t n_max = 24, double amplitude = 1e-3);

}  // namespace scalekit
