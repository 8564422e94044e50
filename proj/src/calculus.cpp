#include "scalekit/calculus.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace scalekit {

// ---------------------------------------------------------------- open sets

bool OpenSet::contains(const ProductSpace& space, const Point& x, double tau) const {
  if (x.size() != space.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (space[i].is_finite() && x[i].support() > space[i].dim) return false;
  }
  for (const auto& c : corner)
    if (x[c.block][c.index] < -tau) return false;
  if (predicate && !predicate(x)) return false;
  if (center && std::isfinite(radius)) return level_norm(space, x - *center, 0) < radius;
  return true;
}

double OpenSet::witness_radius(const ProductSpace& space, const Point& x) const {
  if (!contains(space, x)) return 0.0;
  if (!center || !std::isfinite(radius)) return INFINITY;
  return radius - level_norm(space, x - *center, 0);
}

std::vector<Coord> OpenSet::active_corners(const Point& x, double tau) const {
  std::vector<Coord> out;
  for (const auto& c : corner)
    if (std::fabs(x[c.block][c.index]) <= tau) out.push_back(c);
  return out;
}

// ---------------------------------------------------------------- ScMap defaults

QPoint ScMap::eval(const QPoint&) const { throw InexactError(kind() + " has no exact evaluator"); }
CPoint ScMap::eval(const CPoint&) const { throw DomainError(kind() + " has no complex extension"); }
QPoint ScMap::tangent(const QPoint&, const QPoint&) const { throw InexactError(kind() + " has no exact derivative"); }
CPoint ScMap::tangent(const CPoint&, const CPoint&) const {
  throw DomainError(kind() + " has no complex derivative");
}

// ---------------------------------------------------------------- LinearMap

LinearMap::LinearMap(BlockOperator a, OpenSet open)
    : ScMapImpl(a.domain(), a.codomain(), std::move(open)), a_(std::move(a)) {}

std::shared_ptr<const PolynomialMap> LinearMap::polynomial() const {
  return std::make_shared<PolynomialMap>(dom_, cod_, a_, std::vector<PolyTerm>{}, open_, a_.inexact_data());
}

// ---------------------------------------------------------------- PolynomialMap

namespace {

template <class S>
S ipow(const S& x, unsigned p) {
  S r(1);
  for (unsigned i = 0; i < p; ++i) r *= x;
  return r;
}

template <class S>
S coord_value(const BasicPoint<S>& x, const Coord& c) {
  return c.block < x.size() ? x[c.block][c.index] : S{};
}

void check_coord(const ProductSpace& s, const Coord& c, const char* what) {
  if (c.block >= s.size()) throw DomainError(std::string(what) + " coordinate refers to a missing block");
  if (s[c.block].is_finite() && c.index >= s[c.block].dim)
    throw DomainError(std::string(what) + " coordinate exceeds block dimension");
}

}  // namespace

PolynomialMap::PolynomialMap(ProductSpace dom, ProductSpace cod, std::optional<BlockOperator> linear,
                             std::vector<PolyTerm> terms, OpenSet open, bool inexact)
    : ScMapImpl(std::move(dom), std::move(cod), std::move(open)),
      linear_(std::move(linear)),
      terms_(std::move(terms)),
      inexact_(inexact) {
  if (linear_) {
    if (linear_->domain().size() != dom_.size() || linear_->codomain().size() != cod_.size())
      throw DomainError("linear part has the wrong block shape");
    inexact_ = inexact_ || linear_->inexact_data();
  }
  for (auto& t : terms_) {
    check_coord(cod_, t.out, "output");
    std::sort(t.mono.begin(), t.mono.end());
    for (const auto& [c, p] : t.mono) {
      check_coord(dom_, c, "input");
      if (p == 0) throw DomainError("zero exponent in monomial");
    }
  }
  std::erase_if(terms_, [](const PolyTerm& t) { return sgn(t.coeff) == 0; });
}

std::size_t PolynomialMap::degree() const {
  std::size_t d = linear_ ? 1 : 0;
  for (const auto& t : terms_) {
    std::size_t s = 0;
    for (const auto& f : t.mono) s += f.second;
    d = std::max(d, s);
  }
  return d;
}

template <class S>
BasicPoint<S> PolynomialMap::eval_t(const BasicPoint<S>& x) const {
  if (x.size() != dom_.size()) throw DomainError("point has the wrong number of blocks");
  BasicPoint<S> y = linear_ ? linear_->apply(x) : BasicPoint<S>::zeros(cod_.size());
  for (const auto& t : terms_) {
    S v = from_rational<S>(t.coeff);
    for (const auto& [c, p] : t.mono) v *= ipow(coord_value(x, c), p);
    if (!exactly_zero(v)) y[t.out.block].at(t.out.index) += v;
  }
  for (auto& b : y.blocks) b.trim();
  return y;
}

template <class S>
BasicPoint<S> PolynomialMap::tangent_t(const BasicPoint<S>& x, const BasicPoint<S>& h) const {
  BasicPoint<S> y = linear_ ? linear_->apply(h) : BasicPoint<S>::zeros(cod_.size());
  for (const auto& t : terms_) {
    S total{};
    for (std::size_t f = 0; f < t.mono.size(); ++f) {
      const S hv = coord_value(h, t.mono[f].first);
      if (exactly_zero(hv)) continue;
      S v = from_rational<S>(t.coeff) * S(static_cast<long>(t.mono[f].second)) *
            ipow(coord_value(x, t.mono[f].first), t.mono[f].second - 1) * hv;
      for (std::size_t g = 0; g < t.mono.size(); ++g)
        if (g != f) v *= ipow(coord_value(x, t.mono[g].first), t.mono[g].second);
      total += v;
    }
    if (!exactly_zero(total)) y[t.out.block].at(t.out.index) += total;
  }
  for (auto& b : y.blocks) b.trim();
  return y;
}

template Point PolynomialMap::eval_t(const Point&) const;
template QPoint PolynomialMap::eval_t(const QPoint&) const;
template CPoint PolynomialMap::eval_t(const CPoint&) const;
template Point PolynomialMap::tangent_t(const Point&, const Point&) const;
template QPoint PolynomialMap::tangent_t(const QPoint&, const QPoint&) const;
template CPoint PolynomialMap::tangent_t(const CPoint&, const CPoint&) const;

std::optional<BlockOperator> PolynomialMap::jacobian(const Point& x) const {
  BlockOperator j = linear_ ? *linear_ : BlockOperator(dom_, cod_);
  for (const auto& t : terms_)
    for (std::size_t f = 0; f < t.mono.size(); ++f) {
      double v = t.coeff.get_d() * t.mono[f].second *
                 std::pow(coord_value(x, t.mono[f].first), static_cast<int>(t.mono[f].second) - 1);
      for (std::size_t g = 0; g < t.mono.size(); ++g)
        if (g != f) v *= std::pow(coord_value(x, t.mono[g].first), static_cast<int>(t.mono[g].second));
      if (v == 0.0) continue;
      const Coord& c = t.mono[f].first;
      j.add(t.out.block, c.block,
            ScOperator::rank_one(dom_[c.block], cod_[t.out.block], QVector::unit(c.index, rational_from_double(v)),
                                 QVector::unit(t.out.index), true));
    }
  return j;
}

std::shared_ptr<const PolynomialMap> PolynomialMap::polynomial() const {
  return std::make_shared<PolynomialMap>(*this);
}

namespace {

using Poly = std::map<Monomial, Rational>;

Monomial mono_mul(const Monomial& a, const Monomial& b) {
  Monomial out;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j == b.size() || (i < a.size() && a[i].first < b[j].first)) {
      out.push_back(a[i++]);
    } else if (i == a.size() || b[j].first < a[i].first) {
      out.push_back(b[j++]);
    } else {
      out.emplace_back(a[i].first, a[i].second + b[j].second);
      ++i, ++j;
    }
  }
  return out;
}

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out;
  for (const auto& [ma, ca] : a)
    for (const auto& [mb, cb] : b) {
      auto& slot = out[mono_mul(ma, mb)];
      slot += ca * cb;
    }
  std::erase_if(out, [](const auto& kv) { return sgn(kv.second) == 0; });
  return out;
}

// Coordinate c of f as a polynomial in the input coordinates.
Poly component(const PolynomialMap& f, const Coord& c, bool& inexact) {
  Poly p;
  const auto k = static_cast<std::int64_t>(c.index);
  if (f.linear()) {
    for (std::size_t j = 0; j < f.domain().size(); ++j) {
      const auto& op = f.linear()->block(c.block, j);
      if (!op) continue;
      for (const auto& [b, d] : op->bands()) {
        const std::int64_t idx = k + b;
        if (idx < 0) continue;
        if (f.domain()[j].is_finite() && idx >= static_cast<std::int64_t>(f.domain()[j].dim)) continue;
        const Rational v = d.eval_rational(k, inexact);
        if (sgn(v) != 0) p[{{Coord{j, static_cast<std::size_t>(idx)}, 1u}}] += v;
      }
      for (const auto& r : op->finite_rank()) {
        const Rational uk = r.u[c.index];
        if (sgn(uk) == 0) continue;
        for (std::size_t l = 0; l < r.lambda.support(); ++l)
          if (sgn(r.lambda[l]) != 0) p[{{Coord{j, l}, 1u}}] += uk * r.lambda[l];
      }
      inexact = inexact || op->inexact_data();
    }
  }
  for (const auto& t : f.terms())
    if (t.out == c) p[t.mono] += t.coeff;
  std::erase_if(p, [](const auto& kv) { return sgn(kv.second) == 0; });
  return p;
}

// Column of a block operator at input coordinate c.
std::vector<std::pair<Coord, Rational>> column(const BlockOperator& a, const Coord& c, bool& inexact) {
  std::vector<std::pair<Coord, Rational>> out;
  const auto idx = static_cast<std::int64_t>(c.index);
  for (std::size_t i = 0; i < a.codomain().size(); ++i) {
    const auto& op = a.block(i, c.block);
    if (!op) continue;
    for (const auto& [b, d] : op->bands()) {
      const std::int64_t row = idx - b;
      if (row < 0) continue;
      if (a.codomain()[i].is_finite() && row >= static_cast<std::int64_t>(a.codomain()[i].dim)) continue;
      const Rational v = d.eval_rational(row, inexact);
      if (sgn(v) != 0) out.emplace_back(Coord{i, static_cast<std::size_t>(row)}, v);
    }
    for (const auto& r : op->finite_rank()) {
      const Rational l = r.lambda[c.index];
      if (sgn(l) == 0) continue;
      for (std::size_t k = 0; k < r.u.support(); ++k)
        if (sgn(r.u[k]) != 0) out.emplace_back(Coord{i, k}, l * r.u[k]);
    }
    inexact = inexact || op->inexact_data();
  }
  return out;
}

}  // namespace

PolynomialMap PolynomialMap::compose(const PolynomialMap& g, const PolynomialMap& f) {
  if (g.domain().size() != f.codomain().size()) throw DomainError("composition: block count mismatch");
  for (std::size_t i = 0; i < g.domain().size(); ++i)
    if (!g.domain()[i].same_model(f.codomain()[i])) throw DomainError("composition: space mismatch");
  bool inexact = g.inexact_ || f.inexact_;
  std::optional<BlockOperator> lin;
  if (g.linear_ && f.linear_) lin = g.linear_->compose(*f.linear_);
  std::map<std::pair<Coord, Monomial>, Rational> acc;
  if (g.linear_)
    for (const auto& s : f.terms_)
      for (const auto& [c, v] : column(*g.linear_, s.out, inexact)) acc[{c, s.mono}] += s.coeff * v;
  std::map<Coord, Poly> cache;
  for (const auto& t : g.terms_) {
    Poly p{{Monomial{}, t.coeff}};
    for (const auto& [c, e] : t.mono) {
      auto it = cache.find(c);
      if (it == cache.end()) it = cache.emplace(c, component(f, c, inexact)).first;
      for (unsigned i = 0; i < e; ++i) p = poly_mul(p, it->second);
    }
    for (const auto& [m, q] : p) acc[{t.out, m}] += q;
  }
  std::vector<PolyTerm> terms;
  for (const auto& [key, q] : acc)
    if (sgn(q) != 0) terms.push_back({key.first, q, key.second});
  return PolynomialMap(f.domain(), g.codomain(), lin, std::move(terms), f.open_set(), inexact);
}

// ---------------------------------------------------------------- ComposeMap

namespace {
void check_composable(const ScMap& g, const ScMap& f) {
  if (g.domain().size() != f.codomain().size()) throw DomainError("maps are not composable: block count mismatch");
  for (std::size_t i = 0; i < g.domain().size(); ++i)
    if (!g.domain()[i].same_model(f.codomain()[i])) throw DomainError("maps are not composable: space mismatch");
}
}  // namespace

ComposeMap::ComposeMap(MapPtr g, MapPtr f) : ScMap(f->domain(), g->codomain(), f->open_set()), g_(g), f_(f) {
  check_composable(*g_, *f_);
}

Point ComposeMap::tangent(const Point& x, const Point& h) const { return g_->tangent(f_->eval(x), f_->tangent(x, h)); }
QPoint ComposeMap::tangent(const QPoint& x, const QPoint& h) const {
  return g_->tangent(f_->eval(x), f_->tangent(x, h));
}
CPoint ComposeMap::tangent(const CPoint& x, const CPoint& h) const {
  return g_->tangent(f_->eval(x), f_->tangent(x, h));
}

std::optional<BlockOperator> ComposeMap::jacobian(const Point& x) const {
  auto jf = f_->jacobian(x);
  if (!jf) return std::nullopt;
  auto jg = g_->jacobian(f_->eval(x));
  if (!jg) return std::nullopt;
  return jg->compose(*jf);
}

std::shared_ptr<const PolynomialMap> ComposeMap::polynomial() const {
  auto gp = g_->polynomial();
  auto fp = f_->polynomial();
  if (!gp || !fp) return nullptr;
  return std::make_shared<PolynomialMap>(PolynomialMap::compose(*gp, *fp));
}

DirectCompositeMap::DirectCompositeMap(MapPtr g, MapPtr f)
    : ScMap(f->domain(), g->codomain(), f->open_set()), g_(std::move(g)), f_(std::move(f)) {
  check_composable(*g_, *f_);
  auto gp = g_->polynomial();
  auto fp = f_->polynomial();
  if (gp && fp) poly_ = std::make_shared<PolynomialMap>(PolynomialMap::compose(*gp, *fp));
}

Point DirectCompositeMap::eval(const Point& x) const { return poly_ ? poly_->eval(x) : g_->eval(f_->eval(x)); }
QPoint DirectCompositeMap::eval(const QPoint& x) const {
  if (poly_) return poly_->eval(x);
  return g_->eval(f_->eval(x));
}

Point DirectCompositeMap::tangent(const Point& x, const Point& h) const {
  if (poly_) return poly_->tangent(x, h);
  if (!g_->supports_complex() || !f_->supports_complex())
    throw DomainError("composite has neither a polynomial form nor a complex extension");
  constexpr double eps = 1e-30;
  CPoint z = convert<Complex>(x);
  for (std::size_t b = 0; b < z.size(); ++b)
    for (std::size_t k = 0; k < h[b].support(); ++k) z[b].at(k) += Complex(0.0, eps * h[b][k]);
  const CPoint w = g_->eval(f_->eval(z));
  Point out = Point::zeros(w.size());
  for (std::size_t b = 0; b < w.size(); ++b) {
    for (std::size_t k = 0; k < w[b].support(); ++k) {
      const double v = w[b][k].imag() / eps;
      if (v != 0.0) out[b].at(k) = v;
    }
    out[b].trim();
  }
  return out;
}

QPoint DirectCompositeMap::tangent(const QPoint& x, const QPoint& h) const {
  if (!poly_) throw InexactError("composite derivative has no exact form");
  return poly_->tangent(x, h);
}

// ---------------------------------------------------------------- FunctionMap

FunctionMap::FunctionMap(std::string name, ProductSpace dom, ProductSpace cod, Eval f, Tangent df, CEval cf,
                         OpenSet open, int min_level)
    : ScMap(std::move(dom), std::move(cod), std::move(open)),
      name_(std::move(name)),
      f_(std::move(f)),
      df_(std::move(df)),
      cf_(std::move(cf)),
      min_level_(min_level) {}

CPoint FunctionMap::eval(const CPoint& x) const {
  if (!cf_) return ScMap::eval(x);
  return cf_(x);
}

DerivativeOverrideMap::DerivativeOverrideMap(MapPtr base, FunctionMap::Tangent df)
    : ScMap(base->domain(), base->codomain(), base->open_set()), base_(std::move(base)), df_(std::move(df)) {}

// ---------------------------------------------------------------- sc1 verification

std::vector<double> default_radii(const Sc1Options& opt) {
  std::vector<double> r;
  for (int i = opt.first_exponent; i <= opt.last_exponent; ++i) r.push_back(std::ldexp(1.0, -i));
  return r;
}

std::vector<Point> default_directions(const ScMap& f, const Point& x, const Sc1Options& opt) {
  const auto& dom = f.domain();
  std::vector<Point> dirs;
  auto coords_of = [&](std::size_t b) {
    if (dom[b].is_finite()) return dom[b].dim;
    return std::max<std::size_t>(4, std::min<std::size_t>(x[b].support() + 1, 8));
  };
  for (std::size_t b = 0; b < dom.size(); ++b)
    for (std::size_t k = 0; k < coords_of(b); ++k) {
      Point u = Point::zeros(dom.size());
      u[b].at(k) = 1.0;
      dirs.push_back(u);
    }
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (std::size_t i = 0; i < opt.random_directions; ++i) {
    Point u = Point::zeros(dom.size());
    for (std::size_t b = 0; b < dom.size(); ++b) {
      const std::size_t n = dom[b].is_finite() ? dom[b].dim : 6;
      for (std::size_t k = 0; k < n; ++k) u[b].at(k) = uni(rng);
      u[b].trim();
    }
    dirs.push_back(u);
  }
  // inward at corners the radii could cross
  const double rmax = std::ldexp(1.0, -opt.first_exponent);
  for (auto& u : dirs)
    for (const auto& c : f.open_set().corner) {
      const double uc = u[c.block][c.index];
      if (uc < 0 && x[c.block][c.index] + rmax * uc < 0) u[c.block].at(c.index) = -uc;
    }
  return dirs;
}

namespace {

bool decays(const std::vector<double>& q, double tol, std::size_t window) {
  if (q.size() < window) return false;
  for (std::size_t i = q.size() - window; i + 1 < q.size(); ++i) {
    if (q[i] <= tol) continue;
    if (!(q[i] >= 1.5 * q[i + 1])) return false;
  }
  return true;
}

// Neville extrapolation to r = 0 through the last `points` samples.
template <class T>
T limit_at_zero(const std::vector<double>& r, const std::vector<T>& q, std::size_t points) {
  const std::size_t n = q.size();
  const std::size_t k = std::min(points, n);
  std::vector<T> p(q.end() - static_cast<std::ptrdiff_t>(k), q.end());
  std::vector<double> x(r.end() - static_cast<std::ptrdiff_t>(k), r.end());
  for (std::size_t level = 1; level < k; ++level)
    for (std::size_t i = 0; i + level < k; ++i)
      p[i] = (1.0 / (x[i + level] - x[i])) * (x[i + level] * p[i] - x[i] * p[i + 1]);
  return p[0];
}

}  // namespace

Sc1Report sc1_verify(const ScMap& f, const Point& x, const std::vector<Point>& directions,
                     const std::vector<double>& radii, const Sc1Options& opt) {
  Sc1Report rep;
  rep.seed = opt.seed;
  rep.tol = opt.tol;
  rep.radii = radii;
  if (!f.contains(x)) throw DomainError("base point is outside the domain");
  const Point fx = f.eval(x);
  rep.pass = true;
  for (const auto& u : directions) {
    Sc1Direction d;
    d.direction = u;
    const double nu = level_norm(f.domain(), u, opt.level + 1);
    if (nu == 0.0) {
      d.pass = true;
      d.reason = "zero direction";
      rep.directions.push_back(d);
      continue;
    }
    const Point du = f.tangent(x, u);
    // tolerance scales with the size of the derivative itself
    const double tol = opt.tol * std::max(1.0, level_norm(f.codomain(), du, opt.level) / nu);
    // quotients kept as vectors: their norm can dip through zero when expansion terms cancel
    std::vector<Point> quot;
    for (double r : radii) {
      const Point xr = x + r * u;
      if (!f.contains(xr)) throw DomainError("sample point leaves the domain");
      quot.push_back((1.0 / (r * nu)) * (f.eval(xr) - fx - r * du));
      d.q.push_back(level_norm(f.codomain(), quot.back(), opt.level));
    }
    std::vector<double> steps;
    for (std::size_t i = 0; i + 1 < quot.size(); ++i)
      steps.push_back(level_norm(f.codomain(), quot[i] - quot[i + 1], opt.level));
    const double qmax = *std::max_element(d.q.begin(), d.q.end());
    const Point lim = limit_at_zero(radii, quot, 5);
    d.extrapolated = level_norm(f.codomain(), lim, opt.level);
    // steps can cancel too; then ask whether the tail is polynomial in r (extrapolants agree)
    const bool polynomial_tail =
        level_norm(f.codomain(), lim - limit_at_zero(radii, quot, 4), opt.level) <= tol &&
        level_norm(f.codomain(), lim - limit_at_zero(radii, quot, 6), opt.level) <= tol;
    if (qmax <= tol) {
      d.pass = true;
      d.reason = "residual below tolerance";
      d.extrapolated = qmax;
    } else if (!decays(steps, tol, 4) && !polynomial_tail) {
      d.pass = false;
      d.reason = "difference quotients do not settle (steps shrink by less than 1.5 per halving)";
    } else if (d.extrapolated >= tol) {
      d.pass = false;
      d.reason = "extrapolated residual limit above tolerance";
    } else {
      d.pass = true;
      d.reason = "residual decays";
    }
    rep.worst_final_q = std::max(rep.worst_final_q, d.extrapolated);
    if (!d.pass && rep.pass) {
      rep.pass = false;
      rep.failure = d.reason;
    }
    rep.directions.push_back(std::move(d));
  }
  return rep;
}

Sc1Report sc1_verify(const ScMap& f, const Point& x, const Sc1Options& opt) {
  return sc1_verify(f, x, default_directions(f, x, opt), default_radii(opt), opt);
}

CertifiedMap CertifiedMap::certify(MapPtr f, const std::vector<Point>& points, const Sc1Options& opt) {
  std::vector<Sc1Report> reps;
  for (const auto& p : points) {
    reps.push_back(sc1_verify(*f, p, opt));
    if (!reps.back().pass) throw DomainError("map " + f->kind() + " failed the sc1 check: " + reps.back().failure);
  }
  return CertifiedMap(std::move(f), std::move(reps));
}

TangentPoint tangent_map(const CertifiedMap& f, const TangentPoint& p) {
  return {f.map().eval(p.base), f.map().tangent(p.base, p.direction)};
}

// ---------------------------------------------------------------- chain rule

ChainReport chain_rule_verify(const MapPtr& f, const MapPtr& g, const std::vector<TangentPoint>& points, Regime mode,
                              double tol, const Sc1Options& sc1) {
  if (mode == Regime::exact) {
    std::vector<std::pair<QPoint, QPoint>> qp;
    for (const auto& p : points) qp.emplace_back(convert<Rational>(p.base), convert<Rational>(p.direction));
    return chain_rule_verify_exact(f, g, qp);
  }
  ChainReport rep;
  rep.regime = Regime::floating;
  auto direct = std::make_shared<DirectCompositeMap>(g, f);
  rep.method = direct->method();
  rep.pass = true;
  for (const auto& p : points) {
    const Point lhs = direct->tangent(p.base, p.direction);
    const Point rhs = g->tangent(f->eval(p.base), f->tangent(p.base, p.direction));
    ChainPoint cp;
    cp.residual = level_norm(g->codomain(), lhs - rhs, 0);
    cp.exact_equal = lhs == rhs;
    rep.worst = std::max(rep.worst, cp.residual);
    if (!(cp.residual <= tol)) rep.pass = false;
    rep.points.push_back(cp);
  }
  if (!points.empty()) {
    Sc1Options o = sc1;
    o.random_directions = 2;
    rep.composite_verified = sc1_verify(*direct, points.front().base, o).pass;
  }
  if (!rep.composite_verified) {
    rep.pass = false;
    rep.failure = "composite derivative failed its own sc1 check";
  } else if (!rep.pass) {
    rep.failure = "chain-rule residual above tolerance";
  }
  return rep;
}

ChainReport chain_rule_verify_exact(const MapPtr& f, const MapPtr& g,
                                    const std::vector<std::pair<QPoint, QPoint>>& points) {
  ChainReport rep;
  rep.regime = Regime::exact;
  rep.method = "symbolic";
  auto gp = g->polynomial();
  auto fp = f->polynomial();
  if (!gp || !fp || gp->inexact() || fp->inexact()) {
    rep.failure = "exact chain rule needs rational polynomial maps";
    return rep;
  }
  const PolynomialMap comp = PolynomialMap::compose(*gp, *fp);
  rep.pass = true;
  for (const auto& [x, h] : points) {
    const QPoint lhs_base = comp.eval(x);
    const QPoint lhs = comp.tangent(x, h);
    const QPoint y = f->eval(x);
    const QPoint rhs_base = g->eval(y);
    const QPoint rhs = g->tangent(y, f->tangent(x, h));
    ChainPoint cp;
    cp.exact_equal = lhs == rhs && lhs_base == rhs_base;
    cp.residual = cp.exact_equal ? 0.0 : level_norm(g->codomain(), convert<double>(lhs - rhs), 0);
    rep.worst = std::max(rep.worst, cp.residual);
    if (!cp.exact_equal) rep.pass = false;
    rep.points.push_back(cp);
  }
  if (!points.empty()) {
    auto direct = std::make_shared<DirectCompositeMap>(g, f);
    Sc1Options o;
    o.random_directions = 2;
    rep.composite_verified = sc1_verify(*direct, convert<double>(points.front().first), o).pass;
  }
  if (!rep.composite_verified) {
    rep.pass = false;
    rep.failure = "composite derivative failed its own sc1 check";
  } else if (!rep.pass) {
    rep.failure = "exact chain-rule mismatch";
  }
  return rep;
}

// ---------------------------------------------------------------- level C^k

namespace {

Point second_derivative(const ScMap& f, const Point& x, const Point& u) {
  if (f.supports_complex()) {
    constexpr double eps = 1e-30;
    CPoint z = convert<Complex>(x);
    const CPoint cu = convert<Complex>(u);
    for (std::size_t b = 0; b < z.size(); ++b)
      for (std::size_t k = 0; k < u[b].support(); ++k) z[b].at(k) += Complex(0.0, eps * u[b][k]);
    const CPoint w = f.tangent(z, cu);
    Point out = Point::zeros(w.size());
    for (std::size_t b = 0; b < w.size(); ++b)
      for (std::size_t k = 0; k < w[b].support(); ++k) out[b].at(k) = w[b][k].imag() / eps;
    return out;
  }
  const double s = 1e-5;
  return (1.0 / (2 * s)) * (f.tangent(x + s * u, u) - f.tangent(x - s * u, u));
}

QPoint kth_difference(const ScMap& f, const QPoint& x, const QPoint& u, int k, const Rational& r) {
  QPoint acc = QPoint::zeros(f.codomain().size());
  mpz_class binom = 1;
  for (int i = 0; i <= k; ++i) {
    if (i > 0) {
      binom *= (k - i + 1);
      binom /= i;
    }
    const Rational sign = ((k - i) % 2 == 0) ? 1 : -1;
    const Rational w = sign * Rational(binom);
    const Rational step = r * i;
    acc += w * f.eval(x + step * u);
  }
  Rational rk = 1;
  for (int i = 0; i < k; ++i) rk *= r;
  Rational inv = 1 / rk;
  acc *= inv;
  return acc;
}

}  // namespace

LevelCkReport level_ck_check(const ScMap& f, int k, int m, const std::vector<Point>& points, const Sc1Options& opt) {
  LevelCkReport rep;
  rep.k = k;
  rep.m = m;
  rep.converse_applicable = f.min_input_level() == 0;
  if (!rep.converse_applicable)
    rep.note = "map is defined only on inputs of level >= " + std::to_string(f.min_input_level()) +
               "; converse check not applicable";
  if (m + k < f.min_input_level()) {
    rep.applicable = false;
    rep.note = "inputs of level " + std::to_string(m + k) + " are outside the map's domain";
    return rep;
  }
  rep.pass = true;
  if (k == 1) {
    rep.method = "taylor-1";
    Sc1Options o = opt;
    o.level = m;
    for (const auto& x : points) {
      const auto r = sc1_verify(f, x, o);
      rep.worst = std::max(rep.worst, r.worst_final_q);
      if (!r.pass) rep.pass = false;
    }
    return rep;
  }
  if (k == 2) {
    rep.method = f.supports_complex() ? "taylor-2 (complex-step second derivative)" : "taylor-2 (central difference)";
    Sc1Options o = opt;
    o.last_exponent = std::min(opt.last_exponent, 10);
    const auto radii = default_radii(o);
    for (const auto& x : points) {
      const Point fx = f.eval(x);
      for (const auto& u : default_directions(f, x, o)) {
        const double nu = level_norm(f.domain(), u, m + 2);
        if (nu == 0.0) continue;
        const Point d1 = f.tangent(x, u);
        const Point d2 = second_derivative(f, x, u);
        std::vector<Point> quot;
        std::vector<double> q, steps;
        for (double r : radii) {
          quot.push_back((1.0 / (r * r * nu * nu)) * (f.eval(x + r * u) - fx - r * d1 - (0.5 * r * r) * d2));
          q.push_back(level_norm(f.codomain(), quot.back(), m));
        }
        for (std::size_t i = 0; i + 1 < quot.size(); ++i) steps.push_back(level_norm(f.codomain(), quot[i] - quot[i + 1], m));
        const double qmax = *std::max_element(q.begin(), q.end());
        rep.worst = std::max(rep.worst, q.back());
        if (qmax > opt.tol && !decays(steps, opt.tol, 4)) rep.pass = false;
      }
    }
    return rep;
  }
  if (!f.supports_exact()) {
    rep.applicable = false;
    rep.pass = false;
    rep.note = "exact evaluator required for k >= 3";
    return rep;
  }
  rep.method = "exact k-th differences";
  for (const auto& x : points) {
    const QPoint xq = convert<Rational>(x);
    for (const auto& u : default_directions(f, x, opt)) {
      const QPoint uq = convert<Rational>(u);
      const double nu = level_norm(f.domain(), u, m + k);
      if (nu == 0.0) continue;
      std::vector<QPoint> dk;
      for (int i = 2; i <= 7; ++i) dk.push_back(kth_difference(f, xq, uq, k, Rational(1, 1 << i)));
      std::vector<double> diffs;
      for (std::size_t i = 0; i + 1 < dk.size(); ++i)
        diffs.push_back(level_norm(f.codomain(), convert<double>(dk[i] - dk[i + 1]), m) / std::pow(nu, k));
      const double dmax = *std::max_element(diffs.begin(), diffs.end());
      rep.worst = std::max(rep.worst, diffs.back());
      if (dmax > opt.tol && !decays(diffs, opt.tol, 3)) rep.pass = false;
    }
  }
  return rep;
}

Sc0Probe sc0_probe(const ScMap& f, int m, std::size_t block, std::size_t n_max, double amplitude) {
  Sc0Probe out;
  const auto& dom = f.domain();
  const Point zero = Point::zeros(dom.size());
  const Point f0 = f.eval(zero);
  for (std::size_t n = 0; n <= n_max; ++n) {
    Point x = Point::zeros(dom.size());
    x[block].at(n) = 1.0;
    const double w = level_norm(dom, x, m);
    x[block].at(n) = amplitude / w;
    const double ratio = level_norm(f.codomain(), f.eval(x) - f0, m) / amplitude;
    out.ratios.push_back(ratio);
  }
  double early = 1e-300;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, out.ratios.size()); ++i) early = std::max(early, out.ratios[i]);
  const double late = out.ratios.back();
  out.bounded = std::isfinite(late) && late <= 1e3 * early;
  return out;
}

}  // namespace scalekit
