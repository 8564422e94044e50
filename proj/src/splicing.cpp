#include "scalekit/splicing.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"

namespace scalekit {

QPoint Splicing::project(const QPoint&, const QPoint&) const {
  throw InexactError(kind() + " splicing has no exact evaluator");
}
CPoint Splicing::project(const CPoint&, const CPoint&) const {
  throw DomainError(kind() + " splicing has no complex extension");
}
QPoint Splicing::d_project(const QPoint&, const QPoint&, const QPoint&, const QPoint&) const {
  throw InexactError(kind() + " splicing has no exact derivative");
}

Point Splicing::sample_parameter(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int attempt = 0; attempt < 100; ++attempt) {
    Point v = Point::zeros(w_.size());
    for (std::size_t b = 0; b < w_.size(); ++b) {
      const std::size_t n = w_[b].is_finite() ? w_[b].dim : 4;
      for (std::size_t k = 0; k < n; ++k) v[b].at(k) = uni(rng);
    }
    const bool on_boundary = (rng() % 8) == 0;
    for (const auto& c : v_.corner) {
      double& x = v[c.block].at(c.index);
      x = on_boundary ? 0.0 : std::fabs(x);
    }
    for (auto& b : v.blocks) b.trim();
    if (parameter_contains(v)) return v;
  }
  throw DomainError("could not sample the parameter domain of " + kind());
}

Point Splicing::sample_fiber(const Point&, std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Point e = Point::zeros(e_.size());
  for (std::size_t b = 0; b < e_.size(); ++b) {
    const std::size_t n = e_[b].is_finite() ? e_[b].dim : 6;
    for (std::size_t k = 0; k < n; ++k) e[b].at(k) = uni(rng);
  }
  return e;
}

GluingProfile GluingProfile::exp_inv() {
  GluingProfile p;
  p.name = "exp_inv";
  p.r = [](double v) { return std::exp(1.0 / v); };
  p.dr = [](double v) { return -std::exp(1.0 / v) / (v * v); };
  p.cr = [](Complex v) { return std::exp(1.0 / v); };
  return p;
}

namespace {

// ---------------------------------------------------------------- constant families

class ConstantSplicing : public Splicing {
 public:
  ConstantSplicing(std::string name, ProductSpace w, ProductSpace e, OpenSet v, BlockOperator p,
                   std::optional<std::size_t> rank, std::optional<std::size_t> corank)
      : Splicing(std::move(w), std::move(e), std::move(v)),
        name_(std::move(name)),
        p_(std::move(p)),
        rank_(rank),
        corank_(corank) {}

  std::string kind() const override { return name_; }
  Point project(const Point&, const Point& e) const override { return p_.apply(e); }
  QPoint project(const QPoint&, const QPoint& e) const override { return p_.apply(e); }
  CPoint project(const CPoint&, const CPoint& e) const override { return p_.apply(e); }
  Point d_project(const Point&, const Point&, const Point&, const Point& de) const override { return p_.apply(de); }
  QPoint d_project(const QPoint&, const QPoint&, const QPoint&, const QPoint& de) const override {
    return p_.apply(de);
  }
  std::optional<BlockOperator> constant_operator() const override { return p_; }
  std::optional<std::size_t> rank(const Point&) const override { return rank_; }
  std::optional<std::size_t> corank(const Point&) const override { return corank_; }
  bool supports_exact() const override { return !p_.inexact_data(); }
  bool supports_complex() const override { return true; }

 private:
  std::string name_;
  BlockOperator p_;
  std::optional<std::size_t> rank_, corank_;
};

std::optional<std::size_t> finite_dim(const ProductSpace& e) {
  std::size_t n = 0;
  for (const auto& b : e.blocks) {
    if (!b.is_finite()) return std::nullopt;
    n += b.dim;
  }
  return n;
}

// ---------------------------------------------------------------- rank jump

// Gaussian bump cut at |t| < 12, where it is below e^{-72} relative to the peak.
constexpr double kWidth = 12.0;
constexpr double kMaxCentre = 1e15;
constexpr std::size_t kMaxStored = 100000000;

template <class S>
S bump(const S& t) {
  return std::exp(S(-0.5) * t * t);
}

template <class S>
S dbump(const S& t) {
  return -t * bump(t);
}

template <class S>
struct Window {
  bool empty = true;
  std::size_t lo = 0;
  std::vector<S> u, du;  // du = d u / d R
};

template <class S>
Window<S> make_window(const S& r, bool derivative) {
  Window<S> w;
  const double c = std::real(r);
  if (!(c < kMaxCentre)) return w;
  const auto first = static_cast<std::int64_t>(std::floor(c - kWidth)) + 1;
  const auto last = static_cast<std::int64_t>(std::ceil(c + kWidth)) - 1;
  std::vector<S> b, bp;
  std::int64_t lo = -1;
  for (std::int64_t k = std::max<std::int64_t>(first, 0); k <= last; ++k) {
    const S t = S(static_cast<double>(k)) - r;
    if (!(std::abs(std::real(t)) < kWidth)) continue;
    if (lo < 0) lo = k;
    b.push_back(bump(t));
    bp.push_back(-dbump(t));
  }
  if (b.empty()) return w;
  S n2{};
  for (const auto& x : b) n2 += x * x;
  const S nb = std::sqrt(n2);
  w.empty = false;
  w.lo = static_cast<std::size_t>(lo);
  for (const auto& x : b) w.u.push_back(x / nb);
  if (derivative) {
    S ub{};
    for (std::size_t i = 0; i < b.size(); ++i) ub += w.u[i] * bp[i];
    for (std::size_t i = 0; i < b.size(); ++i) w.du.push_back((bp[i] - w.u[i] * ub) / nb);
  }
  return w;
}

template <class S>
S pair_with(const BasicVector<S>& e, const Window<S>& w, const std::vector<S>& u) {
  S s{};
  for (std::size_t i = 0; i < u.size(); ++i) s += e[w.lo + i] * u[i];
  return s;
}

template <class S>
void add_scaled(BasicVector<S>& out, const Window<S>& w, const std::vector<S>& u, const S& a) {
  if (exactly_zero(a)) return;
  for (std::size_t i = 0; i < u.size(); ++i) out.at(w.lo + i) += a * u[i];
}

ProductSpace one_dim() { return ProductSpace{ScaleSpace::finite(1)}; }
OpenSet half_line() {
  OpenSet o;
  o.corner = {{0, 0}};
  return o;
}

class RankJumpSplicing : public Splicing {
 public:
  RankJumpSplicing(double delta, GluingProfile p)
      : Splicing(one_dim(), ProductSpace{ScaleSpace::sequence(delta)}, half_line()), p_(std::move(p)) {}

  std::string kind() const override { return "rank_jump"; }
  const GluingProfile& profile() const { return p_; }

  Point project(const Point& v, const Point& e) const override { return project_t(v, e, [&](double x) { return p_.r(x); }); }
  CPoint project(const CPoint& v, const CPoint& e) const override {
    if (!p_.cr) return Splicing::project(v, e);
    return project_t(v, e, [&](Complex x) { return p_.cr(x); });
  }

  Point d_project(const Point& v, const Point& dv, const Point& e, const Point& de) const override {
    const double t = v[0][0];
    Point out = Point::zeros(1);
    if (t <= 0.0) return out;
    const auto w = make_window(p_.r(t), true);
    if (w.empty) return out;
    const double rp = p_.dr(t);
    const double s = pair_with(e[0], w, w.u);
    const double a = pair_with(de[0], w, w.u) + dv[0][0] * rp * pair_with(e[0], w, w.du);
    add_scaled(out[0], w, w.u, a);
    add_scaled(out[0], w, w.du, dv[0][0] * rp * s);
    out[0].trim();
    return out;
  }

  std::optional<std::size_t> rank(const Point& v) const override { return v[0][0] > 0.0 ? 1 : 0; }
  std::optional<BlockOperator> operator_at(const Point& v) const override {
    if (v[0][0] <= 0.0) return BlockOperator(e_, e_);
    return std::nullopt;
  }
  bool supports_complex() const override { return static_cast<bool>(p_.cr); }

  Vector u(double v) const {
    Vector out;
    if (v <= 0.0) return out;
    const auto w = make_window(p_.r(v), false);
    if (w.empty) return out;
    if (w.lo > kMaxStored) throw DomainError("u(v) is centred past the storable range");
    add_scaled(out, w, w.u, 1.0);
    return out;
  }

  // <e, u(v)>, or <e, du/dv>, without materializing u
  double pairing(double v, const Vector& e, bool derivative) const {
    if (v <= 0.0) return 0.0;
    const auto w = make_window(p_.r(v), derivative);
    if (w.empty) return 0.0;
    return derivative ? p_.dr(v) * pair_with(e, w, w.du) : pair_with(e, w, w.u);
  }

  Point sample_parameter(std::mt19937_64& rng) const override {
    if (rng() % 8 == 0) return Point{Vector{}};
    std::uniform_real_distribution<double> uni(0.5, 1.5);
    return Point{Vector{uni(rng)}};
  }

  Point sample_fiber(const Point& v, std::mt19937_64& rng) const override {
    Point e = Splicing::sample_fiber(v, rng);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    if (v[0][0] > 0.0) {
      const double c = p_.r(v[0][0]);
      if (c < 1e6) {
        const auto k0 = static_cast<std::size_t>(std::max(0.0, std::floor(c) - 4));
        for (std::size_t k = k0; k < k0 + 9; ++k) e[0].at(k) = uni(rng);
      }
    }
    return e;
  }

 private:
  template <class S, class R>
  BasicPoint<S> project_t(const BasicPoint<S>& v, const BasicPoint<S>& e, R&& profile) const {
    const S t = v[0][0];
    BasicPoint<S> out = BasicPoint<S>::zeros(1);
    if (std::real(t) <= 0.0) return out;
    const auto w = make_window(profile(t), false);
    if (w.empty) return out;
    add_scaled(out[0], w, w.u, pair_with(e[0], w, w.u));
    out[0].trim();
    return out;
  }

  GluingProfile p_;
};

class BrokenRankJump : public Splicing {
 public:
  explicit BrokenRankJump(double delta)
      : Splicing(one_dim(), ProductSpace{ScaleSpace::sequence(delta)}, half_line()) {}
  std::string kind() const override { return "broken_rank_jump"; }

  std::optional<std::size_t> index(double v) const {
    if (v <= 0.0) return std::nullopt;
    const double c = std::exp(1.0 / v);
    if (!(c < kMaxCentre)) return std::nullopt;
    return static_cast<std::size_t>(std::floor(c));
  }
  Point project(const Point& v, const Point& e) const override {
    Point out = Point::zeros(1);
    if (auto k = index(v[0][0])) {
      if (e[0][*k] != 0.0) out[0].at(*k) = e[0][*k];
    }
    return out;
  }
  // claims pi_v does not move with v
  Point d_project(const Point& v, const Point&, const Point&, const Point& de) const override {
    return project(v, de);
  }
  std::optional<std::size_t> rank(const Point& v) const override { return v[0][0] > 0.0 ? 1 : 0; }
  // just past a jump: R(v) = n + 1e-6
  Point sample_parameter(std::mt19937_64& rng) const override {
    const auto n = 2 + static_cast<double>(rng() % 40);
    return Point{Vector{1.0 / std::log(n + 1e-6)}};
  }
  Point sample_fiber(const Point& v, std::mt19937_64& rng) const override {
    Point e = Splicing::sample_fiber(v, rng);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    if (auto k = index(v[0][0]); k && *k < 1000000)
      for (std::size_t j = (*k > 3 ? *k - 3 : 0); j < *k + 4; ++j) e[0].at(j) = uni(rng);
    return e;
  }
};

// ---------------------------------------------------------------- derived families

class ComplementSplicing : public Splicing {
 public:
  explicit ComplementSplicing(SplicingPtr s)
      : Splicing(s->parameter_space(), s->fiber(), s->parameter_set()), s_(std::move(s)) {}
  std::string kind() const override { return "complement(" + s_->kind() + ")"; }
  bool parameter_contains(const Point& v, double tau) const override { return s_->parameter_contains(v, tau); }
  Point project(const Point& v, const Point& e) const override { return e - s_->project(v, e); }
  QPoint project(const QPoint& v, const QPoint& e) const override { return e - s_->project(v, e); }
  CPoint project(const CPoint& v, const CPoint& e) const override { return e - s_->project(v, e); }
  Point d_project(const Point& v, const Point& dv, const Point& e, const Point& de) const override {
    return de - s_->d_project(v, dv, e, de);
  }
  QPoint d_project(const QPoint& v, const QPoint& dv, const QPoint& e, const QPoint& de) const override {
    return de - s_->d_project(v, dv, e, de);
  }
  std::optional<BlockOperator> constant_operator() const override {
    auto p = s_->constant_operator();
    if (!p) return std::nullopt;
    return BlockOperator::identity(e_) - *p;
  }
  std::optional<BlockOperator> operator_at(const Point& v) const override {
    auto p = s_->operator_at(v);
    if (!p) return std::nullopt;
    return BlockOperator::identity(e_) - *p;
  }
  std::optional<std::size_t> rank(const Point& v) const override {
    const auto n = finite_dim(e_);
    const auto r = s_->rank(v);
    if (!n || !r) return std::nullopt;
    return *n - *r;
  }
  std::optional<std::size_t> corank(const Point& v) const override { return s_->rank(v); }
  bool supports_exact() const override { return s_->supports_exact(); }
  bool supports_complex() const override { return s_->supports_complex(); }
  Point sample_parameter(std::mt19937_64& rng) const override { return s_->sample_parameter(rng); }
  Point sample_fiber(const Point& v, std::mt19937_64& rng) const override { return s_->sample_fiber(v, rng); }

 private:
  SplicingPtr s_;
};

BlockOperator block_diag(const BlockOperator& a, const BlockOperator& b) {
  BlockOperator out(direct_sum(a.domain(), b.domain()), direct_sum(a.codomain(), b.codomain()));
  for (std::size_t i = 0; i < a.codomain().size(); ++i)
    for (std::size_t j = 0; j < a.domain().size(); ++j)
      if (a.block(i, j)) out.set(i, j, *a.block(i, j));
  const std::size_t ri = a.codomain().size(), rj = a.domain().size();
  for (std::size_t i = 0; i < b.codomain().size(); ++i)
    for (std::size_t j = 0; j < b.domain().size(); ++j)
      if (b.block(i, j)) out.set(ri + i, rj + j, *b.block(i, j));
  return out;
}

std::optional<std::size_t> add_ranks(std::optional<std::size_t> a, std::optional<std::size_t> b) {
  if (!a || !b) return std::nullopt;
  return *a + *b;
}

// Fiber of s followed by fiber of t; parameters either concatenated (product) or shared (Whitney).
class PairSplicing : public Splicing {
 public:
  PairSplicing(SplicingPtr s, SplicingPtr t, bool shared)
      : Splicing(shared ? s->parameter_space() : direct_sum(s->parameter_space(), t->parameter_space()),
                 direct_sum(s->fiber(), t->fiber()), make_open(s, t, shared)),
        s_(std::move(s)),
        t_(std::move(t)),
        shared_(shared) {}

  std::string kind() const override {
    return (shared_ ? "whitney(" : "product(") + s_->kind() + "," + t_->kind() + ")";
  }
  bool parameter_contains(const Point& v, double tau) const override {
    return s_->parameter_contains(vs(v), tau) && t_->parameter_contains(vt(v), tau);
  }
  Point project(const Point& v, const Point& e) const override { return proj(v, e); }
  QPoint project(const QPoint& v, const QPoint& e) const override { return proj(v, e); }
  CPoint project(const CPoint& v, const CPoint& e) const override { return proj(v, e); }
  Point d_project(const Point& v, const Point& dv, const Point& e, const Point& de) const override {
    return dproj(v, dv, e, de);
  }
  QPoint d_project(const QPoint& v, const QPoint& dv, const QPoint& e, const QPoint& de) const override {
    return dproj(v, dv, e, de);
  }
  std::optional<BlockOperator> constant_operator() const override {
    auto a = s_->constant_operator();
    auto b = t_->constant_operator();
    if (!a || !b) return std::nullopt;
    return block_diag(*a, *b);
  }
  std::optional<BlockOperator> operator_at(const Point& v) const override {
    auto a = s_->operator_at(vs(v));
    auto b = t_->operator_at(vt(v));
    if (!a || !b) return std::nullopt;
    return block_diag(*a, *b);
  }
  std::optional<std::size_t> rank(const Point& v) const override {
    return add_ranks(s_->rank(vs(v)), t_->rank(vt(v)));
  }
  std::optional<std::size_t> corank(const Point& v) const override {
    return add_ranks(s_->corank(vs(v)), t_->corank(vt(v)));
  }
  bool supports_exact() const override { return s_->supports_exact() && t_->supports_exact(); }
  bool supports_complex() const override { return s_->supports_complex() && t_->supports_complex(); }
  Point sample_parameter(std::mt19937_64& rng) const override {
    // shared parameter: a summand that does not move with v has no say
    if (shared_ && s_->constant_operator() && !t_->constant_operator()) return t_->sample_parameter(rng);
    Point a = s_->sample_parameter(rng);
    if (shared_) return a;
    return concat(a, t_->sample_parameter(rng));
  }
  Point sample_fiber(const Point& v, std::mt19937_64& rng) const override {
    return concat(s_->sample_fiber(vs(v), rng), t_->sample_fiber(vt(v), rng));
  }

 private:
  static OpenSet make_open(const SplicingPtr& s, const SplicingPtr& t, bool shared) {
    OpenSet o;
    o.corner = s->parameter_set().corner;
    if (!shared) {
      const std::size_t off = s->parameter_space().size();
      for (auto c : t->parameter_set().corner) o.corner.push_back({c.block + off, c.index});
    }
    const std::size_t ns = s->parameter_space().size(), nt = t->parameter_space().size();
    o.predicate = [s, t, shared, ns, nt](const Point& v) {
      return s->parameter_contains(v.slice(0, ns)) && t->parameter_contains(shared ? v : v.slice(ns, nt));
    };
    return o;
  }
  template <class S>
  BasicPoint<S> vs(const BasicPoint<S>& v) const {
    return v.slice(0, s_->parameter_space().size());
  }
  template <class S>
  BasicPoint<S> vt(const BasicPoint<S>& v) const {
    return shared_ ? v : v.slice(s_->parameter_space().size(), t_->parameter_space().size());
  }
  template <class S>
  BasicPoint<S> es(const BasicPoint<S>& e) const {
    return e.slice(0, s_->fiber().size());
  }
  template <class S>
  BasicPoint<S> et(const BasicPoint<S>& e) const {
    return e.slice(s_->fiber().size(), t_->fiber().size());
  }
  template <class S>
  BasicPoint<S> proj(const BasicPoint<S>& v, const BasicPoint<S>& e) const {
    return concat(s_->project(vs(v), es(e)), t_->project(vt(v), et(e)));
  }
  template <class S>
  BasicPoint<S> dproj(const BasicPoint<S>& v, const BasicPoint<S>& dv, const BasicPoint<S>& e,
                      const BasicPoint<S>& de) const {
    return concat(s_->d_project(vs(v), vs(dv), es(e), es(de)), t_->d_project(vt(v), vt(dv), et(e), et(de)));
  }

  SplicingPtr s_, t_;
  bool shared_;
};

}  // namespace

SplicingPtr trivial_splicing(const ProductSpace& w, const ProductSpace& e, OpenSet v) {
  return std::make_shared<ConstantSplicing>("trivial", w, e, std::move(v), BlockOperator::identity(e), finite_dim(e), 0);
}

SplicingPtr zero_splicing(const ProductSpace& w, const ProductSpace& e, OpenSet v) {
  return std::make_shared<ConstantSplicing>("zero", w, e, std::move(v), BlockOperator(e, e), 0, finite_dim(e));
}

SplicingPtr const_rank_splicing(const ProductSpace& w, const ScaleSpace& e, const std::vector<QVector>& basis,
                                OpenSet v) {
  const std::size_t r = basis.size();
  for (const auto& b : basis) {
    if (e.is_finite() && b.support() > e.dim) throw DomainError("basis vector exceeds the fiber dimension");
  }
  detail::QMatrix g(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      Rational s = 0;
      const std::size_t n = std::min(basis[i].support(), basis[j].support());
      for (std::size_t k = 0; k < n; ++k) s += basis[i][k] * basis[j][k];
      g(i, j) = s;
    }
  const auto gi = detail::inverse(g);
  if (!gi) throw DomainError("basis of a constant-rank splicing must be independent");
  const ProductSpace fiber{e};
  BlockOperator p(fiber, fiber);
  for (std::size_t i = 0; i < r; ++i) {
    QVector lambda;
    for (std::size_t j = 0; j < r; ++j) lambda += (*gi)(i, j) * basis[j];
    p.add(0, 0, ScOperator::rank_one(e, e, lambda.trim(), basis[i]));
  }
  return std::make_shared<ConstantSplicing>("const_rank", w, fiber, std::move(v), p, r,
                                            e.is_finite() ? std::optional<std::size_t>(e.dim - r) : std::nullopt);
}

SplicingPtr rank_jump_splicing(double delta, const GluingProfile& profile) {
  if (!(delta > 0)) throw DomainError("rank-jump splicing needs a positive rate");
  if (!profile.r || !profile.dr) throw DomainError("profile needs R and dR");
  double prev = INFINITY;
  for (double v = 0.1; v <= 4.0; v += 0.05) {
    const double r = profile.r(v);
    if (!(r < prev) || !(r > 0)) throw DomainError("profile not monotone");
    prev = r;
  }
  if (!(profile.r(0.05) > 1e6)) throw DomainError("profile must blow up at 0");
  return std::make_shared<RankJumpSplicing>(delta, profile);
}

SplicingPtr broken_rank_jump_splicing(double delta) { return std::make_shared<BrokenRankJump>(delta); }

SplicingPtr complement_splicing(const SplicingPtr& s) { return std::make_shared<ComplementSplicing>(s); }

SplicingPtr product_splicing(const SplicingPtr& s, const SplicingPtr& t) {
  return std::make_shared<PairSplicing>(s, t, false);
}

SplicingPtr whitney_sum(const SplicingPtr& s, const SplicingPtr& t) {
  const auto& a = s->parameter_set();
  const auto& b = t->parameter_set();
  const bool same = s->parameter_space() == t->parameter_space() && a.corner == b.corner && a.radius == b.radius &&
                    a.center.has_value() == b.center.has_value() && (!a.center || *a.center == *b.center);
  if (!same) throw DomainError("Whitney sum needs identical parameter domains");
  return std::make_shared<PairSplicing>(s, t, true);
}

Vector rank_jump_vector(const Splicing& s, double v) {
  const auto* rj = dynamic_cast<const RankJumpSplicing*>(&s);
  if (!rj) throw DomainError("not a rank-jump splicing");
  return rj->u(v);
}

double rank_jump_pairing(const Splicing& s, double v, const Vector& e, bool derivative) {
  const auto* rj = dynamic_cast<const RankJumpSplicing*>(&s);
  if (!rj) throw DomainError("not a rank-jump splicing");
  return rj->pairing(v, e, derivative);
}

// ---------------------------------------------------------------- cores

bool core_contains(const Splicing& s, const Point& v, const Point& e, int m, double tau) {
  if (!s.parameter_contains(v, tau)) throw DomainError("parameter outside V");
  const Point d = s.project(v, e) - e;
  // relative at high levels, where the weights amplify rounding
  for (int j = 0; j <= m; ++j)
    if (!(level_norm(s.fiber(), d, j) <= tau * std::max(1.0, level_norm(s.fiber(), e, j)))) return false;
  return true;
}

bool core_contains(const Splicing& s, const QPoint& v, const QPoint& e) {
  if (!s.parameter_contains(convert<double>(v))) throw DomainError("parameter outside V");
  return s.project(v, e) == e;
}

namespace {

OpenSet joint_open(const SplicingPtr& s) {
  OpenSet o;
  o.corner = s->parameter_set().corner;
  const std::size_t nw = s->parameter_space().size();
  o.predicate = [s, nw](const Point& x) { return s->parameter_contains(x.slice(0, nw)); };
  return o;
}

class JointMap : public ScMap {
 public:
  explicit JointMap(SplicingPtr s)
      : ScMap(direct_sum(s->parameter_space(), s->fiber()), s->fiber(), joint_open(s)),
        s_(std::move(s)),
        nw_(s_->parameter_space().size()),
        ne_(s_->fiber().size()) {}
  std::string kind() const override { return "joint(" + s_->kind() + ")"; }
  Point eval(const Point& x) const override { return s_->project(x.slice(0, nw_), x.slice(nw_, ne_)); }
  QPoint eval(const QPoint& x) const override { return s_->project(x.slice(0, nw_), x.slice(nw_, ne_)); }
  CPoint eval(const CPoint& x) const override { return s_->project(x.slice(0, nw_), x.slice(nw_, ne_)); }
  Point tangent(const Point& x, const Point& h) const override {
    return s_->d_project(x.slice(0, nw_), h.slice(0, nw_), x.slice(nw_, ne_), h.slice(nw_, ne_));
  }
  QPoint tangent(const QPoint& x, const QPoint& h) const override {
    return s_->d_project(x.slice(0, nw_), h.slice(0, nw_), x.slice(nw_, ne_), h.slice(nw_, ne_));
  }
  std::shared_ptr<const PolynomialMap> polynomial() const override {
    auto p = s_->constant_operator();
    if (!p) return nullptr;
    BlockOperator lin(dom_, cod_);
    for (std::size_t i = 0; i < ne_; ++i)
      for (std::size_t j = 0; j < ne_; ++j)
        if (p->block(i, j)) lin.set(i, nw_ + j, *p->block(i, j));
    return std::make_shared<PolynomialMap>(dom_, cod_, lin, std::vector<PolyTerm>{}, open_, p->inexact_data());
  }
  bool supports_exact() const override { return s_->supports_exact(); }
  bool supports_complex() const override { return s_->supports_complex(); }

 private:
  SplicingPtr s_;
  std::size_t nw_, ne_;
};

class RetractionMap : public ScMap {
 public:
  explicit RetractionMap(SplicingPtr s)
      : ScMap(direct_sum(s->parameter_space(), s->fiber()), direct_sum(s->parameter_space(), s->fiber()),
              joint_open(s)),
        s_(std::move(s)),
        nw_(s_->parameter_space().size()),
        ne_(s_->fiber().size()) {}
  std::string kind() const override { return "retraction(" + s_->kind() + ")"; }
  Point eval(const Point& x) const override { return ev(x); }
  QPoint eval(const QPoint& x) const override { return ev(x); }
  CPoint eval(const CPoint& x) const override { return ev(x); }
  Point tangent(const Point& x, const Point& h) const override { return tg(x, h); }
  QPoint tangent(const QPoint& x, const QPoint& h) const override { return tg(x, h); }
  std::shared_ptr<const PolynomialMap> polynomial() const override {
    auto p = s_->constant_operator();
    if (!p) return nullptr;
    BlockOperator lin = block_diag(BlockOperator::identity(s_->parameter_space()), *p);
    return std::make_shared<PolynomialMap>(dom_, cod_, lin, std::vector<PolyTerm>{}, open_, p->inexact_data());
  }
  bool supports_exact() const override { return s_->supports_exact(); }
  bool supports_complex() const override { return s_->supports_complex(); }

 private:
  template <class S>
  BasicPoint<S> ev(const BasicPoint<S>& x) const {
    const auto v = x.slice(0, nw_);
    return concat(v, s_->project(v, x.slice(nw_, ne_)));
  }
  template <class S>
  BasicPoint<S> tg(const BasicPoint<S>& x, const BasicPoint<S>& h) const {
    const auto dv = h.slice(0, nw_);
    return concat(dv, s_->d_project(x.slice(0, nw_), dv, x.slice(nw_, ne_), h.slice(nw_, ne_)));
  }
  SplicingPtr s_;
  std::size_t nw_, ne_;
};

}  // namespace

MapPtr joint_map(const SplicingPtr& s) { return std::make_shared<JointMap>(s); }
MapPtr retraction_map(const SplicingPtr& s) { return std::make_shared<RetractionMap>(s); }

ProductSpace LocalModel::ambient() const { return direct_sum(splicing->parameter_space(), splicing->fiber()); }

bool LocalModel::contains(const Point& v, const Point& e, double tau) const {
  if (!splicing->parameter_contains(v, tau)) return false;
  if (!core_contains(*splicing, v, e, 0, tau)) return false;
  return open.contains(ambient(), concat(v, e), tau);
}

bool LocalModel::contains(const Point& ve, double tau) const {
  const std::size_t nw = parameter_blocks();
  return contains(ve.slice(0, nw), ve.slice(nw, splicing->fiber().size()), tau);
}

double LocalModel::witness_radius(const Point& ve) const {
  if (!contains(ve)) return 0.0;
  return open.witness_radius(ambient(), ve);
}

LocalModel whole_core(const SplicingPtr& s) { return LocalModel{s, {}}; }

HatExtension hat_extend(const LocalModel& m) {
  HatExtension h;
  h.retraction = retraction_map(m.splicing);
  h.contains = [m](const Point& x) {
    const std::size_t nw = m.parameter_blocks();
    const Point v = x.slice(0, nw);
    if (!m.splicing->parameter_contains(v)) return false;
    return m.contains(v, m.splicing->project(v, x.slice(nw, m.splicing->fiber().size())));
  };
  return h;
}

// ---------------------------------------------------------------- tangent splicing

std::pair<Point, Point> TangentSplicing::apply(const TangentSample& p) const {
  return {base->project(p.v, p.e), base->d_project(p.v, p.dv, p.e, p.de)};
}

std::pair<QPoint, QPoint> TangentSplicing::apply(const QPoint& v, const QPoint& dv, const QPoint& e,
                                                 const QPoint& de) const {
  return {base->project(v, e), base->d_project(v, dv, e, de)};
}

double TangentSplicing::membership_residual(const TangentSample& p) const {
  const auto [a, b] = apply(p);
  return std::max(level_norm(base->fiber(), a - p.e, 0), level_norm(base->fiber(), b - p.de, 0));
}

bool TangentSplicing::contains(const TangentSample& p, double tau) const {
  return base->parameter_contains(p.v, tau) && membership_residual(p) <= tau;
}

int TangentSplicing::base_level(int m, int k) {
  if (k < 0 || k > m) throw DomainError("tangent bi-level needs 0 <= k <= m");
  return m;
}

namespace {

Point random_like(const ProductSpace& s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Point p = Point::zeros(s.size());
  for (std::size_t b = 0; b < s.size(); ++b) {
    const std::size_t n = s[b].is_finite() ? s[b].dim : 4;
    for (std::size_t k = 0; k < n; ++k) p[b].at(k) = uni(rng);
  }
  return p;
}

QPoint rationalize(const Point& p) { return convert<Rational>(p); }

}  // namespace

std::vector<TangentSample> sample_tangent_core(const Splicing& s, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TangentSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    TangentSample p;
    p.v = s.sample_parameter(rng);
    p.dv = random_like(s.parameter_space(), rng);
    const Point e0 = s.sample_fiber(p.v, rng);
    const Point de0 = s.sample_fiber(p.v, rng);
    p.e = s.project(p.v, e0);
    p.de = s.d_project(p.v, p.dv, e0, de0);
    out.push_back(std::move(p));
  }
  return out;
}

IdempotencyReport splicing_idempotency(const Splicing& s, std::size_t samples, std::uint64_t seed, double tol) {
  IdempotencyReport rep;
  rep.seed = seed;
  rep.tol = tol;
  std::mt19937_64 rng(seed);
  rep.exact = s.supports_exact();
  bool all_zero = true;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point v = s.sample_parameter(rng);
    const Point e = s.sample_fiber(v, rng);
    if (rep.exact) {
      const QPoint vq = rationalize(v), eq = rationalize(e);
      const QPoint a = s.project(vq, eq);
      if (!(s.project(vq, a) == a)) all_zero = false;
    } else {
      const Point a = s.project(v, e);
      rep.worst = std::max(rep.worst, level_norm(s.fiber(), s.project(v, a) - a, 0));
    }
    ++rep.samples;
  }
  if (rep.exact) {
    rep.pass = all_zero;
    rep.worst = all_zero ? 0.0 : INFINITY;
  } else {
    rep.pass = rep.worst <= tol;
  }
  return rep;
}

TangentSplicingResult tangent_splicing(const SplicingPtr& s, std::size_t samples, std::uint64_t seed, double tol) {
  // certification of the joint map at a few sample points
  {
    auto phi = joint_map(s);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < 3; ++i) {
      const Point v = s->sample_parameter(rng);
      const Point x = concat(v, s->sample_fiber(v, rng));
      Sc1Options o;
      o.seed = seed + static_cast<std::uint64_t>(i);
      o.random_directions = 4;
      const auto r = sc1_verify(*phi, x, o);
      if (!r.pass) throw DomainError("splicing " + s->kind() + " is not sc1-certified: " + r.failure);
    }
  }
  TangentSplicingResult out{TangentSplicing{s}, {}};
  auto& rep = out.report;
  rep.seed = seed;
  rep.tol = tol;
  rep.exact = s->supports_exact();
  std::mt19937_64 rng(seed);
  bool all_equal = true;
  for (std::size_t i = 0; i < samples; ++i) {
    TangentSample p;
    p.v = s->sample_parameter(rng);
    p.dv = random_like(s->parameter_space(), rng);
    p.e = s->sample_fiber(p.v, rng);
    p.de = s->sample_fiber(p.v, rng);
    if (rep.exact) {
      const QPoint v = rationalize(p.v), dv = rationalize(p.dv);
      const auto [a, b] = out.splicing.apply(v, dv, rationalize(p.e), rationalize(p.de));
      const auto [a2, b2] = out.splicing.apply(v, dv, a, b);
      if (!(a2 == a && b2 == b)) all_equal = false;
    } else {
      const auto [a, b] = out.splicing.apply(p);
      const auto [a2, b2] = out.splicing.apply({p.v, p.dv, a, b});
      rep.worst = std::max({rep.worst, level_norm(s->fiber(), a2 - a, 0), level_norm(s->fiber(), b2 - b, 0)});
    }
    ++rep.samples;
  }
  if (rep.exact) {
    rep.pass = all_equal;
    rep.worst = all_equal ? 0.0 : INFINITY;
  } else {
    rep.pass = rep.worst <= tol;
  }
  return out;
}

// ---------------------------------------------------------------- core maps

CoreMap::CoreMap(LocalModel src, LocalModel dst, MapPtr f) : src_(std::move(src)), dst_(std::move(dst)), f_(std::move(f)) {
  if (!(f_->domain() == src_.ambient())) throw DomainError("core map extension has the wrong domain");
  if (!(f_->codomain() == dst_.ambient())) throw DomainError("core map extension has the wrong codomain");
  hat_ = std::make_shared<ComposeMap>(f_, retraction_map(src_.splicing));
}

CoreMap compose(const CoreMap& g, const CoreMap& f) {
  if (!(f.target().ambient() == g.source().ambient()) || f.target().splicing->kind() != g.source().splicing->kind())
    throw DomainError("core maps are not composable");
  return CoreMap(f.source(), g.target(), std::make_shared<ComposeMap>(g.extension(), f.hat()));
}

CoreTangentResult core_map_tangent(const CoreMap& f, const TangentSample& p, double tol) {
  const TangentSplicing ts{f.source().splicing};
  if (!f.source().contains(p.v, p.e) || !ts.contains(p))
    throw DomainError("point is not in the tangent core of the source");
  const Point x = concat(p.v, p.e);
  const Point h = concat(p.dv, p.de);
  const Point y = f.hat()->eval(x);
  const Point dy = f.hat()->tangent(x, h);
  const auto& s2 = *f.target().splicing;
  const std::size_t nw = s2.parameter_space().size(), ne = s2.fiber().size();
  CoreTangentResult r;
  r.image = {y.slice(0, nw), dy.slice(0, nw), y.slice(nw, ne), dy.slice(nw, ne)};
  if (!s2.parameter_contains(r.image.v)) return r;
  r.core_residual = level_norm(s2.fiber(), s2.project(r.image.v, r.image.e) - r.image.e, 0);
  r.map22_residual =
      level_norm(s2.fiber(), r.image.de - s2.d_project(r.image.v, r.image.dv, r.image.e, r.image.de), 0);
  r.in_target = r.core_residual <= tol && r.map22_residual <= tol;
  return r;
}

CoreChainReport core_chain_rule(const CoreMap& f, const CoreMap& g, const std::vector<TangentSample>& points,
                                Regime mode, double tol) {
  const CoreMap gf = compose(g, f);  // throws when not composable
  std::vector<Point> bases;
  std::vector<TangentPoint> tps;
  for (const auto& p : points) {
    bases.push_back(concat(p.v, p.e));
    tps.push_back({bases.back(), concat(p.dv, p.de)});
  }
  Sc1Options o;
  o.random_directions = 2;
  CertifiedMap::certify(f.hat(), bases, o);
  std::vector<Point> images;
  for (const auto& b : bases) images.push_back(f.hat()->eval(b));
  CertifiedMap::certify(g.hat(), images, o);

  CoreChainReport rep;
  rep.chain = chain_rule_verify(f.hat(), g.hat(), tps, mode, tol);
  for (const auto& p : points) rep.worst_map22 = std::max(rep.worst_map22, core_map_tangent(gf, p).map22_residual);
  rep.pass = rep.chain.pass && rep.worst_map22 <= 1e-8;
  return rep;
}

}  // namespace scalekit
