#include "scalekit/bundle.hpp"

#include <algorithm>
#include <cmath>

namespace scalekit {

namespace {

Point random_finite(const ProductSpace& s, std::mt19937_64& rng, std::size_t seq_len = 10, double amp = 1.0) {
  std::uniform_real_distribution<double> uni(-amp, amp);
  Point p = Point::zeros(s.size());
  for (std::size_t b = 0; b < s.size(); ++b) {
    const std::size_t n = s[b].is_finite() ? s[b].dim : seq_len;
    for (std::size_t k = 0; k < n; ++k) p[b].at(k) = uni(rng);
  }
  return p;
}

double norm0(const ProductSpace& s, const Point& p) { return level_norm(s, p, 0); }

bool finite_point(const Point& p, std::size_t max_support = 1000000) {
  for (const auto& b : p.blocks) {
    if (b.support() > max_support) return false;
    for (double x : b.coeffs())
      if (!std::isfinite(x)) return false;
  }
  return true;
}

std::optional<std::size_t> finite_dim(const ProductSpace& s) {
  std::size_t n = 0;
  for (const auto& b : s.blocks) {
    if (!b.is_finite()) return std::nullopt;
    n += b.dim;
  }
  return n;
}

bool same_shape(const ProductSpace& a, const ProductSpace& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].same_model(b[i])) return false;
  return true;
}

// Unit vectors of every block; sequence blocks up to n.
std::vector<Point> unit_basis(const ProductSpace& s, std::size_t n) {
  std::vector<Point> out;
  for (std::size_t b = 0; b < s.size(); ++b) {
    const std::size_t m = s[b].is_finite() ? s[b].dim : n;
    for (std::size_t k = 0; k < m; ++k) {
      Point p = Point::zeros(s.size());
      p[b].at(k) = 1.0;
      out.push_back(std::move(p));
    }
  }
  return out;
}

// diag(I_W, p) on W + E
BlockOperator diag_with(const ProductSpace& w, const BlockOperator& p) {
  const ProductSpace amb = direct_sum(w, p.domain());
  BlockOperator out(amb, amb);
  for (std::size_t i = 0; i < w.size(); ++i) out.set(i, i, ScOperator::identity(w[i]));
  const std::size_t o = w.size();
  for (std::size_t i = 0; i < p.codomain().size(); ++i)
    for (std::size_t j = 0; j < p.domain().size(); ++j)
      if (p.block(i, j)) out.set(o + i, o + j, *p.block(i, j));
  return out;
}

// [0 | c] on W + E
BlockOperator on_fiber_columns(const ProductSpace& w, const BlockOperator& c) {
  BlockOperator out(direct_sum(w, c.domain()), c.codomain());
  for (std::size_t i = 0; i < c.codomain().size(); ++i)
    for (std::size_t j = 0; j < c.domain().size(); ++j)
      if (c.block(i, j)) out.set(i, w.size() + j, *c.block(i, j));
  return out;
}

OpenSet base_open(const LocalModel& m) {
  OpenSet o;
  o.corner = m.splicing->parameter_set().corner;
  const auto s = m.splicing;
  const std::size_t nw = s->parameter_space().size();
  o.predicate = [s, nw](const Point& x) { return s->parameter_contains(x.slice(0, nw)); };
  return o;
}

MapPtr fn(std::string name, ProductSpace a, ProductSpace b, FunctionMap::Eval f, FunctionMap::Tangent df,
          OpenSet open = {}) {
  return std::make_shared<FunctionMap>(std::move(name), std::move(a), std::move(b), std::move(f), std::move(df),
                                       FunctionMap::CEval{}, std::move(open));
}

// Bounded when the tail does not outgrow the head by more than three orders.
bool tail_bounded(const std::vector<double>& r) {
  if (r.empty()) return true;
  double early = 1.0, late = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) return false;
    if (i < 5) early = std::max(early, r[i]);
    if (i + 4 >= r.size()) late = std::max(late, r[i]);
  }
  return late <= 1e3 * early;
}

// ---------------------------------------------------------------- concrete bundles

class ParameterBundle : public StrongBundleSplicing {
 public:
  ParameterBundle(LocalModel base, SplicingPtr sigma)
      : StrongBundleSplicing(std::move(base), sigma->fiber()), sigma_(std::move(sigma)) {
    if (!(sigma_->parameter_space() == base_.splicing->parameter_space()))
      throw DomainError("fiber family and base model use different parameter spaces");
  }
  std::string kind() const override { return "param(" + sigma_->kind() + ")"; }
  Point rho(const Point& w, const Point& u) const override { return sigma_->project(v(w), u); }
  Point d_rho(const Point& w, const Point& dw, const Point& u, const Point& du) const override {
    return sigma_->d_project(v(w), v(dw), u, du);
  }
  std::optional<BlockOperator> rho_operator(const Point& w) const override { return sigma_->operator_at(v(w)); }
  std::optional<BlockOperator> base_derivative(const Point&, const Point&) const override {
    if (!sigma_->constant_operator()) return std::nullopt;
    return BlockOperator(base_.ambient(), f_);
  }
  std::optional<std::size_t> rank(const Point& w) const override { return sigma_->rank(v(w)); }
  std::optional<std::size_t> corank(const Point& w) const override { return sigma_->corank(v(w)); }
  Point raw_fiber(const Point& w, std::mt19937_64& rng) const override { return sigma_->sample_fiber(v(w), rng); }
  // a v-dependent sigma picks the parameters, so base points stay where its sampler resolves it
  Point sample_base(std::mt19937_64& rng) const override {
    if (sigma_->constant_operator()) return StrongBundleSplicing::sample_base(rng);
    const Splicing& s = *base_.splicing;
    for (int attempt = 0; attempt < 100; ++attempt) {
      const Point pv = sigma_->sample_parameter(rng);
      if (!s.parameter_contains(pv)) continue;
      const Point w = concat(pv, s.project(pv, s.sample_fiber(pv, rng)));
      if (base_.contains(w)) return w;
    }
    return StrongBundleSplicing::sample_base(rng);
  }

 private:
  Point v(const Point& w) const { return w.slice(0, base_.parameter_blocks()); }
  SplicingPtr sigma_;
};

class PullbackBundle : public StrongBundleSplicing {
 public:
  PullbackBundle(BundlePtr p, LocalModel base, MapPtr f)
      : StrongBundleSplicing(std::move(base), p->fiber()), p_(std::move(p)), f_map_(std::move(f)) {}
  std::string kind() const override { return "pullback(" + p_->kind() + "," + f_map_->kind() + ")"; }
  Point rho(const Point& w, const Point& u) const override { return p_->rho(f_map_->eval(w), u); }
  Point d_rho(const Point& w, const Point& dw, const Point& u, const Point& du) const override {
    return p_->d_rho(f_map_->eval(w), f_map_->tangent(w, dw), u, du);
  }
  std::optional<BlockOperator> rho_operator(const Point& w) const override {
    return p_->rho_operator(f_map_->eval(w));
  }
  std::optional<BlockOperator> base_derivative(const Point& w, const Point& u) const override {
    auto d = p_->base_derivative(f_map_->eval(w), u);
    auto j = f_map_->jacobian(w);
    if (!d || !j) return std::nullopt;
    return d->compose(*j);
  }
  std::optional<std::size_t> rank(const Point& w) const override { return p_->rank(f_map_->eval(w)); }
  std::optional<std::size_t> corank(const Point& w) const override { return p_->corank(f_map_->eval(w)); }
  Point raw_fiber(const Point& w, std::mt19937_64& rng) const override {
    return p_->raw_fiber(f_map_->eval(w), rng);
  }

 private:
  BundlePtr p_;
  MapPtr f_map_;
};

Point sample_in(const LocalModel& m, std::mt19937_64& rng) {
  const auto& s = *m.splicing;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Point v = s.sample_parameter(rng);
    const Point e = s.project(v, s.sample_fiber(v, rng));
    if (m.contains(v, e)) return concat(v, e);
  }
  throw DomainError("could not sample the base model of " + s.kind());
}

std::size_t nblocks_w(const StrongBundleSplicing& b) { return b.base().parameter_blocks(); }

}  // namespace

ProductSpace StrongBundleSplicing::total_space(int view) const {
  return direct_sum(base_.ambient(), f_.shifted(view));
}

Point StrongBundleSplicing::sample_base(std::mt19937_64& rng) const { return sample_in(base_, rng); }

Point StrongBundleSplicing::raw_fiber(const Point&, std::mt19937_64& rng) const { return random_finite(f_, rng); }

BundlePtr parameter_bundle(const LocalModel& base, const SplicingPtr& sigma) {
  return std::make_shared<ParameterBundle>(base, sigma);
}

MapPtr rho_map(const BundlePtr& b, int view) {
  const std::size_t na = b->base().ambient().size(), nf = b->fiber().size();
  OpenSet o = base_open(b->base());
  return fn(
      "rho(" + b->kind() + ")", b->total_space(view), b->fiber().shifted(view),
      [b, na, nf](const Point& x) { return b->rho(x.slice(0, na), x.slice(na, nf)); },
      [b, na, nf](const Point& x, const Point& h) {
        return b->d_rho(x.slice(0, na), h.slice(0, na), x.slice(na, nf), h.slice(na, nf));
      },
      std::move(o));
}

BundleReport check_strong_bundle(const BundlePtr& b, std::size_t samples, std::uint64_t seed, double tol) {
  BundleReport r;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  const auto& F = b->fiber();
  std::vector<Point> pts;
  r.level_shift = true;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point w = b->sample_base(rng);
    const Point u1 = b->raw_fiber(w, rng), u2 = b->raw_fiber(w, rng);
    const double a = uni(rng), c = uni(rng);
    const Point p1 = b->rho(w, u1), p2 = b->rho(w, u2);
    r.idempotency = std::max(r.idempotency, norm0(F, b->rho(w, p1) - p1) / std::max(1.0, norm0(F, p1)));
    r.linearity = std::max(r.linearity, norm0(F, b->rho(w, a * u1 + c * u2) - a * p1 - c * p2) /
                                            std::max(1.0, norm0(F, u1) + norm0(F, u2)));
    for (int m = 0; m < 3 && r.level_shift; ++m) {
      std::vector<double> ratios;
      for (const auto& e : unit_basis(F, 24))
        ratios.push_back(level_norm(F, b->rho(w, e), m + 1) / level_norm(F, e, m + 1));
      if (!tail_bounded(ratios)) {
        r.level_shift = false;
        r.failure = "rho loses the level m+1 at m = " + std::to_string(m);
      }
    }
    if (pts.size() < 4) pts.push_back(concat(w, p1));
    ++r.samples;
  }
  Sc1Options opt;
  opt.seed = seed;
  opt.random_directions = 3;
  for (int view = 0; view < 2; ++view) {
    const auto f = rho_map(b, view);
    bool ok = true;
    for (const auto& x : pts) {
      const auto rep = sc1_verify(*f, x, opt);
      if (!rep.pass) {
        ok = false;
        if (r.failure.empty()) r.failure = "view " + std::to_string(view) + ": " + rep.failure;
      }
    }
    (view == 0 ? r.view0_sc1 : r.view1_sc1) = ok;
  }
  if (r.failure.empty() && r.idempotency > tol) r.failure = "rho is not idempotent";
  if (r.failure.empty() && r.linearity > tol) r.failure = "rho is not linear in u";
  r.pass = r.idempotency <= tol && r.linearity <= tol && r.level_shift && r.view0_sc1 && r.view1_sc1;
  return r;
}

bool bifiltration_contains(const StrongBundleSplicing& b, const Point& w, const Point& u, int m, int k, double tau) {
  if (m < 0 || k < 0 || k > m + 1)
    throw DomainError("bi-level (" + std::to_string(m) + "," + std::to_string(k) + ") needs 0 <= k <= m+1");
  if (!b.base().contains(w, tau)) return false;
  const auto amb = b.base().ambient();
  const auto& F = b.fiber();
  if (!std::isfinite(level_norm(amb, w, m)) || !std::isfinite(level_norm(F, u, k))) return false;
  const Point d = b.rho(w, u) - u;
  for (int j = 0; j <= k; ++j)
    if (level_norm(F, d, j) > tau * std::max(1.0, level_norm(F, u, j))) return false;
  return true;
}

// ---------------------------------------------------------------- strong bundle maps

StrongMapReport strong_map_class_check(const BundlePtr& src, const BundlePtr& dst, const MapPtr& phi, const MapPtr& Phi,
                                       std::size_t samples, std::uint64_t seed) {
  const auto amb = src->base().ambient(), amb2 = dst->base().ambient();
  if (!same_shape(phi->domain(), amb) || !same_shape(phi->codomain(), amb2))
    throw DomainError("base map does not match the base models");
  if (!same_shape(Phi->domain(), src->total_space()) || !same_shape(Phi->codomain(), dst->fiber()))
    throw DomainError("fiber map does not match the bundles");
  const std::size_t na = amb.size();

  StrongMapReport rep;
  std::mt19937_64 rng(seed);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < samples; ++i) {
    const Point w = src->sample_base(rng);
    pts.push_back(concat(w, src->sample_fiber(w, rng)));
  }
  Sc1Options opt;
  opt.seed = seed;
  opt.random_directions = 3;
  for (int view = 0; view < 2; ++view) {
    auto f = fn(
        "strong(" + phi->kind() + "," + Phi->kind() + ")", src->total_space(view), dst->total_space(view),
        [=](const Point& x) { return concat(phi->eval(x.slice(0, na)), Phi->eval(x)); },
        [=](const Point& x, const Point& h) {
          return concat(phi->tangent(x.slice(0, na), h.slice(0, na)), Phi->tangent(x, h));
        });
    StrongMapView& v = view == 0 ? rep.view0 : rep.view1;
    v.sc0 = true;
    for (int m = 0; m < 3; ++m) {
      double worst = 0.0;
      for (std::size_t b = 0; b < f->domain().size(); ++b) {
        if (f->domain()[b].is_finite()) continue;
        const auto p = sc0_probe(*f, m, b);
        v.sc0 = v.sc0 && p.bounded;
        worst = std::max(worst, p.ratios.back());
      }
      v.growth.push_back(worst);
    }
    v.sc1 = std::all_of(pts.begin(), pts.end(), [&](const Point& x) { return sc1_verify(*f, x, opt).pass; });
  }
  const bool ok0 = rep.view0.sc0 && rep.view0.sc1, ok1 = rep.view1.sc0 && rep.view1.sc1;
  rep.triangle = ok0 && ok1;
  rep.classification = rep.triangle ? "sc1-triangle" : ok0 ? "sc1-not-triangle" : "not-sc1";
  return rep;
}

// ---------------------------------------------------------------- sections

double section_residual(const Section& s, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  const auto& F = s.bundle->fiber();
  for (std::size_t i = 0; i < samples; ++i) {
    const Point w = s.bundle->sample_base(rng);
    const Point g = s.principal->eval(w);
    worst = std::max(worst, norm0(F, s.bundle->rho(w, g) - g) / std::max(1.0, norm0(F, g)));
  }
  return worst;
}

Section scplus_section_through(const Section& f, const Point& w0) {
  const auto b = f.bundle;
  if (!b->base().contains(w0)) throw DomainError("base point outside the model");
  const Point g0 = f.principal->eval(w0);
  if (!finite_point(g0)) throw DomainError("g(w0) is not a finite-support vector");
  auto s = std::make_shared<FunctionMap>(
      "splice(" + f.principal->kind() + ")", b->base().ambient(), b->fiber(),
      [b, g0](const Point& w) { return b->rho(w, g0); },
      [b, g0](const Point& w, const Point& h) { return b->d_rho(w, h, g0, Point::zeros(g0.size())); },
      FunctionMap::CEval{}, base_open(b->base()));
  s->set_jacobian([b, g0](const Point& w) { return b->base_derivative(w, g0); });
  return Section{b, s, true};
}

std::optional<std::int64_t> linearization_index(const BundlePtr& b, const Point& q,
                                                const std::optional<BlockOperator>& op, std::string* method) {
  const auto& S = *b->base().splicing;
  const Point v = q.slice(0, nblocks_w(*b));
  const auto dw = finite_dim(S.parameter_space());
  const auto rp = S.rank(v), rr = b->rank(q);
  auto say = [&](std::string m) {
    if (method) *method = std::move(m);
  };
  if (dw && rp && rr) {
    say("finite-dim");
    return static_cast<std::int64_t>(*dw + *rp) - static_cast<std::int64_t>(*rr);
  }
  const auto cp = S.corank(v), cr = b->corank(q);
  if (!op) {
    say("undecidable: no structured derivative");
    return std::nullopt;
  }
  if (!cp || !cr) {
    say("undecidable: infinite corank");
    return std::nullopt;
  }
  try {
    const auto split = fredholm_index(*op);
    say("corank");
    return split.index - static_cast<std::int64_t>(*cp) + static_cast<std::int64_t>(*cr);
  } catch (const IndexUndecidable& e) {
    say(std::string("undecidable: ") + e.what());
    return std::nullopt;
  }
}

Linearization linearize(const Section& f, const Section& s, const Point& q, double tol) {
  const auto& b = f.bundle;
  if (!b->base().contains(q)) throw DomainError("linearization point outside the model");
  const auto& F = b->fiber();
  const Point fq = f.principal->eval(q), sq = s.principal->eval(q);
  if (norm0(F, fq - sq) > tol * std::max(1.0, norm0(F, fq))) throw DomainError("s(q) differs from f(q)");
  Linearization lin;
  lin.q = q;
  const Point v = q.slice(0, nblocks_w(*b));
  const auto jf = f.principal->jacobian(q), js = s.principal->jacobian(q);
  const auto pi = b->base().splicing->operator_at(v);
  // diag(I, pi_q) parameterizes T_q O when pi is constant or e = 0
  bool e_zero = true;
  for (std::size_t i = nblocks_w(*b); i < q.size(); ++i) e_zero = e_zero && q[i].is_zero();
  if (jf && js && pi && (b->base().splicing->constant_operator() || e_zero))
    lin.op = (*jf - *js).compose(diag_with(b->base().splicing->parameter_space(), *pi));
  lin.index = linearization_index(b, q, lin.op, &lin.index_method);
  return lin;
}

ScPlusCertificate linearization_delta_scplus(const Section& f, const Section& s, const Section& t, const Point& q) {
  ScPlusCertificate c;
  const auto ls = linearize(f, s, q), lt = linearize(f, t, q);
  c.index_s = ls.index;
  c.index_t = lt.index;
  c.indices_agree = ls.index && lt.index && *ls.index == *lt.index;
  if (!ls.op || !lt.op) {
    c.operator_certificate = "none";
    return c;
  }
  // f'_s - f'_t = D(t - s)(q) on T_q O
  const BlockOperator d = *ls.op - *lt.op;
  bool certified = true, finite_rank = true;
  for (std::size_t i = 0; i < d.codomain().size(); ++i)
    for (std::size_t j = 0; j < d.domain().size(); ++j)
      if (const auto& blk = d.block(i, j)) {
        certified = certified && blk->certified_scplus();
        finite_rank = finite_rank && blk->is_finite_rank();
      }
  const bool all_finite = finite_dim(d.domain()) && finite_dim(d.codomain());
  c.operator_certificate = all_finite ? "finite-dim" : finite_rank ? "finite-rank" : "banded";
  for (const auto& h : unit_basis(d.domain(), 24)) {
    c.gains.push_back(level_norm(d.codomain(), d.apply(h), 1) / level_norm(d.domain(), h, 0));
    c.worst_gain = std::max(c.worst_gain, c.gains.back());
  }
  bool bounded = true;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < d.domain().size(); ++b) {
    const std::size_t n = d.domain()[b].is_finite() ? d.domain()[b].dim : 24;
    if (!d.domain()[b].is_finite())
      bounded = bounded && tail_bounded(std::vector<double>(c.gains.begin() + static_cast<std::ptrdiff_t>(pos),
                                                            c.gains.begin() + static_cast<std::ptrdiff_t>(pos + n)));
    pos += n;
  }
  c.scplus = certified && bounded && std::isfinite(c.worst_gain);
  c.pass = c.scplus && c.indices_agree;
  return c;
}

// ---------------------------------------------------------------- fillers

namespace {

ProductSpace seq(double delta) { return ProductSpace{ScaleSpace::sequence(delta)}; }
ProductSpace r1() { return ProductSpace{ScaleSpace::finite(1)}; }

}  // namespace

FillableBundle rank_jump_fillable(double delta) {
  const auto rj = rank_jump_splicing(delta);
  const auto line = trivial_splicing(rj->parameter_space(), r1(), rj->parameter_set());
  const auto sigma = whitney_sum(line, rj);
  FillableBundle fb;
  fb.name = "rank-jump";
  fb.bundle = parameter_bundle(whole_core(rj), sigma);
  const ProductSpace amb = whole_core(rj).ambient(), F = sigma->fiber();
  auto fc = std::make_shared<FunctionMap>(
      "complement-filler", amb, F,
      [rj](const Point& x) {
        const Point v = x.slice(0, 1), e = x.slice(1, 1);
        return concat(Point{Vector{}}, e - rj->project(v, e));
      },
      [rj](const Point& x, const Point& h) {
        const Point v = x.slice(0, 1), e = x.slice(1, 1);
        return concat(Point{Vector{}}, h.slice(1, 1) - rj->d_project(v, h.slice(0, 1), e, h.slice(1, 1)));
      });
  BlockOperator c(rj->fiber(), F);
  c.set(1, 0, ScOperator::identity(rj->fiber()[0]));
  fc->set_jacobian([c, amb](const Point& x) -> std::optional<BlockOperator> {
    if (x[0][0] > 0.0) return std::nullopt;
    return on_fiber_columns(ProductSpace{amb[0]}, c);
  });
  fb.filler.principal = fc;
  fb.filler.at_center = c;
  fb.filler.inverse = [](const Point&, const Point& y) { return y.slice(1, 1); };
  return fb;
}

FillableBundle trivial_fillable(double delta) {
  const auto base = trivial_splicing(r1(), seq(delta));
  FillableBundle fb;
  fb.name = "trivial";
  fb.bundle = parameter_bundle(whole_core(base), trivial_splicing(r1(), seq(delta)));
  const ProductSpace amb = whole_core(base).ambient();
  fb.filler.principal = std::make_shared<LinearMap>(BlockOperator(amb, seq(delta)));
  fb.filler.at_center = BlockOperator(seq(delta), seq(delta));
  fb.filler.inverse = [](const Point&, const Point&) { return Point::zeros(1); };
  return fb;
}

FillableBundle corank_one_fillable(double delta) {
  const auto line = const_rank_splicing(r1(), ScaleSpace::sequence(delta), {QVector{1}});
  const auto pi = complement_splicing(line);
  FillableBundle fb;
  fb.name = "corank-one";
  fb.bundle = parameter_bundle(whole_core(pi), pi);
  const ProductSpace amb = whole_core(pi).ambient();
  BlockOperator c(seq(delta), seq(delta));
  c.set(0, 0, ScOperator::rank_one(ScaleSpace::sequence(delta), ScaleSpace::sequence(delta), QVector{1}, QVector{1}));
  fb.filler.principal = std::make_shared<LinearMap>(on_fiber_columns(r1(), c));
  fb.filler.at_center = c;
  fb.filler.inverse = [](const Point&, const Point& y) { return y; };
  return fb;
}

FillerReport check_filler(const FillableBundle& fb, std::size_t samples, std::uint64_t seed, double tol) {
  FillerReport r;
  const auto& b = *fb.bundle;
  const auto& S = *b.base().splicing;
  const auto& F = b.fiber();
  const ProductSpace& E = S.fiber();
  const std::size_t nw = nblocks_w(b), ne = E.size();
  const auto& fc = *fb.filler.principal;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-2.0, 2.0);
  for (std::size_t i = 0; i < samples; ++i) {
    const Point w = b.sample_base(rng);
    const Point v = w.slice(0, nw), e = w.slice(nw, ne);
    // a point of O-hat over w
    const Point x = concat(v, e + random_finite(E, rng));
    const Point px = concat(v, S.project(v, x.slice(nw, ne)));
    r.rho_residual = std::max(r.rho_residual, norm0(F, b.rho(px, fc.eval(x))));

    auto L = [&](const Point& rr) { return fc.eval(concat(v, e + rr)) - fc.eval(w); };
    auto kernel_vec = [&](const Point& z) { return z - S.project(v, z); };
    const Point r1v = kernel_vec(random_finite(E, rng)), r2v = kernel_vec(random_finite(E, rng));
    const double a = uni(rng), c = uni(rng);
    r.linearity = std::max(r.linearity, norm0(F, L(a * r1v + c * r2v) - a * L(r1v) - c * L(r2v)));

    const Point u = random_finite(F, rng);
    const Point y = u - b.rho(w, u);
    const Point rr = fb.filler.inverse(w, y);
    r.inverse_residual = std::max(r.inverse_residual, norm0(F, L(rr) - y));
    r.inverse_residual = std::max(r.inverse_residual, norm0(E, S.project(v, rr)));

    for (const auto& ek : unit_basis(E, 10)) {
      const Point k = kernel_vec(ek);
      const double nk = norm0(E, k);
      if (nk < 1e-8) continue;
      r.injectivity = std::min(r.injectivity, norm0(F, L(k)) / nk);
    }
    ++r.samples;
  }
  r.pass = r.rho_residual <= tol && r.linearity <= tol && r.inverse_residual <= tol && r.injectivity > 1e-6;
  return r;
}

FilledSection fill(const Section& f, const Filler& filler) {
  const auto& b = f.bundle;
  const auto amb = b->base().ambient();
  if (!same_shape(filler.principal->domain(), amb) || !same_shape(filler.principal->codomain(), b->fiber()))
    throw DomainError("filler does not match the bundle splicing");
  FilledSection fs{f, filler, nullptr, nullptr};
  fs.extension = std::make_shared<ComposeMap>(f.principal, retraction_map(b->base().splicing));
  const MapPtr ext = fs.extension, fc = filler.principal;
  fs.principal = fn(
      "filled(" + f.principal->kind() + ")", amb, b->fiber(),
      [ext, fc](const Point& x) { return ext->eval(x) + fc->eval(x); },
      [ext, fc](const Point& x, const Point& h) { return ext->tangent(x, h) + fc->tangent(x, h); },
      base_open(b->base()));
  return fs;
}

ZeroSetReport zero_set_equivalence(const FilledSection& fs, const std::vector<Point>& grid, double tau) {
  ZeroSetReport r;
  const auto& b = *fs.original.bundle;
  const auto hat = hat_extend(b.base());
  const auto& F = b.fiber();
  for (const auto& x : grid) {
    if (!hat.contains(x)) throw DomainError("grid point outside O-hat");
    const bool filled_zero = norm0(F, fs.principal->eval(x)) <= tau;
    const bool orig_zero = b.base().contains(x, tau) && norm0(F, fs.original.principal->eval(x)) <= tau;
    r.filled_zeros += filled_zero;
    r.original_zeros += orig_zero;
    if (filled_zero != orig_zero) r.mismatches.push_back(x);
    ++r.points;
  }
  r.pass = r.mismatches.empty();
  return r;
}

FilledBlockReport filled_linearization_block(const Section& f, const Filler& filler, const Point& q, double tol) {
  const auto& b = f.bundle;
  const auto& S = b->base().splicing;
  const auto& W = S->parameter_space();
  const auto& E = S->fiber();
  const auto& F = b->fiber();
  const auto amb = b->base().ambient();
  const std::size_t nw = W.size(), ne = E.size();
  if (!finite_point(q) || !b->base().contains(q)) throw DomainError("q is not a smooth point of the model");
  if (norm0(F, f.principal->eval(q)) > 1e-9) throw DomainError("f does not vanish at q");

  FilledBlockReport r;
  bool centered = true;
  for (const auto& blk : q.blocks) centered = centered && blk.is_zero();
  if (!centered) {
    // translation w -> w + q keeps the core only for a constant family on a full space
    if (!S->constant_operator() || !S->parameter_set().corner.empty())
      throw DomainError("q is not centered and the chart cannot be translated");
    r.note = "translated to the origin";
  }
  if (!filler.at_center) throw DomainError("filler has no operator at the centre");
  const Point v = q.slice(0, nw);
  const auto pi = S->operator_at(v);
  const auto rho = b->rho_operator(q);
  if (!pi || !rho) throw DomainError("splicings have no structured form at q");

  const FilledSection fs = fill(f, filler);
  const BlockOperator c = *filler.at_center;
  const auto jg = f.principal->jacobian(q);
  if (jg) r.dfbar = jg->compose(diag_with(W, *pi)) + on_fiber_columns(W, c);
  else r.note += (r.note.empty() ? "" : "; ") + std::string("no structured derivative of f");

  // splitting T O-hat = (dw, da) + db with da in im pi_q, db in ker pi_q
  std::vector<Point> kept, dropped;
  for (const auto& h : unit_basis(amb, 12)) {
    const Point dw = h.slice(0, nw), de = h.slice(nw, ne);
    const Point da = pi->apply(de), db = de - da;
    if (!dw.blocks.empty() && norm0(W, dw) > 0) kept.push_back(concat(dw, Point::zeros(ne)));
    if (norm0(E, da) > 1e-12) kept.push_back(concat(Point::zeros(nw), da));
    if (norm0(E, db) > 1e-12) dropped.push_back(concat(Point::zeros(nw), db));
  }
  for (const auto& h : dropped) r.cross_f = std::max(r.cross_f, norm0(F, fs.extension->tangent(q, h)));
  for (const auto& h : kept) r.cross_fc = std::max(r.cross_fc, norm0(F, filler.principal->tangent(q, h)));
  if (r.dfbar) {
    std::mt19937_64 rng(0x5eed);
    std::vector<Point> dirs = kept;
    dirs.insert(dirs.end(), dropped.begin(), dropped.end());
    for (int i = 0; i < 4; ++i) dirs.push_back(random_finite(amb, rng));
    for (const auto& h : dirs)
      r.assembly = std::max(r.assembly, norm0(F, r.dfbar->apply(h) - fs.principal->tangent(q, h)) /
                                            std::max(1.0, norm0(amb, h)));
  }

  // C : ker pi_q -> ker rho_q
  bool iso = true;
  for (const auto& h : dropped) {
    const Point db = h.slice(nw, ne);
    const Point y = c.apply(db);
    iso = iso && norm0(F, rho->apply(y)) <= tol && norm0(F, y) >= 1e-6 * norm0(E, db);
  }
  for (const auto& u : unit_basis(F, 12)) {
    const Point y = u - rho->apply(u);
    if (norm0(F, y) <= tol) continue;
    const Point rr = filler.inverse(q, y);
    iso = iso && norm0(F, c.apply(rr) - y) <= tol && norm0(E, pi->apply(rr)) <= tol;
  }
  r.c_isomorphism = iso;

  const BundlePtr bp = b;
  const Section zero{bp, std::make_shared<LinearMap>(BlockOperator(amb, F)), true};
  std::string method;
  r.index_f = linearize(f, zero, q).index;
  if (r.dfbar) {
    const auto dd = finite_dim(amb), dc = finite_dim(F);
    if (dd && dc) {
      r.index_filled = static_cast<std::int64_t>(*dd) - static_cast<std::int64_t>(*dc);
    } else {
      try {
        r.index_filled = fredholm_index(*r.dfbar).index;
      } catch (const IndexUndecidable& e) {
        r.note += (r.note.empty() ? "" : "; ") + std::string(e.what());
      }
    }
  }
  r.indices_equal = r.index_f && r.index_filled && *r.index_f == *r.index_filled;
  const bool decidable = r.index_f && r.index_filled;
  r.pass = r.cross_f <= tol && r.cross_fc <= tol && r.dfbar && r.assembly <= 1e-8 && r.c_isomorphism &&
           (!decidable || r.indices_equal);
  return r;
}

// ---------------------------------------------------------------- pullback

BundlePtr pullback_bundle(const BundlePtr& p, const LocalModel& base, const MapPtr& f, std::size_t samples,
                          std::uint64_t seed) {
  if (!same_shape(f->domain(), base.ambient()) || !same_shape(f->codomain(), p->base().ambient()))
    throw DomainError("map does not compose with the bundle's base chart");
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const Point w = sample_in(base, rng);
    if (!p->base().contains(f->eval(w), 1e-8)) throw DomainError("map leaves the base of the bundle");
  }
  return std::make_shared<PullbackBundle>(p, base, f);
}

}  // namespace scalekit
