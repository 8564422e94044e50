#include <doctest.h>

#include <cmath>

#include "scalekit/splicing.hpp"

using namespace scalekit;

namespace {

const ScaleSpace E = ScaleSpace::sequence(1.0);
const ProductSpace W1{ScaleSpace::finite(1)};
const ProductSpace R3{ScaleSpace::finite(3)};

Point pv(double v) { return Point{Vector{v}}; }
Point pe(Vector e) { return Point{std::move(e)}; }

// u_k proportional to exp(-(k-R)^2/2) for |k-R| < 12, R = e^{1/v}
Vector oracle_u(double v) {
  const double r = std::exp(1.0 / v);
  Vector u;
  double n2 = 0;
  for (int k = 0; k < int(r) + 14; ++k) {
    if (std::fabs(k - r) >= 12) continue;
    u.at(k) = std::exp(-0.5 * (k - r) * (k - r));
    n2 += u[k] * u[k];
  }
  for (auto& x : u.coeffs()) x /= std::sqrt(n2);
  return u;
}

// y + (y . (1,1,0))^2 / 4 * (1,1,0), kept in the core of span{(1,1,0)} after the retraction
std::shared_ptr<PolynomialMap> bend(const ProductSpace& amb) {
  std::vector<PolyTerm> t;
  for (std::size_t out : {0u, 1u})
    for (auto [a, b] : {std::pair{0u, 0u}, {0u, 1u}, {1u, 1u}})
      t.push_back({{1, out}, Rational(a == b ? 1 : 2, 4), a == b ? Monomial{{{1, a}, 2u}} : Monomial{{{1, a}, 1u}, {{1, b}, 1u}}});
  t.push_back({{1, 0}, Rational(1, 3), {{{0, 0}, 1u}, {{1, 0}, 1u}}});
  t.push_back({{1, 1}, Rational(1, 3), {{{0, 0}, 1u}, {{1, 0}, 1u}}});
  return std::make_shared<PolynomialMap>(amb, amb, BlockOperator::identity(amb), t);
}

}  // namespace

TEST_CASE("core membership of the built-in splicings") {
  auto triv = trivial_splicing(W1, ProductSpace{E});
  auto zero = zero_splicing(W1, ProductSpace{E});
  CHECK(core_contains(*triv, pv(0.3), pe({1, 2, 3})));
  CHECK_FALSE(core_contains(*zero, pv(0.3), pe({1})));
  CHECK(core_contains(*zero, pv(0.3), pe({})));

  auto rj = rank_jump_splicing(1.0);
  CHECK(core_contains(*rj, pv(0), pe({})));
  CHECK_FALSE(core_contains(*rj, pv(0), pe(Vector::unit(7))));
  CHECK(rj->rank(pv(0)) == 0u);
  CHECK(rj->rank(pv(0.5)) == 1u);
  CHECK_THROWS_AS(core_contains(*rj, pv(-1), pe({})), DomainError);

  const Vector u = rank_jump_vector(*rj, 0.5);
  const Vector o = oracle_u(0.5);
  REQUIRE(u.support() == o.support());
  for (std::size_t k = 0; k < u.support(); ++k) CHECK(u[k] == doctest::Approx(o[k]).epsilon(1e-13));
  CHECK(core_contains(*rj, pv(0.5), pe(2.0 * u), 3));
  CHECK_FALSE(core_contains(*rj, pv(0.5), pe(Vector::unit(0))));
  // the centre drifts to higher indices as v -> 0
  CHECK(rank_jump_vector(*rj, 0.25).support() > 50);

  GluingProfile bad{"bad", [](double v) { return v; }, [](double) { return 1.0; }, {}};
  CHECK_THROWS_AS(rank_jump_splicing(1.0, bad), DomainError);
}

TEST_CASE("joint maps and negative control") {
  auto rj = rank_jump_splicing(1.0);
  auto phi = joint_map(rj);
  std::mt19937_64 rng(7);
  for (double v : {0.0, 0.6, 0.9, 1.3}) {
    Point x = concat(pv(v), rj->sample_fiber(pv(v), rng));
    const auto r = sc1_verify(*phi, x);
    CHECK_MESSAGE(r.pass, "v = " << v << ": " << r.failure << " q=" << r.worst_final_q);
  }
  auto broken = broken_rank_jump_splicing(1.0);
  const Point vb = broken->sample_parameter(rng);
  const Point xb = concat(vb, broken->sample_fiber(vb, rng));
  CHECK_FALSE(sc1_verify(*joint_map(broken), xb).pass);
  CHECK_THROWS_AS(tangent_splicing(broken), DomainError);
}

TEST_CASE("tangent splicing idempotency") {
  auto rj = rank_jump_splicing(1.0);
  const auto t = tangent_splicing(rj, 64);
  CHECK(t.report.samples == 64);
  CHECK(t.report.pass);
  CHECK(t.report.worst <= 1e-8);
  CHECK_FALSE(t.report.exact);

  auto cr = const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 1, 0}, QVector{0, 1, 2}});
  const auto tc = tangent_splicing(cr, 64);
  CHECK(tc.report.exact);
  CHECK(tc.report.pass);
  CHECK(tc.report.worst == 0.0);
  // P = (pi, pi) for a constant family
  const auto [a, b] = tc.splicing.apply(QPoint{QVector{0}}, QPoint{QVector{1}}, QPoint{QVector{1, 0, 0}},
                                        QPoint{QVector{1, 0, 0}});
  CHECK(a == b);
  CHECK(cr->project(QPoint{QVector{0}}, QPoint{QVector{1, 1, 0}}) == QPoint{QVector{1, 1, 0}});

  auto triv = trivial_splicing(W1, R3);
  const auto [ta, tb] = TangentSplicing{triv}.apply({pv(0.1), pv(1), pe({1, 2, 3}), pe({4, 5, 6})});
  CHECK(ta == pe({1, 2, 3}));
  CHECK(tb == pe({4, 5, 6}));
  CHECK(TangentSplicing::base_level(2, 1) == 2);
  CHECK_THROWS_AS(TangentSplicing::base_level(1, 2), DomainError);
  CHECK(splicing_idempotency(*rj).pass);
}

TEST_CASE("hat extension") {
  auto rj = rank_jump_splicing(1.0);
  LocalModel m{rj, {}};
  m.open.center = Point{Vector{0.5}, Vector{}};
  m.open.radius = 1.0;
  const auto hat = hat_extend(m);
  const Vector u = rank_jump_vector(*rj, 0.5);
  const Vector perp = Vector{3.0} - (3.0 * u[0]) * u;  // e_0 component orthogonal to u
  for (double s : {0.1, 0.5, 0.9, 1.1}) {
    const Point span = concat(pv(0.5), pe(s * u));
    const Point full = concat(pv(0.5), pe(s * u + perp));
    CHECK(hat.contains(full) == m.contains(span));
  }
  CHECK(hat.retraction->eval(concat(pv(0.5), pe(u + perp))) == concat(pv(0.5), rj->project(pv(0.5), pe(u + perp))));

  auto zero = zero_splicing(W1, ProductSpace{E});
  LocalModel mz{zero, {}};
  CHECK(hat_extend(mz).contains(concat(pv(0.2), pe({5, 6}))));
}

TEST_CASE("products, Whitney sums and complements") {
  auto rj = rank_jump_splicing(1.0);
  auto triv = trivial_splicing(W1, R3);
  auto prod = product_splicing(rj, triv);
  CHECK(prod->parameter_space().size() == 2);
  const Point v = Point{Vector{0.5}, Vector{0.3}};
  const Vector u = rank_jump_vector(*rj, 0.5);
  CHECK(core_contains(*prod, v, Point{u, Vector{1, 2, 3}}));
  CHECK_FALSE(core_contains(*prod, v, Point{Vector{1}, Vector{1, 2, 3}}));

  auto w = whitney_sum(rj, rj);
  CHECK(w->rank(pv(0.5)) == 2u);
  CHECK(w->rank(pv(0)) == 0u);
  CHECK(splicing_idempotency(*w).pass);
  CHECK_THROWS_AS(whitney_sum(rj, triv), DomainError);

  auto cr = const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 2, 0}});
  auto cc = complement_splicing(cr);
  CHECK(cc->rank(pv(0)) == 2u);
  const QPoint vq{QVector{Rational(1, 2)}};
  const QPoint e{QVector{3, -1, 7}};
  const QPoint a = cr->project(vq, e), b = cc->project(vq, e);
  CHECK(a + b == e);
  CHECK(core_contains(*cr, vq, a));
  CHECK(core_contains(*cc, vq, b));
  CHECK(splicing_idempotency(*cc).exact);
  // rank-jump complement reassembles too
  auto rc = complement_splicing(rj);
  const Point ef = pe({1, -2, 0.5, 0, 0, 0, 3, 4, 5});
  CHECK(level_norm(ProductSpace{E}, rj->project(pv(0.5), ef) + rc->project(pv(0.5), ef) - ef, 2) < 1e-12);
}

TEST_CASE("core map tangents") {
  auto rj = rank_jump_splicing(1.0);
  const LocalModel m = whole_core(rj);
  const ProductSpace amb = m.ambient();
  auto id = std::make_shared<LinearMap>(BlockOperator::identity(amb));
  const CoreMap fid(m, m, id);
  const auto pts = sample_tangent_core(*rj, 12, 3);
  for (const auto& p : pts) {
    const auto r = fid.hat() ? core_map_tangent(fid, p) : CoreTangentResult{};
    CHECK(r.in_target);
    CHECK(level_norm(ProductSpace{E}, r.image.e - p.e, 0) < 1e-12);
    CHECK(level_norm(ProductSpace{E}, r.image.de - p.de, 0) < 1e-12);
  }
  // (v,e) -> (v, 2e): A commutes with every pi_v
  BlockOperator a = BlockOperator::identity(amb);
  a.set(1, 1, ScOperator::identity(E).scaled(2));
  const CoreMap f2(m, m, std::make_shared<LinearMap>(a));
  for (const auto& p : pts) {
    const auto r = core_map_tangent(f2, p);
    CHECK(r.in_target);
    CHECK(r.image.v == p.v);
    CHECK(r.image.dv == p.dv);
    CHECK(level_norm(ProductSpace{E}, r.image.e - 2.0 * p.e, 0) < 1e-12);
    CHECK(level_norm(ProductSpace{E}, r.image.de - 2.0 * p.de, 0) < 1e-12);
  }
  TangentSample off{pv(0.5), pv(1), pe({1}), pe({})};
  CHECK_THROWS_AS(core_map_tangent(fid, off), DomainError);
}

TEST_CASE("chain rule on cores") {
  // exact: constant-rank splicing on R^3
  auto cr = const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 1, 0}});
  const LocalModel m = whole_core(cr);
  const ProductSpace amb = m.ambient();
  auto r = retraction_map(cr);
  const CoreMap f(m, m, std::make_shared<ComposeMap>(r, bend(amb)));
  const CoreMap g(m, m, std::make_shared<ComposeMap>(r, bend(amb)));
  const auto pts = sample_tangent_core(*cr, 6, 11);
  const auto ex = core_chain_rule(f, g, pts, Regime::exact);
  CHECK(ex.chain.regime == Regime::exact);
  CHECK(ex.pass);
  CHECK(ex.worst_map22 < 1e-12);

  // float: rank-jump cores, complex-step composite
  auto rj = rank_jump_splicing(1.0);
  const LocalModel mj = whole_core(rj);
  const ProductSpace aj = mj.ambient();
  // v -> v + v e_0^2 / 8 keeps v >= 0
  auto gj = std::make_shared<PolynomialMap>(aj, aj, BlockOperator::identity(aj),
                                            std::vector<PolyTerm>{{{0, 0}, Rational(1, 8), {{{0, 0}, 1u}, {{1, 0}, 2u}}}});
  const CoreMap fj(mj, mj, std::make_shared<ComposeMap>(retraction_map(rj), gj));
  const auto pj = sample_tangent_core(*rj, 8, 5);
  const auto fl = core_chain_rule(fj, fj, pj, Regime::floating);
  CHECK(fl.chain.method == "complex-step");
  CHECK(fl.chain.worst <= 1e-9);
  CHECK(fl.pass);
}
