#include <doctest.h>

#include <cmath>

#include "scalekit/calculus.hpp"

using namespace scalekit;

namespace {

const ScaleSpace R2 = ScaleSpace::finite(2);
const ScaleSpace E = ScaleSpace::sequence(1.0);

// x + x0^2 e1 on R^2
std::shared_ptr<PolynomialMap> quad_f() {
  return std::make_shared<PolynomialMap>(ProductSpace{R2}, ProductSpace{R2}, BlockOperator::identity(ProductSpace{R2}),
                                         std::vector<PolyTerm>{{{0, 1}, 1, {{{0, 0}, 2u}}}});
}
// y + y1^2 e0 on R^2
std::shared_ptr<PolynomialMap> quad_g() {
  return std::make_shared<PolynomialMap>(ProductSpace{R2}, ProductSpace{R2}, BlockOperator::identity(ProductSpace{R2}),
                                         std::vector<PolyTerm>{{{0, 0}, 1, {{{0, 1}, 2u}}}});
}

QPoint q2(long a, long b) { return QPoint{QVector{Rational(a), Rational(b)}}; }
Point d2(double a, double b) { return Point{Vector{a, b}}; }

}  // namespace

TEST_CASE("polynomial evaluation and tangent") {
  auto f = quad_f();
  CHECK(f->eval(q2(1, 0)) == q2(1, 1));
  CHECK(f->tangent(q2(1, 0), q2(1, 0)) == q2(1, 2));
  CHECK(f->degree() == 2);
  const auto tp = tangent_map(CertifiedMap::certify(f, {d2(1, 0)}), {d2(1, 0), d2(1, 0)});
  CHECK(tp.base == d2(1, 1));
  CHECK(tp.direction == d2(1, 2));
}

TEST_CASE("symbolic composition") {
  auto gf = PolynomialMap::compose(*quad_g(), *quad_f());
  // (x0 + (x1 + x0^2)^2, x1 + x0^2)
  CHECK(gf.eval(q2(1, 2)) == q2(10, 3));
  CHECK(gf.tangent(q2(1, 2), q2(0, 1)) == q2(6, 1));
  CHECK(gf.tangent(q2(1, 2), q2(1, 0)) == q2(13, 2));
  CHECK(gf.degree() == 4);
}

TEST_CASE("sc1 verification") {
  auto lin = std::make_shared<LinearMap>(BlockOperator::single(ScOperator::shift(E, 1)));
  const auto rl = sc1_verify(*lin, Point{Vector{1, 2, 3}});
  CHECK(rl.pass);
  for (const auto& d : rl.directions)
    for (double q : d.q) CHECK(q < 1e-13);

  // x + x0 x1 e0 on a sequence scale
  auto f = std::make_shared<PolynomialMap>(ProductSpace{E}, ProductSpace{E}, BlockOperator::identity(ProductSpace{E}),
                                           std::vector<PolyTerm>{{{0, 0}, 1, {{{0, 0}, 1u}, {{0, 1}, 1u}}}});
  const auto rf = sc1_verify(*f, Point{Vector{0.5, -0.25}});
  CHECK(rf.pass);
  CHECK(rf.worst_final_q < 1e-7);
  CHECK(rf.seed == 0x5eed);

  auto wrong = std::make_shared<DerivativeOverrideMap>(f, [&](const Point& x, const Point& h) {
    return 2.0 * f->tangent(x, h);
  });
  const auto rw = sc1_verify(*wrong, Point{Vector{0.5, -0.25}});
  CHECK_FALSE(rw.pass);
  CHECK_FALSE(rw.failure.empty());
  CHECK_THROWS_AS(CertifiedMap::certify(wrong, {Point{Vector{0.5}}}), DomainError);
}

TEST_CASE("sc1 quotient passing through zero") {
  // r / (1 + q^2) near 3q^2 = 1: the r^2 and r^3 terms of the residual cancel inside the radius range
  auto g = std::make_shared<FunctionMap>(
      "r/(1+q^2)", ProductSpace{R2}, ProductSpace{R2},
      [](const Point& x) { return d2(x[0][0] / (1 + x[0][1] * x[0][1]), x[0][1]); },
      [](const Point& x, const Point& h) {
        const double s = 1 + x[0][1] * x[0][1];
        return d2(h[0][0] / s - 2 * x[0][0] * x[0][1] * h[0][1] / (s * s), h[0][1]);
      });
  const auto rep = sc1_verify(*g, d2(0.244578, 0.575861), {d2(0, 1)}, default_radii());
  CHECK(rep.pass);
  // same map, derivative off by a little: the limit gives it away
  auto off = std::make_shared<DerivativeOverrideMap>(g, [g](const Point& x, const Point& h) {
    return g->tangent(x, h) + 1e-4 * h;
  });
  CHECK_FALSE(sc1_verify(*off, d2(0.244578, 0.575861), {d2(0, 1)}, default_radii()).pass);
}

TEST_CASE("corners and domain exits") {
  OpenSet corner;
  corner.corner = {{0, 0}};
  auto f = std::make_shared<PolynomialMap>(ProductSpace{R2}, ProductSpace{R2}, std::nullopt,
                                           std::vector<PolyTerm>{{{0, 1}, 1, {{{0, 0}, 2u}}}}, corner);
  const Point x = d2(0, 1);
  CHECK(f->open_set().active_corners(x).size() == 1);
  for (const auto& u : default_directions(*f, x)) CHECK(u[0][0] >= 0.0);
  CHECK(sc1_verify(*f, x).pass);
  CHECK_FALSE(f->contains(d2(-0.1, 0)));

  OpenSet ball;
  ball.center = d2(0, 0);
  ball.radius = 0.05;
  auto g = std::make_shared<PolynomialMap>(ProductSpace{R2}, ProductSpace{R2}, std::nullopt,
                                           std::vector<PolyTerm>{{{0, 1}, 1, {{{0, 0}, 2u}}}}, ball);
  CHECK(g->open_set().witness_radius(ProductSpace{R2}, d2(0, 0)) == doctest::Approx(0.05));
  CHECK_THROWS_AS(sc1_verify(*g, d2(0, 0)), DomainError);
}

TEST_CASE("chain rule") {
  auto f = quad_f();
  auto g = quad_g();
  const std::vector<TangentPoint> pts{{d2(1, 2), d2(0, 1)}, {d2(-0.5, 0.25), d2(1, -1)}};
  const auto exact = chain_rule_verify(f, g, pts, Regime::exact);
  CHECK(exact.pass);
  CHECK(exact.regime == Regime::exact);
  CHECK(exact.composite_verified);
  for (const auto& p : exact.points) CHECK(p.exact_equal);

  // non-polynomial inner map: (sin x0, x0 x1)
  auto s = std::make_shared<FunctionMap>(
      "sine", ProductSpace{R2}, ProductSpace{R2},
      [](const Point& x) { return d2(std::sin(x[0][0]), x[0][0] * x[0][1]); },
      [](const Point& x, const Point& h) {
        return d2(std::cos(x[0][0]) * h[0][0], h[0][0] * x[0][1] + x[0][0] * h[0][1]);
      },
      [](const CPoint& x) { return CPoint{CVector{std::sin(x[0][0]), x[0][0] * x[0][1]}}; });
  const auto fl = chain_rule_verify(s, g, pts, Regime::floating);
  CHECK(fl.method == "complex-step");
  CHECK(fl.pass);
  CHECK(fl.worst < 1e-12);

  auto bad = std::make_shared<DerivativeOverrideMap>(g, [](const Point&, const Point& h) { return h; });
  CHECK_FALSE(chain_rule_verify(s, bad, pts, Regime::floating).pass);
}

TEST_CASE("level Ck checks") {
  auto f = quad_f();
  const std::vector<Point> pts{d2(0.5, 0.5)};
  for (int k = 1; k <= 3; ++k) {
    const auto r = level_ck_check(*f, k, 0, pts);
    CHECK(r.applicable);
    CHECK(r.pass);
    CHECK(r.converse_applicable);
  }
  auto level_map = std::make_shared<FunctionMap>(
      "level", ProductSpace{E}, ProductSpace{E}, [](const Point& x) { return x; },
      [](const Point&, const Point& h) { return h; }, FunctionMap::CEval{}, OpenSet{}, 1);
  const auto r = level_ck_check(*level_map, 1, 0, {Point{Vector{1}}});
  CHECK_FALSE(r.converse_applicable);
  CHECK_FALSE(r.note.empty());
  CHECK_FALSE(level_ck_check(*level_map, 3, 0, {Point{Vector{1}}}).applicable);
}

TEST_CASE("sc0 probe") {
  auto id = std::make_shared<LinearMap>(BlockOperator::identity(ProductSpace{E}));
  CHECK(sc0_probe(*id, 0).bounded);
  // sum_k e^k x_k placed in coordinate 0: loses every level
  auto lossy = std::make_shared<FunctionMap>(
      "lossy", ProductSpace{E}, ProductSpace{E},
      [](const Point& x) {
        double s = 0;
        for (std::size_t k = 0; k < x[0].support(); ++k) s += std::exp(double(k)) * x[0][k];
        return Point{Vector{s}};
      },
      [](const Point&, const Point& h) { return h; });
  const auto p = sc0_probe(*lossy, 0);
  CHECK_FALSE(p.bounded);
  CHECK(p.ratios[10] == doctest::Approx(std::exp(10.0)));
}
