#include <doctest.h>

#include <cmath>

#include "scalekit/bundle.hpp"

using namespace scalekit;

namespace {

const ScaleSpace kSeq = ScaleSpace::sequence(1.0);
const ScaleSpace kLine = ScaleSpace::finite(1);

Point at(double w, Vector e) { return Point{Vector{w}, std::move(e)}; }

ScOperator col(QVector u) { return ScOperator::rank_one(kLine, kSeq, QVector{1}, std::move(u)); }

// x -> c + A(x - x0), jacobian A everywhere
MapPtr affine(const BlockOperator& a, Point c, Point x0) {
  auto m = std::make_shared<FunctionMap>(
      "affine", a.domain(), a.codomain(), [=](const Point& x) { return c + a.apply(x - x0); },
      [=](const Point&, const Point& h) { return a.apply(h); });
  m->set_jacobian([a](const Point&) { return std::optional<BlockOperator>(a); });
  return m;
}

BlockOperator amb_to_seq() { return BlockOperator(ProductSpace{kLine, kSeq}, ProductSpace{kSeq}); }

// f(w,e) = S_L e + w e0 + e3 + w^2 e1 + e_0^2 e2 on the trivial bundle
MapPtr nonlinear_f() {
  auto m = std::make_shared<FunctionMap>(
      "f", ProductSpace{kLine, kSeq}, ProductSpace{kSeq},
      [](const Point& x) {
        const double w = x[0][0];
        Vector out;
        for (std::size_t k = 1; k < x[1].support(); ++k) out.at(k - 1) = x[1][k];
        out.at(0) += w;
        out.at(3) += 1.0;
        out.at(1) += w * w;
        out.at(2) += x[1][0] * x[1][0];
        return Point{out};
      },
      [](const Point& x, const Point& h) {
        const double w = x[0][0];
        Vector out;
        for (std::size_t k = 1; k < h[1].support(); ++k) out.at(k - 1) = h[1][k];
        out.at(0) += h[0][0];
        out.at(1) += 2 * w * h[0][0];
        out.at(2) += 2 * x[1][0] * h[1][0];
        return Point{out};
      });
  m->set_jacobian([](const Point& x) {
    BlockOperator j = amb_to_seq();
    QVector c{1};
    c.at(1) = Rational(2 * x[0][0]);
    j.set(0, 0, col(c));
    j.set(0, 1, ScOperator::shift(kSeq, 1));
    if (x[1][0] != 0.0) j.add(0, 1, ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector::unit(2, Rational(2 * x[1][0]))));
    return std::optional<BlockOperator>(j);
  });
  return m;
}

double n0(const Point& p) {
  double s = 0;
  for (const auto& b : p.blocks)
    for (double x : b.coeffs()) s = std::max(s, std::fabs(x));
  return s;
}

}  // namespace

TEST_CASE("bi-filtration levels") {
  const auto fb = corank_one_fillable();
  const auto& b = *fb.bundle;
  const Point w = at(0.3, Vector{0, 1, -2});
  const Point in = Point{Vector{0, 0.5, 0.25}};
  const Point out = Point{Vector{1, 0.5}};
  for (int m = 0; m < 4; ++m) {
    CHECK(bifiltration_contains(b, w, in, m, m));      // K(0)_m
    CHECK(bifiltration_contains(b, w, in, m, m + 1));  // K(1)_m
    CHECK_FALSE(bifiltration_contains(b, w, out, m, m));
    CHECK_THROWS_AS(bifiltration_contains(b, w, in, m, m + 2), DomainError);
  }
  CHECK_THROWS_AS(bifiltration_contains(b, w, in, 0, -1), DomainError);
  // w off the base core (e_0 != 0)
  CHECK_FALSE(bifiltration_contains(b, at(0.3, Vector{1}), in, 0, 0));
}

TEST_CASE("built-in strong bundle splicings") {
  for (const auto& fb : {trivial_fillable(), corank_one_fillable(), rank_jump_fillable()}) {
    const auto r = check_strong_bundle(fb.bundle, 8);
    INFO(fb.name << ": " << r.failure);
    CHECK(r.idempotency <= 1e-12);
    CHECK(r.linearity <= 1e-12);
    CHECK(r.level_shift);
    CHECK(r.view0_sc1);
    CHECK(r.view1_sc1);
    CHECK(r.pass);
  }
  // a fiber family whose supplied derivative ignores the jumps
  const auto broken = broken_rank_jump_splicing(1.0);
  const auto r = check_strong_bundle(parameter_bundle(whole_core(broken), broken), 6);
  CHECK_FALSE(r.pass);
}

TEST_CASE("strong bundle map classes") {
  const auto b = trivial_fillable().bundle;
  const ProductSpace amb{kLine, kSeq}, tot{kLine, kSeq, kSeq};
  const MapPtr phi = std::make_shared<LinearMap>(BlockOperator::identity(amb));
  auto fiber_map = [&](std::optional<ScOperator> on_e) {
    BlockOperator a(tot, ProductSpace{kSeq});
    a.set(0, 2, ScOperator::identity(kSeq));
    if (on_e) a.set(0, 1, *on_e);
    return std::make_shared<LinearMap>(a);
  };
  CHECK(strong_map_class_check(b, b, phi, fiber_map(std::nullopt)).classification == "sc1-triangle");
  const auto decay = ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 1));
  CHECK(strong_map_class_check(b, b, phi, fiber_map(decay)).classification == "sc1-triangle");

  // u + e: an E_m input lands only in F_m
  const auto lose = strong_map_class_check(b, b, phi, fiber_map(ScOperator::identity(kSeq)));
  CHECK(lose.view0.sc0);
  CHECK(lose.view0.sc1);
  CHECK_FALSE(lose.view1.sc0);
  CHECK(lose.classification == "sc1-not-triangle");

  // u + sum e^k e_k e_k is unbounded already on level 0
  auto grow = std::make_shared<FunctionMap>(
      "grow", tot, ProductSpace{kSeq},
      [](const Point& x) {
        Vector out = x[2];
        for (std::size_t k = 0; k < x[1].support(); ++k) out.at(k) += std::exp(double(k)) * x[1][k];
        return Point{out};
      },
      [](const Point&, const Point& h) {
        Vector out = h[2];
        for (std::size_t k = 0; k < h[1].support(); ++k) out.at(k) += std::exp(double(k)) * h[1][k];
        return Point{out};
      });
  const auto g = strong_map_class_check(b, b, phi, grow);
  CHECK_FALSE(g.view0.sc0);
  CHECK(g.classification == "not-sc1");

  CHECK_THROWS_AS(strong_map_class_check(b, b, phi, phi), DomainError);
}

TEST_CASE("sc+ sections through a point") {
  const auto tb = trivial_fillable().bundle;
  const Section f{tb, nonlinear_f(), false};
  CHECK(section_residual(f) == 0.0);
  const Point w0 = at(0.5, Vector{0.2, -1});
  const Point g0 = f.principal->eval(w0);
  const auto s = scplus_section_through(f, w0);
  CHECK(s.scplus);
  for (double w : {-1.0, 0.0, 2.0}) CHECK(s.principal->eval(at(w, Vector{3, 4})) == g0);

  // g(0) = 0 gives the zero section
  const auto lin = std::make_shared<LinearMap>([] {
    BlockOperator a = amb_to_seq();
    a.set(0, 0, col(QVector{1}));
    a.set(0, 1, ScOperator::shift(kSeq, 1));
    return a;
  }());
  const auto z = scplus_section_through(Section{tb, lin, false}, at(0, Vector{}));
  CHECK(n0(z.principal->eval(at(0.7, Vector{1, 2, 3}))) == 0.0);

  // rank-jump fiber: s(v, e) = <g0, u(v)> u(v)
  const auto rj = rank_jump_splicing(1.0);
  const auto rb = parameter_bundle(whole_core(rj), rj);
  auto twice = std::make_shared<FunctionMap>(
      "2e", whole_core(rj).ambient(), rj->fiber(), [](const Point& x) { return Point{2.0 * x[1]}; },
      [](const Point&, const Point& h) { return Point{2.0 * h[1]}; });
  const Section fr{rb, twice, false};
  CHECK(section_residual(fr) < 1e-12);
  const double v0 = 0.8;
  const Vector u0 = rank_jump_vector(*rj, v0);
  const auto sr = scplus_section_through(fr, at(v0, 0.5 * u0));
  for (double v : {0.7, 0.8, 0.9}) {
    const Vector u = rank_jump_vector(*rj, v);
    double p = 0;
    for (std::size_t k = 0; k < u0.support(); ++k) p += u0[k] * u[k];
    const Vector want = p * u;
    const Point got = sr.principal->eval(at(v, Vector{}));
    CHECK(n0(got - Point{want}) < 1e-12);
  }
  CHECK(n0(sr.principal->eval(at(v0, Vector{})) - Point{u0}) < 1e-12);
  CHECK(n0(sr.principal->eval(at(0.9, Vector{})) - Point{u0}) > 1e-3);

  auto bad = std::make_shared<FunctionMap>(
      "nan", whole_core(rj).ambient(), rj->fiber(), [](const Point&) { return Point{Vector{NAN}}; },
      [](const Point&, const Point& h) { return Point{h[1]}; });
  CHECK_THROWS_AS(scplus_section_through(Section{rb, bad, false}, at(v0, 0.5 * u0)), DomainError);
}

TEST_CASE("linearizations") {
  const auto tb = trivial_fillable().bundle;
  const Section f{tb, nonlinear_f(), false};
  const Point q = at(0, Vector{});
  const auto s = scplus_section_through(f, q);

  // f = s: zero operator
  const auto l0 = linearize(s, s, q);
  REQUIRE(l0.op);
  for (double w : {0.0, 1.0})
    for (std::size_t k = 0; k < 6; ++k) CHECK(n0(l0.op->apply(at(w, Vector::unit(k)))) == 0.0);

  // f'(dw, de) = S_L de + dw e0; kernel (dw, de_0, -dw, 0, ...), onto: index 2
  const auto l = linearize(f, s, q);
  REQUIRE(l.op);
  CHECK(l.op->apply(at(1, Vector{0, -1})) == Point{Vector{}});
  CHECK(l.op->apply(at(0, Vector{1})) == Point{Vector{}});
  CHECK(l.op->apply(at(0, Vector::unit(4))) == Point{Vector::unit(3)});
  CHECK(l.index_method == "corank");
  CHECK(l.index == 2);

  // off the linearization point the classical part picks up 2 w e1
  const Point q2 = at(0.5, Vector{0.2});
  const auto s2 = scplus_section_through(f, q2);
  const auto l2 = linearize(f, s2, q2);
  REQUIRE(l2.op);
  CHECK(n0(l2.op->apply(at(1, Vector{})) - Point{Vector{1, 1}}) < 1e-15);
  CHECK(n0(l2.op->apply(at(0, Vector{1})) - Point{Vector{0, 0, 0.4}}) < 1e-15);

  CHECK_THROWS_AS(linearize(f, s, q2), DomainError);
}

TEST_CASE("linearizations differ by sc+ operators") {
  const auto tb = trivial_fillable().bundle;
  const Section f{tb, nonlinear_f(), false};
  struct Case {
    Point q;
    BlockOperator delta;  // D(t - s)(q)
    double gain;          // expected worst |delta h|_1 / |h|_0 on unit directions, < 0 to skip
  };
  auto op = [](std::optional<ScOperator> on_w, std::optional<ScOperator> on_e) {
    BlockOperator a = amb_to_seq();
    if (on_w) a.set(0, 0, *on_w);
    if (on_e) a.set(0, 1, *on_e);
    return a;
  };
  const auto d1 = ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 1));
  const auto d2 = ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 2));
  const Point q0 = at(0, Vector{}), q1 = at(0.5, Vector{0.2, 0, -0.3});
  std::vector<Case> cases{
      {q0, op(std::nullopt, std::nullopt), 0.0},
      {q0, op(std::nullopt, d1), 1.0},
      {q0, op(col(QVector::unit(5)), std::nullopt), std::exp(5.0)},
      {q0, op(std::nullopt, ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector::unit(2))), std::exp(2.0)},
      {q0, op(col(QVector{0, 1}), ScOperator::shift(kSeq, 1).compose(d2)), -1},
      {q1, op(std::nullopt, d2.compose(ScOperator::shift(kSeq, -1))), -1},
      {q1, op(col(QVector{1, 1}), d1), -1},
  };
  std::size_t certified = 0;
  for (const auto& c : cases) {
    const auto s = scplus_section_through(f, c.q);
    const Section t{tb, affine(c.delta, f.principal->eval(c.q), c.q), true};
    const auto r = linearization_delta_scplus(f, s, t, c.q);
    CHECK(r.scplus);
    CHECK(r.indices_agree);
    CHECK(r.index_s == 2);
    if (c.gain >= 0) CHECK(r.worst_gain == doctest::Approx(c.gain));
    certified += r.pass;
  }
  CHECK(certified == cases.size());

  // t - s = e is not sc+
  const Section t{tb, affine(op(std::nullopt, ScOperator::identity(kSeq)), f.principal->eval(q0), q0), true};
  const auto r = linearization_delta_scplus(f, scplus_section_through(f, q0), t, q0);
  CHECK_FALSE(r.scplus);
  CHECK_FALSE(r.pass);

  const Section off{tb, affine(amb_to_seq(), Point{Vector{9}}, q0), true};
  CHECK_THROWS_AS(linearization_delta_scplus(f, scplus_section_through(f, q0), off, q0), DomainError);
}

TEST_CASE("fillers") {
  for (const auto& fb : {trivial_fillable(), corank_one_fillable(), rank_jump_fillable()}) {
    const auto r = check_filler(fb);
    INFO(fb.name);
    CHECK(r.samples == 12);
    CHECK(r.rho_residual <= 1e-12);
    CHECK(r.linearity <= 1e-12);
    CHECK(r.inverse_residual <= 1e-12);
    CHECK(r.pass);
  }
  // the identity is not a filler of the corank-one family
  auto fb = corank_one_fillable();
  fb.filler.principal = std::make_shared<LinearMap>([] {
    BlockOperator a = amb_to_seq();
    a.set(0, 1, ScOperator::identity(kSeq));
    return a;
  }());
  CHECK_FALSE(check_filler(fb).pass);
}

namespace {

// g(v, e) = (v(1 - v), (1 + v) e) on the rank-jump bundle
MapPtr rank_jump_section() {
  const ProductSpace amb{ScaleSpace::finite(1), kSeq}, F{ScaleSpace::finite(1), kSeq};
  auto m = std::make_shared<FunctionMap>(
      "g", amb, F, [](const Point& x) { const double v = x[0][0]; return Point{Vector{v * (1 - v)}, (1 + v) * x[1]}; },
      [](const Point& x, const Point& h) {
        const double v = x[0][0];
        return Point{Vector{(1 - 2 * v) * h[0][0]}, (1 + v) * h[1] + h[0][0] * x[1]};
      });
  m->set_jacobian([amb, F](const Point& x) -> std::optional<BlockOperator> {
    if (!x[1].is_zero()) return std::nullopt;
    const double v = x[0][0];
    BlockOperator j(amb, F);
    j.set(0, 0, ScOperator::diagonal(ScaleSpace::finite(1), Coefficient::constant(Rational(1 - 2 * v))));
    j.set(1, 1, ScOperator::diagonal(kSeq, Coefficient::constant(Rational(1 + v))));
    return j;
  });
  return m;
}

}  // namespace

TEST_CASE("filled sections keep the solution set") {
  const auto tf = trivial_fillable();
  const Section ft{tf.bundle, nonlinear_f(), false};
  const auto ftb = fill(ft, tf.filler);
  for (double w : {-1.0, 0.3})
    CHECK(ftb.principal->eval(at(w, Vector{1, 2})) == ft.principal->eval(at(w, Vector{1, 2})));

  const auto fb = rank_jump_fillable();
  const auto rj = rank_jump_splicing(1.0);
  std::vector<Point> grid;
  for (double v : {0.0, 0.5, 0.8, 1.0, 1.2}) {
    const Vector u = rank_jump_vector(*rj, v);
    for (const Vector& e : {Vector{}, u, 0.5 * u, Vector::unit(0), Vector::unit(3) + u, Vector{0.1, -0.2, 0.3}})
      grid.push_back(at(v, e));
  }

  // zero section: fbar = f^c, zero iff (1 - pi_v) e = 0
  const ProductSpace F{ScaleSpace::finite(1), kSeq};
  const Section zero{fb.bundle, std::make_shared<LinearMap>(BlockOperator(ProductSpace{ScaleSpace::finite(1), kSeq}, F)), true};
  const auto fz = fill(zero, fb.filler);
  for (const auto& x : grid) {
    const Vector u = rank_jump_vector(*rj, x[0][0]);
    double p = 0;
    for (std::size_t k = 0; k < u.support(); ++k) p += u[k] * x[1][k];
    const bool on_core = n0(Point{x[1] - p * u}) <= 1e-12;
    CHECK((n0(fz.principal->eval(x)) <= 1e-9) == on_core);
  }
  const auto rz = zero_set_equivalence(fz, grid);
  CHECK(rz.pass);

  // g vanishes on the core only at (0,0) and (1,0)
  const Section g{fb.bundle, rank_jump_section(), false};
  CHECK(section_residual(g) < 1e-12);
  const auto fg = fill(g, fb.filler);
  const auto r = zero_set_equivalence(fg, grid);
  CHECK(r.points == grid.size());
  std::size_t expected = 0;  // e = 0 at v in {0, 1}
  for (const auto& x : grid) expected += (x[0][0] == 0.0 || x[0][0] == 1.0) && n0(Point{x[1]}) == 0.0;
  CHECK(expected == 4);  // (0,0) appears three times
  CHECK(r.original_zeros == expected);
  CHECK(r.filled_zeros == expected);
  CHECK(r.mismatches.empty());
  CHECK(r.pass);
  CHECK_THROWS_AS(zero_set_equivalence(fg, {at(-1, Vector{})}), DomainError);

  // a filler of another bundle
  CHECK_THROWS_AS(fill(ft, fb.filler), DomainError);
}

TEST_CASE("filled linearization block") {
  const Point q0 = at(0, Vector{});

  // rank jump, g: Dfbar = diag(1, I) on R + E, f' : R -> R; both indices 0
  const auto fb = rank_jump_fillable();
  const Section g{fb.bundle, rank_jump_section(), false};
  const auto r = filled_linearization_block(g, fb.filler, q0);
  REQUIRE(r.dfbar);
  CHECK(r.dfbar->apply(at(1, Vector{})) == at(1, Vector{}));
  for (std::size_t k = 0; k < 8; ++k) CHECK(r.dfbar->apply(at(0, Vector::unit(k))) == at(0, Vector::unit(k)));
  CHECK(r.cross_f <= 1e-10);
  CHECK(r.cross_fc <= 1e-10);
  CHECK(r.c_isomorphism);
  CHECK(r.index_f == 0);
  CHECK(r.index_filled == 0);
  CHECK(r.pass);

  // zero section: Dfbar = [0 | C], kernel R, cokernel R
  const ProductSpace amb{ScaleSpace::finite(1), kSeq}, F{ScaleSpace::finite(1), kSeq};
  const Section z{fb.bundle, std::make_shared<LinearMap>(BlockOperator(amb, F)), true};
  const auto rz = filled_linearization_block(z, fb.filler, q0);
  CHECK(rz.index_f == 0);
  CHECK(rz.index_filled == 0);
  CHECK(rz.cross_f == 0.0);
  CHECK(rz.cross_fc == 0.0);
  CHECK(rz.pass);
  CHECK_THROWS_AS(filled_linearization_block(g, fb.filler, at(1, Vector{})), DomainError);
  CHECK_THROWS_AS(filled_linearization_block(g, fb.filler, at(0.5, Vector{})), DomainError);

  // trivial complement, f = S_L e + w e0: kernel (dw, de_0, -dw), index 2
  const auto tf = trivial_fillable();
  BlockOperator a = amb_to_seq();
  a.set(0, 0, col(QVector{1}));
  a.set(0, 1, ScOperator::shift(kSeq, 1));
  const Section ft{tf.bundle, std::make_shared<LinearMap>(a), false};
  const auto rt = filled_linearization_block(ft, tf.filler, q0);
  CHECK(rt.index_f == 2);
  CHECK(rt.index_filled == 2);
  CHECK(rt.pass);
  const Point q1 = at(0.5, Vector{0, 1});
  const Section ft1{tf.bundle, affine(a, Point{Vector{}}, q1), false};
  const auto rt1 = filled_linearization_block(ft1, tf.filler, q1);
  CHECK(rt1.note == "translated to the origin");
  CHECK(rt1.index_filled == 2);
  CHECK(rt1.pass);

  // corank one: f = P S_L P e + v e1, P = 1 - e0 (x) e0; kernel (dv, de_1, de_2 = -dv), onto {u_0 = 0}
  const auto cf = corank_one_fillable();
  const auto p = ScOperator::identity(kSeq) - ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector{1});
  BlockOperator c = amb_to_seq();
  c.set(0, 0, col(QVector{0, 1}));
  c.set(0, 1, p.compose(ScOperator::shift(kSeq, 1)).compose(p));
  const Section fc{cf.bundle, std::make_shared<LinearMap>(c), false};
  CHECK(section_residual(fc) < 1e-15);
  const auto rc = filled_linearization_block(fc, cf.filler, q0);
  CHECK(rc.index_f == 2);
  CHECK(rc.index_filled == 2);
  CHECK(rc.c_isomorphism);
  CHECK(rc.pass);
}

TEST_CASE("pullback bundles") {
  const auto rj = rank_jump_splicing(1.0);
  const auto base = whole_core(rj);
  const auto p = parameter_bundle(base, rj);
  const auto amb = base.ambient();
  std::mt19937_64 rng(11);

  const auto id = std::make_shared<LinearMap>(BlockOperator::identity(amb));
  const auto pid = pullback_bundle(p, base, id);
  for (int i = 0; i < 8; ++i) {
    const Point w = p->sample_base(rng);
    const Point u = Point{Vector{0.3, -1, 2, 0.5, 1, -0.7, 0.2, 0.1}};
    CHECK(pid->rho(w, u) == p->rho(w, u));
  }

  const Point w0 = at(0.9, Vector{});
  auto constant = std::make_shared<FunctionMap>(
      "const", amb, amb, [w0](const Point&) { return w0; },
      [](const Point&, const Point&) { return Point::zeros(2); });
  const auto pc = pullback_bundle(p, base, constant);
  const Point u = Point{Vector{1, 2, 3, 4, 5}};
  for (int i = 0; i < 6; ++i) CHECK(pc->rho(p->sample_base(rng), u) == p->rho(w0, u));
  CHECK(pc->rank(at(0, Vector{})) == 1u);

  // (v, e) -> (v, 2e) maps the core onto itself
  auto dbl = std::make_shared<FunctionMap>(
      "2e", amb, amb, [](const Point& x) { return Point{x[0], 2.0 * x[1]}; },
      [](const Point&, const Point& h) { return Point{h[0], 2.0 * h[1]}; });
  const auto pd = pullback_bundle(p, base, dbl);
  CHECK(check_strong_bundle(pd, 6).pass);
  for (int i = 0; i < 12; ++i) {
    const Point w = p->sample_base(rng);
    const Point uu = pd->sample_fiber(w, rng);
    CHECK(bifiltration_contains(*pd, w, uu, 1, 2) == bifiltration_contains(*p, dbl->eval(w), uu, 1, 2));
    const Point wb = p->sample_base(rng);
    const Point ub = p->sample_fiber(wb, rng);
    const Point back{wb[0], 0.5 * wb[1]};
    CHECK(bifiltration_contains(*pd, back, ub, 0, 1));
  }

  // diffeomorphism of the parameter line under the trivial bundle
  const auto tb = trivial_fillable().bundle;
  const auto tamb = tb->base().ambient();
  auto cube = std::make_shared<FunctionMap>(
      "w+w^3", tamb, tamb,
      [](const Point& x) { const double w = x[0][0]; return Point{Vector{w + w * w * w}, x[1]}; },
      [](const Point& x, const Point& h) { return Point{Vector{(1 + 3 * x[0][0] * x[0][0]) * h[0][0]}, h[1]}; });
  CHECK(check_strong_bundle(pullback_bundle(tb, tb->base(), cube), 6).pass);

  auto away = std::make_shared<FunctionMap>(
      "away", amb, amb, [](const Point& x) { return Point{Vector{-1 - x[0][0] * x[0][0]}, x[1]}; },
      [](const Point&, const Point& h) { return h; });
  CHECK_THROWS_AS(pullback_bundle(p, base, away), DomainError);
  CHECK_THROWS_AS(pullback_bundle(p, tb->base(), id), DomainError);
}
