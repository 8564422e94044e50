#include "scalekit/corpus.hpp"

#include <cmath>

namespace scalekit::corpus {

namespace {

const ScaleSpace kSeq = ScaleSpace::sequence(1.0);
const ScaleSpace kLine = ScaleSpace::finite(1);

Point at(double w, Vector e) { return Point{Vector{w}, std::move(e)}; }

ScOperator col(QVector u) { return ScOperator::rank_one(kLine, kSeq, QVector{1}, std::move(u)); }
ScOperator diag(const char* rule) { return ScOperator::diagonal(kSeq, parse_coefficient(rule)); }

MapPtr fn(std::string name, ProductSpace a, ProductSpace b, FunctionMap::Eval f, FunctionMap::Tangent df) {
  return std::make_shared<FunctionMap>(std::move(name), std::move(a), std::move(b), std::move(f), std::move(df));
}

// x -> c + A(x - x0)
MapPtr affine(const BlockOperator& a, Point c, Point x0) {
  auto m = std::make_shared<FunctionMap>(
      "affine", a.domain(), a.codomain(), [=](const Point& x) { return c + a.apply(x - x0); },
      [=](const Point&, const Point& h) { return a.apply(h); });
  m->set_jacobian([a](const Point&) { return std::optional<BlockOperator>(a); });
  return m;
}

BlockOperator amb_to_seq() { return BlockOperator(ProductSpace{kLine, kSeq}, ProductSpace{kSeq}); }

// S_L e + w e0
BlockOperator shift_plus_w() {
  BlockOperator a = amb_to_seq();
  a.set(0, 0, col(QVector{1}));
  a.set(0, 1, ScOperator::shift(kSeq, 1));
  return a;
}

// S_L e + w e0 + e3 + w^2 e1 + e_0^2 e2
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

// (v(1 - v), (1 + v) e) on the rank-jump bundle
MapPtr rank_jump_section() {
  const ProductSpace amb{kLine, kSeq}, F{kLine, kSeq};
  auto m = std::make_shared<FunctionMap>(
      "g", amb, F,
      [](const Point& x) {
        const double v = x[0][0];
        return Point{Vector{v * (1 - v)}, (1 + v) * x[1]};
      },
      [](const Point& x, const Point& h) {
        const double v = x[0][0];
        return Point{Vector{(1 - 2 * v) * h[0][0]}, (1 + v) * h[1] + h[0][0] * x[1]};
      });
  m->set_jacobian([amb, F](const Point& x) -> std::optional<BlockOperator> {
    if (!x[1].is_zero()) return std::nullopt;
    const double v = x[0][0];
    BlockOperator j(amb, F);
    j.set(0, 0, ScOperator::diagonal(kLine, Coefficient::constant(Rational(1 - 2 * v))));
    j.set(1, 1, ScOperator::diagonal(kSeq, Coefficient::constant(Rational(1 + v))));
    return j;
  });
  return m;
}

using PolyPtr = std::shared_ptr<PolynomialMap>;

PolyPtr poly(const ProductSpace& s, std::optional<BlockOperator> lin, std::vector<PolyTerm> t) {
  return std::make_shared<PolynomialMap>(s, s, std::move(lin), std::move(t));
}

// identity plus c x_from e_to
BlockOperator id_plus(const ProductSpace& s, Coord to, Coord from, const Rational& c) {
  BlockOperator a = BlockOperator::identity(s);
  a.add(to.block, from.block,
        ScOperator::rank_one(s[from.block], s[to.block], QVector::unit(from.index, c), QVector::unit(to.index)));
  return a;
}

// Five polynomial self-maps of s built on two coordinates a, b.
std::vector<PolyPtr> poly_family(const ProductSpace& s, Coord a, Coord b) {
  const auto id = BlockOperator::identity(s);
  return {
      poly(s, id, {{b, Rational(1, 2), {{a, 2u}}}}),
      poly(s, id, {{a, Rational(1, 4), {{a, 1u}, {b, 1u}}}}),
      poly(s, id, {{a, Rational(-1, 3), {{b, 3u}}}}),
      poly(s, id_plus(s, a, b, Rational(1, 2)), {}),
      poly(s, id, {{b, Rational(1, 8), {{a, 2u}, {b, 1u}}}}),
  };
}

Point unit_like(const ProductSpace& s, const std::vector<std::pair<Coord, double>>& entries) {
  Point p = Point::zeros(s.size());
  for (const auto& [c, x] : entries) p[c.block].at(c.index) = x;
  return p;
}

}  // namespace

Chart quadrant_chart(std::size_t dim, const std::vector<std::size_t>& corners) {
  OpenSet v;
  for (auto i : corners) v.corner.push_back({0, i});
  return Chart{"q", whole_core(trivial_splicing(ProductSpace{ScaleSpace::finite(dim)}, ProductSpace{kSeq}, v))};
}

std::vector<OperatorPair> scplus_pairs() {
  const auto I = ScOperator::identity(kSeq);
  const auto L = ScOperator::shift(kSeq, 1);
  const auto R = ScOperator::shift(kSeq, -1);
  return {
      {"L + exp(-k)/8", L, diag("1/8*exp(-k)")},
      {"R + (exp(-k)/8) R", R, diag("1/8*exp(-k)").compose(R)},
      {"I + rank one", I, ScOperator::rank_one(kSeq, kSeq, QVector{Rational(1, 4), Rational(1, 8)}, QVector{1, 1})},
      {"L - e0 (x) e1", L, ScOperator::rank_one(kSeq, kSeq, QVector{0, 1}, QVector{-1})},
      {"R + (e1 - e0) (x) e0", R, ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector{-1, 1})},
      {"L^2 + exp(-2k-1)/4", L.compose(L), diag("1/4*exp(-2*k-1)")},
      {"I + [k<5]/2", I, diag("1/2*[k<5]")},
      {"L + [k<3]", L, diag("[k<3]")},
      {"R^2 + 3 e2 (x) e0", R.compose(R), ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector{0, 0, 3})},
      {"I + exp(-k-1)/4", I, diag("1/4*exp(-k-1)")},
      {"L^3 + e0 (x) (e0 + e4)", ScOperator::shift(kSeq, 3), ScOperator::rank_one(kSeq, kSeq, QVector{1, 0, 0, 0, 1}, QVector{1})},
      {"I - exp(-2k)/2", I, diag("-1/2*exp(-2*k)")},
  };
}

std::vector<RegularCase> regularizing_cases() {
  const auto I = ScOperator::identity(kSeq);
  const auto L = ScOperator::shift(kSeq, 1);
  const auto R = ScOperator::shift(kSeq, -1);
  const auto T1 = R + ScOperator::rank_one(kSeq, kSeq, QVector{0, 1}, QVector{0, 0, 3});
  const auto T2 = L + ScOperator::rank_one(kSeq, kSeq, QVector{0, 1}, QVector{-1});
  const auto T3 = I + diag("1/2*[k<4]");
  return {
      {"L, e = 5 e0 + 2 e3", L, QVector{5, 0, 0, 2}, 3},
      {"L, level 0", L, QVector{1, -1}, 0},
      {"L^2", L.compose(L), QVector{1, 2, 3, 4, 5}, 2},
      {"I", I, QVector{1, 2}, 2},
      {"R", R, QVector{Rational(1, 2), 0, -3}, 1},
      {"R^2", R.compose(R), QVector{0, 7, 0, 1}, 3},
      {"R + rank one", T1, QVector{1, -1, 4}, 1},
      {"L + rank one", T2, QVector{2, 3, 0, 0, Rational(-1, 3)}, 2},
      {"I + [k<4]/2", T3, QVector{1, 1, 1, 1, 1, 1}, 3},
      {"L^3", ScOperator::shift(kSeq, 3), QVector{1, 0, 2, 0, 3}, 1},
      {"L o (I + [k<4]/2)", L.compose(T3), QVector{Rational(2, 3), 0, 1, 5}, 2},
  };
}

std::vector<MapPair> flat_chain_pairs() {
  struct Family {
    std::string label;
    ProductSpace space;
    Coord a, b;
    std::vector<TangentPoint> points;
  };
  const ProductSpace R2{ScaleSpace::finite(2)}, R3{ScaleSpace::finite(3)}, E{kSeq}, RE{kLine, kSeq};
  const std::vector<Family> fams{
      {"R^2", R2, {0, 0}, {0, 1},
       {{unit_like(R2, {{{0, 0}, 0.5}, {{0, 1}, -0.25}}), unit_like(R2, {{{0, 0}, 1}, {{0, 1}, 0.5}})},
        {unit_like(R2, {{{0, 0}, -1.5}, {{0, 1}, 2}}), unit_like(R2, {{{0, 1}, -1}})}}},
      {"R^3", R3, {0, 2}, {0, 0},
       {{unit_like(R3, {{{0, 0}, 0.25}, {{0, 1}, 1}, {{0, 2}, -0.5}}), unit_like(R3, {{{0, 0}, 1}, {{0, 2}, 1}})},
        {unit_like(R3, {{{0, 2}, 0.75}}), unit_like(R3, {{{0, 1}, 0.5}, {{0, 2}, -2}})}}},
      {"E", E, {0, 0}, {0, 1},
       {{Point{Vector{0.5, -0.25, 0.125}}, Point{Vector{1, 0, -0.5}}},
        {Point{Vector{0, 1, 0, 0.5}}, Point{Vector{0.25, 0.25}}}}},
      {"R + E", RE, {0, 0}, {1, 2},
       {{Point{Vector{0.5}, Vector{1, 0, -0.75}}, Point{Vector{1}, Vector{0, 0, 1}}},
        {Point{Vector{-0.25}, Vector{0, 2}}, Point{Vector{0.5}, Vector{1, 1, 1}}}}},
  };
  std::vector<MapPair> out;
  for (const auto& fam : fams) {
    const auto maps = poly_family(fam.space, fam.a, fam.b);
    for (std::size_t i = 0; i < maps.size(); ++i) {
      const std::size_t j = (i + 1) % maps.size();
      out.push_back({fam.label + " m" + std::to_string(j) + " o m" + std::to_string(i), maps[i], maps[j], fam.points});
    }
  }
  // left shift as linear part on the sequence scale
  const ProductSpace E1{kSeq};
  auto shifted = poly(E1, BlockOperator::single(ScOperator::shift(kSeq, 1)), {{{0, 0}, Rational(1, 2), {{{0, 0}, 2u}}}});
  const auto base = poly_family(E1, {0, 0}, {0, 1});
  const std::vector<TangentPoint> pts{{Point{Vector{0.5, 1, -0.5}}, Point{Vector{0, 1, 1}}}};
  out.push_back({"E shift o m0", base[0], shifted, pts});
  out.push_back({"E m1 o shift", shifted, base[1], pts});
  return out;
}

std::vector<MapPair> transcendental_chain_pairs() {
  const ProductSpace R2{ScaleSpace::finite(2)};
  auto sine = std::make_shared<FunctionMap>(
      "sine", R2, R2, [](const Point& x) { return Point{Vector{std::sin(x[0][0]), x[0][0] * x[0][1]}}; },
      [](const Point& x, const Point& h) {
        return Point{Vector{std::cos(x[0][0]) * h[0][0], h[0][0] * x[0][1] + x[0][0] * h[0][1]}};
      },
      [](const CPoint& x) { return CPoint{CVector{std::sin(x[0][0]), x[0][0] * x[0][1]}}; });
  auto expm = std::make_shared<FunctionMap>(
      "exp", R2, R2, [](const Point& x) { return Point{Vector{std::exp(x[0][1]), x[0][0]}}; },
      [](const Point& x, const Point& h) { return Point{Vector{std::exp(x[0][1]) * h[0][1], h[0][0]}}; },
      [](const CPoint& x) { return CPoint{CVector{std::exp(x[0][1]), x[0][0]}}; });
  const auto fam = poly_family(R2, {0, 0}, {0, 1});
  const std::vector<TangentPoint> pts{{Point{Vector{1, 2}}, Point{Vector{0, 1}}},
                                      {Point{Vector{-0.5, 0.25}}, Point{Vector{1, -1}}}};
  return {{"sine then m0", sine, fam[0], pts},
          {"sine then m2", sine, fam[2], pts},
          {"exp then sine", expm, sine, pts},
          {"m4 then exp", fam[4], expm, pts}};
}

std::vector<CorePair> core_chain_pairs() {
  const ProductSpace W1{kLine};
  const std::vector<SplicingPtr> splicings{
      const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 1, 0}}),
      const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 0, 1}, QVector{0, 1, 0}}),
      const_rank_splicing(W1, ScaleSpace::finite(4), {QVector{1, 2, 0, 0}, QVector{0, 0, 1, -1}}),
      const_rank_splicing(ProductSpace{ScaleSpace::finite(2)}, ScaleSpace::finite(3), {QVector{0, 0, 1}}),
  };
  std::vector<CorePair> out;
  std::uint64_t seed = 11;
  for (std::size_t si = 0; si < splicings.size(); ++si) {
    const auto& s = splicings[si];
    const LocalModel m = whole_core(s);
    const ProductSpace amb = m.ambient();
    const auto r = retraction_map(s);
    const Coord v{0, 0}, e0{1, 0}, e1{1, 1};
    const auto id = BlockOperator::identity(amb);
    const std::vector<PolyPtr> ps{
        poly(amb, id, {{e1, Rational(1, 4), {{e0, 2u}}}}),
        poly(amb, id, {{e0, Rational(1, 3), {{v, 1u}, {e0, 1u}}}}),
        poly(amb, id, {{v, Rational(1, 2), {{v, 2u}}}}),
        poly(amb, id, {{e0, Rational(1, 8), {{e1, 3u}}}}),
        poly(amb, id_plus(amb, e1, v, Rational(1, 2)), {}),
    };
    const auto pts = sample_tangent_core(*s, 3, seed++);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::size_t j = (i + 1) % ps.size();
      out.push_back({"S" + std::to_string(si) + " p" + std::to_string(j) + " o p" + std::to_string(i),
                     CoreMap(m, m, std::make_shared<ComposeMap>(r, ps[i])),
                     CoreMap(m, m, std::make_shared<ComposeMap>(r, ps[j])), pts, true});
    }
  }
  // rank-jump cores, float only
  const auto rj = rank_jump_splicing(1.0);
  const LocalModel mj = whole_core(rj);
  const ProductSpace aj = mj.ambient();
  auto gj = poly(aj, BlockOperator::identity(aj), {{{0, 0}, Rational(1, 8), {{{0, 0}, 1u}, {{1, 0}, 2u}}}});
  BlockOperator twice = BlockOperator::identity(aj);
  twice.set(1, 1, ScOperator::identity(kSeq).scaled(2));
  const auto rr = retraction_map(rj);
  const CoreMap fj(mj, mj, std::make_shared<ComposeMap>(rr, gj));
  const CoreMap dj(mj, mj, std::make_shared<LinearMap>(twice));
  out.push_back({"rank-jump bend o bend", fj, fj, sample_tangent_core(*rj, 8, 5), false});
  out.push_back({"rank-jump 2e o bend", fj, dj, sample_tangent_core(*rj, 8, 6), false});
  return out;
}

namespace {

// (v, e, z) -> (v, e, (z0 + c z1^2, z1)) on the last block
MapPtr bend_last(const ProductSpace& amb, double c) {
  const std::size_t last = amb.size() - 1;
  return fn(
      "bend", amb, amb,
      [=](const Point& x) {
        Point y = x;
        y[last].at(0) = x[last][0] + c * x[last][1] * x[last][1];
        return y;
      },
      [=](const Point& x, const Point& h) {
        Point d = h;
        d[last].at(0) = h[last][0] + 2 * c * x[last][1] * h[last][1];
        return d;
      });
}

}  // namespace

FredComposite fred_composite() {
  const auto rj = rank_jump_splicing(1.0);
  const auto r1 = trivial_splicing(rj->parameter_space(), ProductSpace{ScaleSpace::finite(1)}, rj->parameter_set());
  const auto ty = whitney_sum(rj, r1);

  FredWitness wf = projection_witness(ty, 2);
  wf.phi = bend_last(wf.source.ambient(), -0.1);
  wf.phi_inv = bend_last(wf.source.ambient(), 0.1);
  const MapPtr f = std::make_shared<ComposeMap>(projection_map(projection_witness(ty, 2)), wf.phi);

  FredWitness wg = projection_witness(rj, 1);
  const auto yamb = wg.source.ambient();
  auto shift = [&](double c) {
    return fn(
        "shift", yamb, yamb,
        [=](const Point& x) {
          Point y = x;
          y[2].at(0) = x[2][0] + c * x[0][0] * x[0][0];
          return y;
        },
        [=](const Point& x, const Point& h) {
          Point d = h;
          d[2].at(0) = h[2][0] + 2 * c * x[0][0] * h[0][0];
          return d;
        });
  };
  wg.phi = shift(-1);
  wg.phi_inv = shift(1);
  const MapPtr g = std::make_shared<ComposeMap>(projection_map(wg), wg.phi);
  return {f, g, wf, wg};
}

PreimageCase preimage_case() {
  const auto rj = rank_jump_splicing(1.0);
  const auto w1 = projection_witness(rj, 2);
  FredWitness w2 = w1;
  w2.phi = bend_last(w1.source.ambient(), -0.1);
  w2.phi_inv = bend_last(w1.source.ambient(), 0.1);
  const double v = 0.7;
  return {projection_map(w1), {w1, w2}, Point{Vector{v}, 0.3 * rank_jump_vector(*rj, v)}};
}

std::vector<FillCase> fill_cases() {
  std::vector<FillCase> out;
  const Point q0 = at(0, Vector{});
  const ProductSpace amb{kLine, kSeq}, F{kLine, kSeq};

  const auto rjf = rank_jump_fillable();
  const auto rj = rank_jump_splicing(1.0);
  std::vector<Point> rgrid;
  for (double v : {0.0, 0.5, 0.8, 1.0, 1.2}) {
    const Vector u = rank_jump_vector(*rj, v);
    for (const Vector& e : {Vector{}, u, 0.5 * u, Vector::unit(0), Vector::unit(3) + u, Vector{0.1, -0.2, 0.3}})
      rgrid.push_back(at(v, e));
  }
  out.push_back({"rank-jump, (v(1-v), (1+v)e)", rjf, Section{rjf.bundle, rank_jump_section(), false}, rgrid, q0});
  out.push_back({"rank-jump, zero section", rjf,
                 Section{rjf.bundle, std::make_shared<LinearMap>(BlockOperator(amb, F)), true}, rgrid, q0});

  const auto tf = trivial_fillable();
  const BlockOperator a = shift_plus_w();
  std::vector<Point> tgrid;
  for (double w : {-1.0, 0.0, 0.5})
    for (const Vector& e : {Vector{}, Vector{1, -w}, Vector{0.25, -w}, Vector{1, 2}, Vector{0, -w, 1}})
      tgrid.push_back(at(w, e));
  out.push_back({"trivial, S_L e + w e0", tf, Section{tf.bundle, std::make_shared<LinearMap>(a), false}, tgrid, q0});
  const Point q1 = at(0.5, Vector{0, 1});
  std::vector<Point> t1grid;
  for (const Point& x : tgrid) t1grid.push_back(x + q1);
  out.push_back({"trivial, translated", tf, Section{tf.bundle, affine(a, Point{Vector{}}, q1), false}, t1grid, q1});

  const auto cf = corank_one_fillable();
  const auto p = ScOperator::identity(kSeq) - ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector{1});
  BlockOperator c = amb_to_seq();
  c.set(0, 0, col(QVector{0, 1}));
  c.set(0, 1, p.compose(ScOperator::shift(kSeq, 1)).compose(p));
  std::vector<Point> cgrid;
  for (double v : {0.0, 0.5, -1.0})
    for (const Vector& e : {Vector{}, Vector{0, 0.3, -v}, Vector{1, 0, -v}, Vector{0, 1}, Vector{0, 0, -v}})
      cgrid.push_back(at(v, e));
  out.push_back({"corank one, P S_L P e + v e1", cf, Section{cf.bundle, std::make_shared<LinearMap>(c), false}, cgrid, q0});
  return out;
}

std::vector<LinearizationTriple> linearization_triples() {
  const auto tb = trivial_fillable().bundle;
  const Section f{tb, nonlinear_f(), false};
  auto op = [](std::optional<ScOperator> on_w, std::optional<ScOperator> on_e) {
    BlockOperator a = amb_to_seq();
    if (on_w) a.set(0, 0, *on_w);
    if (on_e) a.set(0, 1, *on_e);
    return a;
  };
  const auto d1 = ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 1));
  const auto d2 = ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 2));
  const Point q0 = at(0, Vector{}), q1 = at(0.5, Vector{0.2, 0, -0.3});
  const std::vector<std::tuple<std::string, Point, BlockOperator>> deltas{
      {"t = s", q0, op(std::nullopt, std::nullopt)},
      {"exp(-k) on e", q0, op(std::nullopt, d1)},
      {"w e5", q0, op(col(QVector::unit(5)), std::nullopt)},
      {"e2 (x) e0", q0, op(std::nullopt, ScOperator::rank_one(kSeq, kSeq, QVector{1}, QVector::unit(2)))},
      {"w e1 + S_L exp(-2k)", q0, op(col(QVector{0, 1}), ScOperator::shift(kSeq, 1).compose(d2))},
      {"exp(-2k) S_R, off centre", q1, op(std::nullopt, d2.compose(ScOperator::shift(kSeq, -1)))},
      {"w (e0 + e1) + exp(-k), off centre", q1, op(col(QVector{1, 1}), d1)},
  };
  std::vector<LinearizationTriple> out;
  for (const auto& [name, q, delta] : deltas) {
    const auto s = scplus_section_through(f, q);
    const Section t{tb, affine(delta, f.principal->eval(q), q), true};
    out.push_back({name, f, s, t, q});
  }
  return out;
}

std::vector<BundleMapCase> bundle_map_cases() {
  const auto b = trivial_fillable().bundle;
  const ProductSpace amb{kLine, kSeq}, tot{kLine, kSeq, kSeq};
  const MapPtr phi = std::make_shared<LinearMap>(BlockOperator::identity(amb));
  auto fiber_map = [&](std::optional<ScOperator> on_e) {
    BlockOperator a(tot, ProductSpace{kSeq});
    a.set(0, 2, ScOperator::identity(kSeq));
    if (on_e) a.set(0, 1, *on_e);
    return std::make_shared<LinearMap>(a);
  };
  auto grow = fn(
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
  return {
      {"u", b, phi, fiber_map(std::nullopt), "sc1-triangle"},
      {"u + exp(-k) e", b, phi, fiber_map(ScOperator::diagonal(kSeq, Coefficient::exp_decay(1, 1))), "sc1-triangle"},
      {"u + e", b, phi, fiber_map(ScOperator::identity(kSeq)), "sc1-not-triangle"},
      {"u + sum e^k e_k", b, phi, grow, "not-sc1"},
  };
}

std::vector<PullbackCase> pullback_cases() {
  const auto rj = rank_jump_splicing(1.0);
  const auto base = whole_core(rj);
  const auto p = parameter_bundle(base, rj);
  const auto amb = base.ambient();
  const Point w0 = at(0.9, Vector{});
  const auto tb = trivial_fillable().bundle;
  const auto tamb = tb->base().ambient();
  return {
      {"identity", p, base, std::make_shared<LinearMap>(BlockOperator::identity(amb))},
      {"constant", p, base,
       fn("const", amb, amb, [w0](const Point&) { return w0; }, [](const Point&, const Point&) { return Point::zeros(2); })},
      {"(v, 2e)", p, base,
       fn("2e", amb, amb, [](const Point& x) { return Point{x[0], 2.0 * x[1]}; },
          [](const Point&, const Point& h) { return Point{h[0], 2.0 * h[1]}; })},
      {"w + w^3 on the trivial bundle", tb, tb->base(),
       fn("w+w^3", tamb, tamb,
          [](const Point& x) {
            const double w = x[0][0];
            return Point{Vector{w + w * w * w}, x[1]};
          },
          [](const Point& x, const Point& h) { return Point{Vector{(1 + 3 * x[0][0] * x[0][0]) * h[0][0]}, h[1]}; })},
  };
}

Sc1Control broken_rank_jump_control(std::uint64_t seed) {
  auto broken = broken_rank_jump_splicing(1.0);
  std::mt19937_64 rng(seed);
  const Point v = broken->sample_parameter(rng);
  return {joint_map(broken), concat(v, broken->sample_fiber(v, rng))};
}

Sc1Control wrong_derivative_control() {
  const ProductSpace E{kSeq};
  auto f = poly(E, BlockOperator::identity(E), {{{0, 0}, 1, {{{0, 0}, 1u}, {{0, 1}, 1u}}}});
  auto wrong = std::make_shared<DerivativeOverrideMap>(f, [f](const Point& x, const Point& h) {
    return 2.0 * f->tangent(x, h);
  });
  return {wrong, Point{Vector{0.5, -0.25}}};
}

BundleMapCase level_losing_control() { return bundle_map_cases()[2]; }

}  // namespace scalekit::corpus
