#include <doctest.h>

#include <cmath>

#include "scalekit/polyfold.hpp"

using namespace scalekit;

namespace {

Chart quadrant(std::size_t dim, std::vector<std::size_t> corners) {
  OpenSet v;
  for (auto i : corners) v.corner.push_back({0, i});
  return Chart{"q", whole_core(trivial_splicing(ProductSpace{ScaleSpace::finite(dim)},
                                                ProductSpace{ScaleSpace::sequence(1.0)}, v))};
}

Point at(std::vector<double> v, Vector e = {}) { return Point{Vector(std::move(v)), std::move(e)}; }

// oracle: count of exact zeros among the listed coordinates
int zeros(const std::vector<double>& v, const std::vector<std::size_t>& corners) {
  int d = 0;
  for (auto i : corners) d += v[i] == 0.0;
  return d;
}

MapPtr fn(std::string name, ProductSpace a, ProductSpace b, FunctionMap::Eval f, FunctionMap::Tangent df) {
  return std::make_shared<FunctionMap>(std::move(name), std::move(a), std::move(b), std::move(f), std::move(df));
}

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

TEST_CASE("degeneracy index counts vanishing quadrant coordinates") {
  const Chart q3 = quadrant(3, {0, 1, 2});
  CHECK(degeneracy_index(q3, at({0, 3.2, 0})) == 2);
  CHECK(degeneracy_index(q3, at({1, 2, 3})) == 0);
  CHECK(degeneracy_index(q3, at({0, 0, 0})) == 3);
  const Chart flat = quadrant(2, {});
  CHECK(degeneracy_index(flat, at({0, 0})) == 0);
  CHECK_THROWS_AS(degeneracy_index(q3, at({-1, 2, 3})), DomainError);

  std::mt19937_64 rng(7);
  const std::vector<std::size_t> corners{0, 2};
  const Chart q = quadrant(3, corners);
  for (const auto& p : sample_chart(q, 50, rng)) {
    std::vector<double> v{p[0][0], p[0][1], p[0][2]};
    CHECK(degeneracy_index(q, p) == zeros(v, corners));
  }
}

TEST_CASE("degeneracy index is chart independent on the corpus") {
  const auto cc = corner_corpus();
  const auto r = degeneracy_invariance(cc, 24);
  INFO(r.certification_failure);
  CHECK(r.transitions_certified);
  CHECK(r.nontrivial_transitions >= 5);
  CHECK(r.samples >= 100);
  CHECK(r.mismatches.empty());
  CHECK(r.worst_roundtrip < 1e-12);
  CHECK(r.pass);
}

TEST_CASE("a map that is not a diffeomorphism of quadrants moves the index") {
  ChartComplex cc;
  cc.charts.push_back(quadrant(2, {0, 1}));
  const auto amb = cc.charts[0].model.ambient();
  OpenSet o;
  o.corner = {{0, 0}, {0, 1}};
  auto shear = std::make_shared<FunctionMap>(
      "r1+r2", amb, amb, [](const Point& x) { return at({x[0][0] + x[0][1], x[0][1]}, x[1]); },
      [](const Point&, const Point& h) { return at({h[0][0] + h[0][1], h[0][1]}, h[1]); }, FunctionMap::CEval{}, o);
  auto back = std::make_shared<FunctionMap>(
      "r1-r2", amb, amb, [](const Point& x) { return at({x[0][0] - x[0][1], x[0][1]}, x[1]); },
      [](const Point&, const Point& h) { return at({h[0][0] - h[0][1], h[0][1]}, h[1]); });
  cc.overlaps.push_back({0, 0, shear, back, "shear", true});
  const auto r = degeneracy_invariance(cc, 60);
  CHECK_FALSE(r.mismatches.empty());
  CHECK_FALSE(r.pass);
}

TEST_CASE("lower semicontinuity near corners") {
  const Chart q = quadrant(3, {0, 1, 2});
  for (auto v : {std::vector<double>{0, 0, 0}, {0, 0.5, 0}, {0.2, 0.3, 0.4}, {0, 1e-2, 1}}) {
    const auto r = lower_semicontinuity(q, at(v, Vector{0.1, -0.2}));
    CHECK(r.d_center == zeros(v, {0, 1, 2}));
    CHECK(r.pass);
    CHECK(r.neighbors.size() == 64);
  }
  const Chart rj{"rj", whole_core(rank_jump_splicing(1.0))};
  const auto r = lower_semicontinuity(rj, Point{Vector{}, Vector{}});
  CHECK(r.d_center == 1);
  CHECK(r.pass);
}

TEST_CASE("faces of sampled complexes") {
  for (std::size_t dim : {1u, 2u, 3u}) {
    const auto r = faces(quadrant_complex(dim, 4));
    CHECK(r.faces == dim);
    CHECK(r.face_structured);
  }
  const auto q2 = quadrant_complex(2, 4);
  const auto r2 = faces(q2);
  CHECK(r2.face_count[0] == 2);  // the corner
  CHECK(r2.face_count[1] == 1);

  const auto t = teardrop_complex(5);
  const auto rt = faces(t);
  CHECK(rt.faces == 1);
  CHECK_FALSE(rt.face_structured);
  REQUIRE(rt.offending.size() == 1);
  CHECK(rt.d[rt.offending[0]] == 2);
  CHECK(rt.face_count[rt.offending[0]] == 1);

  ChartComplex bare = q2;
  bare.adjacency.clear();
  CHECK_THROWS_AS(faces(bare), DomainError);
}

TEST_CASE("degeneracy index is additive on products") {
  const Chart x = quadrant(2, {0, 1});
  const Chart y{"rj", whole_core(rank_jump_splicing(1.0))};
  std::mt19937_64 rng(3);
  const auto px = sample_chart(x, 20, rng);
  const auto py = sample_chart(y, 20, rng);
  std::vector<std::pair<Point, Point>> pairs;
  for (std::size_t i = 0; i < 20; ++i) pairs.emplace_back(px[i], py[i]);
  const auto r = product_degeneracy(x, y, pairs);
  CHECK(r.pairs == 20);
  CHECK(r.additive);
  for (std::size_t i = 0; i < 20; ++i) {
    const int ox = zeros({px[i][0][0], px[i][0][1]}, {0, 1});
    const int oy = py[i][0][0] == 0.0;
    CHECK(r.values[i][2] == ox + oy);
  }
}

TEST_CASE("fred-submersion normal form") {
  const auto rj = rank_jump_splicing(1.0);
  const auto w = projection_witness(rj, 2);
  CHECK(fred_submersion_check(projection_map(w), w).pass);

  // f = projection after a nonlinear chart on X
  FredWitness wc = w;
  wc.phi = bend_last(w.source.ambient(), -0.1);
  wc.phi_inv = bend_last(w.source.ambient(), 0.1);
  auto f = std::make_shared<ComposeMap>(projection_map(w), wc.phi);
  const auto r = fred_submersion_check(f, wc);
  CHECK(r.pass);
  CHECK(r.n == 2);
  CHECK(r.worst < 1e-14);

  // doubling the fiber breaks the normal form
  const auto amb = w.target.ambient();
  auto twice = fn(
      "2e", amb, amb, [](const Point& x) { return Point{x[0], 2.0 * x[1]}; },
      [](const Point&, const Point& h) { return Point{h[0], 2.0 * h[1]}; });
  CHECK_FALSE(fred_submersion_check(std::make_shared<ComposeMap>(twice, f), wc).pass);
}

TEST_CASE("composite of fred-submersions and its chart") {
  const auto rj = rank_jump_splicing(1.0);
  const auto r1 = trivial_splicing(rj->parameter_space(), ProductSpace{ScaleSpace::finite(1)}, rj->parameter_set());
  const auto ty = whitney_sum(rj, r1);  // Y = (v, e, y)

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
  REQUIRE(fred_submersion_check(f, wf).pass);
  REQUIRE(fred_submersion_check(g, wg).pass);

  const auto w = fred_submersion_compose(wf, wg);
  CHECK(w.n == 3);
  const auto gf = std::make_shared<ComposeMap>(g, f);
  const auto r = fred_submersion_check(gf, w, 40);
  CHECK(r.pass);
  CHECK(r.worst < 1e-13);

  // gamma^{-1} by hand at one point: (w, h, h', e') -> (w, h, h' + w^2, bent e')
  const double v = 0.8;
  const Vector u = rank_jump_vector(*rj, v);
  const Point p{Vector{v}, 0.5 * u, Vector{0.25}, Vector{0.3, -0.4}};
  const Point x = w.phi_inv->eval(p);
  CHECK(x[2][0] == doctest::Approx(0.25 + v * v));
  CHECK(x[3][0] == doctest::Approx(0.3 + 0.1 * 0.16));
  CHECK(x[3][1] == doctest::Approx(-0.4));

  // a chart of f on a small ball does not contain psi o beta^{-1} of the samples
  FredWitness small = wf;
  small.target.open.center = Point::zeros(small.target.ambient().size());
  small.target.open.radius = 1e-3;
  CHECK_THROWS_AS(fred_submersion_compose(small, wg), DomainError);
}

TEST_CASE("preimage charts of a fred-submersion") {
  const auto rj = rank_jump_splicing(1.0);
  const auto w1 = projection_witness(rj, 2);
  FredWitness w2 = w1;
  w2.phi = bend_last(w1.source.ambient(), -0.1);
  w2.phi_inv = bend_last(w1.source.ambient(), 0.1);
  const MapPtr f = projection_map(w1);
  REQUIRE(fred_submersion_check(f, w2).pass);

  const double v = 0.7;
  const Point y{Vector{v}, 0.3 * rank_jump_vector(*rj, v)};
  const auto r = preimage_charts(f, {w1, w2}, y);
  CHECK(r.n == 2);
  CHECK(r.n_constant);
  CHECK(r.worst_fd < 1e-6);
  CHECK(r.worst_base < 1e-12);
  CHECK(r.membership_ok);
  CHECK(r.pass);

  // the chart at z is (v0, e0, z0 + 0.1 z1^2, z1) for the bent witness
  const Point z{Vector{0.2, 0.5}};
  const Point x = r.charts[1].chart->eval(z);
  CHECK(x[2][0] == doctest::Approx(0.2 + 0.025));

  const Point off{Vector{v}, Vector::unit(0)};
  CHECK_THROWS_AS(preimage_charts(f, {w1}, off), DomainError);
}
