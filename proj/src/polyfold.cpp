#include "scalekit/polyfold.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace scalekit {

namespace {

Point random_finite(const ProductSpace& s, std::mt19937_64& rng, double amp = 1.0) {
  std::uniform_real_distribution<double> uni(-amp, amp);
  Point p = Point::zeros(s.size());
  for (std::size_t b = 0; b < s.size(); ++b) {
    const std::size_t n = s[b].is_finite() ? s[b].dim : 4;
    for (std::size_t k = 0; k < n; ++k) p[b].at(k) = uni(rng);
  }
  return p;
}

Point sample_model(const LocalModel& m, std::mt19937_64& rng) {
  const auto& s = *m.splicing;
  for (int attempt = 0; attempt < 200; ++attempt) {
    const Point v = s.sample_parameter(rng);
    const Point e = s.project(v, s.sample_fiber(v, rng));
    if (m.contains(v, e)) return concat(v, e);
  }
  throw DomainError("could not sample the local model of " + s.kind());
}

OpenSet ambient_corners(const LocalModel& m) {
  OpenSet o;
  o.corner = m.splicing->parameter_set().corner;
  return o;
}

}  // namespace

// ---------------------------------------------------------------- degeneracy index

int degeneracy_index(const Chart& c, const Point& x, double tau) {
  if (!c.model.contains(x, std::max(tau, 1e-9))) throw DomainError("point outside chart " + c.name);
  int d = 0;
  for (const auto& k : c.model.splicing->parameter_set().corner)
    if (std::fabs(x[k.block][k.index]) <= tau) ++d;
  return d;
}

std::vector<Point> sample_chart(const Chart& c, std::size_t n, std::mt19937_64& rng, double zero_fraction) {
  std::bernoulli_distribution zero(zero_fraction);
  const auto& s = *c.model.splicing;
  std::vector<Point> out;
  for (std::size_t tries = 0; out.size() < n; ++tries) {
    if (tries > 200 * n + 200) throw DomainError("could not sample chart " + c.name);
    Point v = s.sample_parameter(rng);
    for (const auto& k : s.parameter_set().corner) {
      double& x = v[k.block].at(k.index);
      x = zero(rng) ? 0.0 : std::max(std::fabs(x), 1e-3);
    }
    for (auto& b : v.blocks) b.trim();
    if (!s.parameter_contains(v)) continue;
    const Point e = s.project(v, s.sample_fiber(v, rng));
    Point p = concat(v, e);
    if (c.model.contains(p)) out.push_back(std::move(p));
  }
  return out;
}

InvarianceReport degeneracy_invariance(const ChartComplex& cc, std::size_t samples_per_overlap, std::uint64_t seed,
                                       double tau) {
  InvarianceReport r;
  r.transitions_certified = true;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < cc.overlaps.size(); ++i) {
    const auto& o = cc.overlaps[i];
    const Chart& a = cc.charts.at(o.a);
    const Chart& b = cc.charts.at(o.b);
    if (o.nontrivial) ++r.nontrivial_transitions;
    const auto pts = sample_chart(a, samples_per_overlap, rng);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      const Point& p = pts[j];
      const Point y = o.transition->eval(p);
      if (j < 3 && r.transitions_certified) {
        Sc1Options opt;
        opt.seed = seed + i;
        const auto fwd = sc1_verify(*o.transition, p, opt);
        const auto bwd = sc1_verify(*o.inverse, y, opt);
        if (!fwd.pass || !bwd.pass) {
          r.transitions_certified = false;
          r.certification_failure = o.label + ": " + (fwd.pass ? bwd.failure : fwd.failure);
        }
      }
      OverlapFinding f{i, p, degeneracy_index(a, p, tau), -1, 0.0};
      try {
        f.db = degeneracy_index(b, y, tau);
      } catch (const DomainError&) {
        f.db = -1;
      }
      f.roundtrip = level_norm(a.model.ambient(), o.inverse->eval(y) - p, 0);
      r.worst_roundtrip = std::max(r.worst_roundtrip, f.roundtrip);
      ++r.samples;
      if (f.da != f.db) r.mismatches.push_back(std::move(f));
    }
  }
  r.pass = r.transitions_certified && r.mismatches.empty() && r.worst_roundtrip <= 1e-9;
  return r;
}

SemicontinuityReport lower_semicontinuity(const Chart& c, const Point& x, std::size_t samples, std::uint64_t seed,
                                          double radius) {
  SemicontinuityReport r;
  r.d_center = degeneracy_index(c, x);
  const auto& s = *c.model.splicing;
  const std::size_t nw = c.model.parameter_blocks();
  const std::size_t ne = s.fiber().size();
  // stay clear of the corner coordinates that are positive at x
  double rad = radius;
  for (const auto& k : s.parameter_set().corner) {
    const double t = x[k.block][k.index];
    if (t > 1e-9) rad = std::min(rad, 0.5 * t);
  }
  r.radius = rad;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  r.pass = true;
  for (std::size_t i = 0; i < samples; ++i) {
    Point v = x.slice(0, nw) + random_finite(s.parameter_space(), rng, rad / 4);
    for (const auto& k : s.parameter_set().corner) {
      double& t = v[k.block].at(k.index);
      if (t < 0) t = 0;
    }
    const Point e = s.project(v, x.slice(nw, ne) + random_finite(s.fiber(), rng, rad / 4));
    const Point y = concat(v, e);
    if (!c.model.contains(y)) continue;
    const int d = degeneracy_index(c, y);
    r.neighbors.push_back(d);
    if (d > r.d_center) r.pass = false;
  }
  return r;
}

// ---------------------------------------------------------------- faces

FaceReport faces(const ChartComplex& cc) {
  const std::size_t n = cc.samples.size();
  if (n > 1 && cc.adjacency.empty()) throw DomainError("face computation needs declared adjacency");
  FaceReport r;
  r.d.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.d[i] = degeneracy_index(cc.charts.at(cc.samples[i].chart), cc.samples[i].x);

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  for (auto [a, b] : cc.adjacency) {
    if (a >= n || b >= n) throw DomainError("adjacency refers to a missing sample");
    if (r.d[a] == 1 && r.d[b] == 1) parent[find(a)] = find(b);
  }
  std::map<std::size_t, std::size_t> face_id;
  for (std::size_t i = 0; i < n; ++i)
    if (r.d[i] == 1) face_id.emplace(find(i), face_id.size());
  r.faces = face_id.size();

  // closure: a point with d >= 2 lies on every face reaching an adjacent point of smaller positive d
  std::vector<std::set<std::size_t>> in(n);
  for (std::size_t i = 0; i < n; ++i)
    if (r.d[i] == 1) in[i].insert(face_id[find(i)]);
  const int dmax = n ? *std::max_element(r.d.begin(), r.d.end()) : 0;
  for (int level = 2; level <= dmax; ++level)
    for (auto [a, b] : cc.adjacency) {
      if (r.d[b] == level && r.d[a] >= 1 && r.d[a] < level) in[b].insert(in[a].begin(), in[a].end());
      if (r.d[a] == level && r.d[b] >= 1 && r.d[b] < level) in[a].insert(in[b].begin(), in[b].end());
    }
  r.face_count.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.face_count[i] = in[i].size();
    if (r.face_count[i] != static_cast<std::size_t>(r.d[i])) r.offending.push_back(i);
  }
  r.face_structured = r.offending.empty();
  return r;
}

namespace {

Chart quadrant_chart(std::size_t dim, std::string name) {
  OpenSet v;
  for (std::size_t i = 0; i < dim; ++i) v.corner.push_back({0, i});
  return Chart{std::move(name),
               whole_core(trivial_splicing(ProductSpace{ScaleSpace::finite(dim)}, ProductSpace{ScaleSpace::finite(1)}, v))};
}

Point quadrant_point(const std::vector<double>& v) { return Point{Vector(v), Vector{}}; }

}  // namespace

ChartComplex quadrant_complex(std::size_t dim, std::size_t grid) {
  if (dim == 0 || dim > 3 || grid < 2) throw DomainError("quadrant complex needs dim in 1..3 and grid >= 2");
  ChartComplex cc;
  cc.charts.push_back(quadrant_chart(dim, "quadrant" + std::to_string(dim)));
  std::size_t total = 1;
  for (std::size_t i = 0; i < dim; ++i) total *= grid;
  auto index_of = [&](const std::vector<std::size_t>& ix) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < dim; ++i) k = k * grid + ix[i];
    return k;
  };
  for (std::size_t k = 0; k < total; ++k) {
    std::vector<std::size_t> ix(dim);
    std::size_t t = k;
    for (std::size_t i = dim; i-- > 0;) {
      ix[i] = t % grid;
      t /= grid;
    }
    std::vector<double> v(ix.begin(), ix.end());
    cc.samples.push_back({0, quadrant_point(v)});
    for (std::size_t i = 0; i < dim; ++i) {
      if (ix[i] + 1 < grid) {
        auto jx = ix;
        ++jx[i];
        cc.adjacency.emplace_back(k, index_of(jx));
      }
    }
  }
  return cc;
}

ChartComplex teardrop_complex(std::size_t grid) {
  if (grid < 3) throw DomainError("teardrop complex needs grid >= 3");
  ChartComplex cc;
  cc.charts.push_back(quadrant_chart(2, "teardrop"));
  // the ray {x = 0} stands for both boundary rays; (t, 0) is identified with (0, t)
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> id;
  auto node = [&](std::size_t i, std::size_t j) {
    if (j == 0 && i > 0) std::swap(i, j);
    auto [it, fresh] = id.emplace(std::pair{i, j}, cc.samples.size());
    if (fresh) cc.samples.push_back({0, quadrant_point({double(i), double(j)})});
    return it->second;
  };
  for (std::size_t i = 0; i < grid; ++i)
    for (std::size_t j = 0; j < grid; ++j) {
      const std::size_t a = node(i, j);
      if (i + 1 < grid) cc.adjacency.emplace_back(a, node(i + 1, j));
      if (j + 1 < grid) cc.adjacency.emplace_back(a, node(i, j + 1));
    }
  return cc;
}

namespace {

ProductSpace seq1() { return ProductSpace{ScaleSpace::sequence(1.0)}; }

Chart corner_chart(std::string name, std::size_t dim, std::vector<std::size_t> corners, ProductSpace fiber) {
  OpenSet v;
  for (auto i : corners) v.corner.push_back({0, i});
  return Chart{std::move(name), whole_core(trivial_splicing(ProductSpace{ScaleSpace::finite(dim)}, fiber, v))};
}

// Map on (v, e) acting on the finite parameter block by a formula and on the fiber by another.
struct Formula {
  std::function<Vector(const Vector& v, const Vector& e)> v;
  std::function<Vector(const Vector& v, const Vector& e, const Vector& dv, const Vector& de)> dv;
  std::function<Vector(const Vector& v, const Vector& e)> e;  // empty: identity on the fiber
  std::function<Vector(const Vector& v, const Vector& e, const Vector& dv, const Vector& de)> de;
};

MapPtr formula_map(const std::string& name, const Chart& c, Formula f) {
  const auto amb = c.model.ambient();
  return std::make_shared<FunctionMap>(
      name, amb, amb,
      [f](const Point& x) { return Point{f.v(x[0], x[1]), f.e ? f.e(x[0], x[1]) : x[1]}; },
      [f](const Point& x, const Point& h) {
        return Point{f.dv(x[0], x[1], h[0], h[1]), f.de ? f.de(x[0], x[1], h[0], h[1]) : h[1]};
      },
      FunctionMap::CEval{}, ambient_corners(c.model));
}

// (v, e) -> (phi(v), <e, u(v)> u(phi(v))) on the rank-jump core
MapPtr rank_jump_transport(const std::string& name, const SplicingPtr& rj, std::function<double(double)> phi,
                           std::function<double(double)> dphi) {
  const auto amb = direct_sum(rj->parameter_space(), rj->fiber());
  // u and u' are only materialized when the pairing is nonzero
  auto u = [rj](double v, double a) { return a == 0.0 ? Vector{} : a * rank_jump_vector(*rj, v); };
  auto du = [rj](double v, double a) {
    if (a == 0.0) return Vector{};
    const Vector uv = rank_jump_vector(*rj, v);
    return a * rj->d_project(Point{Vector{v}}, Point{Vector{1.0}}, Point{uv}, Point{Vector{}})[0];
  };
  OpenSet o;
  o.corner = {{0, 0}};
  return std::make_shared<FunctionMap>(
      name, amb, amb,
      [=](const Point& x) {
        const double v = x[0][0];
        return Point{Vector{phi(v)}, u(phi(v), rank_jump_pairing(*rj, v, x[1]))};
      },
      [=](const Point& x, const Point& h) {
        const double v = x[0][0], dv = h[0][0], w = phi(v), dw = dphi(v) * dv;
        const double a = rank_jump_pairing(*rj, v, x[1]);
        const double da = rank_jump_pairing(*rj, v, h[1]) + dv * rank_jump_pairing(*rj, v, x[1], true);
        Vector out = u(w, da);
        out += du(w, a * dw);
        return Point{Vector{dw}, out.trim()};
      },
      FunctionMap::CEval{}, o);
}

}  // namespace

ChartComplex corner_corpus() {
  ChartComplex cc;
  cc.charts.push_back(corner_chart("quadrant2 x E", 2, {0, 1}, seq1()));
  cc.charts.push_back(corner_chart("half-plane x E", 2, {0}, seq1()));
  cc.charts.push_back(corner_chart("quadrant2 x R x R", 3, {0, 1}, ProductSpace{ScaleSpace::finite(1)}));
  cc.charts.push_back(Chart{"rank-jump core", whole_core(rank_jump_splicing(1.0))});
  const Chart& q2 = cc.charts[0];
  const Chart& hq = cc.charts[1];
  const Chart& q3 = cc.charts[2];

  auto add = [&](std::size_t a, std::string label, MapPtr t, MapPtr inv, bool nontrivial = true) {
    cc.overlaps.push_back(Overlap{a, a, std::move(t), std::move(inv), std::move(label), nontrivial});
  };

  {
    Formula swap{[](const Vector& v, const Vector&) { return Vector{v[1], v[0]}; },
                 [](const Vector&, const Vector&, const Vector& dv, const Vector&) { return Vector{dv[1], dv[0]}; }, {}, {}};
    add(0, "swap", formula_map("swap", q2, swap), formula_map("swap", q2, swap));
  }
  {
    Formula f{[](const Vector& v, const Vector&) { return Vector{v[0] * (1 + v[1] * v[1]), v[1]}; },
              [](const Vector& v, const Vector&, const Vector& d, const Vector&) {
                return Vector{d[0] * (1 + v[1] * v[1]) + 2 * v[0] * v[1] * d[1], d[1]};
              },
              {}, {}};
    Formula g{[](const Vector& v, const Vector&) { return Vector{v[0] / (1 + v[1] * v[1]), v[1]}; },
              [](const Vector& v, const Vector&, const Vector& d, const Vector&) {
                const double s = 1 + v[1] * v[1];
                return Vector{d[0] / s - 2 * v[0] * v[1] * d[1] / (s * s), d[1]};
              },
              {}, {}};
    add(1, "r(1+q^2)", formula_map("r(1+q^2)", hq, f), formula_map("r/(1+q^2)", hq, g));
  }
  {
    Formula f{[](const Vector& v, const Vector&) { return Vector{v[0], v[1] * (1 + v[0] * v[0])}; },
              [](const Vector& v, const Vector&, const Vector& d, const Vector&) {
                return Vector{d[0], d[1] * (1 + v[0] * v[0]) + 2 * v[0] * v[1] * d[0]};
              },
              {}, {}};
    Formula g{[](const Vector& v, const Vector&) { return Vector{v[0], v[1] / (1 + v[0] * v[0])}; },
              [](const Vector& v, const Vector&, const Vector& d, const Vector&) {
                const double s = 1 + v[0] * v[0];
                return Vector{d[0], d[1] / s - 2 * v[0] * v[1] * d[0] / (s * s)};
              },
              {}, {}};
    add(0, "shear", formula_map("shear", q2, f), formula_map("shear^-1", q2, g));
  }
  {
    // the second corner coordinate is rescaled by a fiber functional
    Formula f{[](const Vector& v, const Vector& e) { return Vector{2 * v[0], v[1] * std::exp(e[0])}; },
              [](const Vector& v, const Vector& e, const Vector& d, const Vector& de) {
                return Vector{2 * d[0], (d[1] + v[1] * de[0]) * std::exp(e[0])};
              },
              {}, {}};
    Formula g{[](const Vector& v, const Vector& e) { return Vector{v[0] / 2, v[1] * std::exp(-e[0])}; },
              [](const Vector& v, const Vector& e, const Vector& d, const Vector& de) {
                return Vector{d[0] / 2, (d[1] - v[1] * de[0]) * std::exp(-e[0])};
              },
              {}, {}};
    add(0, "fiber-scaled", formula_map("fiber-scaled", q2, f), formula_map("fiber-scaled^-1", q2, g));
  }
  {
    Formula f{[](const Vector& v, const Vector&) { return Vector{v[1], v[0] * (1 + v[1]), v[2] + v[0]}; },
              [](const Vector& v, const Vector&, const Vector& d, const Vector&) {
                return Vector{d[1], d[0] * (1 + v[1]) + v[0] * d[1], d[2] + d[0]};
              },
              {}, {}};
    Formula g{[](const Vector& s, const Vector&) {
                const double r1 = s[1] / (1 + s[0]);
                return Vector{r1, s[0], s[2] - r1};
              },
              [](const Vector& s, const Vector&, const Vector& d, const Vector&) {
                const double dr1 = d[1] / (1 + s[0]) - s[1] * d[0] / ((1 + s[0]) * (1 + s[0]));
                return Vector{dr1, d[0], d[2] - dr1};
              },
              {}, {}};
    add(2, "mixed", formula_map("mixed", q3, f), formula_map("mixed^-1", q3, g));
  }
  {
    const auto rj = cc.charts[3].model.splicing;
    add(3, "rank-jump transport",
        rank_jump_transport("transport", rj, [](double v) { return v + v * v; }, [](double v) { return 1 + 2 * v; }),
        rank_jump_transport("transport^-1", rj, [](double w) { return 0.5 * (std::sqrt(1 + 4 * w) - 1); },
                            [](double w) { return 1.0 / std::sqrt(1 + 4 * w); }));
  }
  {
    auto id = std::make_shared<LinearMap>(BlockOperator::identity(q2.model.ambient()), ambient_corners(q2.model));
    add(0, "identity", id, id, false);
  }
  return cc;
}

// ---------------------------------------------------------------- products

Chart product_chart(const Chart& x, const Chart& y) {
  LocalModel m{product_splicing(x.model.splicing, y.model.splicing), {}};
  const LocalModel mx = x.model, my = y.model;
  const std::size_t nwx = mx.parameter_blocks(), nex = mx.splicing->fiber().size();
  const std::size_t nwy = my.parameter_blocks(), ney = my.splicing->fiber().size();
  m.open.predicate = [=](const Point& p) {
    const Point px = concat(p.slice(0, nwx), p.slice(nwx + nwy, nex));
    const Point py = concat(p.slice(nwx, nwy), p.slice(nwx + nwy + nex, ney));
    return mx.open.contains(mx.ambient(), px) && my.open.contains(my.ambient(), py);
  };
  return Chart{x.name + " x " + y.name, std::move(m)};
}

Point product_point(const Chart& x, const Point& px, const Chart& y, const Point& py) {
  const std::size_t nwx = x.model.parameter_blocks(), nwy = y.model.parameter_blocks();
  return concat(concat(px.slice(0, nwx), py.slice(0, nwy)),
                concat(px.slice(nwx, px.size() - nwx), py.slice(nwy, py.size() - nwy)));
}

ProductDegeneracyReport product_degeneracy(const Chart& x, const Chart& y,
                                           const std::vector<std::pair<Point, Point>>& pairs) {
  ProductDegeneracyReport r;
  const Chart xy = product_chart(x, y);
  r.additive = true;
  for (const auto& [px, py] : pairs) {
    const int dx = degeneracy_index(x, px), dy = degeneracy_index(y, py);
    const int dxy = degeneracy_index(xy, product_point(x, px, y, py));
    r.values.push_back({dx, dy, dxy});
    if (dxy != dx + dy) r.additive = false;
    ++r.pairs;
  }
  return r;
}

// ---------------------------------------------------------------- fred-submersions

FredWitness projection_witness(const SplicingPtr& t, std::size_t n) {
  FredWitness w;
  const auto extra = trivial_splicing(t->parameter_space(), ProductSpace{ScaleSpace::finite(n)}, t->parameter_set());
  w.source = whole_core(whitney_sum(t, extra));
  w.target = whole_core(t);
  w.phi = w.phi_inv = std::make_shared<LinearMap>(BlockOperator::identity(w.source.ambient()));
  w.psi = w.psi_inv = std::make_shared<LinearMap>(BlockOperator::identity(w.target.ambient()));
  w.kept_blocks = t->parameter_space().size() + t->fiber().size();
  w.n = n;
  return w;
}

MapPtr projection_map(const FredWitness& w) {
  const auto src = w.source.ambient(), dst = w.target.ambient();
  BlockOperator a(src, dst);
  for (std::size_t i = 0; i < w.kept_blocks; ++i) a.set(i, i, ScOperator::identity(src[i]));
  return std::make_shared<LinearMap>(a);
}

FredReport fred_submersion_check(const MapPtr& f, const FredWitness& w, std::size_t samples, std::uint64_t seed,
                                 double tol) {
  FredReport r;
  r.n = w.n;
  std::mt19937_64 rng(seed);
  const auto src = w.source.ambient(), dst = w.target.ambient();
  try {
    for (std::size_t i = 0; i < samples; ++i) {
      const Point p = sample_model(w.source, rng);
      const Point x = w.phi_inv->eval(p);
      const double chart = level_norm(src, w.phi->eval(x) - p, 0);
      if (chart > tol) {
        r.failure = "phi is not inverse to phi^-1 (" + std::to_string(chart) + ")";
        r.worst = std::max(r.worst, chart);
        break;
      }
      const Point q = w.psi->eval(f->eval(x));
      if (!w.target.contains(q)) {
        r.failure = "image leaves the target chart";
        r.worst = INFINITY;
        break;
      }
      r.worst = std::max(r.worst, level_norm(dst, q - p.slice(0, w.kept_blocks), 0));
      ++r.samples;
    }
  } catch (const DomainError& e) {
    r.failure = e.what();
  }
  if (r.failure.empty() && r.worst > tol) r.failure = "not in normal form: residual " + std::to_string(r.worst);
  r.pass = r.failure.empty();
  return r;
}

FredWitness fred_submersion_compose(const FredWitness& wf, const FredWitness& wg, std::size_t samples,
                                    std::uint64_t seed) {
  const auto fsrc = wf.source.ambient();
  const std::size_t kf = wf.kept_blocks, ef = fsrc.size() - kf;
  const std::size_t ng = wg.source.ambient().size();
  if (wg.phi_inv->codomain() != wf.psi->domain()) throw DomainError("chart spaces of f and g do not match at Y");

  SplicingPtr s = wg.source.splicing;
  for (std::size_t i = 0; i < ef; ++i)
    s = whitney_sum(s, trivial_splicing(s->parameter_space(), ProductSpace{fsrc[kf + i]}, s->parameter_set()));
  FredWitness w;
  w.source = whole_core(s);
  w.target = wg.target;
  w.psi = wg.psi;
  w.psi_inv = wg.psi_inv;
  w.kept_blocks = wg.kept_blocks;
  w.n = wf.n + wg.n;
  const auto amb = w.source.ambient();
  const auto X = wf.phi_inv->codomain();

  // gamma^{-1}(w,h,h',e') = phi^{-1}(psi(beta^{-1}(w,h,h')), e')
  const MapPtr beta_inv = wg.phi_inv, beta = wg.phi, psi = wf.psi, psi_inv = wf.psi_inv, phi = wf.phi,
               phi_inv = wf.phi_inv;
  w.phi_inv = std::make_shared<FunctionMap>(
      "gamma^-1", amb, X,
      [=](const Point& p) {
        return phi_inv->eval(concat(psi->eval(beta_inv->eval(p.slice(0, ng))), p.slice(ng, ef)));
      },
      [=](const Point& p, const Point& h) {
        const Point a = p.slice(0, ng), y = beta_inv->eval(a);
        const Point t = psi->eval(y);
        const Point dt = psi->tangent(y, beta_inv->tangent(a, h.slice(0, ng)));
        return phi_inv->tangent(concat(t, p.slice(ng, ef)), concat(dt, h.slice(ng, ef)));
      });
  w.phi = std::make_shared<FunctionMap>(
      "gamma", X, amb,
      [=](const Point& x) {
        const Point s0 = phi->eval(x);
        return concat(beta->eval(psi_inv->eval(s0.slice(0, kf))), s0.slice(kf, ef));
      },
      [=](const Point& x, const Point& h) {
        const Point s0 = phi->eval(x), ds = phi->tangent(x, h);
        const Point y = psi_inv->eval(s0.slice(0, kf));
        const Point dy = psi_inv->tangent(s0.slice(0, kf), ds.slice(0, kf));
        return concat(beta->tangent(y, dy), ds.slice(kf, ef));
      });

  // the image of psi o beta^{-1} has to land in the chart of f
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < samples; ++i) {
    const Point p = sample_model(w.source, rng);
    const Point t = psi->eval(beta_inv->eval(p.slice(0, ng)));
    if (!wf.target.contains(t) || !wf.source.contains(concat(t, p.slice(ng, ef))))
      throw DomainError("chart domains do not nest");
  }
  return w;
}

PreimageReport preimage_charts(const MapPtr& f, const std::vector<FredWitness>& witnesses, const Point& y,
                               std::size_t samples, std::uint64_t seed, double tol) {
  if (witnesses.empty()) throw DomainError("preimage charts need at least one witness");
  PreimageReport r;
  const auto Y = f->codomain();
  r.n = witnesses.front().n;
  r.n_constant = true;
  std::vector<ProductSpace> zspace;
  for (const auto& w : witnesses) {
    const Point base = w.psi->eval(y);
    if (!w.target.contains(base)) throw DomainError("point is not in the range of the chart");
    const auto src = w.source.ambient();
    const std::size_t k = w.kept_blocks;
    ProductSpace z(std::vector<ScaleSpace>(src.blocks.begin() + static_cast<std::ptrdiff_t>(k), src.blocks.end()));
    for (const auto& b : z.blocks)
      if (!b.is_finite()) throw DomainError("dropped directions of a fred-submersion chart must be finite");
    const MapPtr phi_inv = w.phi_inv;
    auto chart = std::make_shared<FunctionMap>(
        "preimage-chart", z, phi_inv->codomain(),
        [=](const Point& zz) { return phi_inv->eval(concat(base, zz)); },
        [=](const Point& zz, const Point& dz) {
          return phi_inv->tangent(concat(base, zz), concat(Point::zeros(k), dz));
        });
    r.charts.push_back(PreimageChart{base, chart, w.n});
    zspace.push_back(z);
    if (w.n != r.n) r.n_constant = false;
  }

  std::mt19937_64 rng(seed);
  // transitions between the preimage charts, tested for classical smoothness by finite differences
  for (std::size_t i = 0; i < witnesses.size(); ++i)
    for (std::size_t j = 0; j < witnesses.size(); ++j) {
      if (i == j) continue;
      const auto& wj = witnesses[j];
      const std::size_t kj = wj.kept_blocks, ej = wj.source.ambient().size() - kj;
      auto t = [&](const Point& z) {
        const Point s = wj.phi->eval(r.charts[i].chart->eval(z));
        r.worst_base = std::max(r.worst_base, level_norm(wj.target.ambient(), s.slice(0, kj) - r.charts[j].base, 0));
        return s.slice(kj, ej);
      };
      const auto zsp = zspace[j];
      for (std::size_t s = 0; s < samples; ++s) {
        const Point z = random_finite(zspace[i], rng);
        for (std::size_t b = 0; b < z.size(); ++b)
          for (std::size_t c = 0; c < zspace[i][b].dim; ++c) {
            Point dir = Point::zeros(z.size());
            dir[b].at(c) = 1.0;
            auto d1 = [&](double h) { return (1.0 / (2 * h)) * (t(z + h * dir) - t(z - h * dir)); };
            auto d2 = [&](double h) { return (1.0 / (h * h)) * (t(z + h * dir) - 2.0 * t(z) + t(z - h * dir)); };
            const double h = 1e-3;
            r.worst_fd = std::max(r.worst_fd, level_norm(zsp, d1(h) - d1(h / 2), 0));
            r.worst_fd = std::max(r.worst_fd, level_norm(zsp, d2(h) - d2(h / 2), 0));
          }
      }
    }
  r.smooth = r.worst_fd <= tol && r.worst_base <= 1e-9;

  // f^{-1}(f(m)) agrees with the chart image on samples, on and off the preimage
  r.membership_ok = true;
  for (std::size_t i = 0; i < witnesses.size(); ++i) {
    const auto& w = witnesses[i];
    const std::size_t k = w.kept_blocks;
    for (std::size_t s = 0; s < samples; ++s) {
      Point p = sample_model(w.source, rng);
      if (s % 2 == 0) p = concat(r.charts[i].base, p.slice(k, p.size() - k));
      const Point x = w.phi_inv->eval(p);
      const bool in_n = level_norm(w.target.ambient(), p.slice(0, k) - r.charts[i].base, 0) <= 1e-9;
      const bool in_pre = level_norm(Y, f->eval(x) - y, 0) <= 1e-9;
      if (in_n != in_pre) r.membership_ok = false;
    }
  }
  r.pass = r.n_constant && r.smooth && r.membership_ok;
  return r;
}

}  // namespace scalekit
