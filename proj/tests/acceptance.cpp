// One line per acceptance criterion; exit status 1 if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>

#include "scalekit/corpus.hpp"

using namespace scalekit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && dt > budget_s) {
    o.pass = false;
    o.detail += " (over the " + std::to_string(budget_s) + " s budget)";
  }
  failures += !o.pass;
  std::printf("%s %2d %-28s %7.3fs  %s\n", o.pass ? "PASS" : "FAIL", id, title, dt, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome compactness() {
  const auto E = ScaleSpace::sequence(1.0);
  const auto spec = embedding_spectrum(E, 0, 20);
  double worst = 0;
  for (int k = 0; k < 20; ++k) worst = std::max(worst, std::fabs(spec[k] - std::exp(-double(k))));
  bool counts = true;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-6, 1e-9, 0.37}) {
    const double want = std::ceil(std::log(1 / eps) / 1.0);
    const double got = double(embedding_count_above(E, eps));
    counts = counts && std::fabs(got - want) <= 1;
  }
  return {worst <= 1e-12 && counts, fmt("max |s_k - e^-k| = %.2e, counts within 1", worst)};
}

Outcome linear_suite() {
  const auto E = ScaleSpace::sequence(1.0);
  const auto L = ScOperator::shift(E, 1), R = ScOperator::shift(E, -1);
  const auto il = fredholm_index(L), ir = fredholm_index(R);
  const auto c = compose_index(L, L);
  const bool ok = il.index == 1 && ir.index == -1 && c.index == 2 && c.additive && il.regime == Regime::exact &&
                  ir.regime == Regime::exact;
  return {ok, fmt("i(L) = %lld, i(R) = %lld, i(LL) = %lld", (long long)il.index, (long long)ir.index,
                  (long long)c.index)};
}

Outcome scplus_stability() {
  std::size_t good = 0, n = 0;
  std::string bad;
  for (const auto& p : corpus::scplus_pairs()) {
    ++n;
    try {
      const auto it = fredholm_index(p.t).index;
      const auto r = perturb_scplus_index(p.t, p.r);
      const bool ok = p.r.certified_scplus() && r.stable && r.index_sum == it && r.kernels_level_independent;
      good += ok;
      if (!ok) bad += " [" + p.name + "]";
    } catch (const std::exception& e) {
      bad += " [" + p.name + ": " + e.what() + "]";
    }
  }
  return {good == n && n >= 10, fmt("%zu/%zu pairs", good, n) + bad};
}

Outcome regularizing() {
  std::size_t good = 0, n = 0;
  std::string bad;
  for (const auto& c : corpus::regularizing_cases()) {
    ++n;
    const auto cert = regularity_lift(c.t, fredholm_index(c.t), c.e, c.level);
    const bool ok = cert.ok && cert.regime == Regime::exact && cert.reassembles && cert.c_exact.is_zero();
    good += ok;
    if (!ok) bad += " [" + c.name + ": " + cert.detail + "]";
  }
  return {good == n && n >= 10, fmt("%zu/%zu exact lifts with c = 0", good, n) + bad};
}

Outcome chain_rule() {
  std::size_t flat_exact = 0, flat_n = 0, core_exact = 0, core_exact_n = 0, float_bad = 0;
  double worst_float = 0;
  std::string bad;
  for (const auto& p : corpus::flat_chain_pairs()) {
    ++flat_n;
    const auto ex = chain_rule_verify(p.f, p.g, p.points, Regime::exact);
    bool all = ex.pass && ex.regime == Regime::exact;
    for (const auto& q : ex.points) all = all && q.exact_equal;
    flat_exact += all;
    if (!all) bad += " [exact " + p.name + ": " + ex.failure + "]";
    const auto fl = chain_rule_verify(p.f, p.g, p.points, Regime::floating);
    worst_float = std::max(worst_float, fl.worst);
    if (!fl.pass || fl.worst > 1e-9) ++float_bad, bad += " [float " + p.name + "]";
  }
  for (const auto& p : corpus::transcendental_chain_pairs()) {
    const auto fl = chain_rule_verify(p.f, p.g, p.points, Regime::floating);
    worst_float = std::max(worst_float, fl.worst);
    if (!fl.pass || fl.worst > 1e-9) ++float_bad, bad += " [float " + p.name + "]";
  }
  for (const auto& p : corpus::core_chain_pairs()) {
    if (p.exact) {
      ++core_exact_n;
      const auto ex = core_chain_rule(p.f, p.g, p.points, Regime::exact);
      bool all = ex.pass && ex.chain.regime == Regime::exact;
      for (const auto& q : ex.chain.points) all = all && q.exact_equal;
      core_exact += all;
      if (!all) bad += " [core exact " + p.name + ": " + ex.chain.failure + "]";
    }
    const auto fl = core_chain_rule(p.f, p.g, p.points, Regime::floating);
    worst_float = std::max(worst_float, fl.chain.worst);
    if (!fl.pass || fl.chain.worst > 1e-9) ++float_bad, bad += " [core float " + p.name + "]";
  }
  const bool ok = flat_exact == flat_n && flat_n >= 20 && core_exact == core_exact_n && core_exact_n >= 20 &&
                  float_bad == 0;
  return {ok, fmt("flat %zu/%zu exact, cores %zu/%zu exact, float worst %.1e", flat_exact, flat_n, core_exact,
                  core_exact_n, worst_float) +
                  bad};
}

Outcome tangent() {
  const auto rj = tangent_splicing(rank_jump_splicing(1.0), 64);
  const auto cr = tangent_splicing(
      const_rank_splicing(ProductSpace{ScaleSpace::finite(1)}, ScaleSpace::finite(3), {QVector{1, 1, 0}, QVector{0, 1, 2}}),
      64);
  const bool ok = rj.report.samples >= 64 && rj.report.pass && rj.report.worst <= 1e-8 && cr.report.exact &&
                  cr.report.worst == 0.0 && cr.report.pass;
  return {ok, fmt("rank jump: %zu samples, worst %.1e; constant rank exact: %s", rj.report.samples, rj.report.worst,
                  cr.report.exact ? "yes" : "no")};
}

Outcome corners() {
  const auto inv = degeneracy_invariance(corner_corpus(), 24);
  std::mt19937_64 rng(0x5eed);
  std::size_t semi = 0, semi_ok = 0;
  const std::vector<Chart> charts{corpus::quadrant_chart(3, {0, 1, 2}), corpus::quadrant_chart(2, {0}),
                                  Chart{"rj", whole_core(rank_jump_splicing(1.0))}};
  for (const auto& c : charts)
    for (const auto& x : sample_chart(c, 8, rng)) {
      ++semi;
      semi_ok += lower_semicontinuity(c, x, 32, rng()).pass;
    }
  const Chart x = corpus::quadrant_chart(2, {0, 1});
  const Chart y{"rj", whole_core(rank_jump_splicing(1.0))};
  const auto px = sample_chart(x, 24, rng), py = sample_chart(y, 24, rng);
  std::vector<std::pair<Point, Point>> pairs;
  for (std::size_t i = 0; i < px.size(); ++i) pairs.emplace_back(px[i], py[i]);
  const auto prod = product_degeneracy(x, y, pairs);
  bool oracle = true;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const int dx = (px[i][0][0] == 0.0) + (px[i][0][1] == 0.0);
    const int dy = py[i][0][0] == 0.0;
    oracle = oracle && prod.values[i][2] == dx + dy;
  }
  const bool ok = inv.pass && inv.mismatches.empty() && inv.nontrivial_transitions >= 5 && inv.samples >= 100 &&
                  semi_ok == semi && prod.additive && oracle;
  return {ok, fmt("%zu transitions, %zu overlap samples, %zu mismatches; semicontinuity %zu/%zu; product %s",
                  inv.nontrivial_transitions, inv.samples, inv.mismatches.size(), semi_ok, semi,
                  prod.additive && oracle ? "additive" : "NOT additive")};
}

Outcome faces_check() {
  const auto q = faces(quadrant_complex(2, 6));
  bool each = !q.d.empty();
  for (std::size_t i = 0; i < q.d.size(); ++i) each = each && q.face_count[i] == std::size_t(q.d[i]);
  const auto t = faces(teardrop_complex(6));
  return {q.face_structured && each && !t.face_structured,
          fmt("quadrant: %zu faces, %zu points; teardrop flagged: %s", q.faces, q.d.size(),
              t.face_structured ? "no" : "yes")};
}

Outcome fred() {
  const auto c = corpus::fred_composite();
  const bool parts = fred_submersion_check(c.f, c.wf).pass && fred_submersion_check(c.g, c.wg).pass;
  const auto w = fred_submersion_compose(c.wf, c.wg);
  const auto r = fred_submersion_check(std::make_shared<ComposeMap>(c.g, c.f), w, 40);
  const auto pc = corpus::preimage_case();
  const auto pre = preimage_charts(pc.f, pc.witnesses, pc.y);
  const bool ok = parts && r.pass && pre.pass && pre.worst_fd <= 1e-6;
  return {ok, fmt("composite normal form on %zu samples (n = %zu, worst %.1e); preimage fd %.1e", r.samples, w.n,
                  r.worst, pre.worst_fd)};
}

Outcome filler() {
  std::size_t zero_ok = 0, n = 0, decidable = 0, equal = 0;
  double cross = 0;
  std::string bad;
  for (const auto& c : corpus::fill_cases()) {
    ++n;
    const auto fs = fill(c.section, c.bundle.filler);
    const auto z = zero_set_equivalence(fs, c.grid);
    zero_ok += z.pass && z.mismatches.empty();
    if (!z.pass) bad += " [zeros " + c.name + "]";
    const auto b = filled_linearization_block(c.section, c.bundle.filler, c.q);
    cross = std::max({cross, b.cross_f, b.cross_fc});
    if (b.index_f && b.index_filled) {
      ++decidable;
      equal += *b.index_f == *b.index_filled;
      if (*b.index_f != *b.index_filled) bad += " [index " + c.name + "]";
    }
  }
  const bool ok = zero_ok == n && cross <= 1e-10 && decidable == equal && decidable > 0;
  return {ok, fmt("zero sets %zu/%zu, cross blocks %.1e, indices equal %zu/%zu", zero_ok, n, cross, equal, decidable) +
                  bad};
}

Outcome linearization() {
  std::size_t good = 0, n = 0;
  for (const auto& t : corpus::linearization_triples()) {
    ++n;
    const auto r = linearization_delta_scplus(t.f, t.s, t.t, t.q);
    good += r.pass && r.scplus && r.indices_agree;
  }
  return {good == n && n >= 5, fmt("%zu/%zu triples certified", good, n)};
}

Outcome negatives() {
  const auto b = corpus::broken_rank_jump_control();
  const bool broken_fails = !sc1_verify(*b.map, b.x).pass;
  const auto l = corpus::level_losing_control();
  const auto cls = strong_map_class_check(l.bundle, l.bundle, l.phi, l.fiber).classification;
  const bool losing = cls == "sc1-not-triangle";
  const auto w = corpus::wrong_derivative_control();
  const bool wrong_fails = !sc1_verify(*w.map, w.x).pass;
  return {broken_fails && losing && wrong_fails,
          fmt("broken rank jump rejected: %s; level-losing map: %s; wrong derivative rejected: %s",
              broken_fails ? "yes" : "no", cls.c_str(), wrong_fails ? "yes" : "no")};
}

}  // namespace

int main() {
  criterion(1, "compactness surrogate", 1, compactness);
  criterion(2, "shift indices", 1, linear_suite);
  criterion(3, "sc+ stability", 5, scplus_stability);
  criterion(4, "regularizing", 0, regularizing);
  criterion(5, "chain rule", 10, chain_rule);
  criterion(6, "tangent splicing", 0, tangent);
  criterion(7, "corner recognition", 0, corners);
  criterion(8, "faces", 0, faces_check);
  criterion(9, "fred-submersions", 0, fred);
  criterion(10, "fillers", 0, filler);
  criterion(11, "linearization ambiguity", 0, linearization);
  criterion(12, "negative controls", 0, negatives);
  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
