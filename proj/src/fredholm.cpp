#include <algorithm>
#include <cmath>
#include <limits>

#include "linalg.hpp"
#include "scalekit/linops.hpp"

namespace scalekit {

namespace {

using detail::QMatrix;

struct Structure {
  std::int64_t j = 0;
  double c = 0.0;
  std::int64_t n_min = 0;
  std::int64_t b_min = 0;
  double delta = 1.0;
  int offset = 0;
};

Structure analyze(const ScOperator& t) {
  const auto& dom = t.domain();
  const auto& cod = t.codomain();
  if (dom.delta != cod.delta || dom.level_offset != cod.level_offset)
    throw IndexUndecidable("domain and codomain scales differ");
  Structure s;
  s.delta = dom.delta;
  s.offset = dom.level_offset;
  std::vector<std::int64_t> principal;
  for (const auto& [b, d] : t.bands()) {
    const auto ex = d.exact_limit();
    const bool nonzero = ex ? sgn(*ex) != 0 : std::fabs(d.limit()) > 1e-12;
    if (nonzero) principal.push_back(b);
  }
  if (principal.empty()) throw IndexUndecidable("no band has a nonzero limit (compact operator, not Fredholm)");
  if (principal.size() > 1) throw IndexUndecidable("principal part is not a single weighted shift");
  s.j = principal.front();
  s.c = t.bands().at(s.j).limit();
  s.b_min = t.bands().begin()->first;
  s.n_min = std::max<std::int64_t>(0, -s.j);
  for (const auto& [b, d] : t.bands()) {
    for (auto bp : d.breakpoints()) s.n_min = std::max(s.n_min, bp);
    if (b > s.j) {
      const auto end = d.support_end();
      if (!end) throw IndexUndecidable("a band above the principal shift does not terminate");
      s.n_min = std::max(s.n_min, *end + b - s.j);
    }
  }
  for (const auto& f : t.finite_rank()) {
    s.n_min = std::max<std::int64_t>(s.n_min, static_cast<std::int64_t>(f.u.support()));
    s.n_min = std::max<std::int64_t>(s.n_min, static_cast<std::int64_t>(f.lambda.support()) - s.j);
  }
  return s;
}

double neumann_ratio(const ScOperator& t, const Structure& s, std::int64_t n, int m) {
  const double lvl = s.delta * static_cast<double>(m + s.offset);
  double sum = 0.0;
  for (const auto& [b, d] : t.bands()) {
    if (b > s.j) continue;
    sum += d.tail_deviation(n) * std::exp(lvl * static_cast<double>(s.j - b));
  }
  return sum / std::fabs(s.c);
}

std::int64_t choose_head(const ScOperator& t, const Structure& s, int m, const FredholmOptions& opt, double& ratio) {
  std::int64_t n = s.n_min;
  while (true) {
    ratio = neumann_ratio(t, s, n, m);
    if (ratio <= 0.5) return n;
    if (++n > opt.max_head) throw IndexUndecidable("tail block not invertible within the head size limit");
  }
}

// Forward substitution through the tail rows; returns true if stopped by the length cap.
template <class S>
bool extend_tail(const ScOperator& t, const Structure& s, std::int64_t n, BasicVector<S>& x, const BasicVector<S>* rhs,
                 std::size_t max_tail) {
  const std::int64_t width = s.j - s.b_min;
  const Coefficient& dj = t.bands().at(s.j);
  const std::int64_t rhs_end = rhs ? static_cast<std::int64_t>(rhs->support()) : 0;
  for (std::int64_t r = n;; ++r) {
    S acc = rhs ? (*rhs)[static_cast<std::size_t>(r)] : S{};
    for (const auto& [b, d] : t.bands()) {
      if (b >= s.j) break;
      const std::int64_t idx = r + b;
      if (idx < 0) continue;
      const S xv = x[static_cast<std::size_t>(idx)];
      if (exactly_zero(xv)) continue;
      const S dv = d.template eval<S>(r);
      if (!exactly_zero(dv)) acc -= dv * xv;
    }
    if (!exactly_zero(acc)) x.at(static_cast<std::size_t>(r + s.j)) = acc / dj.template eval<S>(r);
    if (r + 1 >= rhs_end) {
      bool quiet = true;
      for (std::int64_t q = r + s.j - width + 1; q <= r + s.j && quiet; ++q)
        if (q >= 0 && !exactly_zero(x[static_cast<std::size_t>(q)])) quiet = false;
      if (quiet) break;
    }
    if (r - n > static_cast<std::int64_t>(max_tail)) {
      x.trim();
      return true;
    }
  }
  x.trim();
  return false;
}

struct LevelRun {
  LevelCertificate cert;
  Regime regime = Regime::exact;
  double gap = INFINITY;
  std::vector<QVector> kernel_q, coker_q;
  std::vector<Vector> kernel, coker;
  bool truncated = false;
};

std::optional<QMatrix> exact_head(const ScOperator& t, std::int64_t rows, std::int64_t cols) {
  QMatrix a(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) {
      auto q = t.entry_exact(r, c);
      if (!q) return std::nullopt;
      a(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = *q;
    }
  return a;
}

Eigen::MatrixXd float_head(const ScOperator& t, std::int64_t rows, std::int64_t cols) {
  Eigen::MatrixXd a(rows, cols);
  for (std::int64_t r = 0; r < rows; ++r)
    for (std::int64_t c = 0; c < cols; ++c) a(r, c) = t.entry(r, c);
  return a;
}

std::vector<QVector> coordinate_complement(const QMatrix& a) {
  detail::QEchelon ech;
  for (std::size_t c = 0; c < a.cols; ++c) {
    QVector col;
    for (std::size_t r = 0; r < a.rows; ++r)
      if (sgn(a(r, c)) != 0) col.at(r) = a(r, c);
    ech.insert(col);
  }
  std::vector<QVector> out;
  for (std::size_t r = 0; r < a.rows && ech.rank() < a.rows; ++r)
    if (ech.insert(QVector::unit(r))) out.push_back(QVector::unit(r));
  return out;
}

bool run_exact(const ScOperator& t, const Structure& s, std::int64_t n, const FredholmOptions& opt, LevelRun& run) {
  const std::int64_t cols = n + s.j;
  auto a = exact_head(t, n, cols);
  if (!a) return false;
  auto red = detail::rref(*a);
  run.cert.head_rank = red.pivots.size();
  run.kernel_q = detail::nullspace(red, static_cast<std::size_t>(cols));
  for (auto& k : run.kernel_q) extend_tail<Rational>(t, s, n, k, nullptr, opt.max_tail);
  run.coker_q = coordinate_complement(*a);
  for (const auto& k : run.kernel_q) run.kernel.push_back(convert<double>(k));
  for (const auto& c : run.coker_q) run.coker.push_back(convert<double>(c));
  run.regime = Regime::exact;
  return true;
}

void run_float(const ScOperator& t, const Structure& s, std::int64_t n, const FredholmOptions& opt, LevelRun& run) {
  const std::int64_t cols = n + s.j;
  const auto fr = detail::float_rank(float_head(t, n, cols), opt.rank_tol);
  run.cert.head_rank = fr.rank;
  run.gap = fr.gap;
  for (std::int64_t c = static_cast<std::int64_t>(fr.rank); c < cols; ++c) {
    Vector k;
    for (std::int64_t i = 0; i < cols; ++i) {
      const double v = fr.v(i, c);
      if (std::fabs(v) > 1e-15) k.at(static_cast<std::size_t>(i)) = v;
    }
    run.truncated = extend_tail<double>(t, s, n, k, nullptr, opt.max_tail) || run.truncated;
    run.kernel.push_back(k);
  }
  for (std::int64_t c = static_cast<std::int64_t>(fr.rank); c < n; ++c) {
    Vector y;
    for (std::int64_t i = 0; i < n; ++i) {
      const double v = fr.u(i, c);
      if (std::fabs(v) > 1e-15) y.at(static_cast<std::size_t>(i)) = v;
    }
    run.coker.push_back(y.trim());
  }
  run.regime = Regime::floating;
}

LevelRun run_level(const ScOperator& t, const Structure& s, int m, const FredholmOptions& opt, bool try_exact) {
  LevelRun run;
  run.cert.level = m;
  run.cert.head_rows = choose_head(t, s, m, opt, run.cert.neumann_ratio);
  bool done = false;
  if (try_exact) {
    try {
      done = run_exact(t, s, run.cert.head_rows, opt, run);
    } catch (const InexactError&) {
      done = false;
    }
  }
  if (!done) {
    run.kernel.clear();
    run.coker.clear();
    run.kernel_q.clear();
    run.coker_q.clear();
    run_float(t, s, run.cert.head_rows, opt, run);
  }
  run.cert.kernel_dim = run.kernel.size();
  run.cert.cokernel_dim = run.coker.size();
  return run;
}

bool same_span(const LevelRun& a, const LevelRun& b) {
  if (a.kernel.size() != b.kernel.size()) return false;
  if (a.kernel.empty()) return true;
  if (a.regime == Regime::exact && b.regime == Regime::exact) {
    detail::QEchelon ech;
    for (const auto& k : a.kernel_q) ech.insert(k);
    for (const auto& k : b.kernel_q)
      if (!ech.reduce(k).is_zero()) return false;
    return true;
  }
  std::vector<Vector> all = a.kernel;
  all.insert(all.end(), b.kernel.begin(), b.kernel.end());
  return detail::span_rank(all, 1e-8) == a.kernel.size();
}

FredholmSplitting finite_case(const ScOperator& t, const FredholmOptions& opt) {
  FredholmSplitting out;
  const auto nd = static_cast<std::int64_t>(t.domain().dim);
  const auto nc = static_cast<std::int64_t>(t.codomain().dim);
  LevelRun run;
  bool exact = !opt.force_float && !t.inexact_data();
  if (exact) {
    auto a = exact_head(t, nc, nd);
    if (a) {
      auto red = detail::rref(*a);
      run.cert.head_rank = red.pivots.size();
      run.kernel_q = detail::nullspace(red, static_cast<std::size_t>(nd));
      run.coker_q = coordinate_complement(*a);
      for (const auto& k : run.kernel_q) run.kernel.push_back(convert<double>(k));
      for (const auto& c : run.coker_q) run.coker.push_back(convert<double>(c));
    } else {
      exact = false;
    }
  }
  Structure s;
  if (!exact) run_float(t, s, nc, opt, run);
  run.regime = exact ? Regime::exact : Regime::floating;
  out.index = nd - nc;
  out.regime = run.regime;
  out.rank_gap = run.gap;
  out.kernel = run.kernel;
  out.cokernel = run.coker;
  out.kernel_exact = run.kernel_q;
  out.cokernel_exact = run.coker_q;
  for (int m : opt.levels) {
    LevelCertificate c = run.cert;
    c.level = m;
    c.head_rows = nc;
    c.kernel_dim = run.kernel.size();
    c.cokernel_dim = run.coker.size();
    out.levels.push_back(c);
  }
  out.levels_consistent = true;
  out.certificate = "closed-form";
  return out;
}

std::vector<QVector> rationalize(const std::vector<Vector>& vs) {
  std::vector<QVector> out;
  for (const auto& v : vs) out.push_back(convert<Rational>(v));
  return out;
}

}  // namespace

FredholmSplitting fredholm_index(const ScOperator& t, const FredholmOptions& opt) {
  const auto& dom = t.domain();
  const auto& cod = t.codomain();
  FredholmSplitting out;
  if (dom.is_finite() && cod.is_finite()) {
    out = finite_case(t, opt);
  } else if (dom.is_finite() || cod.is_finite()) {
    throw IndexUndecidable("finite-dimensional space against an infinite-dimensional one");
  } else {
    const Structure s = analyze(t);
    if (opt.levels.empty()) throw std::invalid_argument("no levels to sample");
    const bool try_exact = !opt.force_float && !t.inexact_data();
    std::vector<LevelRun> runs;
    for (int m : opt.levels) runs.push_back(run_level(t, s, m, opt, try_exact));
    const LevelRun& base = runs.front();
    out.index = s.j;
    out.principal_band = s.j;
    out.regime = base.regime;
    out.rank_gap = base.gap;
    out.kernel = base.kernel;
    out.cokernel = base.coker;
    out.kernel_exact = base.kernel_q;
    out.cokernel_exact = base.coker_q;
    out.kernel_truncated = base.truncated;
    out.levels_consistent = true;
    for (const auto& r : runs) {
      out.levels.push_back(r.cert);
      if (r.regime != base.regime) out.regime = Regime::floating;
      if (!same_span(base, r) || r.coker.size() != base.coker.size()) out.levels_consistent = false;
      out.kernel_truncated = out.kernel_truncated || r.truncated;
    }
    if (static_cast<std::int64_t>(out.kernel.size()) - static_cast<std::int64_t>(out.cokernel.size()) != out.index)
      throw std::logic_error("kernel/cokernel dimensions disagree with the principal shift");
  }
  // Finite-support kernel and cokernel vectors make the splitting valid at every level.
  out.sample_only = out.kernel_truncated;
  out.certificate = out.sample_only ? "sampled" : "closed-form";
  const bool exact_basis = out.regime == Regime::exact && out.kernel_exact.size() == out.kernel.size();
  auto frag = split_off_finite_dim(dom, exact_basis ? out.kernel_exact : rationalize(out.kernel));
  out.projection = exact_basis ? frag.projection
                               : frag.projection + ScOperator::rank_one(dom, dom, {}, {}, true);
  return out;
}

FredholmSplitting fredholm_index(const BlockOperator& t, const FredholmOptions& opt) {
  return fredholm_index(t.flatten().op, opt);
}

CompositionIndex compose_index(const ScOperator& t, const ScOperator& s, const FredholmOptions& opt) {
  CompositionIndex out;
  out.index = fredholm_index(t.compose(s), opt).index;
  out.sum_of_indices = fredholm_index(t, opt).index + fredholm_index(s, opt).index;
  out.additive = out.index == out.sum_of_indices;
  return out;
}

PerturbationReport perturb_scplus_index(const ScOperator& t, const ScOperator& r, const FredholmOptions& opt) {
  if (!r.certified_scplus()) throw DomainError("perturbation is not certified sc+");
  PerturbationReport out;
  out.index_t = fredholm_index(t, opt).index;
  out.splitting = fredholm_index(t + r, opt);
  out.index_sum = out.splitting.index;
  out.stable = out.index_sum == out.index_t;
  out.kernels_level_independent = out.splitting.levels_consistent;
  return out;
}

SolveResult solve_in_range(const ScOperator& t, const FredholmSplitting& split, const QVector& y) {
  SolveResult out;
  const auto& dom = t.domain();
  if (split.levels.empty()) throw std::invalid_argument("splitting has no level certificate");
  const bool finite = dom.is_finite() && t.codomain().is_finite();
  Structure s;
  std::int64_t n, cols;
  if (finite) {
    n = static_cast<std::int64_t>(t.codomain().dim);
    cols = static_cast<std::int64_t>(dom.dim);
  } else {
    s = analyze(t);
    n = split.levels.front().head_rows;
    cols = n + s.j;
  }
  check_membership(t.codomain(), y.support());

  if (split.regime == Regime::exact && split.cokernel_exact.size() == split.cokernel.size()) {
    try {
      auto a = exact_head(t, n, cols);
      if (!a) throw InexactError("head not rational");
      const std::size_t d = split.cokernel_exact.size();
      QMatrix m(static_cast<std::size_t>(n), static_cast<std::size_t>(cols) + d + 1);
      for (std::int64_t r = 0; r < n; ++r) {
        const auto rr = static_cast<std::size_t>(r);
        for (std::int64_t c = 0; c < cols; ++c) m(rr, static_cast<std::size_t>(c)) = (*a)(rr, static_cast<std::size_t>(c));
        for (std::size_t i = 0; i < d; ++i) m(rr, static_cast<std::size_t>(cols) + i) = split.cokernel_exact[i][rr];
        m(rr, m.cols - 1) = y[rr];
      }
      auto red = detail::rref(m, m.cols - 1);
      QVector x;
      QVector gamma;
      for (std::size_t i = 0; i < red.pivots.size(); ++i) {
        const std::size_t p = red.pivots[i];
        const Rational v = red.m(i, m.cols - 1);
        if (p < static_cast<std::size_t>(cols))
          x.at(p) = v;
        else
          gamma.at(p - static_cast<std::size_t>(cols)) = v;
      }
      for (std::size_t i = red.pivots.size(); i < red.m.rows; ++i)
        if (sgn(red.m(i, m.cols - 1)) != 0) return out;  // cannot happen when C complements the range
      QVector c;
      for (std::size_t i = 0; i < d; ++i)
        if (sgn(gamma[i]) != 0) c += gamma[i] * split.cokernel_exact[i];
      c.trim();
      x.trim();
      if (!finite) {
        const QVector rhs = (y - c).trim();
        extend_tail<Rational>(t, s, n, x, &rhs, 1u << 20);
      }
      x -= split.projection.apply(x);
      out.x_exact = x.trim();
      out.c_exact = c;
      out.x = convert<double>(out.x_exact);
      out.c = convert<double>(out.c_exact);
      out.solvable = true;
      out.regime = Regime::exact;
      return out;
    } catch (const InexactError&) {
      // fall through to the float path
    }
  }
  const auto fr = detail::float_rank(float_head(t, n, cols), 1e-10);
  Eigen::VectorXd yh(n);
  for (std::int64_t r = 0; r < n; ++r) yh(r) = y[static_cast<std::size_t>(r)].get_d();
  Eigen::VectorXd cvec = Eigen::VectorXd::Zero(n);
  for (std::int64_t c = static_cast<std::int64_t>(fr.rank); c < n; ++c) cvec += fr.u.col(c).dot(yh) * fr.u.col(c);
  Eigen::VectorXd rhs_h = yh - cvec;
  Eigen::VectorXd xh = Eigen::VectorXd::Zero(cols);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(fr.rank); ++i)
    xh += (fr.u.col(i).dot(rhs_h) / fr.sigma(i)) * fr.v.col(i);
  Vector x, c;
  for (std::int64_t i = 0; i < cols; ++i)
    if (xh(i) != 0.0) x.at(static_cast<std::size_t>(i)) = xh(i);
  for (std::int64_t i = 0; i < n; ++i)
    if (std::fabs(cvec(i)) > 1e-300) c.at(static_cast<std::size_t>(i)) = cvec(i);
  if (!finite) {
    Vector rhs = convert<double>(y) - c;
    rhs.trim();
    extend_tail<double>(t, s, n, x, &rhs, 1u << 16);
  }
  x -= split.projection.apply(x);
  out.x = x.trim();
  out.c = c.trim();
  out.solvable = true;
  return out;
}

RegularityCertificate regularity_lift(const ScOperator& t, const FredholmSplitting& split, const QVector& e, int m) {
  RegularityCertificate cert;
  cert.level = m;
  const double tol = 1e-9;
  bool exact = split.regime == Regime::exact;
  QVector f_exact;
  Vector f;
  if (exact) {
    try {
      f_exact = t.apply(e);
    } catch (const InexactError&) {
      exact = false;
    }
  }
  f = exact ? convert<double>(f_exact) : t.apply(convert<double>(e));
  const double fnorm = level_norm(t.codomain(), f, m);
  if (!std::isfinite(fnorm)) {
    cert.detail = "T(e) is not certified at the requested level";
    return cert;
  }
  const SolveResult sol = solve_in_range(t, split, exact ? f_exact : convert<Rational>(f));
  if (!sol.solvable) {
    cert.detail = "decomposition failed";
    return cert;
  }
  exact = exact && sol.regime == Regime::exact && !split.projection.inexact_data();
  if (exact) {
    cert.regime = Regime::exact;
    cert.c_exact = sol.c_exact;
    cert.x0_exact = sol.x_exact;
    cert.k_exact = split.projection.apply(e);
    cert.c_zero = cert.c_exact.is_zero();
    const QVector sum = cert.k_exact + cert.x0_exact;
    cert.reassembles = sum == e;
    const bool k_in_kernel = t.apply(cert.k_exact).is_zero();
    const bool x0_maps = t.apply(cert.x0_exact) == (f_exact - cert.c_exact).trim();
    cert.k = convert<double>(cert.k_exact);
    cert.x0 = convert<double>(cert.x0_exact);
    cert.c = convert<double>(cert.c_exact);
    cert.reassembly_residual = cert.reassembles ? 0.0 : level_norm(t.domain(), convert<double>(sum - e), 0);
    cert.ok = cert.c_zero && cert.reassembles && k_in_kernel && x0_maps;
    if (!k_in_kernel) cert.detail = "kernel component is not annihilated";
    if (!x0_maps) cert.detail = "T(x0) differs from f - c";
  } else {
    cert.regime = Regime::floating;
    const Vector ed = convert<double>(e);
    cert.c = sol.c;
    cert.x0 = sol.x;
    cert.k = split.projection.apply(ed);
    cert.c_zero = level_norm(t.codomain(), cert.c, 0) <= tol;
    const Vector diff = cert.k + cert.x0 - ed;
    cert.reassembly_residual = level_norm(t.domain(), diff, 0);
    cert.reassembles = cert.reassembly_residual <= tol * (1 + level_norm(t.domain(), ed, 0));
    const double kres = level_norm(t.codomain(), t.apply(cert.k), 0);
    cert.ok = cert.c_zero && cert.reassembles && kres <= tol;
  }
  cert.level_norm_e = level_norm(t.domain(), convert<double>(e), m);
  cert.ok = cert.ok && std::isfinite(cert.level_norm_e);
  return cert;
}

std::vector<QVector> dense_complement(const ScaleSpace& space, const RangeDescription& y, std::size_t codim) {
  std::vector<QVector> out;
  if (const auto* op = std::get_if<ScOperator>(&y)) {
    const auto split = fredholm_index(*op);
    out = split.regime == Regime::exact ? split.cokernel_exact : rationalize(split.cokernel);
  } else {
    const auto& fs = std::get<std::vector<QVector>>(y);
    std::size_t len = 0;
    for (const auto& f : fs) len = std::max(len, f.support());
    QMatrix m(fs.size(), len);
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t c = 0; c < fs[i].support(); ++c) m(i, c) = fs[i][c];
    const auto red = detail::rref(m);
    for (auto p : red.pivots) out.push_back(QVector::unit(p));
  }
  if (out.size() != codim)
    throw DomainError("range has codimension " + std::to_string(out.size()) + ", expected " + std::to_string(codim));
  for (const auto& c : out) check_membership(space, c.support());
  return out;
}

}  // namespace scalekit
