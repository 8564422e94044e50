#include "scalekit/linops.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>
#include <tuple>

#include "linalg.hpp"

namespace scalekit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool same_key(const CoefTerm& a, const CoefTerm& b) {
  return a.rate == b.rate && a.offset == b.offset && a.lo == b.lo && a.hi == b.hi;
}

bool key_less(const CoefTerm& a, const CoefTerm& b) {
  if (a.rate != b.rate) return a.rate < b.rate;
  if (a.offset != b.offset) return a.offset < b.offset;
  if (a.lo != b.lo) return a.lo < b.lo;
  const auto ha = a.hi.value_or(std::numeric_limits<std::int64_t>::max());
  const auto hb = b.hi.value_or(std::numeric_limits<std::int64_t>::max());
  return ha < hb;
}

double term_value(const CoefTerm& t, double k) {
  return t.c.get_d() * std::exp(-(t.rate.get_d() * k + t.offset.get_d()));
}

}  // namespace

// ---------------------------------------------------------------- Coefficient

Coefficient Coefficient::constant(const Rational& c) {
  CoefTerm t;
  t.c = c;
  return from_terms({t});
}

Coefficient Coefficient::exp_decay(const Rational& c, const Rational& rate, const Rational& offset) {
  CoefTerm t;
  t.c = c;
  t.rate = rate;
  t.offset = offset;
  return from_terms({t});
}

Coefficient Coefficient::from_terms(std::vector<CoefTerm> terms) {
  Coefficient d;
  d.terms_ = std::move(terms);
  d.normalize();
  return d;
}

void Coefficient::normalize() {
  for (auto& t : terms_) {
    t.lo = std::max<std::int64_t>(t.lo, 0);
    if (sgn(t.rate) < 0) throw DomainError("coefficient term grows in k (negative rate)");
  }
  std::erase_if(terms_, [](const CoefTerm& t) { return sgn(t.c) == 0 || (t.hi && *t.hi <= t.lo); });
  std::sort(terms_.begin(), terms_.end(), key_less);
  std::vector<CoefTerm> merged;
  for (auto& t : terms_) {
    if (!merged.empty() && same_key(merged.back(), t))
      merged.back().c += t.c;
    else
      merged.push_back(t);
  }
  std::erase_if(merged, [](const CoefTerm& t) { return sgn(t.c) == 0; });
  terms_ = std::move(merged);
}

std::optional<Rational> Coefficient::eval_exact(std::int64_t k) const {
  Rational out = 0;
  for (const auto& t : terms_) {
    if (!t.active(k)) continue;
    const Rational ex = t.rate * k + t.offset;
    if (sgn(ex) != 0) return std::nullopt;
    out += t.c;
  }
  return out;
}

Rational Coefficient::eval_rational(std::int64_t k, bool& inexact) const {
  if (auto q = eval_exact(k)) return *q;
  inexact = true;
  return rational_from_double(eval<double>(k));
}

Coefficient Coefficient::operator*(const Coefficient& o) const {
  std::vector<CoefTerm> out;
  for (const auto& a : terms_)
    for (const auto& b : o.terms_) {
      CoefTerm t;
      t.c = a.c * b.c;
      t.rate = a.rate + b.rate;
      t.offset = a.offset + b.offset;
      t.lo = std::max(a.lo, b.lo);
      if (a.hi && b.hi)
        t.hi = std::min(*a.hi, *b.hi);
      else if (a.hi)
        t.hi = a.hi;
      else
        t.hi = b.hi;
      out.push_back(t);
    }
  return from_terms(std::move(out));
}

Coefficient Coefficient::operator+(const Coefficient& o) const {
  std::vector<CoefTerm> out = terms_;
  out.insert(out.end(), o.terms_.begin(), o.terms_.end());
  return from_terms(std::move(out));
}

Coefficient Coefficient::scaled(const Rational& s) const {
  std::vector<CoefTerm> out = terms_;
  for (auto& t : out) t.c *= s;
  return from_terms(std::move(out));
}

Coefficient Coefficient::shifted(std::int64_t b) const {
  std::vector<CoefTerm> out = terms_;
  for (auto& t : out) {
    t.offset += t.rate * b;
    t.lo -= b;
    if (t.hi) *t.hi -= b;
  }
  return from_terms(std::move(out));
}

Coefficient Coefficient::masked(std::int64_t lo, std::optional<std::int64_t> hi) const {
  std::vector<CoefTerm> out = terms_;
  for (auto& t : out) {
    t.lo = std::max(t.lo, lo);
    if (hi) t.hi = t.hi ? std::min(*t.hi, *hi) : *hi;
  }
  return from_terms(std::move(out));
}

std::optional<std::int64_t> Coefficient::support_end() const {
  std::int64_t end = 0;
  for (const auto& t : terms_) {
    if (!t.hi) return std::nullopt;
    end = std::max(end, *t.hi);
  }
  return end;
}

std::vector<std::int64_t> Coefficient::breakpoints() const {
  std::vector<std::int64_t> out;
  for (const auto& t : terms_) {
    out.push_back(t.lo);
    if (t.hi) out.push_back(*t.hi);
  }
  return out;
}

double Coefficient::limit() const {
  double s = 0.0;
  for (const auto& t : terms_)
    if (!t.hi && sgn(t.rate) == 0) s += term_value(t, 0.0);
  return s;
}

std::optional<Rational> Coefficient::exact_limit() const {
  Rational s = 0;
  for (const auto& t : terms_) {
    if (t.hi || sgn(t.rate) != 0) continue;
    if (sgn(t.offset) != 0) return std::nullopt;
    s += t.c;
  }
  return s;
}

double Coefficient::tail_deviation(std::int64_t n) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    if (t.hi && *t.hi <= n) continue;
    const bool limit_term = !t.hi && sgn(t.rate) == 0;
    if (limit_term && t.lo <= n) continue;
    const double k0 = static_cast<double>(std::max(n, t.lo));
    s += std::fabs(term_value(t, k0));
  }
  return s;
}

double Coefficient::sup_weighted(double lambda, std::int64_t from) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    const std::int64_t k0 = std::max(from, t.lo);
    if (t.hi && *t.hi <= k0) continue;
    const double slope = lambda - t.rate.get_d();
    double kmax;
    if (slope <= 0.0) {
      kmax = static_cast<double>(k0);
    } else {
      if (!t.hi) return kInf;
      kmax = static_cast<double>(*t.hi - 1);
    }
    s += std::fabs(t.c.get_d()) * std::exp(slope * kmax - t.offset.get_d());
  }
  return s;
}

bool Coefficient::all_rational_from(std::int64_t k) const {
  for (const auto& t : terms_) {
    if (t.hi && *t.hi <= k) continue;
    if (sgn(t.rate) != 0 || sgn(t.offset) != 0) return false;
  }
  return true;
}

std::string Coefficient::describe() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& t : terms_) {
    if (!first) os << " + ";
    first = false;
    os << to_string(t.c);
    if (sgn(t.rate) != 0 || sgn(t.offset) != 0)
      os << "*exp(-(" << to_string(t.rate) << "*k+" << to_string(t.offset) << "))";
    if (t.lo > 0 || t.hi) {
      os << "[" << t.lo << "<=k";
      if (t.hi) os << "<" << *t.hi;
      os << "]";
    }
  }
  return os.str();
}

// ---------------------------------------------------------------- rule parser

namespace {

class RuleParser {
 public:
  explicit RuleParser(std::string s) {
    for (char c : s)
      if (!std::isspace(static_cast<unsigned char>(c))) s_.push_back(c);
  }

  Coefficient parse() {
    std::vector<CoefTerm> terms;
    bool neg = false;
    if (peek('+') || peek('-')) neg = s_[i_++] == '-';
    terms.push_back(term(neg));
    while (i_ < s_.size()) {
      if (!(peek('+') || peek('-'))) fail("expected + or -");
      neg = s_[i_++] == '-';
      terms.push_back(term(neg));
    }
    return Coefficient::from_terms(std::move(terms));
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("coefficient rule '" + s_ + "': " + what + " at position " + std::to_string(i_));
  }
  bool peek(char c) const { return i_ < s_.size() && s_[i_] == c; }
  bool peek(std::string_view w) const { return s_.compare(i_, w.size(), w) == 0; }
  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  Rational number() {
    const std::size_t start = i_;
    while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.' ||
                              ((s_[i_] == 'e' || s_[i_] == 'E') && i_ + 1 < s_.size() &&
                               (std::isdigit(static_cast<unsigned char>(s_[i_ + 1])) || s_[i_ + 1] == '-'))))
      i_ += (s_[i_] == 'e' || s_[i_] == 'E') && s_[i_ + 1] == '-' ? 2 : 1;
    if (start == i_) fail("expected a number");
    Rational q = parse_rational(s_.substr(start, i_ - start));
    if (peek('/') && i_ + 1 < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_ + 1]))) {
      ++i_;
      const std::size_t d0 = i_;
      while (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || s_[i_] == '.')) ++i_;
      q /= parse_rational(s_.substr(d0, i_ - d0));
      q.canonicalize();
    }
    return q;
  }

  std::int64_t integer() {
    const std::size_t start = i_;
    if (peek('-')) ++i_;
    while (i_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[i_]))) ++i_;
    if (start == i_) fail("expected an integer");
    return std::stoll(s_.substr(start, i_ - start));
  }

  // affine expression alpha*k + beta inside exp(...)
  std::pair<Rational, Rational> affine() {
    Rational alpha = 0, beta = 0;
    bool first = true;
    while (i_ < s_.size() && !peek(')')) {
      bool neg = false;
      if (peek('+') || peek('-'))
        neg = s_[i_++] == '-';
      else if (!first)
        fail("expected + or - in exponent");
      first = false;
      Rational c = 1;
      bool has_num = false;
      if (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || peek('.'))) {
        c = number();
        has_num = true;
      }
      if (has_num && peek('*')) ++i_;
      if (peek('k')) {
        ++i_;
        alpha += neg ? Rational(-c) : c;
      } else {
        if (!has_num) fail("expected a number or k");
        beta += neg ? Rational(-c) : c;
      }
    }
    return {alpha, beta};
  }

  CoefTerm term(bool neg) {
    CoefTerm t;
    t.c = neg ? -1 : 1;
    bool any = false;
    while (true) {
      if (peek("exp(")) {
        i_ += 4;
        auto [alpha, beta] = affine();
        expect(')');
        t.rate -= alpha;
        t.offset -= beta;
      } else if (peek('[')) {
        ++i_;
        if (!peek('k')) fail("expected k in indicator");
        ++i_;
        if (peek("<=")) {
          i_ += 2;
          const auto v = integer() + 1;
          t.hi = t.hi ? std::min(*t.hi, v) : v;
        } else if (peek(">=")) {
          i_ += 2;
          t.lo = std::max(t.lo, integer());
        } else if (peek('<')) {
          ++i_;
          const auto v = integer();
          t.hi = t.hi ? std::min(*t.hi, v) : v;
        } else if (peek('>')) {
          ++i_;
          t.lo = std::max(t.lo, integer() + 1);
        } else {
          fail("expected comparison");
        }
        expect(']');
      } else if (i_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[i_])) || peek('.'))) {
        t.c *= number();
      } else {
        fail("expected a factor");
      }
      any = true;
      if (!peek('*')) break;
      ++i_;
    }
    if (!any) fail("empty term");
    if (sgn(t.rate) < 0) fail("exponent must not grow in k");
    return t;
  }

  std::string s_;
  std::size_t i_ = 0;
};

}  // namespace

Coefficient parse_coefficient(const std::string& rule) { return RuleParser(rule).parse(); }

// ---------------------------------------------------------------- ScOperator

RankOne::RankOne(QVector l, QVector v)
    : lambda(std::move(l.trim())), u(std::move(v.trim())), lambda_d(convert<double>(lambda)), u_d(convert<double>(u)) {}

namespace {

double level_rate(const ScaleSpace& s, int m) {
  return s.is_finite() ? 0.0 : s.delta * static_cast<double>(m + s.level_offset);
}

// Dual norm of a coordinate functional at weight rate lambda.
double dual_norm(const Vector& l, double rate) {
  double s = 0.0;
  for (std::size_t j = 0; j < l.support(); ++j) {
    const double t = l[j] * std::exp(-rate * static_cast<double>(j));
    s += t * t;
  }
  return std::sqrt(s);
}

double weighted_norm(const Vector& u, double rate) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.support(); ++j) {
    const double t = u[j] * std::exp(rate * static_cast<double>(j));
    s += t * t;
  }
  return std::sqrt(s);
}

}  // namespace

ScOperator ScOperator::identity(const ScaleSpace& s) { return diagonal(s, Coefficient::constant(1)); }

ScOperator ScOperator::shift(const ScaleSpace& s, std::int64_t b) { return band(s, s, b, Coefficient::constant(1)); }

ScOperator ScOperator::diagonal(const ScaleSpace& s, const Coefficient& d) { return band(s, s, 0, d); }

ScOperator ScOperator::band(const ScaleSpace& dom, const ScaleSpace& cod, std::int64_t b, const Coefficient& d) {
  ScOperator op(dom, cod);
  op.add_band(b, d);
  return op;
}

ScOperator ScOperator::rank_one(const ScaleSpace& dom, const ScaleSpace& cod, QVector lambda, QVector u,
                                bool inexact) {
  ScOperator op(dom, cod);
  op.add_rank_one(std::move(lambda), std::move(u));
  op.inexact_ = inexact;
  return op;
}

void ScOperator::add_band(std::int64_t b, const Coefficient& d_in) {
  std::optional<std::int64_t> hi;
  if (cod_.is_finite()) hi = static_cast<std::int64_t>(cod_.dim);
  if (dom_.is_finite()) {
    const std::int64_t h = static_cast<std::int64_t>(dom_.dim) - b;
    hi = hi ? std::min(*hi, h) : h;
  }
  Coefficient d = d_in.masked(std::max<std::int64_t>(0, -b), hi);
  if (d.is_zero()) return;
  auto it = bands_.find(b);
  if (it == bands_.end()) {
    bands_.emplace(b, d);
  } else {
    it->second = it->second + d;
    if (it->second.is_zero()) bands_.erase(it);
  }
}

void ScOperator::add_rank_one(QVector lambda, QVector u) {
  lambda.trim();
  u.trim();
  if (lambda.is_zero() || u.is_zero()) return;
  check_membership(dom_, lambda.support());
  check_membership(cod_, u.support());
  finite_.emplace_back(std::move(lambda), std::move(u));
}

template <class S>
BasicVector<S> ScOperator::apply(const BasicVector<S>& x) const {
  check_membership(dom_, x.support());
  BasicVector<S> out;
  const auto n = static_cast<std::int64_t>(x.support());
  for (const auto& [b, d] : bands_) {
    for (std::int64_t j = 0; j < n; ++j) {
      const S& xj = x.coeffs()[static_cast<std::size_t>(j)];
      if (exactly_zero(xj)) continue;
      const std::int64_t k = j - b;
      if (k < 0) continue;
      if (cod_.is_finite() && k >= static_cast<std::int64_t>(cod_.dim)) continue;
      const S dk = d.template eval<S>(k);
      if (exactly_zero(dk)) continue;
      out.at(static_cast<std::size_t>(k)) += dk * xj;
    }
  }
  for (const auto& r : finite_) {
    S s{};
    if constexpr (std::is_same_v<S, Rational>) {
      for (std::size_t l = 0; l < r.lambda.support(); ++l) s += r.lambda[l] * x[l];
      if (exactly_zero(s)) continue;
      for (std::size_t i = 0; i < r.u.support(); ++i) out.at(i) += s * r.u[i];
    } else {
      for (std::size_t l = 0; l < r.lambda_d.support(); ++l) s += r.lambda_d[l] * x[l];
      if (exactly_zero(s)) continue;
      for (std::size_t i = 0; i < r.u_d.support(); ++i) out.at(i) += s * r.u_d[i];
    }
  }
  out.set_declared_level(x.declared_level());
  return out.trim();
}

template <class S>
BasicVector<S> ScOperator::apply_transpose(const BasicVector<S>& y) const {
  BasicVector<S> out;
  const auto n = static_cast<std::int64_t>(y.support());
  for (const auto& [b, d] : bands_) {
    for (std::int64_t k = 0; k < n; ++k) {
      const S& yk = y.coeffs()[static_cast<std::size_t>(k)];
      if (exactly_zero(yk)) continue;
      const std::int64_t j = k + b;
      if (j < 0) continue;
      const S dk = d.template eval<S>(k);
      if (exactly_zero(dk)) continue;
      out.at(static_cast<std::size_t>(j)) += dk * yk;
    }
  }
  for (const auto& r : finite_) {
    S s{};
    for (std::size_t i = 0; i < r.u.support(); ++i) s += from_rational<S>(r.u[i]) * y[i];
    if (exactly_zero(s)) continue;
    for (std::size_t l = 0; l < r.lambda.support(); ++l) out.at(l) += s * from_rational<S>(r.lambda[l]);
  }
  return out.trim();
}

template BasicVector<double> ScOperator::apply(const BasicVector<double>&) const;
template BasicVector<Rational> ScOperator::apply(const BasicVector<Rational>&) const;
template BasicVector<Complex> ScOperator::apply(const BasicVector<Complex>&) const;
template BasicVector<double> ScOperator::apply_transpose(const BasicVector<double>&) const;
template BasicVector<Rational> ScOperator::apply_transpose(const BasicVector<Rational>&) const;

namespace {

// Rational image of a finite-support vector; transcendental values fall back to doubles.
QVector apply_bands_rational(const std::map<std::int64_t, Coefficient>& bands, const QVector& x, bool& inexact) {
  QVector out;
  for (const auto& [b, d] : bands)
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(x.support()); ++j) {
      if (sgn(x[static_cast<std::size_t>(j)]) == 0) continue;
      const std::int64_t k = j - b;
      if (k < 0) continue;
      const Rational dk = d.eval_rational(k, inexact);
      if (sgn(dk) != 0) out.at(static_cast<std::size_t>(k)) += dk * x[static_cast<std::size_t>(j)];
    }
  return out.trim();
}

QVector transpose_rational(const ScOperator& op, const QVector& y, bool& inexact) {
  QVector out;
  for (const auto& [b, d] : op.bands())
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(y.support()); ++k) {
      if (sgn(y[static_cast<std::size_t>(k)]) == 0) continue;
      const std::int64_t j = k + b;
      if (j < 0) continue;
      const Rational dk = d.eval_rational(k, inexact);
      if (sgn(dk) != 0) out.at(static_cast<std::size_t>(j)) += dk * y[static_cast<std::size_t>(k)];
    }
  for (const auto& r : op.finite_rank()) {
    Rational s = 0;
    for (std::size_t i = 0; i < r.u.support(); ++i) s += r.u[i] * y[i];
    if (sgn(s) == 0) continue;
    for (std::size_t l = 0; l < r.lambda.support(); ++l) out.at(l) += s * r.lambda[l];
  }
  return out.trim();
}

}  // namespace

ScOperator ScOperator::operator+(const ScOperator& o) const {
  if (!dom_.same_model(o.dom_) || !cod_.same_model(o.cod_)) throw DomainError("operator sum: space mismatch");
  ScOperator r(*this);
  for (const auto& [b, d] : o.bands_) r.add_band(b, d);
  for (const auto& f : o.finite_) r.add_rank_one(f.lambda, f.u);
  r.inexact_ = inexact_ || o.inexact_;
  return r;
}

ScOperator ScOperator::scaled(const Rational& s) const {
  ScOperator r(dom_, cod_);
  r.inexact_ = inexact_;
  if (sgn(s) == 0) return r;
  for (const auto& [b, d] : bands_) r.add_band(b, d.scaled(s));
  for (const auto& f : finite_) r.add_rank_one(f.lambda, s * f.u);
  return r;
}

ScOperator ScOperator::compose(const ScOperator& inner) const {
  if (!dom_.same_model(inner.cod_)) throw DomainError("operator composition: space mismatch");
  ScOperator r(inner.dom_, cod_);
  bool inexact = inexact_ || inner.inexact_;
  for (const auto& [b1, d1] : bands_)
    for (const auto& [b2, d2] : inner.bands_) r.add_band(b1 + b2, d1 * d2.shifted(b1));
  for (const auto& f : inner.finite_) r.add_rank_one(f.lambda, apply_bands_rational(bands_, f.u, inexact));
  for (const auto& f : finite_) r.add_rank_one(transpose_rational(inner, f.lambda, inexact), f.u);
  r.inexact_ = inexact;
  return r;
}

ScOperator ScOperator::with_spaces(const ScaleSpace& dom, const ScaleSpace& cod) const {
  ScOperator r(dom, cod);
  for (const auto& [b, d] : bands_) r.add_band(b, d);
  for (const auto& f : finite_) r.add_rank_one(f.lambda, f.u);
  r.inexact_ = inexact_;
  return r;
}

double ScOperator::entry(std::int64_t r, std::int64_t c) const {
  double s = 0.0;
  auto it = bands_.find(c - r);
  if (r < 0 || c < 0) return 0.0;
  if (it != bands_.end()) s += it->second.eval<double>(r);
  for (const auto& f : finite_) s += f.u_d[static_cast<std::size_t>(r)] * f.lambda_d[static_cast<std::size_t>(c)];
  return s;
}

std::optional<Rational> ScOperator::entry_exact(std::int64_t r, std::int64_t c) const {
  Rational s = 0;
  auto it = bands_.find(c - r);
  if (r < 0 || c < 0) return Rational(0);
  if (it != bands_.end()) {
    auto q = it->second.eval_exact(r);
    if (!q) return std::nullopt;
    s += *q;
  }
  for (const auto& f : finite_) s += f.u[static_cast<std::size_t>(r)] * f.lambda[static_cast<std::size_t>(c)];
  return s;
}

double ScOperator::level_bound(int m_in, int m_out) const {
  const double ld = level_rate(dom_, m_in);
  const double lc = level_rate(cod_, m_out);
  double total = 0.0;
  for (const auto& [b, d] : bands_)
    total += std::exp(-ld * static_cast<double>(b)) * d.sup_weighted(lc - ld, 0);
  for (const auto& f : finite_) total += dual_norm(f.lambda_d, ld) * weighted_norm(f.u_d, lc);
  return total;
}

namespace {

// Every unbounded term satisfies rate >= slope*m + intercept for all m >= 0.
bool bounded_for_all_levels(const Coefficient& d, double slope, double intercept) {
  for (const auto& t : d.terms()) {
    if (t.hi) continue;
    if (slope > 1e-15) return false;
    if (t.rate.get_d() < intercept - 1e-12) return false;
  }
  return true;
}

double model_rate(const ScaleSpace& s) { return s.is_finite() ? 0.0 : s.delta; }

}  // namespace

bool ScOperator::certified_sc0() const {
  const double dd = model_rate(dom_), dc = model_rate(cod_);
  const double slope = dc - dd;
  const double intercept = dc * cod_.level_offset - dd * dom_.level_offset;
  for (const auto& [b, d] : bands_)
    if (!bounded_for_all_levels(d, slope, intercept)) return false;
  return true;
}

bool ScOperator::certified_scplus() const {
  const double dd = model_rate(dom_), dc = model_rate(cod_);
  const double slope = dc - dd;
  const double intercept = dc * (1 + cod_.level_offset) - dd * dom_.level_offset;
  for (const auto& [b, d] : bands_)
    if (!bounded_for_all_levels(d, slope, intercept)) return false;
  return true;
}

std::string ScOperator::describe() const {
  std::ostringstream os;
  bool first = true;
  for (const auto& [b, d] : bands_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << d.describe() << ")S^" << b;
  }
  for (const auto& f : finite_) {
    if (!first) os << " + ";
    first = false;
    os << "rank1[" << f.lambda.support() << "," << f.u.support() << "]";
  }
  if (first) os << "0";
  return os.str();
}

CompactnessReport scplus_singular_check(const ScOperator& r, int m, std::size_t n) {
  CompactnessReport rep;
  const auto& dom = r.domain();
  const auto& cod = r.codomain();
  if (dom.is_finite() || cod.is_finite()) throw DomainError("singular value check needs sequence spaces");
  rep.bound = r.level_bound(m, m + 1);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const double lc = level_rate(cod, m), ld = level_rate(dom, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          r.entry(static_cast<std::int64_t>(i), static_cast<std::int64_t>(j)) *
          std::exp(lc * static_cast<double>(i) - ld * static_cast<double>(j));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  rep.ok = std::isfinite(rep.bound);
  for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k) {
    const double s = svd.singularValues()(k);
    rep.singular_values.push_back(s);
    const double cap = std::exp(-cod.delta * static_cast<double>(k)) * rep.bound;
    const double ratio = cap > 0 ? s / cap : (s > 0 ? kInf : 0.0);
    rep.worst_ratio = std::max(rep.worst_ratio, ratio);
    if (s > cap * (1 + 1e-9) + 1e-13) rep.ok = false;
  }
  return rep;
}

// ---------------------------------------------------------------- BlockOperator

BlockOperator::BlockOperator(ProductSpace dom, ProductSpace cod)
    : dom_(std::move(dom)), cod_(std::move(cod)), blocks_(cod_.size(), std::vector<std::optional<ScOperator>>(dom_.size())) {}

BlockOperator BlockOperator::identity(const ProductSpace& s) {
  BlockOperator b(s, s);
  for (std::size_t i = 0; i < s.size(); ++i) b.set(i, i, ScOperator::identity(s[i]));
  return b;
}

BlockOperator BlockOperator::single(const ScOperator& op) {
  BlockOperator b(ProductSpace{op.domain()}, ProductSpace{op.codomain()});
  b.set(0, 0, op);
  return b;
}

void BlockOperator::set(std::size_t i, std::size_t j, const ScOperator& op) {
  if (!op.domain().same_model(dom_[j]) || !op.codomain().same_model(cod_[i]))
    throw DomainError("block operator entry has the wrong spaces");
  blocks_[i][j] = op.is_zero() && !op.inexact_data() ? std::optional<ScOperator>{} : std::optional<ScOperator>{op};
}

void BlockOperator::add(std::size_t i, std::size_t j, const ScOperator& op) {
  if (blocks_[i][j])
    set(i, j, *blocks_[i][j] + op);
  else
    set(i, j, op);
}

template <class S>
BasicPoint<S> BlockOperator::apply(const BasicPoint<S>& x) const {
  if (x.size() != dom_.size()) throw DomainError("block operator applied to a point with the wrong block count");
  BasicPoint<S> out = BasicPoint<S>::zeros(cod_.size());
  for (std::size_t i = 0; i < cod_.size(); ++i)
    for (std::size_t j = 0; j < dom_.size(); ++j)
      if (blocks_[i][j]) out[i] += blocks_[i][j]->apply(x[j]);
  for (auto& b : out.blocks) b.trim();
  return out;
}

template Point BlockOperator::apply(const Point&) const;
template QPoint BlockOperator::apply(const QPoint&) const;
template CPoint BlockOperator::apply(const CPoint&) const;

BlockOperator BlockOperator::operator+(const BlockOperator& o) const {
  if (!(dom_.size() == o.dom_.size() && cod_.size() == o.cod_.size())) throw DomainError("block sum: shape mismatch");
  BlockOperator r(*this);
  for (std::size_t i = 0; i < cod_.size(); ++i)
    for (std::size_t j = 0; j < dom_.size(); ++j)
      if (o.blocks_[i][j]) r.add(i, j, *o.blocks_[i][j]);
  return r;
}

BlockOperator BlockOperator::scaled(const Rational& s) const {
  BlockOperator r(dom_, cod_);
  for (std::size_t i = 0; i < cod_.size(); ++i)
    for (std::size_t j = 0; j < dom_.size(); ++j)
      if (blocks_[i][j]) r.blocks_[i][j] = blocks_[i][j]->scaled(s);
  return r;
}

BlockOperator BlockOperator::compose(const BlockOperator& inner) const {
  if (dom_.size() != inner.cod_.size()) throw DomainError("block composition: shape mismatch");
  BlockOperator r(inner.dom_, cod_);
  for (std::size_t i = 0; i < cod_.size(); ++i)
    for (std::size_t j = 0; j < inner.dom_.size(); ++j)
      for (std::size_t l = 0; l < dom_.size(); ++l)
        if (blocks_[i][l] && inner.blocks_[l][j]) r.add(i, j, blocks_[i][l]->compose(*inner.blocks_[l][j]));
  return r;
}

bool ScOperator::rational_entries() const {
  if (inexact_) return false;
  for (const auto& [b, d] : bands_)
    if (!d.all_rational_from(0)) return false;
  return true;
}

bool BlockOperator::rational_entries() const {
  for (const auto& row : blocks_)
    for (const auto& b : row)
      if (b && !b->rational_entries()) return false;
  return true;
}

bool BlockOperator::inexact_data() const {
  for (const auto& row : blocks_)
    for (const auto& b : row)
      if (b && b->inexact_data()) return true;
  return false;
}

namespace {

std::pair<ScaleSpace, std::vector<std::int64_t>> flat_space(const ProductSpace& p) {
  std::vector<std::int64_t> offsets(p.size(), 0);
  std::int64_t fin = 0;
  std::optional<std::size_t> seq;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].is_finite()) {
      offsets[i] = fin;
      fin += static_cast<std::int64_t>(p[i].dim);
    } else {
      if (seq) throw IndexUndecidable("more than one infinite-dimensional block on one side");
      seq = i;
    }
  }
  if (!seq) return {ScaleSpace::finite(static_cast<std::size_t>(fin)), offsets};
  offsets[*seq] = fin;
  return {p[*seq], offsets};
}

}  // namespace

BlockOperator::Flat BlockOperator::flatten() const {
  auto [fd, od] = flat_space(dom_);
  auto [fc, oc] = flat_space(cod_);
  ScOperator op(fd, fc);
  bool inexact = false;
  for (std::size_t i = 0; i < cod_.size(); ++i)
    for (std::size_t j = 0; j < dom_.size(); ++j) {
      if (!blocks_[i][j]) continue;
      const ScOperator& b = *blocks_[i][j];
      inexact = inexact || b.inexact_data();
      for (const auto& [band, d] : b.bands())
        op = op + ScOperator::band(fd, fc, band + od[j] - oc[i], d.shifted(-oc[i]));
      for (const auto& f : b.finite_rank()) {
        QVector l, u;
        for (std::size_t k = 0; k < f.lambda.support(); ++k)
          if (sgn(f.lambda[k]) != 0) l.at(k + static_cast<std::size_t>(od[j])) = f.lambda[k];
        for (std::size_t k = 0; k < f.u.support(); ++k)
          if (sgn(f.u[k]) != 0) u.at(k + static_cast<std::size_t>(oc[i])) = f.u[k];
        op = op + ScOperator::rank_one(fd, fc, l, u);
      }
    }
  if (inexact) op = op + ScOperator::rank_one(fd, fc, {}, {}, true);
  return {op, od, oc};
}

template <class S>
BasicVector<S> flatten_point(const BasicPoint<S>& p, const std::vector<std::int64_t>& offsets) {
  BasicVector<S> out;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t k = 0; k < p[i].support(); ++k)
      if (!exactly_zero(p[i][k])) out.at(k + static_cast<std::size_t>(offsets[i])) = p[i][k];
  return out;
}

template <class S>
BasicPoint<S> unflatten_point(const BasicVector<S>& v, const ProductSpace& space,
                              const std::vector<std::int64_t>& offsets) {
  BasicPoint<S> out = BasicPoint<S>::zeros(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto off = static_cast<std::size_t>(offsets[i]);
    const std::size_t end = space[i].is_finite() ? off + space[i].dim : v.support();
    for (std::size_t k = off; k < std::min(end, v.support()); ++k)
      if (!exactly_zero(v[k])) out[i].at(k - off) = v[k];
  }
  return out;
}

template Vector flatten_point(const Point&, const std::vector<std::int64_t>&);
template QVector flatten_point(const QPoint&, const std::vector<std::int64_t>&);
template Point unflatten_point(const Vector&, const ProductSpace&, const std::vector<std::int64_t>&);
template QPoint unflatten_point(const QVector&, const ProductSpace&, const std::vector<std::int64_t>&);

// ---------------------------------------------------------------- splitting

SplittingFragment split_off_finite_dim(const ScaleSpace& space, const std::vector<QVector>& basis) {
  SplittingFragment out;
  out.projection = ScOperator(space, space);
  if (basis.empty()) return out;
  std::size_t len = 0;
  for (const auto& b : basis) {
    check_membership(space, b.support());
    len = std::max(len, b.support());
  }
  detail::QMatrix m(basis.size(), len);
  for (std::size_t i = 0; i < basis.size(); ++i)
    for (std::size_t c = 0; c < basis[i].support(); ++c) m(i, c) = basis[i][c];
  auto red = detail::rref(m);
  if (red.pivots.size() != basis.size()) throw DomainError("kernel basis is linearly dependent");
  out.pivots = red.pivots;
  const std::size_t d = basis.size();
  // B_p[i][l] = k_i[p_l]; functionals Lambda = (B_p^T)^{-1} in pivot coordinates
  detail::QMatrix bpt(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t l = 0; l < d; ++l) bpt(l, i) = basis[i][red.pivots[l]];
  auto inv = detail::inverse(bpt);
  if (!inv) throw DomainError("pivot block is singular");
  for (std::size_t i = 0; i < d; ++i) {
    QVector lam;
    for (std::size_t l = 0; l < d; ++l)
      if (sgn((*inv)(i, l)) != 0) lam.at(red.pivots[l]) = (*inv)(i, l);
    out.functionals.push_back(lam);
    out.projection = out.projection + ScOperator::rank_one(space, space, lam, basis[i]);
  }
  return out;
}

}  // namespace scalekit
