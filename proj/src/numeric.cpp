#include "scalekit/numeric.hpp"

#include <cctype>

namespace scalekit {

namespace {

Rational pow10(long e) {
  mpz_class p;
  mpz_ui_pow_ui(p.get_mpz_t(), 10, static_cast<unsigned long>(e < 0 ? -e : e));
  return e < 0 ? Rational(mpz_class(1), p) : Rational(p);
}

Rational parse_decimal(std::string_view s) {
  std::string mant;
  long exp10 = 0;
  std::size_t i = 0;
  bool neg = false;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) neg = s[i++] == '-';
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    const char c = s[i];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      mant.push_back(c);
      digits = true;
      if (dot) --exp10;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (!digits) throw std::invalid_argument("not a number: " + std::string(s));
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    ++i;
    const std::string rest(s.substr(i));
    std::size_t used = 0;
    exp10 += std::stol(rest, &used);
    i += used;
  }
  if (i != s.size()) throw std::invalid_argument("trailing characters in number: " + std::string(s));
  Rational q(mpz_class(mant, 10));
  q *= pow10(exp10);
  q.canonicalize();
  return neg ? Rational(-q) : q;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw std::invalid_argument("empty rational");
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_decimal(s);
  Rational num = parse_decimal(s.substr(0, slash));
  Rational den = parse_decimal(s.substr(slash + 1));
  if (sgn(den) == 0) throw std::invalid_argument("zero denominator: " + s);
  Rational q = num / den;
  q.canonicalize();
  return q;
}

std::string to_string(const Rational& q_in) {
  Rational q(q_in);
  q.canonicalize();
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

Rational rational_from_double(double x) {
  if (!std::isfinite(x)) throw std::domain_error("non-finite value has no rational form");
  Rational q(x);
  q.canonicalize();
  return q;
}

}  // namespace scalekit
