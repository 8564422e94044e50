#include "scalekit/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "scalekit/corpus.hpp"

namespace scalekit::harness {

using json = nlohmann::json;

const std::vector<SuiteInfo>& suite_registry() {
  static const std::vector<SuiteInfo> reg{
      {"sc1", "sc1 maps: Df(x) exists at level-1 points and Tf(x,h) = (f(x), Df(x)h) is sc0"},
      {"chain-rule", "chain rule for sc1 maps: T(g o f) = Tg o Tf"},
      {"fredholm-index", "sc-Fredholm index i(T) = dim ker T - codim R(T), additive under composition"},
      {"scplus-stability", "an sc-Fredholm operator plus an sc+ operator is sc-Fredholm of the same index"},
      {"regularizing", "sc-Fredholm operators are regularizing: T e in F_{m+1} implies e in E_{m+1}"},
      {"splicing-core", "splicing core K = {(v,e) : pi_v(e) = e} of an sc-smooth family of projections"},
      {"tangent-splicing", "the tangent of a splicing is a splicing on the tangent of its parameter set"},
      {"core-chain-rule", "chain rule for sc-smooth maps between open subsets of splicing cores"},
      {"degeneracy", "the degeneracy index d(x) does not depend on the chart"},
      {"faces", "face-structured M-polyfolds: every x lies in exactly d(x) faces"},
      {"product-degeneracy", "degeneracy index of a product is the sum of the indices"},
      {"fred-submersion", "the composition of Fred-submersions is a Fred-submersion"},
      {"strong-bundle", "strong bundle splicings: rho preserves the bi-filtration (m,k), k <= m + 1"},
      {"filler", "a filler extends a section to the filled section with the same zero set"},
      {"linearization", "linearizations at a zero differ by sc+ operators, so the index is well defined"},
      {"filled-block", "the filled linearization has the same Fredholm index as the original"},
      {"pullback", "the pullback of a strong bundle splicing by an sc-smooth map is a strong bundle splicing"},
  };
  return reg;
}

namespace {

// ---------------------------------------------------------------- parsing helpers

[[noreturn]] void fail(const std::string& ptr, const std::string& msg) { throw ConfigError(ptr.empty() ? "/" : ptr, msg); }

std::string sub(const std::string& ptr, const std::string& key) {
  std::string k;
  for (char c : key) k += c == '~' ? "~0" : c == '/' ? "~1" : std::string(1, c);
  return ptr + "/" + k;
}
std::string sub(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

const json& need(const json& obj, const std::string& key, const std::string& ptr) {
  if (!obj.is_object()) fail(ptr, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(ptr, "missing field '" + key + "'");
  return *it;
}

void allow_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& ptr) {
  if (!obj.is_object()) fail(ptr, "expected an object");
  for (const auto& [k, v] : obj.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) fail(sub(ptr, k), "unknown field '" + k + "'");
  }
}

std::string str(const json& j, const std::string& ptr) {
  if (!j.is_string()) fail(ptr, "expected a string");
  return j.get<std::string>();
}

Rational num(const json& j, const std::string& ptr) {
  if (j.is_number_integer()) return Rational(j.get<long>());
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (!std::isfinite(d)) fail(ptr, "number is not finite");
    return rational_from_double(d);
  }
  if (j.is_string()) {
    try {
      return parse_rational(j.get<std::string>());
    } catch (const std::exception& e) {
      fail(ptr, std::string("bad rational: ") + e.what());
    }
  }
  fail(ptr, "expected a number or a \"p/q\" string");
}

double dbl(const json& j, const std::string& ptr) {
  if (j.is_number()) return j.get<double>();
  return to_double(num(j, ptr));
}

std::int64_t integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) fail(ptr, "expected an integer");
  return j.get<std::int64_t>();
}

std::size_t count(const json& j, const std::string& ptr, std::size_t lo = 0) {
  const auto v = integer(j, ptr);
  if (v < std::int64_t(lo)) fail(ptr, "expected an integer >= " + std::to_string(lo));
  return std::size_t(v);
}

const json& array(const json& j, const std::string& ptr, std::size_t min_size = 0) {
  if (!j.is_array()) fail(ptr, "expected an array");
  if (j.size() < min_size)
    fail(ptr, min_size == 1 ? "expected a non-empty array" : "expected at least " + std::to_string(min_size) + " entries");
  return j;
}

QVector qvec(const json& j, const std::string& ptr) {
  array(j, ptr);
  QVector v;
  for (std::size_t i = 0; i < j.size(); ++i) v.at(i) = num(j[i], sub(ptr, i));
  return v.trim();
}

Vector dvec(const json& j, const std::string& ptr) {
  array(j, ptr);
  Vector v;
  for (std::size_t i = 0; i < j.size(); ++i) v.at(i) = dbl(j[i], sub(ptr, i));
  return v;
}

Point point(const json& j, const ProductSpace& space, const std::string& ptr) {
  array(j, ptr);
  if (j.size() != space.size()) fail(ptr, "point has " + std::to_string(j.size()) + " blocks, space has " + std::to_string(space.size()));
  Point p = Point::zeros(space.size());
  for (std::size_t b = 0; b < j.size(); ++b) {
    p[b] = dvec(j[b], sub(ptr, b));
    if (space[b].kind == ScaleSpace::Kind::finite && p[b].support() > space[b].dim)
      fail(sub(ptr, b), "block longer than the finite space");
  }
  return p;
}

Coord coord(const json& j, const ProductSpace& space, const std::string& ptr) {
  array(j, ptr);
  if (j.size() != 2) fail(ptr, "expected [block, index]");
  const auto b = count(j[0], sub(ptr, 0)), i = count(j[1], sub(ptr, 1));
  if (b >= space.size()) fail(sub(ptr, 0), "block out of range");
  if (space[b].kind == ScaleSpace::Kind::finite && i >= space[b].dim) fail(sub(ptr, 1), "index out of range");
  return {b, i};
}

// Runs a library constructor, turning its domain errors into configuration errors at ptr.
template <class F>
auto guarded(const std::string& ptr, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    fail(ptr, e.what());
  }
}

// ---------------------------------------------------------------- universe

struct BundleDecl {
  BundlePtr bundle;
  std::optional<FillableBundle> fillable;
};

class Universe {
 public:
  explicit Universe(const json& doc) : doc_(doc) {}

  Tolerances tol;
  std::uint64_t seed = 0x5eed;
  Regime mode = Regime::exact;

  const json& section(const char* name) const {
    static const json empty = json::object();
    auto it = doc_.find(name);
    return it == doc_.end() ? empty : *it;
  }

  ScaleSpace space(const std::string& name, const std::string& ptr) {
    auto it = spaces_.find(name);
    if (it != spaces_.end()) return it->second;
    const json& decls = section("spaces");
    if (!decls.contains(name)) fail(ptr, "unknown space '" + name + "'");
    const std::string p = sub("/spaces", name);
    const json& d = decls[name];
    allow_keys(d, {"kind", "dim", "delta", "corner_dim"}, p);
    const std::string kind = str(need(d, "kind", p), sub(p, "kind"));
    ScaleSpace s;
    if (kind == "finite") {
      s = ScaleSpace::finite(count(need(d, "dim", p), sub(p, "dim"), 1));
    } else if (kind == "sequence") {
      const double delta = d.contains("delta") ? dbl(d["delta"], sub(p, "delta")) : 1.0;
      if (!(delta > 0)) fail(sub(p, "delta"), "delta must be positive");
      s = ScaleSpace::sequence(delta);
    } else {
      fail(sub(p, "kind"), "kind must be \"finite\" or \"sequence\"");
    }
    if (d.contains("corner_dim")) corner_dims_[name] = count(d["corner_dim"], sub(p, "corner_dim"));
    return spaces_[name] = s;
  }

  ProductSpace product(const json& j, const std::string& ptr) {
    if (j.is_string()) return ProductSpace{space(j.get<std::string>(), ptr)};
    array(j, ptr, 1);
    ProductSpace out;
    for (std::size_t i = 0; i < j.size(); ++i) out.blocks.push_back(space(str(j[i], sub(ptr, i)), sub(ptr, i)));
    return out;
  }

  // ---- operators

  ScOperator op(const std::string& name, const std::string& ptr) {
    auto it = ops_.find(name);
    if (it != ops_.end()) return it->second;
    const json& decls = section("operators");
    if (!decls.contains(name)) fail(ptr, "unknown operator '" + name + "'");
    if (!building_.insert("op:" + name).second) fail(ptr, "cyclic reference to operator '" + name + "'");
    const std::string p = sub("/operators", name);
    const json& d = decls[name];
    const ScaleSpace s = space(str(need(d, "space", p), sub(p, "space")), sub(p, "space"));
    ScOperator o = op_tree(d, s, p);
    building_.erase("op:" + name);
    return ops_.emplace(name, o).first->second;
  }

  // Operator term on a single space: a name or an expression tree.
  ScOperator op_term(const json& j, const std::optional<ScaleSpace>& s, const std::string& ptr) {
    if (j.is_string()) return op(j.get<std::string>(), ptr);
    if (!j.is_object()) fail(ptr, "expected an operator name or term");
    ScaleSpace sp;
    if (j.contains("space")) {
      sp = space(str(j["space"], sub(ptr, "space")), sub(ptr, "space"));
    } else if (s) {
      sp = *s;
    } else if (j.contains("ref")) {
      return op(str(j["ref"], sub(ptr, "ref")), sub(ptr, "ref"));
    } else {
      fail(ptr, "operator term needs a 'space'");
    }
    return op_tree(j, sp, ptr);
  }

  ScOperator op_tree(const json& j, const ScaleSpace& s, const std::string& ptr) {
    if (j.is_string()) return op(j.get<std::string>(), ptr);
    if (!j.is_object()) fail(ptr, "expected an operator term");
    if (j.contains("ref")) {
      allow_keys(j, {"ref", "space"}, ptr);
      return op(str(j["ref"], sub(ptr, "ref")), sub(ptr, "ref"));
    }
    const std::string kind = str(need(j, "op", ptr), sub(ptr, "op"));
    if (kind == "identity") {
      allow_keys(j, {"op", "space"}, ptr);
      return ScOperator::identity(s);
    }
    if (kind == "zero") {
      allow_keys(j, {"op", "space"}, ptr);
      return ScOperator::zero(s, s);
    }
    if (kind == "shift") {
      allow_keys(j, {"op", "space", "dir", "power"}, ptr);
      const std::string dir = j.contains("dir") ? str(j["dir"], sub(ptr, "dir")) : "left";
      if (dir != "left" && dir != "right") fail(sub(ptr, "dir"), "dir must be \"left\" or \"right\"");
      const auto p = j.contains("power") ? std::int64_t(count(j["power"], sub(ptr, "power"))) : 1;
      return ScOperator::shift(s, dir == "left" ? p : -p);
    }
    if (kind == "diag") {
      allow_keys(j, {"op", "space", "rule"}, ptr);
      const std::string rule = str(need(j, "rule", ptr), sub(ptr, "rule"));
      return guarded(sub(ptr, "rule"), [&] { return ScOperator::diagonal(s, parse_coefficient(rule)); });
    }
    if (kind == "rank1") {
      allow_keys(j, {"op", "space", "lam", "u"}, ptr);
      QVector lam = qvec(need(j, "lam", ptr), sub(ptr, "lam")), u = qvec(need(j, "u", ptr), sub(ptr, "u"));
      return guarded(ptr, [&] { return ScOperator::rank_one(s, s, lam, u); });
    }
    if (kind == "scale") {
      allow_keys(j, {"op", "space", "c", "arg"}, ptr);
      return op_tree(need(j, "arg", ptr), s, sub(ptr, "arg")).scaled(num(need(j, "c", ptr), sub(ptr, "c")));
    }
    if (kind == "sum" || kind == "compose") {
      allow_keys(j, {"op", "space", "args"}, ptr);
      const json& args = array(need(j, "args", ptr), sub(ptr, "args"), 1);
      ScOperator acc = op_tree(args[0], s, sub(sub(ptr, "args"), 0));
      for (std::size_t i = 1; i < args.size(); ++i) {
        const ScOperator next = op_tree(args[i], s, sub(sub(ptr, "args"), i));
        acc = guarded(ptr, [&] { return kind == "sum" ? acc + next : acc.compose(next); });
      }
      return acc;
    }
    fail(sub(ptr, "op"), "unknown operator kind '" + kind + "'");
  }

  // ---- maps

  MapPtr map(const std::string& name, const std::string& ptr) {
    auto it = maps_.find(name);
    if (it != maps_.end()) return it->second;
    const json& decls = section("maps");
    if (!decls.contains(name)) fail(ptr, "unknown map '" + name + "'");
    if (!building_.insert("map:" + name).second) fail(ptr, "cyclic reference to map '" + name + "'");
    MapPtr m = map_tree(decls[name], sub("/maps", name));
    building_.erase("map:" + name);
    return maps_[name] = m;
  }

  MapPtr map_term(const json& j, const std::string& ptr) {
    if (j.is_string()) return map(j.get<std::string>(), ptr);
    return map_tree(j, ptr);
  }

  BlockOperator blocks(const json& j, const ProductSpace& dom, const ProductSpace& cod, const std::string& ptr) {
    if (j.is_string() && j.get<std::string>() == "identity") {
      if (!(dom == cod)) fail(ptr, "identity needs equal domain and codomain");
      return BlockOperator::identity(dom);
    }
    if (dom.size() == 1 && cod.size() == 1 && !j.is_array()) {
      const ScOperator o = op_term(j, dom[0], ptr);
      return BlockOperator::single(o);
    }
    array(j, ptr);
    BlockOperator a(dom, cod);
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = sub(ptr, i);
      allow_keys(j[i], {"row", "col", "op"}, p);
      const auto r = count(need(j[i], "row", p), sub(p, "row")), c = count(need(j[i], "col", p), sub(p, "col"));
      if (r >= cod.size()) fail(sub(p, "row"), "row out of range");
      if (c >= dom.size()) fail(sub(p, "col"), "col out of range");
      if (!(dom[c] == cod[r])) fail(p, "blocks between different spaces take no operator terms");
      a.add(r, c, op_term(j[i]["op"], dom[c], sub(p, "op")));
    }
    return a;
  }

  std::vector<PolyTerm> terms(const json& j, const ProductSpace& dom, const ProductSpace& cod, const std::string& ptr) {
    array(j, ptr);
    std::vector<PolyTerm> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = sub(ptr, i);
      allow_keys(j[i], {"out", "coeff", "mono"}, p);
      PolyTerm t;
      t.out = coord(need(j[i], "out", p), cod, sub(p, "out"));
      t.coeff = j[i].contains("coeff") ? num(j[i]["coeff"], sub(p, "coeff")) : Rational(1);
      const json& mono = array(need(j[i], "mono", p), sub(p, "mono"));
      for (std::size_t k = 0; k < mono.size(); ++k) {
        const std::string mp = sub(sub(p, "mono"), k);
        array(mono[k], mp);
        if (mono[k].size() != 3) fail(mp, "expected [block, index, power]");
        const Coord c = coord(json::array({mono[k][0], mono[k][1]}), dom, mp);
        t.mono.push_back({c, unsigned(count(mono[k][2], sub(mp, 2), 1))});
      }
      out.push_back(std::move(t));
    }
    return out;
  }

  MapPtr map_tree(const json& j, const std::string& ptr) {
    if (!j.is_object()) fail(ptr, "expected a map term");
    if (j.contains("ref")) {
      allow_keys(j, {"ref"}, ptr);
      return map(str(j["ref"], sub(ptr, "ref")), sub(ptr, "ref"));
    }
    const std::string kind = str(need(j, "map", ptr), sub(ptr, "map"));
    if (kind == "linear") {
      allow_keys(j, {"map", "domain", "codomain", "op"}, ptr);
      const ProductSpace dom = product(need(j, "domain", ptr), sub(ptr, "domain"));
      const ProductSpace cod = j.contains("codomain") ? product(j["codomain"], sub(ptr, "codomain")) : dom;
      return std::make_shared<LinearMap>(blocks(need(j, "op", ptr), dom, cod, sub(ptr, "op")));
    }
    if (kind == "polynomial") {
      allow_keys(j, {"map", "domain", "codomain", "linear", "terms"}, ptr);
      const ProductSpace dom = product(need(j, "domain", ptr), sub(ptr, "domain"));
      const ProductSpace cod = j.contains("codomain") ? product(j["codomain"], sub(ptr, "codomain")) : dom;
      std::optional<BlockOperator> lin;
      if (j.contains("linear") && !j["linear"].is_null()) lin = blocks(j["linear"], dom, cod, sub(ptr, "linear"));
      auto t = j.contains("terms") ? terms(j["terms"], dom, cod, sub(ptr, "terms")) : std::vector<PolyTerm>{};
      return guarded(ptr, [&] { return std::make_shared<PolynomialMap>(dom, cod, lin, t); });
    }
    if (kind == "polyterm") {
      allow_keys(j, {"map", "domain", "coord", "coeff", "monomials", "identity"}, ptr);
      const ProductSpace dom = product(need(j, "domain", ptr), sub(ptr, "domain"));
      json t = json::array();
      const json& monos = array(need(j, "monomials", ptr), sub(ptr, "monomials"), 1);
      t.push_back({{"out", need(j, "coord", ptr)}, {"coeff", j.contains("coeff") ? j["coeff"] : json(1)}, {"mono", monos}});
      std::optional<BlockOperator> lin;
      if (j.contains("identity")) {
        if (!j["identity"].is_boolean()) fail(sub(ptr, "identity"), "expected true or false");
        if (j["identity"].get<bool>()) lin = BlockOperator::identity(dom);
      }
      auto tt = terms(t, dom, dom, ptr);
      return std::make_shared<PolynomialMap>(dom, dom, lin, tt);
    }
    if (kind == "compose") {
      allow_keys(j, {"map", "args"}, ptr);
      const json& args = array(need(j, "args", ptr), sub(ptr, "args"), 1);
      const std::size_t n = args.size();
      MapPtr acc = map_term(args[n - 1], sub(sub(ptr, "args"), n - 1));
      for (std::size_t i = n - 1; i-- > 0;) {
        MapPtr outer = map_term(args[i], sub(sub(ptr, "args"), i));
        acc = guarded(ptr, [&] { return MapPtr(std::make_shared<ComposeMap>(outer, acc)); });
      }
      return acc;
    }
    if (kind == "builtin") {
      allow_keys(j, {"map", "name"}, ptr);
      const std::string name = str(need(j, "name", ptr), sub(ptr, "name"));
      const auto pairs = corpus::transcendental_chain_pairs();
      if (name == "sine") return pairs[0].f;
      if (name == "exp") return pairs[2].f;
      fail(sub(ptr, "name"), "unknown builtin map '" + name + "' (sine, exp)");
    }
    if (kind == "wrong_derivative") {
      allow_keys(j, {"map", "base", "factor"}, ptr);
      MapPtr base = map_term(need(j, "base", ptr), sub(ptr, "base"));
      const double c = j.contains("factor") ? dbl(j["factor"], sub(ptr, "factor")) : 2.0;
      return std::make_shared<DerivativeOverrideMap>(base, [base, c](const Point& x, const Point& h) {
        return c * base->tangent(x, h);
      });
    }
    if (kind == "retract" || kind == "joint") {
      allow_keys(j, {"map", "splicing"}, ptr);
      const SplicingPtr s = splicing(str(need(j, "splicing", ptr), sub(ptr, "splicing")), sub(ptr, "splicing"));
      return kind == "retract" ? retraction_map(s) : joint_map(s);
    }
    fail(sub(ptr, "map"), "unknown map kind '" + kind + "'");
  }

  // ---- splicings

  SplicingPtr splicing(const std::string& name, const std::string& ptr) {
    auto it = splicings_.find(name);
    if (it != splicings_.end()) return it->second;
    const json& decls = section("splicings");
    if (!decls.contains(name)) fail(ptr, "unknown splicing '" + name + "'");
    if (!building_.insert("spl:" + name).second) fail(ptr, "cyclic reference to splicing '" + name + "'");
    SplicingPtr s = splicing_tree(decls[name], sub("/splicings", name));
    building_.erase("spl:" + name);
    return splicings_[name] = s;
  }

  SplicingPtr splicing_term(const json& j, const std::string& ptr) {
    if (j.is_string()) return splicing(j.get<std::string>(), ptr);
    return splicing_tree(j, ptr);
  }

  SplicingPtr splicing_tree(const json& j, const std::string& ptr) {
    if (!j.is_object()) fail(ptr, "expected a splicing");
    const std::string kind = str(need(j, "splicing", ptr), sub(ptr, "splicing"));
    auto param = [&](const json& d) {
      const std::size_t n = d.contains("parameter_dim") ? count(d["parameter_dim"], sub(ptr, "parameter_dim"), 1) : 1;
      OpenSet v;
      if (d.contains("corner")) {
        const json& c = array(d["corner"], sub(ptr, "corner"));
        for (std::size_t i = 0; i < c.size(); ++i) {
          const auto k = count(c[i], sub(sub(ptr, "corner"), i));
          if (k >= n) fail(sub(sub(ptr, "corner"), i), "corner coordinate out of range");
          v.corner.push_back({0, k});
        }
      }
      return std::pair{ProductSpace{ScaleSpace::finite(n)}, v};
    };
    if (kind == "trivial" || kind == "zero") {
      allow_keys(j, {"splicing", "parameter_dim", "corner", "fiber"}, ptr);
      auto [w, v] = param(j);
      const ProductSpace e = product(need(j, "fiber", ptr), sub(ptr, "fiber"));
      return kind == "trivial" ? trivial_splicing(w, e, v) : zero_splicing(w, e, v);
    }
    if (kind == "const_rank") {
      allow_keys(j, {"splicing", "parameter_dim", "corner", "fiber", "basis"}, ptr);
      auto [w, v] = param(j);
      const ScaleSpace e = space(str(need(j, "fiber", ptr), sub(ptr, "fiber")), sub(ptr, "fiber"));
      const json& b = array(need(j, "basis", ptr), sub(ptr, "basis"));
      std::vector<QVector> basis;
      for (std::size_t i = 0; i < b.size(); ++i) basis.push_back(qvec(b[i], sub(sub(ptr, "basis"), i)));
      return guarded(ptr, [&] { return const_rank_splicing(w, e, basis, v); });
    }
    if (kind == "rank_jump" || kind == "broken_rank_jump") {
      allow_keys(j, {"splicing", "delta", "profile"}, ptr);
      const double delta = j.contains("delta") ? dbl(j["delta"], sub(ptr, "delta")) : 1.0;
      if (!(delta > 0)) fail(sub(ptr, "delta"), "delta must be positive");
      if (j.contains("profile") && str(j["profile"], sub(ptr, "profile")) != "exp_inv")
        fail(sub(ptr, "profile"), "only the \"exp_inv\" profile is available");
      return kind == "rank_jump" ? rank_jump_splicing(delta) : broken_rank_jump_splicing(delta);
    }
    if (kind == "complement") {
      allow_keys(j, {"splicing", "of"}, ptr);
      const SplicingPtr s = splicing_term(need(j, "of", ptr), sub(ptr, "of"));
      return guarded(ptr, [&] { return complement_splicing(s); });
    }
    if (kind == "whitney" || kind == "product") {
      allow_keys(j, {"splicing", "args"}, ptr);
      const json& args = array(need(j, "args", ptr), sub(ptr, "args"), 2);
      if (args.size() != 2) fail(sub(ptr, "args"), "expected two splicings");
      const SplicingPtr a = splicing_term(args[0], sub(sub(ptr, "args"), 0));
      const SplicingPtr b = splicing_term(args[1], sub(sub(ptr, "args"), 1));
      return guarded(ptr, [&] { return kind == "whitney" ? whitney_sum(a, b) : product_splicing(a, b); });
    }
    fail(sub(ptr, "splicing"), "unknown splicing kind '" + kind + "'");
  }

  // ---- chart complexes

  const ChartComplex& complex(const std::string& name, const std::string& ptr) {
    auto it = complexes_.find(name);
    if (it != complexes_.end()) return it->second;
    const json& decls = section("complexes");
    if (!decls.contains(name)) fail(ptr, "unknown complex '" + name + "'");
    return complexes_[name] = complex_tree(decls[name], sub("/complexes", name));
  }

  ChartComplex complex_tree(const json& j, const std::string& ptr) {
    if (!j.is_object()) fail(ptr, "expected a chart complex");
    if (j.contains("builtin")) {
      allow_keys(j, {"builtin", "dim", "grid"}, ptr);
      const std::string b = str(j["builtin"], sub(ptr, "builtin"));
      const std::size_t grid = j.contains("grid") ? count(j["grid"], sub(ptr, "grid"), 2) : 5;
      if (b == "quadrant") return quadrant_complex(j.contains("dim") ? count(j["dim"], sub(ptr, "dim"), 1) : 2, grid);
      if (b == "teardrop") return teardrop_complex(grid);
      if (b == "corner_corpus") return corner_corpus();
      fail(sub(ptr, "builtin"), "unknown complex '" + b + "' (quadrant, teardrop, corner_corpus)");
    }
    allow_keys(j, {"charts", "overlaps", "samples", "adjacency"}, ptr);
    ChartComplex cc;
    const json& charts = array(need(j, "charts", ptr), sub(ptr, "charts"), 1);
    for (std::size_t i = 0; i < charts.size(); ++i) {
      const std::string p = sub(sub(ptr, "charts"), i);
      allow_keys(charts[i], {"name", "splicing"}, p);
      const std::string nm = charts[i].contains("name") ? str(charts[i]["name"], sub(p, "name")) : "chart" + std::to_string(i);
      cc.charts.push_back({nm, whole_core(splicing_term(need(charts[i], "splicing", p), sub(p, "splicing")))});
    }
    auto chart_index = [&](const json& v, const std::string& p) {
      const auto k = count(v, p);
      if (k >= cc.charts.size()) fail(p, "chart index out of range");
      return k;
    };
    if (j.contains("overlaps")) {
      const json& ov = array(j["overlaps"], sub(ptr, "overlaps"));
      for (std::size_t i = 0; i < ov.size(); ++i) {
        const std::string p = sub(sub(ptr, "overlaps"), i);
        allow_keys(ov[i], {"a", "b", "transition", "inverse", "label", "nontrivial"}, p);
        Overlap o;
        o.a = chart_index(need(ov[i], "a", p), sub(p, "a"));
        o.b = chart_index(need(ov[i], "b", p), sub(p, "b"));
        o.transition = map_term(need(ov[i], "transition", p), sub(p, "transition"));
        o.inverse = map_term(need(ov[i], "inverse", p), sub(p, "inverse"));
        o.label = ov[i].contains("label") ? str(ov[i]["label"], sub(p, "label")) : "overlap" + std::to_string(i);
        o.nontrivial = !ov[i].contains("nontrivial") || ov[i]["nontrivial"].get<bool>();
        cc.overlaps.push_back(o);
      }
    }
    if (j.contains("samples")) {
      const json& ss = array(j["samples"], sub(ptr, "samples"));
      for (std::size_t i = 0; i < ss.size(); ++i) {
        const std::string p = sub(sub(ptr, "samples"), i);
        allow_keys(ss[i], {"chart", "x"}, p);
        const auto c = chart_index(need(ss[i], "chart", p), sub(p, "chart"));
        cc.samples.push_back({c, point(need(ss[i], "x", p), cc.charts[c].model.ambient(), sub(p, "x"))});
      }
    }
    if (j.contains("adjacency")) {
      const json& adj = array(j["adjacency"], sub(ptr, "adjacency"));
      for (std::size_t i = 0; i < adj.size(); ++i) {
        const std::string p = sub(sub(ptr, "adjacency"), i);
        array(adj[i], p);
        if (adj[i].size() != 2) fail(p, "expected [i, j]");
        const auto a = count(adj[i][0], sub(p, 0)), b = count(adj[i][1], sub(p, 1));
        if (a >= cc.samples.size() || b >= cc.samples.size()) fail(p, "sample index out of range");
        cc.adjacency.emplace_back(a, b);
      }
    }
    return cc;
  }

  // ---- bundles

  const BundleDecl& bundle(const std::string& name, const std::string& ptr) {
    auto it = bundles_.find(name);
    if (it != bundles_.end()) return it->second;
    const json& decls = section("bundles");
    if (!decls.contains(name)) fail(ptr, "unknown bundle '" + name + "'");
    const std::string p = sub("/bundles", name);
    const json& d = decls[name];
    BundleDecl out;
    if (d.contains("builtin")) {
      allow_keys(d, {"builtin", "delta"}, p);
      const std::string b = str(d["builtin"], sub(p, "builtin"));
      const double delta = d.contains("delta") ? dbl(d["delta"], sub(p, "delta")) : 1.0;
      if (!(delta > 0)) fail(sub(p, "delta"), "delta must be positive");
      if (b == "rank_jump_fillable") out.fillable = rank_jump_fillable(delta);
      else if (b == "trivial_fillable") out.fillable = trivial_fillable(delta);
      else if (b == "corank_one_fillable") out.fillable = corank_one_fillable(delta);
      else fail(sub(p, "builtin"), "unknown bundle '" + b + "' (rank_jump_fillable, trivial_fillable, corank_one_fillable)");
      out.bundle = out.fillable->bundle;
    } else {
      allow_keys(d, {"base", "rho"}, p);
      const SplicingPtr base = splicing_term(need(d, "base", p), sub(p, "base"));
      const SplicingPtr rho = splicing_term(need(d, "rho", p), sub(p, "rho"));
      out.bundle = guarded(p, [&] { return parameter_bundle(whole_core(base), rho); });
    }
    return bundles_[name] = out;
  }

  // Declared objects are built even when no suite uses them, so every reference is checked up front.
  void build_all() {
    for (const char* s : {"spaces", "operators", "maps", "splicings", "complexes", "bundles"})
      if (!section(s).is_object()) fail(std::string("/") + s, "expected an object of named declarations");
    for (const auto& [k, v] : section("spaces").items()) space(k, "/spaces");
    for (const auto& [k, v] : section("operators").items()) op(k, "/operators");
    for (const auto& [k, v] : section("splicings").items()) splicing(k, "/splicings");
    for (const auto& [k, v] : section("maps").items()) map(k, "/maps");
    for (const auto& [k, v] : section("complexes").items()) complex(k, "/complexes");
    for (const auto& [k, v] : section("bundles").items()) bundle(k, "/bundles");
  }

 private:
  const json& doc_;
  std::map<std::string, ScaleSpace> spaces_;
  std::map<std::string, std::size_t> corner_dims_;
  std::map<std::string, ScOperator> ops_;
  std::map<std::string, MapPtr> maps_;
  std::map<std::string, SplicingPtr> splicings_;
  std::map<std::string, ChartComplex> complexes_;
  std::map<std::string, BundleDecl> bundles_;
  std::set<std::string> building_;
};

// ---------------------------------------------------------------- suite results

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

struct Result {
  bool pass = true;
  json residuals = json::object();
  json witnesses = json::object();
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
  // value <= tol is required unless enforce is false
  void residual(const std::string& name, double value, double tol, bool enforce = true) {
    residuals[name] = {{"value", number(value)}, {"tol", tol}};
    if (enforce) check(value <= tol, name + " = " + fmt(value) + " exceeds " + fmt(tol));
  }
};

using Runner = std::function<Result()>;

std::string qstr(const QVector& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.support(); ++i) s += (i ? ", " : "") + to_string(v[i]);
  return s + "]";
}

json kernel_witness(const FredholmSplitting& sp) {
  json k = json::array();
  if (sp.regime == Regime::exact) {
    for (const auto& v : sp.kernel_exact) {
      json row = json::array();
      for (std::size_t i = 0; i < v.support(); ++i) row.push_back(to_string(v[i]));
      k.push_back(row);
    }
  } else {
    for (const auto& v : sp.kernel) {
      json row = json::array();
      for (std::size_t i = 0; i < std::min<std::size_t>(v.support(), 8); ++i) row.push_back(number(v[i]));
      k.push_back(row);
    }
  }
  return k;
}

struct SuiteCtx {
  Universe& u;
  const json& p;
  std::string ptr;
  bool has(const char* k) const { return p.contains(k); }
  std::string at(const char* k) const { return sub(ptr, k); }
};

std::size_t opt_count(const SuiteCtx& c, const char* key, std::size_t dflt, std::size_t lo = 1) {
  return c.has(key) ? count(c.p[key], c.at(key), lo) : dflt;
}

// ---- individual suites; each validates its parameters and returns the deferred run

Runner suite_sc1(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "targets"}, c.ptr);
  struct Target {
    std::string label;
    MapPtr map;
    std::vector<Point> points;
    SplicingPtr splicing;
    std::size_t samples = 0;
  };
  std::vector<Target> targets;
  if (c.has("targets")) {
    const json& ts = array(c.p["targets"], c.at("targets"), 1);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string p = sub(c.at("targets"), i);
      allow_keys(ts[i], {"map", "points", "splicing", "samples"}, p);
      Target t;
      if (ts[i].contains("map")) {
        t.label = ts[i]["map"].is_string() ? ts[i]["map"].get<std::string>() : "map" + std::to_string(i);
        t.map = c.u.map_term(ts[i]["map"], sub(p, "map"));
        const json& pts = array(need(ts[i], "points", p), sub(p, "points"), 1);
        for (std::size_t k = 0; k < pts.size(); ++k)
          t.points.push_back(point(pts[k], t.map->domain(), sub(sub(p, "points"), k)));
      } else if (ts[i].contains("splicing")) {
        t.label = ts[i]["splicing"].is_string() ? ts[i]["splicing"].get<std::string>() : "splicing" + std::to_string(i);
        t.splicing = c.u.splicing_term(ts[i]["splicing"], sub(p, "splicing"));
        t.samples = ts[i].contains("samples") ? count(ts[i]["samples"], sub(p, "samples"), 1) : 4;
      } else {
        fail(p, "a target needs 'map' or 'splicing'");
      }
      targets.push_back(std::move(t));
    }
  } else {
    for (const auto& pr : corpus::flat_chain_pairs()) {
      Target t{pr.name + " (inner)", pr.f, {}, nullptr, 0};
      for (const auto& tp : pr.points) t.points.push_back(tp.base);
      targets.push_back(std::move(t));
    }
    targets.push_back({"rank jump joint map", nullptr, {}, rank_jump_splicing(1.0), 4});
  }
  Universe& u = c.u;
  return [targets, &u] {
    Result r;
    Sc1Options opt;
    opt.seed = u.seed;
    opt.tol = u.tol.sc1;
    double worst = 0;
    std::size_t checked = 0, passed = 0;
    json items = json::array();
    std::mt19937_64 rng(u.seed);
    for (const auto& t : targets) {
      MapPtr m = t.map;
      std::vector<Point> pts = t.points;
      if (t.splicing) {
        m = joint_map(t.splicing);
        for (std::size_t k = 0; k < t.samples; ++k) {
          const Point v = t.splicing->sample_parameter(rng);
          pts.push_back(concat(v, t.splicing->sample_fiber(v, rng)));
        }
      }
      std::size_t bad = 0;
      std::string first;
      for (const auto& x : pts) {
        const auto rep = sc1_verify(*m, x, opt);
        ++checked;
        passed += rep.pass;
        worst = std::max(worst, rep.worst_final_q);
        if (!rep.pass && !bad++) first = rep.failure;
      }
      r.check(bad == 0, t.label + ": not sc1 at " + std::to_string(bad) + "/" + std::to_string(pts.size()) + " points (" + first + ")");
      items.push_back({{"target", t.label}, {"points", pts.size()}, {"failing_points", bad}});
    }
    r.residual("worst_final_quotient", worst, u.tol.sc1, false);
    r.witnesses = {{"points_checked", checked}, {"points_passed", passed}, {"targets", items}};
    return r;
  };
}

std::vector<TangentPoint> tangent_points(const json& j, const ProductSpace& dom, const std::string& ptr) {
  array(j, ptr, 1);
  std::vector<TangentPoint> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = sub(ptr, i);
    allow_keys(j[i], {"x", "h"}, p);
    out.push_back({point(need(j[i], "x", p), dom, sub(p, "x")), point(need(j[i], "h", p), dom, sub(p, "h"))});
  }
  return out;
}

Runner suite_chain(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "pairs", "points"}, c.ptr);
  std::vector<corpus::MapPair> pairs;
  if (c.has("pairs")) {
    const json& ps = array(c.p["pairs"], c.at("pairs"), 1);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string p = sub(c.at("pairs"), i);
      array(ps[i], p);
      if (ps[i].size() != 2) fail(p, "expected [f, g]");
      corpus::MapPair mp;
      mp.f = c.u.map_term(ps[i][0], sub(p, 0));
      mp.g = c.u.map_term(ps[i][1], sub(p, 1));
      if (!(mp.f->codomain() == mp.g->domain())) fail(p, "codomain of f differs from the domain of g");
      mp.name = (ps[i][0].is_string() ? ps[i][0].get<std::string>() : "f") + " then " +
                (ps[i][1].is_string() ? ps[i][1].get<std::string>() : "g");
      mp.points = tangent_points(need(c.p, "points", c.ptr), mp.f->domain(), c.at("points"));
      pairs.push_back(std::move(mp));
    }
  } else {
    pairs = corpus::flat_chain_pairs();
    if (c.u.mode == Regime::floating)
      for (auto& t : corpus::transcendental_chain_pairs()) pairs.push_back(std::move(t));
  }
  Universe& u = c.u;
  return [pairs, &u] {
    Result r;
    Sc1Options sc1;
    sc1.seed = u.seed;
    sc1.tol = u.tol.sc1;
    double worst = 0;
    std::size_t exact_points = 0, points = 0;
    std::string regime;
    for (const auto& p : pairs) {
      const Regime mode = u.mode == Regime::exact && p.f->supports_exact() && p.g->supports_exact() ? Regime::exact
                                                                                                      : Regime::floating;
      const auto rep = chain_rule_verify(p.f, p.g, p.points, mode, u.tol.chain, sc1);
      worst = std::max(worst, rep.worst);
      for (const auto& q : rep.points) exact_points += q.exact_equal, ++points;
      if (u.mode == Regime::exact && rep.regime == Regime::exact)
        for (const auto& q : rep.points) r.check(q.exact_equal, p.name + ": exact tangents differ");
      r.check(rep.pass, p.name + ": " + rep.failure);
      if (regime.find(regime_name(rep.regime)) == std::string::npos) regime += std::string(regime.empty() ? "" : "+") + regime_name(rep.regime);
    }
    r.residual("worst_chain_residual", worst, u.tol.chain);
    r.witnesses = {{"pairs", pairs.size()}, {"points", points}, {"exactly_equal_points", exact_points}, {"regimes", regime}};
    return r;
  };
}

Runner suite_fredholm(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "cases", "compose"}, c.ptr);
  struct Case {
    std::string label;
    ScOperator t;
    std::optional<std::int64_t> index;
  };
  struct Pair {
    std::string label;
    ScOperator a, b;
    std::optional<std::int64_t> index;
  };
  std::vector<Case> cases;
  std::vector<Pair> pairs;
  auto label_of = [](const json& j, const std::string& dflt) { return j.is_string() ? j.get<std::string>() : dflt; };
  if (c.has("cases") || c.has("compose")) {
    if (c.has("cases")) {
      const json& cs = array(c.p["cases"], c.at("cases"), 1);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        const std::string p = sub(c.at("cases"), i);
        allow_keys(cs[i], {"op", "index"}, p);
        Case k{label_of(cs[i]["op"], "case" + std::to_string(i)), c.u.op_term(need(cs[i], "op", p), std::nullopt, sub(p, "op")), {}};
        if (cs[i].contains("index")) k.index = integer(cs[i]["index"], sub(p, "index"));
        cases.push_back(std::move(k));
      }
    }
    if (c.has("compose")) {
      const json& cs = array(c.p["compose"], c.at("compose"), 1);
      for (std::size_t i = 0; i < cs.size(); ++i) {
        const std::string p = sub(c.at("compose"), i);
        allow_keys(cs[i], {"args", "index"}, p);
        const json& args = array(need(cs[i], "args", p), sub(p, "args"), 2);
        if (args.size() != 2) fail(sub(p, "args"), "expected [T, S]");
        Pair k{label_of(args[0], "T") + " o " + label_of(args[1], "S"),
               c.u.op_term(args[0], std::nullopt, sub(sub(p, "args"), 0)),
               c.u.op_term(args[1], std::nullopt, sub(sub(p, "args"), 1)), {}};
        if (cs[i].contains("index")) k.index = integer(cs[i]["index"], sub(p, "index"));
        pairs.push_back(std::move(k));
      }
    }
  } else {
    const auto E = ScaleSpace::sequence(1.0);
    const auto L = ScOperator::shift(E, 1), R = ScOperator::shift(E, -1);
    cases = {{"L", L, 1}, {"R", R, -1}, {"I", ScOperator::identity(E), 0}, {"L^3", ScOperator::shift(E, 3), 3}};
    pairs = {{"L o L", L, L, 2}, {"L o R", L, R, 0}, {"R o L", R, L, 0}};
  }
  Universe& u = c.u;
  return [cases, pairs, &u] {
    Result r;
    FredholmOptions opt;
    opt.force_float = u.mode == Regime::floating;
    json items = json::array();
    for (const auto& k : cases) {
      const auto sp = fredholm_index(k.t, opt);
      if (k.index) r.check(sp.index == *k.index, k.label + ": index " + std::to_string(sp.index) + ", expected " + std::to_string(*k.index));
      r.check(sp.levels_consistent, k.label + ": kernel dimensions vary across levels");
      items.push_back({{"operator", k.label}, {"index", sp.index}, {"regime", regime_name(sp.regime)},
                       {"kernel_dim", sp.kernel_dim()}, {"cokernel_dim", sp.cokernel_dim()},
                       {"certificate", sp.certificate}, {"kernel", kernel_witness(sp)}});
    }
    json comp = json::array();
    for (const auto& k : pairs) {
      const auto ci = compose_index(k.a, k.b, opt);
      r.check(ci.additive, k.label + ": index of the composite is not the sum");
      if (k.index) r.check(ci.index == *k.index, k.label + ": index " + std::to_string(ci.index));
      comp.push_back({{"composite", k.label}, {"index", ci.index}, {"sum_of_indices", ci.sum_of_indices}});
    }
    r.witnesses = {{"operators", items}, {"compositions", comp}};
    return r;
  };
}

Runner suite_scplus(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "pairs"}, c.ptr);
  std::vector<corpus::OperatorPair> pairs;
  if (c.has("pairs")) {
    const json& ps = array(c.p["pairs"], c.at("pairs"), 1);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string p = sub(c.at("pairs"), i);
      array(ps[i], p);
      if (ps[i].size() != 2) fail(p, "expected [T, R]");
      pairs.push_back({"pair" + std::to_string(i), c.u.op_term(ps[i][0], std::nullopt, sub(p, 0)),
                       c.u.op_term(ps[i][1], std::nullopt, sub(p, 1))});
    }
  } else {
    pairs = corpus::scplus_pairs();
  }
  Universe& u = c.u;
  return [pairs, &u] {
    Result r;
    FredholmOptions opt;
    opt.force_float = u.mode == Regime::floating;
    json items = json::array();
    for (const auto& pr : pairs) {
      r.check(pr.r.certified_scplus(), pr.name + ": perturbation is not certified sc+");
      const auto it = fredholm_index(pr.t, opt).index;
      const auto rep = perturb_scplus_index(pr.t, pr.r, opt);
      r.check(rep.stable && rep.index_sum == it, pr.name + ": index changed");
      r.check(rep.kernels_level_independent, pr.name + ": kernel depends on the level");
      items.push_back({{"pair", pr.name}, {"index_t", it}, {"index_sum", rep.index_sum},
                       {"kernel_dim", rep.splitting.kernel_dim()}, {"levels_independent", rep.kernels_level_independent}});
    }
    r.witnesses = {{"pairs", items}};
    return r;
  };
}

Runner suite_regularizing(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "cases"}, c.ptr);
  std::vector<corpus::RegularCase> cases;
  if (c.has("cases")) {
    const json& cs = array(c.p["cases"], c.at("cases"), 1);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string p = sub(c.at("cases"), i);
      allow_keys(cs[i], {"op", "e", "level"}, p);
      cases.push_back({"case" + std::to_string(i), c.u.op_term(need(cs[i], "op", p), std::nullopt, sub(p, "op")),
                       qvec(need(cs[i], "e", p), sub(p, "e")),
                       cs[i].contains("level") ? int(count(cs[i]["level"], sub(p, "level"))) : 0});
    }
  } else {
    cases = corpus::regularizing_cases();
  }
  Universe& u = c.u;
  return [cases, &u] {
    Result r;
    FredholmOptions opt;
    opt.force_float = u.mode == Regime::floating;
    json items = json::array();
    double worst = 0;
    for (const auto& k : cases) {
      const auto cert = regularity_lift(k.t, fredholm_index(k.t, opt), k.e, k.level);
      r.check(cert.ok, k.name + ": " + (cert.detail.empty() ? "lift failed" : cert.detail));
      if (u.mode == Regime::exact) r.check(cert.regime == Regime::exact && cert.c_exact.is_zero(), k.name + ": c is not exactly 0");
      worst = std::max(worst, cert.reassembly_residual);
      json it = {{"case", k.name}, {"level", k.level}, {"regime", regime_name(cert.regime)}, {"c_zero", cert.c_zero},
                 {"reassembles", cert.reassembles}};
      if (cert.regime == Regime::exact) it["kernel_part"] = qstr(cert.k_exact), it["complement_part"] = qstr(cert.x0_exact);
      items.push_back(it);
    }
    r.residual("worst_reassembly", worst, u.tol.zero);
    r.witnesses = {{"cases", items}};
    return r;
  };
}

std::vector<std::pair<std::string, SplicingPtr>> splicing_list(SuiteCtx& c) {
  std::vector<std::pair<std::string, SplicingPtr>> out;
  if (c.has("splicings")) {
    const json& ss = array(c.p["splicings"], c.at("splicings"), 1);
    for (std::size_t i = 0; i < ss.size(); ++i)
      out.emplace_back(ss[i].is_string() ? ss[i].get<std::string>() : "splicing" + std::to_string(i),
                       c.u.splicing_term(ss[i], sub(c.at("splicings"), i)));
  } else {
    const ProductSpace W1{ScaleSpace::finite(1)};
    out = {{"rank jump", rank_jump_splicing(1.0)},
           {"constant rank", const_rank_splicing(W1, ScaleSpace::finite(3), {QVector{1, 1, 0}, QVector{0, 1, 2}})},
           {"trivial", trivial_splicing(W1, ProductSpace{ScaleSpace::sequence(1.0)})}};
  }
  return out;
}

Runner suite_splicing_core(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "splicings", "samples"}, c.ptr);
  const auto list = splicing_list(c);
  const std::size_t n = opt_count(c, "samples", 32);
  Universe& u = c.u;
  return [list, n, &u] {
    Result r;
    double worst = 0;
    json items = json::array();
    std::mt19937_64 rng(u.seed);
    for (const auto& [name, s] : list) {
      const auto rep = splicing_idempotency(*s, n, u.seed, u.tol.zero);
      worst = std::max(worst, rep.worst);
      r.check(rep.pass, name + ": pi_v o pi_v differs from pi_v");
      std::size_t in_core = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const Point v = s->sample_parameter(rng);
        const Point e = s->project(v, s->sample_fiber(v, rng));
        in_core += core_contains(*s, v, e, 0, u.tol.zero);
      }
      r.check(in_core == n, name + ": projected samples outside the core");
      items.push_back({{"splicing", name}, {"samples", n}, {"in_core", in_core}, {"exact", rep.exact}});
    }
    r.residual("worst_idempotency", worst, u.tol.zero);
    r.witnesses = {{"splicings", items}};
    return r;
  };
}

Runner suite_tangent_splicing(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "splicings", "samples"}, c.ptr);
  const auto list = splicing_list(c);
  const std::size_t n = opt_count(c, "samples", 64);
  Universe& u = c.u;
  return [list, n, &u] {
    Result r;
    double worst = 0;
    json items = json::array();
    for (const auto& [name, s] : list) {
      const auto t = tangent_splicing(s, n, u.seed, u.tol.idempotent);
      worst = std::max(worst, t.report.worst);
      r.check(t.report.pass, name + ": P o P differs from P");
      if (s->constant_operator() && s->supports_exact())
        r.check(t.report.exact && t.report.worst == 0.0, name + ": constant family is not exactly idempotent");
      items.push_back({{"splicing", name}, {"samples", t.report.samples}, {"worst", number(t.report.worst)},
                       {"exact", t.report.exact}});
    }
    r.residual("worst_idempotency", worst, u.tol.idempotent);
    r.witnesses = {{"splicings", items}};
    return r;
  };
}

Runner suite_core_chain(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "splicing", "pairs", "samples"}, c.ptr);
  std::vector<corpus::CorePair> pairs;
  if (c.has("splicing") || c.has("pairs")) {
    const SplicingPtr s = c.u.splicing_term(need(c.p, "splicing", c.ptr), c.at("splicing"));
    const LocalModel m = whole_core(s);
    const auto r = retraction_map(s);
    const json& ps = array(need(c.p, "pairs", c.ptr), c.at("pairs"), 1);
    const auto pts = sample_tangent_core(*s, opt_count(c, "samples", 4), c.u.seed);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const std::string p = sub(c.at("pairs"), i);
      array(ps[i], p);
      if (ps[i].size() != 2) fail(p, "expected [f, g]");
      const MapPtr f = c.u.map_term(ps[i][0], sub(p, 0)), g = c.u.map_term(ps[i][1], sub(p, 1));
      for (const auto& [mp, sp] : {std::pair{f, sub(p, 0)}, std::pair{g, sub(p, 1)}})
        if (!(mp->domain() == m.ambient()) || !(mp->codomain() == m.ambient())) fail(sp, "map must act on the ambient W + E");
      auto wrap = [&](const MapPtr& mp) { return CoreMap(m, m, std::make_shared<ComposeMap>(r, mp)); };
      pairs.push_back({"pair" + std::to_string(i), wrap(f), wrap(g), pts, s->supports_exact()});
    }
  } else {
    pairs = corpus::core_chain_pairs();
  }
  Universe& u = c.u;
  return [pairs, &u] {
    Result r;
    double worst = 0, worst22 = 0;
    std::size_t exact_pairs = 0;
    for (const auto& p : pairs) {
      const Regime mode = u.mode == Regime::exact && p.exact ? Regime::exact : Regime::floating;
      const auto rep = core_chain_rule(p.f, p.g, p.points, mode, u.tol.chain);
      worst = std::max(worst, rep.chain.worst);
      worst22 = std::max(worst22, rep.worst_map22);
      r.check(rep.pass, p.name + ": " + rep.chain.failure);
      if (mode == Regime::exact) {
        bool all = rep.chain.regime == Regime::exact;
        for (const auto& q : rep.chain.points) all = all && q.exact_equal;
        r.check(all, p.name + ": exact tangents differ");
        exact_pairs += all;
      }
    }
    r.residual("worst_chain_residual", worst, u.tol.chain);
    r.residual("worst_tangent_core_residual", worst22, 1e-8);
    r.witnesses = {{"pairs", pairs.size()}, {"exact_pairs", exact_pairs}};
    return r;
  };
}

Runner suite_degeneracy(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "complex", "samples"}, c.ptr);
  const ChartComplex cc = c.has("complex") ? c.u.complex(str(c.p["complex"], c.at("complex")), c.at("complex")) : corner_corpus();
  const std::size_t n = opt_count(c, "samples", 24);
  Universe& u = c.u;
  return [cc, n, &u] {
    Result r;
    const auto inv = degeneracy_invariance(cc, n, u.seed, u.tol.zero);
    r.check(inv.transitions_certified, "transitions not certified: " + inv.certification_failure);
    r.check(inv.mismatches.empty(), std::to_string(inv.mismatches.size()) + " overlap samples change the index");
    r.check(inv.pass, "invariance check failed");
    std::mt19937_64 rng(u.seed);
    std::size_t semi = 0, semi_ok = 0;
    for (const auto& chart : cc.charts)
      for (const auto& x : sample_chart(chart, 6, rng)) {
        ++semi;
        semi_ok += lower_semicontinuity(chart, x, 32, rng()).pass;
      }
    r.check(semi_ok == semi, "lower semicontinuity fails at " + std::to_string(semi - semi_ok) + " points");
    r.residual("worst_roundtrip", inv.worst_roundtrip, 1e-9);
    json mism = json::array();
    for (const auto& m : inv.mismatches) mism.push_back({{"overlap", m.overlap}, {"d_a", m.da}, {"d_b", m.db}});
    r.witnesses = {{"nontrivial_transitions", inv.nontrivial_transitions}, {"overlap_samples", inv.samples},
                   {"mismatches", mism}, {"semicontinuity_points", semi}, {"semicontinuity_ok", semi_ok}};
    return r;
  };
}

Runner suite_faces(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "cases"}, c.ptr);
  struct Case {
    std::string label;
    ChartComplex cc;
    bool expect_structured;
  };
  std::vector<Case> cases;
  if (c.has("cases")) {
    const json& cs = array(c.p["cases"], c.at("cases"), 1);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      const std::string p = sub(c.at("cases"), i);
      allow_keys(cs[i], {"complex", "face_structured"}, p);
      const std::string name = str(need(cs[i], "complex", p), sub(p, "complex"));
      bool want = true;
      if (cs[i].contains("face_structured")) {
        if (!cs[i]["face_structured"].is_boolean()) fail(sub(p, "face_structured"), "expected true or false");
        want = cs[i]["face_structured"].get<bool>();
      }
      cases.push_back({name, c.u.complex(name, sub(p, "complex")), want});
    }
  } else {
    cases = {{"quadrant 2", quadrant_complex(2, 6), true}, {"quadrant 3", quadrant_complex(3, 4), true},
             {"teardrop", teardrop_complex(6), false}};
  }
  return [cases] {
    Result r;
    json items = json::array();
    for (const auto& k : cases) {
      const auto f = faces(k.cc);
      r.check(f.face_structured == k.expect_structured,
              k.label + (k.expect_structured ? ": not face-structured" : ": expected not face-structured"));
      if (k.expect_structured)
        for (std::size_t i = 0; i < f.d.size(); ++i)
          r.check(f.face_count[i] == std::size_t(f.d[i]), k.label + ": point " + std::to_string(i) + " lies in the wrong number of faces");
      items.push_back({{"complex", k.label}, {"faces", f.faces}, {"points", f.d.size()}, {"face_structured", f.face_structured},
                       {"offending", f.offending}});
    }
    r.witnesses = {{"complexes", items}};
    return r;
  };
}

Runner suite_product_degeneracy(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "samples"}, c.ptr);
  const std::size_t n = opt_count(c, "samples", 24);
  Universe& u = c.u;
  return [n, &u] {
    Result r;
    std::mt19937_64 rng(u.seed);
    const Chart x = corpus::quadrant_chart(2, {0, 1});
    const Chart y{"rank jump", whole_core(rank_jump_splicing(1.0))};
    const Chart z = corpus::quadrant_chart(3, {0, 2});
    std::size_t pairs_n = 0;
    for (const auto& [a, b] : {std::pair{&x, &y}, std::pair{&z, &x}}) {
      const auto pa = sample_chart(*a, n, rng), pb = sample_chart(*b, n, rng);
      std::vector<std::pair<Point, Point>> pairs;
      for (std::size_t i = 0; i < n; ++i) pairs.emplace_back(pa[i], pb[i]);
      const auto rep = product_degeneracy(*a, *b, pairs);
      r.check(rep.additive, "d(x, y) != d(x) + d(y) on " + a->name + " x " + b->name);
      for (std::size_t i = 0; i < n; ++i)
        r.check(rep.values[i][2] == degeneracy_index(*a, pa[i]) + degeneracy_index(*b, pb[i]), "product index differs");
      pairs_n += rep.pairs;
    }
    r.witnesses = {{"pairs", pairs_n}};
    return r;
  };
}

Runner suite_fred(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "samples"}, c.ptr);
  const std::size_t n = opt_count(c, "samples", 40);
  Universe& u = c.u;
  return [n, &u] {
    Result r;
    const auto fc = corpus::fred_composite();
    const auto rf = fred_submersion_check(fc.f, fc.wf, n, u.seed);
    const auto rg = fred_submersion_check(fc.g, fc.wg, n, u.seed);
    r.check(rf.pass, "f is not in normal form: " + rf.failure);
    r.check(rg.pass, "g is not in normal form: " + rg.failure);
    const auto w = fred_submersion_compose(fc.wf, fc.wg, 16, u.seed);
    const auto rc = fred_submersion_check(std::make_shared<ComposeMap>(fc.g, fc.f), w, n, u.seed);
    r.check(rc.pass, "g o f is not in normal form: " + rc.failure);
    const auto pc = corpus::preimage_case();
    const auto pre = preimage_charts(pc.f, pc.witnesses, pc.y, 16, u.seed, u.tol.fd2);
    r.check(pre.pass, "preimage charts failed");
    r.residual("composite_normal_form", rc.worst, 1e-10);
    r.residual("preimage_second_difference", pre.worst_fd, u.tol.fd2);
    r.witnesses = {{"composite_samples", rc.samples}, {"dropped_dimension", w.n}, {"preimage_dimension", pre.n},
                   {"preimage_charts", pre.charts.size()}};
    return r;
  };
}

Runner suite_strong_bundle(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "bundles", "samples"}, c.ptr);
  std::vector<std::pair<std::string, BundlePtr>> list;
  const bool defaults = !c.has("bundles");
  if (!defaults) {
    const json& bs = array(c.p["bundles"], c.at("bundles"), 1);
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const std::string name = str(bs[i], sub(c.at("bundles"), i));
      list.emplace_back(name, c.u.bundle(name, sub(c.at("bundles"), i)).bundle);
    }
  } else {
    for (const auto& fb : {trivial_fillable(), corank_one_fillable(), rank_jump_fillable()}) list.emplace_back(fb.name, fb.bundle);
  }
  const std::size_t n = opt_count(c, "samples", 8);
  Universe& u = c.u;
  return [list, n, defaults, &u] {
    Result r;
    double idem = 0, lin = 0;
    json items = json::array();
    for (const auto& [name, b] : list) {
      const auto rep = check_strong_bundle(b, n, u.seed, u.tol.zero);
      idem = std::max(idem, rep.idempotency);
      lin = std::max(lin, rep.linearity);
      r.check(rep.pass, name + ": " + rep.failure);
      items.push_back({{"bundle", name}, {"level_shift", rep.level_shift}, {"view0_sc1", rep.view0_sc1},
                       {"view1_sc1", rep.view1_sc1}});
    }
    r.residual("worst_idempotency", idem, u.tol.zero);
    r.residual("worst_linearity", lin, u.tol.zero);
    json maps = json::array();
    if (defaults)
      for (const auto& m : corpus::bundle_map_cases()) {
        const auto cls = strong_map_class_check(m.bundle, m.bundle, m.phi, m.fiber, 3, u.seed).classification;
        r.check(cls == m.expected, m.name + ": classified " + cls + ", expected " + m.expected);
        maps.push_back({{"map", m.name}, {"classification", cls}});
      }
    r.witnesses = {{"bundles", items}, {"bundle_maps", maps}};
    return r;
  };
}

Runner suite_filler(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "bundles", "samples"}, c.ptr);
  std::vector<FillableBundle> list;
  const bool defaults = !c.has("bundles");
  if (!defaults) {
    const json& bs = array(c.p["bundles"], c.at("bundles"), 1);
    for (std::size_t i = 0; i < bs.size(); ++i) {
      const std::string p = sub(c.at("bundles"), i);
      const auto& d = c.u.bundle(str(bs[i], p), p);
      if (!d.fillable) fail(p, "bundle has no filler");
      list.push_back(*d.fillable);
    }
  } else {
    list = {trivial_fillable(), corank_one_fillable(), rank_jump_fillable()};
  }
  const std::size_t n = opt_count(c, "samples", 12);
  Universe& u = c.u;
  return [list, n, defaults, &u] {
    Result r;
    double rho = 0, inv = 0;
    json items = json::array();
    for (const auto& fb : list) {
      const auto rep = check_filler(fb, n, u.seed, u.tol.zero);
      rho = std::max(rho, rep.rho_residual);
      inv = std::max(inv, rep.inverse_residual);
      r.check(rep.pass, fb.name + ": not a filler");
      items.push_back({{"bundle", fb.name}, {"samples", rep.samples}, {"injectivity", number(rep.injectivity)}});
    }
    r.residual("worst_rho_residual", rho, u.tol.zero);
    r.residual("worst_inverse_residual", inv, u.tol.zero);
    json zs = json::array();
    if (defaults)
      for (const auto& fc : corpus::fill_cases()) {
        const auto z = zero_set_equivalence(fill(fc.section, fc.bundle.filler), fc.grid, u.tol.zero);
        r.check(z.pass, fc.name + ": zero sets differ at " + std::to_string(z.mismatches.size()) + " points");
        zs.push_back({{"case", fc.name}, {"points", z.points}, {"original_zeros", z.original_zeros},
                      {"filled_zeros", z.filled_zeros}});
      }
    r.witnesses = {{"fillers", items}, {"zero_sets", zs}};
    return r;
  };
}

Runner suite_linearization(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect"}, c.ptr);
  return [] {
    Result r;
    json items = json::array();
    double worst_gain = 0;
    for (const auto& t : corpus::linearization_triples()) {
      const auto rep = linearization_delta_scplus(t.f, t.s, t.t, t.q);
      r.check(rep.scplus, t.name + ": difference is not sc+");
      r.check(rep.indices_agree, t.name + ": indices differ");
      r.check(rep.pass, t.name + ": certificate failed");
      worst_gain = std::max(worst_gain, rep.worst_gain);
      json it = {{"triple", t.name}, {"certificate", rep.operator_certificate}, {"worst_gain", number(rep.worst_gain)}};
      it["index_s"] = rep.index_s ? json(*rep.index_s) : json(nullptr);
      it["index_t"] = rep.index_t ? json(*rep.index_t) : json(nullptr);
      items.push_back(it);
    }
    r.witnesses = {{"triples", items}};
    return r;
  };
}

Runner suite_filled_block(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect"}, c.ptr);
  Universe& u = c.u;
  return [&u] {
    Result r;
    double cross = 0, assembly = 0;
    json items = json::array();
    for (const auto& fc : corpus::fill_cases()) {
      const auto b = filled_linearization_block(fc.section, fc.bundle.filler, fc.q, u.tol.cross_block);
      cross = std::max({cross, b.cross_f, b.cross_fc});
      assembly = std::max(assembly, b.assembly);
      r.check(b.c_isomorphism, fc.name + ": C is not an isomorphism");
      if (b.index_f && b.index_filled) r.check(*b.index_f == *b.index_filled, fc.name + ": indices differ");
      r.check(b.pass, fc.name + ": block check failed");
      json it = {{"case", fc.name}, {"note", b.note}};
      it["index_f"] = b.index_f ? json(*b.index_f) : json(nullptr);
      it["index_filled"] = b.index_filled ? json(*b.index_filled) : json(nullptr);
      items.push_back(it);
    }
    r.residual("worst_cross_block", cross, u.tol.cross_block);
    r.residual("worst_assembly", assembly, 1e-9);
    r.witnesses = {{"cases", items}};
    return r;
  };
}

Runner suite_pullback(SuiteCtx c) {
  allow_keys(c.p, {"suite", "id", "expect", "samples"}, c.ptr);
  const std::size_t n = opt_count(c, "samples", 6);
  Universe& u = c.u;
  return [n, &u] {
    Result r;
    json items = json::array();
    std::mt19937_64 rng(u.seed);
    double worst = 0;
    for (const auto& pc : corpus::pullback_cases()) {
      const auto pb = pullback_bundle(pc.bundle, pc.base, pc.f, 16, u.seed);
      const auto rep = check_strong_bundle(pb, n, u.seed, u.tol.zero);
      r.check(rep.pass, pc.name + ": " + rep.failure);
      // rho'(w, u) = rho(f(w), u) on sampled points
      for (std::size_t i = 0; i < n; ++i) {
        const Point w = pb->sample_base(rng);
        const Point uu = pb->raw_fiber(w, rng);
        const Point d = pb->rho(w, uu) - pc.bundle->rho(pc.f->eval(w), uu);
        worst = std::max(worst, level_norm(pc.bundle->fiber(), d, 0));
      }
      items.push_back({{"case", pc.name}, {"strong_bundle", rep.pass}});
    }
    r.residual("worst_pullback_defect", worst, u.tol.zero);
    r.witnesses = {{"cases", items}};
    return r;
  };
}

using Factory = Runner (*)(SuiteCtx);

const std::map<std::string, Factory>& factories() {
  static const std::map<std::string, Factory> f{
      {"sc1", suite_sc1},
      {"chain-rule", suite_chain},
      {"fredholm-index", suite_fredholm},
      {"scplus-stability", suite_scplus},
      {"regularizing", suite_regularizing},
      {"splicing-core", suite_splicing_core},
      {"tangent-splicing", suite_tangent_splicing},
      {"core-chain-rule", suite_core_chain},
      {"degeneracy", suite_degeneracy},
      {"faces", suite_faces},
      {"product-degeneracy", suite_product_degeneracy},
      {"fred-submersion", suite_fred},
      {"strong-bundle", suite_strong_bundle},
      {"filler", suite_filler},
      {"linearization", suite_linearization},
      {"filled-block", suite_filled_block},
      {"pullback", suite_pullback},
  };
  return f;
}

std::string citation(const std::string& name) {
  for (const auto& s : suite_registry())
    if (s.name == name) return s.citation;
  return {};
}

std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line, col = 1;
    else ++col;
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

struct Planned {
  std::string id, name;
  bool expect_pass = true;
  Runner run;
};

}  // namespace

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += hex[md[i] >> 4], out += hex[md[i] & 15];
  return out;
}

std::string Report::document() const {
  json d;
  d["body"] = json::parse(body);
  d["timing"] = json::parse(timing);
  return d.dump(2) + "\n";
}

Report run_text(const std::string& text, const Overrides& ov) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::string what = e.what();
    const auto colon = what.find("syntax error");
    throw ConfigError(line_col(text, e.byte == 0 ? 0 : e.byte - 1), colon == std::string::npos ? what : what.substr(colon));
  }
  if (!doc.is_object()) fail("", "scenario must be an object");
  allow_keys(doc, {"version", "seed", "mode", "tolerances", "spaces", "operators", "maps", "splicings", "complexes",
                   "bundles", "suites", "description"},
             "");
  if (str(need(doc, "version", ""), "/version") != kScenarioVersion)
    fail("/version", std::string("unsupported version, expected \"") + kScenarioVersion + "\"");

  Universe u(doc);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) fail("/seed", "seed must be a non-negative integer");
    u.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("mode")) {
    const std::string m = str(doc["mode"], "/mode");
    if (m != "exact" && m != "float") fail("/mode", "mode must be \"exact\" or \"float\"");
    u.mode = m == "exact" ? Regime::exact : Regime::floating;
  }
  if (doc.contains("tolerances")) {
    const json& t = doc["tolerances"];
    allow_keys(t, {"zero", "sc1", "chain", "idempotent", "fd2", "cross_block"}, "/tolerances");
    auto set = [&](const char* k, double& dst) {
      if (!t.contains(k)) return;
      dst = dbl(t[k], sub("/tolerances", k));
      if (!(dst > 0) || !std::isfinite(dst)) fail(sub("/tolerances", k), "tolerance must be positive");
    };
    set("zero", u.tol.zero), set("sc1", u.tol.sc1), set("chain", u.tol.chain);
    set("idempotent", u.tol.idempotent), set("fd2", u.tol.fd2), set("cross_block", u.tol.cross_block);
  }
  if (ov.seed) u.seed = *ov.seed;
  if (ov.mode) u.mode = *ov.mode;
  if (ov.tol) {
    if (!(*ov.tol > 0)) throw ConfigError("--tol", "tolerance must be positive");
    u.tol = {*ov.tol, *ov.tol, *ov.tol, *ov.tol, *ov.tol, *ov.tol};
  }
  u.build_all();

  for (const auto& s : ov.suites)
    if (!factories().count(s)) throw ConfigError("--suite", "unknown suite '" + s + "'");

  // plan: validate every selected suite before anything runs
  const json& suites = array(need(doc, "suites", ""), "/suites", 1);
  std::vector<Planned> plan;
  std::map<std::string, int> seen;
  std::set<std::string> present;
  for (std::size_t i = 0; i < suites.size(); ++i) {
    const std::string p = sub("/suites", i);
    const std::string name = str(need(suites[i], "suite", p), sub(p, "suite"));
    auto f = factories().find(name);
    if (f == factories().end()) fail(sub(p, "suite"), "unknown suite '" + name + "'");
    present.insert(name);
    if (!ov.suites.empty() && std::find(ov.suites.begin(), ov.suites.end(), name) == ov.suites.end()) continue;
    Planned pl;
    pl.name = name;
    pl.id = suites[i].contains("id") ? str(suites[i]["id"], sub(p, "id")) : name;
    if (seen[pl.id]++) pl.id += "#" + std::to_string(seen[pl.id]);
    if (suites[i].contains("expect")) {
      const std::string e = str(suites[i]["expect"], sub(p, "expect"));
      if (e != "pass" && e != "fail") fail(sub(p, "expect"), "expect must be \"pass\" or \"fail\"");
      pl.expect_pass = e == "pass";
    }
    pl.run = f->second(SuiteCtx{u, suites[i], p});
    plan.push_back(std::move(pl));
  }
  // filtered suites missing from the scenario run with their default corpus
  static const json empty = json::object({{"suite", ""}});
  for (const auto& s : ov.suites)
    if (!present.count(s) && std::none_of(plan.begin(), plan.end(), [&](const Planned& q) { return q.name == s; }))
      plan.push_back({s, s, true, factories().at(s)(SuiteCtx{u, empty, "--suite " + s})});

  // run
  struct Done {
    Result r;
    double seconds = 0;
  };
  std::vector<Done> done(plan.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < plan.size();) {
      const auto t0 = std::chrono::steady_clock::now();
      try {
        done[i].r = plan[i].run();
      } catch (const std::exception& e) {
        done[i].r = Result{};
        done[i].r.check(false, std::string("error: ") + e.what());
      }
      done[i].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  const unsigned jobs = std::max(1u, std::min<unsigned>(ov.jobs, unsigned(plan.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  // deterministic merge by suite id
  std::vector<std::size_t> order(plan.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return plan[a].id < plan[b].id; });

  Report rep;
  json body, timing;
  body["version"] = kReportVersion;
  body["provenance"] = {{"scenario_sha256", sha256_hex(text)},
                        {"scenario_version", kScenarioVersion},
                        {"seed", u.seed},
                        {"mode", u.mode == Regime::exact ? "exact" : "float"}};
  body["tolerances"] = {{"zero", u.tol.zero},   {"sc1", u.tol.sc1}, {"chain", u.tol.chain},
                        {"idempotent", u.tol.idempotent}, {"fd2", u.tol.fd2}, {"cross_block", u.tol.cross_block}};
  json arr = json::array(), unexpected = json::array();
  timing["suites"] = json::object();
  for (auto i : order) {
    const auto& pl = plan[i];
    const auto& r = done[i].r;
    SuiteOutcome o{pl.id, pl.name, r.pass, r.pass == pl.expect_pass, {}, done[i].seconds};
    for (const auto& f : r.failures) o.failure += (o.failure.empty() ? "" : "; ") + f;
    if (!o.expected) unexpected.push_back(pl.id);
    arr.push_back({{"id", pl.id},
                   {"suite", pl.name},
                   {"citation", citation(pl.name)},
                   {"expect", pl.expect_pass ? "pass" : "fail"},
                   {"passed", r.pass},
                   {"as_expected", o.expected},
                   {"residuals", r.residuals},
                   {"witnesses", r.witnesses},
                   {"failures", r.failures}});
    timing["suites"][pl.id] = done[i].seconds;
    rep.suites.push_back(std::move(o));
  }
  body["suites"] = arr;
  rep.exit_code = unexpected.empty() ? 0 : 1;
  body["summary"] = {{"suites", plan.size()}, {"unexpected", unexpected}, {"exit_code", rep.exit_code}};
  timing["total_seconds"] = total;
  timing["jobs"] = jobs;
  rep.body = body.dump(2);
  rep.timing = timing.dump(2);
  return rep;
}

Report run_file(const std::string& path, const Overrides& ov) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open scenario file");
  std::stringstream ss;
  ss << in.rdbuf();
  return run_text(ss.str(), ov);
}

void emit(const Report& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report to " + path);
  out << r.document();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace scalekit::harness
