#include <doctest.h>

#include <nlohmann/json.hpp>

#include "scalekit/calculus.hpp"
#include "scalekit/harness.hpp"

using namespace scalekit;
using namespace scalekit::harness;
using nlohmann::json;

namespace {
std::string scenario(const json& suites, json extra = json::object()) {
  json d = {{"version", kScenarioVersion}, {"seed", 11}, {"suites", suites}};
  d.update(extra);
  return d.dump();
}

std::string location_of(const std::string& text) {
  try {
    run_text(text);
  } catch (const ConfigError& e) {
    return e.location;
  }
  return "<none>";
}
}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("registry covers every suite once") {
  const auto& reg = suite_registry();
  CHECK(reg.size() == 17);
  json all = json::array();
  for (const auto& s : reg) {
    CHECK(!s.citation.empty());
    all.push_back({{"suite", s.name}});
  }
  const Report r = run_text(scenario(all));
  CHECK(r.exit_code == 0);
  CHECK(r.suites.size() == 17);
  for (const auto& s : r.suites) CHECK_MESSAGE(s.passed, s.id << ": " << s.failure);
}

TEST_CASE("syntax errors carry line and column") {
  CHECK(location_of("{\n  \"version\": 1,\n  oops\n}") == "3:3");
  CHECK(location_of("") == "1:1");
}

TEST_CASE("validation errors carry a pointer") {
  const json faces = json::parse(R"([{"suite": "faces"}])");
  CHECK(location_of(scenario(json::parse(R"([{"suite": "faces", "extra": 1}])"))) == "/suites/0/extra");
  CHECK(location_of(scenario(faces, json::parse(R"({"tolerances": {"fd2": 0}})"))) == "/tolerances/fd2");
  CHECK(location_of(scenario(faces, json::parse(R"({"mode": "fuzzy"})"))) == "/mode");
  const json decl = json::parse(R"({"spaces": {"E": {"kind": "sequence"}},
                                     "operators": {"T": {"space": "E", "op": "diag", "rule": "exp(-"}}})");
  CHECK(location_of(scenario(json::parse(R"([{"suite": "faces"}])"), decl)) == "/operators/T/rule");
  CHECK(location_of(scenario(json::parse(R"([{"suite": "fredholm-index", "cases": [{"op": "nope"}]}])"))) ==
        "/suites/0/cases/0/op");
}

TEST_CASE("declared objects feed the suites") {
  const json extra = json::parse(R"({
    "spaces": {"E": {"kind": "sequence"}},
    "operators": {"T": {"space": "E", "op": "sum",
                        "args": [{"op": "shift", "power": 2}, {"op": "rank1", "lam": [1], "u": ["1/3"]}]}}
  })");
  const json suites = json::parse(R"([
    {"suite": "fredholm-index", "cases": [{"op": "T", "index": 2}]},
    {"suite": "fredholm-index", "id": "wrong", "expect": "fail", "cases": [{"op": "T", "index": 1}]}
  ])");
  const Report r = run_text(scenario(suites, extra));
  REQUIRE(r.suites.size() == 2);
  CHECK(r.suites[0].passed);
  CHECK_FALSE(r.suites[1].passed);
  CHECK(r.suites[1].expected);
  CHECK(r.exit_code == 0);
  // exact kernels are written as rationals
  const json body = json::parse(r.body);
  const json k = body["suites"][0]["witnesses"]["operators"][0]["kernel"];
  REQUIRE(k.size() == 2);
  CHECK(k[0][0].is_string());
}

TEST_CASE("unexpected outcomes set exit code 1") {
  const json extra = json::parse(R"({"splicings": {"b": {"splicing": "broken_rank_jump"}}})");
  const Report r = run_text(scenario(json::parse(R"([{"suite": "sc1", "targets": [{"splicing": "b"}]}])"), extra));
  CHECK(r.exit_code == 1);
  CHECK(r.suites[0].failure.find("not sc1") != std::string::npos);
}

TEST_CASE("overrides and deterministic merge") {
  const std::string text = scenario(json::parse(R"([{"suite": "faces"}, {"suite": "chain-rule"}, {"suite": "degeneracy"}])"));
  Overrides one, many;
  many.jobs = 4;
  CHECK(run_text(text, one).body == run_text(text, many).body);

  Overrides ov;
  ov.suites = {"chain-rule", "pullback"};
  ov.seed = 99;
  ov.tol = 1e-6;
  ov.mode = Regime::floating;
  const Report r = run_text(text, ov);
  REQUIRE(r.suites.size() == 2);
  CHECK(r.suites[0].id == "chain-rule");
  CHECK(r.suites[1].id == "pullback");  // not in the scenario: default parameters
  const json body = json::parse(r.body);
  CHECK(body["provenance"]["seed"] == 99);
  CHECK(body["provenance"]["mode"] == "float");
  CHECK(body["tolerances"]["chain"] == 1e-6);
  CHECK(body["provenance"]["scenario_sha256"] == sha256_hex(text));

  ov.suites = {"bogus"};
  CHECK_THROWS_AS(run_text(text, ov), ConfigError);
}

TEST_CASE("exact mode requires rational data") {
  const json extra = json::parse(R"j({
    "spaces": {"E": {"kind": "sequence"}},
    "maps": {"f": {"map": "linear", "domain": "E", "op": {"op": "diag", "rule": "exp(-k)"}},
             "g": {"map": "linear", "domain": "E", "op": {"op": "shift", "dir": "right"}}}
  })j");
  const json suites = json::parse(R"([{"suite": "chain-rule", "pairs": [["f", "g"], ["g", "g"]],
                                       "points": [{"x": [[1, 0.5]], "h": [[0, 1]]}]}])");
  const Report r = run_text(scenario(suites, extra));
  CHECK(r.exit_code == 0);
  const json w = json::parse(r.body)["suites"][0]["witnesses"];
  CHECK(w["regimes"] == "float+exact");
}
