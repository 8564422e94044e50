#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "scalekit/harness.hpp"

namespace hk = scalekit::harness;

int main(int argc, char** argv) {
  CLI::App app{"scalekit: numerical checks for sc-calculus, splicings and polyfold bundles"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the suites of a scenario file");
  std::string file, report;
  std::vector<std::string> suites;
  double tol = 0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  bool exact = false, flt = false;
  run->add_option("file", file, "scenario file")->required();
  run->add_option("--suite", suites, "run only this suite (repeatable)");
  auto* tol_opt = run->add_option("--tol", tol, "replace every tolerance");
  auto* seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--report", report, "write the JSON report here");
  auto* ex = run->add_flag("--exact", exact, "rational arithmetic where available");
  run->add_flag("--float", flt, "floating-point arithmetic")->excludes(ex);
  run->add_option("--jobs,-j", jobs, "suites run in parallel")->check(CLI::Range(1u, 256u));

  auto* list = app.add_subcommand("list-suites", "print suite names and the statement each checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const auto& s : hk::suite_registry()) std::printf("%-20s %s\n", s.name.c_str(), s.citation.c_str());
    return 0;
  }

  hk::Overrides ov;
  ov.suites = suites;
  if (*tol_opt) ov.tol = tol;
  if (*seed_opt) ov.seed = seed;
  if (exact) ov.mode = scalekit::Regime::exact;
  if (flt) ov.mode = scalekit::Regime::floating;
  ov.jobs = jobs;

  hk::Report r;
  try {
    r = hk::run_file(file, ov);
  } catch (const hk::ConfigError& e) {
    std::cerr << file << (e.location.empty() ? "" : ":" + e.location) << ": " << e.what() << "\n";
    return 2;
  }

  for (const auto& s : r.suites) {
    std::printf("%s %-22s %-18s %7.3fs", s.passed ? "PASS" : "FAIL", s.id.c_str(), s.name.c_str(), s.seconds);
    if (!s.expected) std::printf("  (unexpected)");
    std::printf("\n");
    if (!s.failure.empty()) std::printf("     %s\n", s.failure.c_str());
  }
  if (!report.empty()) {
    try {
      hk::emit(r, report);
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return 2;
    }
  }
  return r.exit_code;
}
