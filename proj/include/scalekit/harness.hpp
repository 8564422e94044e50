#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scalekit/numeric.hpp"

namespace scalekit::harness {

inline constexpr const char* kReportVersion = "scalekit-report/1";
inline constexpr const char* kScenarioVersion = "scalekit-scenario/1";

// Parse or validation failure; `location` is "line:col" for syntax errors, a JSON pointer otherwise.
struct ConfigError : std::runtime_error {
  ConfigError(std::string loc, const std::string& msg) : std::runtime_error(msg), location(std::move(loc)) {}
  std::string location;
};

struct SuiteInfo {
  std::string name;
  std::string citation;
};
const std::vector<SuiteInfo>& suite_registry();

struct Overrides {
  std::vector<std::string> suites;  // empty: every suite in the scenario
  std::optional<double> tol;        // replaces every tolerance
  std::optional<std::uint64_t> seed;
  std::optional<Regime> mode;
  unsigned jobs = 1;
};

struct SuiteOutcome {
  std::string id;
  std::string name;
  bool passed = false;    // the checks themselves
  bool expected = true;   // passed == (expect != "fail")
  std::string failure;
  double seconds = 0.0;
};

struct Report {
  std::string body;    // canonical JSON text of everything except timing
  std::string timing;  // canonical JSON text of the timing object
  std::vector<SuiteOutcome> suites;  // sorted by id
  int exit_code = 0;   // 0 all as expected, 1 otherwise
  std::string document() const;  // {"body":..., "timing":...} as one canonical document
};

// Exit code 2 is reported by throwing ConfigError.
Report run_text(const std::string& text, const Overrides& ov = {});
Report run_file(const std::string& path, const Overrides& ov = {});
void emit(const Report& r, const std::string& path);

std::string sha256_hex(const std::string& bytes);

}  // namespace scalekit::harness
