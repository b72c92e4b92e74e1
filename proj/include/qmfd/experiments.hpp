#pragma once

#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmfd/config.hpp"

namespace qmfd {

// One pass/fail check. Bounds left at NaN are not enforced.
struct Criterion {
  std::string name;
  double value = 0;
  double lower = std::numeric_limits<double>::quiet_NaN();
  double upper = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
  std::string note;
};

struct ExperimentResult {
  std::string experiment;
  int exit_code = 0;  // 0 all pass, 1 numerical failure, 2 invalid config
  std::vector<Criterion> criteria;
  nlohmann::json metrics = nlohmann::json::object();
  std::vector<std::string> files;
  std::vector<std::string> failures;
  double wall_time = 0;
  nlohmann::json summary;  // what went into summary.json
};

inline constexpr int kSummarySchemaVersion = 1;

// Validates, runs, writes <output>/<experiment>*.csv and summary.json.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace qmfd
