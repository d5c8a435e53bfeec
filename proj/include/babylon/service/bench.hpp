#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

#include "babylon/service/report.hpp"

namespace babylon::service {

// Modules open in each editor; every editor renders its modules after
// each evaluation.
struct BenchScenario {
  std::string name;
  ModuleSources modules;
  std::string templates;
  nlohmann::json resources = nlohmann::json::object();
  std::vector<std::vector<std::string>> editors;
};

std::vector<std::string> scenario_names();
// Reads the shipped fixtures under `fixture_dir`. Throws
// std::invalid_argument for an unknown name.
BenchScenario load_scenario(const std::string& name, const std::string& fixture_dir);

struct PhaseStats {
  double median = 0;
  double stddev = 0;  // sample standard deviation, 0 for one sample
};

PhaseStats phase_stats(std::vector<double> samples);

struct BenchResult {
  std::string scenario;
  int repetitions = 0;
  PhaseStats parse, transform, execute, update;
  PhaseStats adaptation, emergence;
  std::vector<session::PhaseTimings> samples;
};

// Fires a change event on every module each repetition, then records the
// four phase durations. Update covers report assembly plus rendering the
// report for every editor.
BenchResult bench(const BenchScenario& scenario, int repetitions, int interval_ms,
                  const session::SessionConfig& config = {});

std::string bench_header();
// One row: name, then median ± stddev for each phase.
std::string bench_row(const BenchResult& result);

}  // namespace babylon::service
