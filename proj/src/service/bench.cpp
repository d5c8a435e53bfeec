#include "babylon/service/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace babylon::service {

namespace {

using Clock = std::chrono::steady_clock;

struct ScenarioFiles {
  std::vector<std::string> files;
  std::vector<std::vector<std::string>> editors;
};

const std::map<std::string, ScenarioFiles>& scenario_table() {
  static const std::map<std::string, ScenarioFiles> table = {
      {"baseline", {{"baseline/empty.baby"}, {{"empty"}}}},
      {"simple", {{"simple/simple.baby", "simple/person.baby"}, {{"simple"}}}},
      {"simple_two_editors", {{"simple/simple.baby", "simple/person.baby"}, {{"simple"}, {"person"}}}},
      {"complex", {{"complex/expression.baby", "complex/symbols.baby"}, {{"expression"}}}},
      {"complex_two_editors", {{"complex/expression.baby", "complex/symbols.baby"}, {{"expression"}, {"symbols"}}}},
  };
  return table;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string stem(const std::string& path) {
  std::string name = path.substr(path.find_last_of('/') + 1);
  return name.substr(0, name.rfind('.'));
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"baseline", "simple", "simple_two_editors", "complex", "complex_two_editors"};
}

BenchScenario load_scenario(const std::string& name, const std::string& fixture_dir) {
  auto it = scenario_table().find(name);
  if (it == scenario_table().end()) throw std::invalid_argument(fmt::format("unknown scenario \"{}\"", name));
  BenchScenario s;
  s.name = name;
  for (const auto& f : it->second.files) s.modules.emplace_back(stem(f), read_file(fixture_dir + "/" + f));
  s.templates = read_file(fixture_dir + "/templates.babytpl");
  s.resources = nlohmann::json::parse(read_file(fixture_dir + "/resources.json"));
  s.editors = it->second.editors;
  return s;
}

PhaseStats phase_stats(std::vector<double> samples) {
  PhaseStats st;
  if (samples.empty()) return st;
  std::sort(samples.begin(), samples.end());
  std::size_t n = samples.size();
  st.median = n % 2 ? samples[n / 2] : (samples[n / 2 - 1] + samples[n / 2]) / 2;
  if (n > 1) {
    double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double sq = 0;
    for (double v : samples) sq += (v - mean) * (v - mean);
    st.stddev = std::sqrt(sq / (n - 1));
  }
  return st;
}

BenchResult bench(const BenchScenario& scenario, int repetitions, int interval_ms, const session::SessionConfig& config) {
  if (repetitions < 1) throw std::invalid_argument("repetitions must be at least 1");
  session::Session s(config);
  s.set_templates(scenario.templates);
  for (const auto& [name, spec] : scenario.resources.items()) s.set_resource(name, session::ResourceSpec::from_json(spec));

  std::vector<ModuleSources> editor_sources;
  for (const auto& editor : scenario.editors) {
    ModuleSources open;
    for (const auto& m : editor) {
      for (const auto& [name, text] : scenario.modules) {
        if (name == m) open.emplace_back(name, text);
      }
    }
    editor_sources.push_back(std::move(open));
  }
  std::size_t rendered = 0;
  s.subscribe([&](std::shared_ptr<const session::EvaluationReport> r) {
    for (const auto& open : editor_sources) rendered += annotated_text(*r, open).size();
  });

  BenchResult result;
  result.scenario = scenario.name;
  result.repetitions = repetitions;
  auto next = Clock::now();
  for (int i = 0; i < repetitions; ++i) {
    if (interval_ms > 0) {
      std::this_thread::sleep_until(next);
      next += std::chrono::milliseconds(interval_ms);
    }
    for (const auto& [name, text] : scenario.modules) s.update_source(name, text);
    auto t0 = Clock::now();
    auto report = s.evaluate();
    double total = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    session::PhaseTimings t = report->timings;
    // Subscribers run after the update phase closes; charge them to it.
    t.update_ms = total - t.parse_ms - t.transform_ms - t.execute_ms;
    result.samples.push_back(t);
  }
  (void)rendered;

  auto column = [&](auto get) {
    std::vector<double> v;
    for (const auto& t : result.samples) v.push_back(get(t));
    return phase_stats(std::move(v));
  };
  result.parse = column([](const auto& t) { return t.parse_ms; });
  result.transform = column([](const auto& t) { return t.transform_ms; });
  result.execute = column([](const auto& t) { return t.execute_ms; });
  result.update = column([](const auto& t) { return t.update_ms; });
  result.adaptation = column([](const auto& t) { return t.adaptation_ms(); });
  result.emergence = column([](const auto& t) { return t.emergence_ms(); });
  return result;
}

std::string bench_header() {
  return fmt::format("{:<22}|{:^34}|{:^34}|\n{:<22}|{:>17}{:>17}|{:>17}{:>17}| {:>17}{:>17}\n", "", "Adaptation",
                     "Emergence", "scenario", "parse", "transform", "execute", "update", "adaptation", "emergence");
}

std::string bench_row(const BenchResult& r) {
  auto cell = [](const PhaseStats& s) { return fmt::format("{:.3f} ± {:.3f}", s.median, s.stddev); };
  return fmt::format("{:<22}|{:>17}{:>17}|{:>17}{:>17}| {:>17}{:>17}\n", r.scenario, cell(r.parse), cell(r.transform),
                     cell(r.execute), cell(r.update), cell(r.adaptation), cell(r.emergence));
}

}  // namespace babylon::service
