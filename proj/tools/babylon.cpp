#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "babylon/service/bench.hpp"
#include "babylon/service/protocol.hpp"
#include "babylon/service/report.hpp"
#include "babylon/service/server.hpp"

#ifndef BABYLON_FIXTURE_DIR
#define BABYLON_FIXTURE_DIR "fixtures"
#endif

namespace {

using namespace babylon;

struct FileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(fmt::format("cannot read {}", path));
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string module_name(const std::string& path) {
  std::string name = path.substr(path.find_last_of('/') + 1);
  return name.substr(0, name.rfind('.'));
}

struct RunOptions {
  std::vector<std::string> paths;
  std::string templates;
  std::string resources;
  double budget_ms = 500;
  int depth = 3;
  std::string format = "annotated";
  bool timings = false;
};

int run(const RunOptions& o) {
  session::SessionConfig config;
  config.time_budget_ms = o.budget_ms;
  config.snapshot_depth = o.depth;
  session::Session s(config);
  service::ModuleSources sources;
  try {
    if (!o.templates.empty()) s.set_templates(read_file(o.templates));
    if (!o.resources.empty()) {
      auto j = nlohmann::json::parse(read_file(o.resources));
      for (const auto& [name, spec] : j.items()) s.set_resource(name, session::ResourceSpec::from_json(spec));
    }
    std::set<std::string> seen;
    for (const auto& path : o.paths) {
      std::string name = module_name(path);
      if (!seen.insert(name).second) throw FileError(fmt::format("two files define module \"{}\"", name));
      std::string text = read_file(path);
      s.update_source(name, text);
      sources.emplace_back(name, text);
    }
  } catch (const std::exception& e) {
    std::cerr << "babylon: " << e.what() << "\n";
    return 2;
  }
  auto report = s.evaluate();
  if (o.format == "structured") {
    std::cout << service::structured_text(*report, {.timings = o.timings});
  } else {
    std::cout << service::annotated_text(*report, sources);
  }
  std::cout.flush();
  return service::exit_code(*report);
}

int bench(const std::string& scenario, int reps, int interval_ms, const std::string& fixtures) {
  std::vector<std::string> names = scenario == "all" ? service::scenario_names() : std::vector<std::string>{scenario};
  std::vector<service::BenchScenario> loaded;
  try {
    for (const auto& n : names) loaded.push_back(service::load_scenario(n, fixtures));
  } catch (const std::exception& e) {
    std::cerr << "babylon: " << e.what() << "\n";
    return 2;
  }
  std::cout << fmt::format("median ± stddev in ms over {} repetitions; update is report assembly and rendering\n", reps);
  std::cout << service::bench_header();
  for (const auto& sc : loaded) {
    std::cout << service::bench_row(service::bench(sc, reps, interval_ms));
    std::cout.flush();
  }
  return 0;
}

int serve(int port, const session::SessionConfig& config) {
  service::ProtocolService protocol(config);
  service::Server server(protocol, static_cast<std::uint16_t>(port));
  std::cerr << fmt::format("babylon: listening on ws://127.0.0.1:{}\n", server.port());
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Example-based live programming engine for BabyLang"};
  app.require_subcommand(1);

  RunOptions ro;
  auto* run_cmd = app.add_subcommand("run", "Evaluate modules once and print the report");
  run_cmd->add_option("paths", ro.paths, "BabyLang modules")->required();
  run_cmd->add_option("--templates", ro.templates, "Custom template sidecar file");
  run_cmd->add_option("--resources", ro.resources, "JSON file mapping resource names to expressions or mocks");
  run_cmd->add_option("--budget-ms", ro.budget_ms, "Time budget per example")->check(CLI::PositiveNumber);
  run_cmd->add_option("--depth", ro.depth, "Snapshot depth")->check(CLI::Range(1, 64));
  run_cmd->add_option("--format", ro.format, "Output format")->check(CLI::IsMember({"annotated", "structured"}));
  run_cmd->add_flag("--timings", ro.timings, "Include timings in structured output");

  std::string scenario;
  int reps = 100;
  int interval = 5000;
  std::string fixtures = BABYLON_FIXTURE_DIR;
  auto* bench_cmd = app.add_subcommand("bench", "Time the four evaluation phases");
  bench_cmd->add_option("scenario", scenario, "baseline, simple, simple_two_editors, complex, complex_two_editors or all")
      ->required();
  bench_cmd->add_option("reps", reps, "Repetitions")->check(CLI::PositiveNumber);
  bench_cmd->add_option("interval", interval, "Milliseconds between change events")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--fixtures", fixtures, "Fixture directory");

  int port = 8765;
  session::SessionConfig config;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the wire protocol over WebSocket");
  serve_cmd->add_option("--port", port, "TCP port, 0 for any")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--budget-ms", config.time_budget_ms, "Time budget per example")->check(CLI::PositiveNumber);
  serve_cmd->add_option("--depth", config.snapshot_depth, "Snapshot depth")->check(CLI::Range(1, 64));
  serve_cmd->add_option("--debounce-ms", config.debounce_ms, "Quiet period before evaluating")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (*run_cmd) return run(ro);
  if (*bench_cmd) return bench(scenario, reps, interval, fixtures);
  return serve(port, config);
}
