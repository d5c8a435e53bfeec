#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "babylon/instrument/instrumenter.hpp"
#include "babylon/runtime/trace.hpp"
#include "babylon/runtime/value.hpp"

namespace babylon::runtime {

using instrument::InstrumentedModule;
using lang::NodeId;

struct RuntimeConfig {
  double time_budget_ms = 500.0;
  int snapshot_depth = 3;
  int max_activations = 10000;
};

struct ExampleOutcome {
  enum class Status { Ok, Error, Timeout };
  std::string example_id;
  std::string module;
  std::string name;
  int color_index = 0;
  Status status = Status::Ok;
  std::optional<std::string> error_message;
  SnapshotPtr return_snapshot;
  // Original statement node IDs executed, keyed by module.
  std::map<std::string, std::set<NodeId>> executed_node_ids;
  std::vector<std::string> output_log;  // console output, then host effects
  std::map<std::string, int> slider_counts;  // entries per slider
  double elapsed_ms = 0.0;
};

std::string_view status_name(ExampleOutcome::Status status);

struct ModuleEvaluation {
  std::string module;
  std::optional<std::string> module_error;
  std::vector<ExampleOutcome> outcomes;
};

struct EvaluationResult {
  std::vector<ModuleEvaluation> modules;
  TraceStore trace;
  std::map<std::string, int> load_counts;
};

// Observation points for oracles and phase checks. All optional.
struct Hooks {
  // Every statement executed. example_id is empty outside examples.
  std::function<void(const std::string& example_id, const std::string& module,
                     const lang::Node& statement)>
      on_statement;
  // example_id is empty outside examples.
  std::function<void(const std::string& example_id, const Function& callee)> on_call;
  std::function<void()> on_trace_record;
  std::function<void(const std::string& resource)> on_resource_access;
  // Every console line, inside examples or not.
  std::function<void(const std::string& line)> on_output;
};

// Owns the heap and the host resources, which survive across evaluations.
class Runtime {
 public:
  explicit Runtime(RuntimeConfig config = {});
  ~Runtime();

  RuntimeConfig& config() { return config_; }
  Hooks& hooks() { return hooks_; }
  Heap& heap() { return heap_; }

  // Resources: a BabyLang expression evaluated once, or a built-in mock
  // ("canvas").
  void bind_resource_expression(const std::string& name, const std::string& source);
  void bind_mock(const std::string& name, const std::string& mock);
  void bind_resource(const std::string& name, Value value);
  bool has_resource(const std::string& name) const { return resources_.count(name) > 0; }
  std::set<std::string> resource_names() const;
  Value resource(const std::string& name) const;

  // `order` lists the modules whose examples run, in execution order.
  // `available` maps every loadable module name to its exec tree.
  EvaluationResult evaluate(const std::vector<std::string>& order,
                            const std::map<std::string, std::shared_ptr<const InstrumentedModule>>& available);

  // Drops everything not reachable from resources.
  std::size_t collect_garbage();

 private:
  RuntimeConfig config_;
  Hooks hooks_;
  Heap heap_;
  std::map<std::string, Value> resources_;
};

// Runs `fn` on a thread with a large stack so deep interpreted recursion
// stays within the activation limit rather than the native stack.
void run_with_large_stack(const std::function<void()>& fn, std::size_t stack_bytes = std::size_t{1} << 29);

}  // namespace babylon::runtime
