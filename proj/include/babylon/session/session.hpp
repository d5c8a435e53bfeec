#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "babylon/annotations/annotation.hpp"
#include "babylon/annotations/templates.hpp"
#include "babylon/instrument/instrumenter.hpp"
#include "babylon/lang/ast.hpp"
#include "babylon/runtime/runtime.hpp"

namespace babylon::session {

using lang::SourcePos;
using lang::SourceSpan;

struct SessionConfig {
  double time_budget_ms = 500.0;
  int snapshot_depth = 3;
  int max_activations = 10000;
  int debounce_ms = 300;
};

// A resource is a literal expression or a built-in mock host.
struct ResourceSpec {
  enum class Kind { Expression, Mock };
  Kind kind = Kind::Expression;
  std::string text;

  // Accepts "expr", {"expression": "expr"} or {"mock": "canvas"}.
  static ResourceSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct PhaseTimings {
  double parse_ms = 0;
  double transform_ms = 0;
  double execute_ms = 0;
  double update_ms = 0;

  double adaptation_ms() const { return parse_ms + transform_ms; }
  double emergence_ms() const { return execute_ms + update_ms; }
};

struct ProbeRow {
  std::string example_id;
  std::string example_name;
  int color_index = 0;
  std::vector<runtime::CapturePoint> points;
};

struct ProbeReport {
  std::string id;
  std::string module;
  std::string label;
  std::string kind;
  SourceSpan span;
  std::vector<ProbeRow> rows;
  bool stale = false;
};

struct SliderReport {
  std::string id;
  std::string module;
  std::string label;
  SourceSpan span;
  std::map<std::string, int> iterations;  // example ID -> entries
  bool stale = false;
};

struct ExampleReport {
  std::string id;
  std::string module;
  std::string name;
  std::string callable;
  int color_index = 0;
  bool enabled = true;
  SourceSpan span;
  // Unset for disabled examples.
  std::optional<runtime::ExampleOutcome::Status> status;
  std::optional<std::string> error_message;
  runtime::SnapshotPtr return_snapshot;
  std::vector<std::string> output_log;
  double elapsed_ms = 0;
  std::map<std::string, std::set<int>> coverage_lines;  // module -> lines
  bool stale = false;
};

struct ModuleReport {
  std::string name;
  bool in_scope = false;
  bool stale = false;
  std::optional<std::string> parse_error;
  std::optional<SourceSpan> parse_error_span;
  std::vector<std::string> diagnostics;
  std::set<int> executable_lines;
  std::set<int> faded_lines;
};

struct EvaluationReport {
  int revision = 0;
  std::vector<std::string> execution_order;
  std::vector<ModuleReport> modules;
  std::vector<ExampleReport> examples;  // per module in name order, document order within
  std::vector<ProbeReport> probes;
  std::vector<SliderReport> sliders;
  std::map<std::string, int> load_counts;
  std::shared_ptr<const runtime::TraceStore> trace;
  PhaseTimings timings;

  const ModuleReport* module(const std::string& name) const;
  const ExampleReport* example(const std::string& id) const;
  const ExampleReport* example_named(const std::string& module, const std::string& name) const;
  const ProbeReport* probe(const std::string& id) const;
  const SliderReport* slider(const std::string& id) const;
  bool examples_ok() const;     // every enabled example finished ok
  bool inputs_valid() const;    // no parse, annotation or instrumentation error
};

// Start lines of the statements inside function bodies.
std::set<int> executable_lines(const lang::IdentifiedAst& ast);

// Executable lines minus the lines any enabled example executed. With no
// enabled example nothing is faded.
std::map<std::string, std::set<int>> compute_faded_lines(
    const std::map<std::string, std::set<int>>& executable,
    const std::vector<std::map<std::string, std::set<int>>>& enabled_coverage);

// Counts phase-boundary violations observed through the instrumentation
// hooks.
struct PhaseAudit {
  int parses_during_emergence = 0;
  int trace_records_during_adaptation = 0;
  int resource_accesses_during_adaptation = 0;
};

// Source edits shared by Session and Worker. with_annotation replaces the
// annotation comment starting at `at`, or inserts one there.
std::string with_annotation(std::string_view text, SourcePos at, const annotations::Annotation& annotation);
// Throws std::invalid_argument when no example has that name.
std::string with_example_enabled(std::string_view text, const std::string& name, bool enabled);

using Subscriber = std::function<void(std::shared_ptr<const EvaluationReport>)>;

// A set of modules evaluated together. Not thread-safe; see Worker.
class Session {
 public:
  explicit Session(SessionConfig config = {});
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const SessionConfig& config() const { return config_; }
  void set_config(const SessionConfig& config);

  // Adds the module when it is new.
  void update_source(const std::string& module, std::string text);
  void remove_module(const std::string& module);
  bool has_module(const std::string& module) const { return modules_.count(module) > 0; }
  std::vector<std::string> module_names() const;
  const std::string& source(const std::string& module) const;
  // Last successful parse, if any.
  const lang::IdentifiedAst* ast(const std::string& module) const;

  // Throws annotations::TemplateSyntaxError.
  void set_templates(const std::string& sidecar);
  const std::vector<annotations::CustomTemplate>& templates() const { return templates_; }

  // Throws lang::ParseError or runtime errors from evaluating the expression.
  void set_resource(const std::string& name, const ResourceSpec& spec);

  // Annotation edits rewrite the stored source. set_annotation replaces the
  // annotation comment starting at `at`, or inserts one there.
  void set_annotation(const std::string& module, SourcePos at, const annotations::Annotation& annotation);
  void remove_annotation(const std::string& module, SourcePos at);
  // Toggles the example comment with the given name. Throws
  // std::invalid_argument when there is none.
  void set_example_enabled(const std::string& module, const std::string& name, bool enabled);

  // Annotation kinds applicable to the innermost node at `at`.
  std::vector<std::string> applicable_annotations(const std::string& module, SourcePos at) const;

  // Runs parse, transform, execute and update. Returns null when `cancelled`
  // reports true before execution starts.
  std::shared_ptr<const EvaluationReport> evaluate(const std::function<bool()>& cancelled = {});
  std::shared_ptr<const EvaluationReport> last_report() const { return last_report_; }
  int revision() const { return revision_; }

  int subscribe(Subscriber subscriber);
  void unsubscribe(int id);

  runtime::Runtime& runtime() { return *runtime_; }
  const PhaseAudit& audit() const { return audit_; }

 private:
  struct ModuleState;
  enum class Phase { Idle, Parse, Transform, Execute, Update };

  void parse_dirty();
  ModuleState& state(const std::string& module);
  const ModuleState& state(const std::string& module) const;

  SessionConfig config_;
  std::map<std::string, std::unique_ptr<ModuleState>> modules_;
  std::vector<annotations::CustomTemplate> templates_;
  std::map<std::string, ResourceSpec> resources_;
  std::unique_ptr<runtime::Runtime> runtime_;
  std::map<int, Subscriber> subscribers_;
  int next_subscriber_ = 1;
  int revision_ = 0;
  std::shared_ptr<const EvaluationReport> last_report_;
  Phase phase_ = Phase::Idle;
  PhaseAudit audit_;
};

}  // namespace babylon::session
