#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "babylon/runtime/runtime.hpp"

namespace babylon::runtime {

struct ModuleRecord {
  enum class State { Unloaded, Loading, Loaded, Failed };
  std::string name;
  std::shared_ptr<const InstrumentedModule> module;
  State state = State::Unloaded;
  std::string error;
  Environment* env = nullptr;
  std::map<std::string, Binding*> exports;
  std::map<std::string, Function*> factories;
  int load_count = 0;
  // Coverage of the running example.
  std::vector<char> seen;
  std::vector<NodeId> hits;
};

struct ModuleError : RuntimeError {
  using RuntimeError::RuntimeError;
};

// Tree-walking evaluator for exec trees. One instance per evaluation run;
// heap cells it allocates outlive it.
class Interpreter {
 public:
  Interpreter(Heap& heap, const RuntimeConfig& config, Hooks& hooks,
              const std::map<std::string, Value>& resources,
              const std::map<std::string, std::shared_ptr<const InstrumentedModule>>& available);

  // Instantiates and runs the module's top level (examples excluded).
  // Throws ModuleError when it or one of its imports fails.
  ModuleRecord& load(const std::string& name);
  ModuleRecord* record(const std::string& name);
  ExampleOutcome run_example(ModuleRecord& record, const lang::Node& block);

  // Evaluates a detached expression tree outside any module.
  Value evaluate_detached(std::shared_ptr<const lang::Node> expr);

  TraceStore& trace() { return trace_; }
  const std::map<std::string, ModuleRecord>& records() const { return records_; }

  // Services for builtins and host resources.
  Heap& heap() { return heap_; }
  Value call(const Value& callee, const Value& self, std::vector<Value> args);
  Value get_property(const Value& target, const std::string& key);
  void set_property(const Value& target, const std::string& key, Value value);
  std::string to_string(const Value& v);
  double to_number(const Value& v);
  static bool truthy(const Value& v);
  static bool strict_equals(const Value& a, const Value& b);
  static bool loose_equals(const Value& a, const Value& b);
  Array* new_array(std::vector<Value> items = {});
  Object* new_object();
  Function* new_native(std::string name, NativeFn fn);
  void log_output(std::string line);

 private:
  enum class Flow { Normal, Return };

  Flow exec(const lang::Node& n, Environment* env);
  Flow exec_block(const lang::Node& block, Environment* env, bool new_scope);
  Value eval(const lang::Node& n, Environment* env);

  Environment* make_env(Environment* parent, bool function_scope);
  void declare(Environment* env, const std::string& name, Value value, const std::string& kind);
  void hoist(const lang::Node& block, Environment* env);
  Function* make_closure(const lang::Node& decl, Environment* env, bool arrow);
  Function* make_class(const lang::Node& decl, Environment* env);
  Value call_function(Function* f, const Value& self, std::vector<Value>& args);
  Value lookup(const std::string& name, Environment* env);
  void assign(const lang::Node& target, Value value, Environment* env);
  Value eval_assignment(const lang::Node& n, Environment* env);
  Value eval_update(const lang::Node& n, Environment* env);
  Value eval_call(const lang::Node& n, Environment* env);
  Value eval_new(const lang::Node& n, Environment* env);
  Value binary(const std::string& op, const Value& a, const Value& b);
  std::string property_key(const Value& key);
  Function* builtin_method(const Value& target, const std::string& key);

  void record_capture(const lang::Node& capture, const Value* value);
  IterationVector iteration_vector() const;
  void cover(const lang::Node& stmt);
  void check_deadline();
  void instantiate(ModuleRecord& rec);

  Heap& heap_;
  const RuntimeConfig& config_;
  Hooks& hooks_;
  const std::map<std::string, Value>& resources_;
  const std::map<std::string, std::shared_ptr<const InstrumentedModule>>& available_;
  std::map<std::string, ModuleRecord> records_;
  Environment* global_ = nullptr;
  std::map<std::string, Function*> method_cache_;

  TraceStore trace_;
  IdentityRegistry identities_;

  // Current example.
  bool in_example_ = false;
  std::string example_id_;
  std::map<std::string, int> counters_;
  IterationVector slider_stack_;
  std::vector<ModuleRecord*> touched_;
  std::vector<std::string> output_;

  ModuleRecord* current_module_ = nullptr;
  std::shared_ptr<const lang::Node> detached_tree_;
  std::chrono::steady_clock::time_point deadline_;
  int depth_ = 0;
  int load_depth_ = 0;
  Value return_value_;
};

void install_builtins(Interpreter& interp, Environment* global);
Value array_method(Interpreter& interp, const std::string& name);
Value string_method(Interpreter& interp, const std::string& name);
std::string json_stringify(Interpreter& interp, const Value& v);
Value json_parse(Interpreter& interp, const std::string& text);
HostResource* make_canvas_mock(Heap& heap);

}  // namespace babylon::runtime
