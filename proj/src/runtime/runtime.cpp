#include "babylon/runtime/runtime.hpp"

#include <fmt/format.h>
#include <pthread.h>

#include <exception>

#include "babylon/lang/parser.hpp"
#include "babylon/runtime/interpreter.hpp"

namespace babylon::runtime {

std::string_view status_name(ExampleOutcome::Status status) {
  switch (status) {
    case ExampleOutcome::Status::Ok: return "ok";
    case ExampleOutcome::Status::Error: return "error";
    case ExampleOutcome::Status::Timeout: return "timeout";
  }
  return "error";
}

Runtime::Runtime(RuntimeConfig config) : config_(config) {}
Runtime::~Runtime() = default;

void Runtime::bind_resource_expression(const std::string& name, const std::string& source) {
  auto expr = std::make_shared<const lang::Node>(lang::parse_expression(source));
  std::map<std::string, std::shared_ptr<const InstrumentedModule>> none;
  Value value;
  std::exception_ptr error;
  run_with_large_stack([&] {
    try {
      Interpreter interp(heap_, config_, hooks_, resources_, none);
      value = interp.evaluate_detached(expr);
    } catch (...) {
      error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  resources_[name] = value;
}

void Runtime::bind_mock(const std::string& name, const std::string& mock) {
  if (mock != "canvas") throw std::invalid_argument(fmt::format("unknown mock \"{}\"", mock));
  resources_[name] = Value(make_canvas_mock(heap_));
}

void Runtime::bind_resource(const std::string& name, Value value) { resources_[name] = value; }

std::set<std::string> Runtime::resource_names() const {
  std::set<std::string> out;
  for (const auto& [k, v] : resources_) out.insert(k);
  return out;
}

Value Runtime::resource(const std::string& name) const {
  auto it = resources_.find(name);
  if (it == resources_.end()) throw std::out_of_range(fmt::format("unknown resource \"{}\"", name));
  return it->second;
}

EvaluationResult Runtime::evaluate(
    const std::vector<std::string>& order,
    const std::map<std::string, std::shared_ptr<const InstrumentedModule>>& available) {
  EvaluationResult result;
  std::exception_ptr error;
  run_with_large_stack([&] {
    try {
      Interpreter interp(heap_, config_, hooks_, resources_, available);
      for (const auto& [name, mod] : available) {
        for (const auto& probe : mod->probes) interp.trace().declare_probe(probe.id);
      }
      for (const std::string& name : order) {
        try {
          interp.load(name);
        } catch (const ModuleError&) {
          // Reported per module below.
        }
      }
      for (const std::string& name : order) {
        ModuleEvaluation me;
        me.module = name;
        ModuleRecord* rec = interp.record(name);
        auto av = available.find(name);
        if (av == available.end()) {
          me.module_error = fmt::format("module '{}' is not available", name);
          result.modules.push_back(std::move(me));
          continue;
        }
        const lang::Node& root = *av->second->exec_tree;
        for (const lang::Node& s : root.children) {
          if (s.kind != lang::NodeKind::ExampleBlock) continue;
          if (rec && rec->state == ModuleRecord::State::Loaded) {
            me.outcomes.push_back(interp.run_example(*rec, s));
            continue;
          }
          ExampleOutcome o;
          o.example_id = s.text;
          o.module = name;
          o.name = s.detail;
          o.color_index = static_cast<int>(s.number);
          o.status = ExampleOutcome::Status::Error;
          o.error_message = fmt::format("module error: {}", rec ? rec->error : "not loaded");
          me.outcomes.push_back(std::move(o));
        }
        if (rec && rec->state == ModuleRecord::State::Failed) me.module_error = rec->error;
        result.modules.push_back(std::move(me));
      }
      for (const auto& [name, rec] : interp.records()) result.load_counts[name] = rec.load_count;
      result.trace = std::move(interp.trace());
    } catch (...) {
      error = std::current_exception();
    }
  });
  if (error) std::rethrow_exception(error);
  return result;
}

std::size_t Runtime::collect_garbage() {
  std::vector<Value> roots;
  for (const auto& [k, v] : resources_) roots.push_back(v);
  return heap_.collect(roots);
}

namespace {

struct ThreadTask {
  const std::function<void()>* fn;
  std::exception_ptr error;
};

void* thread_main(void* arg) {
  auto* task = static_cast<ThreadTask*>(arg);
  try {
    (*task->fn)();
  } catch (...) {
    task->error = std::current_exception();
  }
  return nullptr;
}

}  // namespace

void run_with_large_stack(const std::function<void()>& fn, std::size_t stack_bytes) {
  pthread_attr_t attr;
  pthread_attr_init(&attr);
  pthread_attr_setstacksize(&attr, stack_bytes);
  ThreadTask task{&fn, nullptr};
  pthread_t thread;
  int rc = pthread_create(&thread, &attr, thread_main, &task);
  pthread_attr_destroy(&attr);
  if (rc != 0) {
    // Fall back to the calling thread.
    fn();
    return;
  }
  pthread_join(thread, nullptr);
  if (task.error) std::rethrow_exception(task.error);
}

}  // namespace babylon::runtime
