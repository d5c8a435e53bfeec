#include "babylon/runtime/interpreter.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "babylon/lang/printer.hpp"
#include "babylon/runtime/numbers.hpp"

namespace babylon::runtime {

using lang::Node;
using lang::NodeKind;
using Clock = std::chrono::steady_clock;

namespace {

std::string describe_callee(const Node& n) {
  try {
    return lang::print_expression(n);
  } catch (const std::exception&) {
    return "expression";
  }
}

std::optional<std::size_t> array_index(const std::string& key) {
  if (key.empty() || key.size() > 9) return std::nullopt;
  if (key.size() > 1 && key[0] == '0') return std::nullopt;
  std::size_t out = 0;
  for (char c : key) {
    if (c < '0' || c > '9') return std::nullopt;
    out = out * 10 + static_cast<std::size_t>(c - '0');
  }
  return out;
}

std::optional<std::size_t> array_index(double d) {
  if (d < 0 || d != std::floor(d) || d > 4e9) return std::nullopt;
  return static_cast<std::size_t>(d);
}

std::size_t code_points(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n;
}

bool declares_lexically(const Node& block) {
  for (const Node& s : block.children) {
    const Node* d = &s;
    if (d->kind == NodeKind::ExportDecl) d = &d->children[0];
    if ((d->kind == NodeKind::VarDecl && d->text != "var") || d->kind == NodeKind::FunctionDecl ||
        d->kind == NodeKind::ClassDecl || d->kind == NodeKind::FactoryDecl) {
      return true;
    }
  }
  return false;
}

struct Restore {
  ModuleRecord*& slot;
  ModuleRecord* saved;
  int& depth;
  ~Restore() {
    slot = saved;
    --depth;
  }
};

}  // namespace

Interpreter::Interpreter(Heap& heap, const RuntimeConfig& config, Hooks& hooks,
                         const std::map<std::string, Value>& resources,
                         const std::map<std::string, std::shared_ptr<const InstrumentedModule>>& available)
    : heap_(heap), config_(config), hooks_(hooks), resources_(resources), available_(available) {
  global_ = make_env(nullptr, true);
  install_builtins(*this, global_);
  deadline_ = Clock::now() + std::chrono::microseconds(static_cast<long>(config_.time_budget_ms * 1000));
}

Environment* Interpreter::make_env(Environment* parent, bool function_scope) {
  Environment* env = heap_.make<Environment>();
  env->parent = parent;
  env->function_scope = function_scope;
  return env;
}

Array* Interpreter::new_array(std::vector<Value> items) {
  Array* a = heap_.make<Array>();
  a->items = std::move(items);
  return a;
}

Object* Interpreter::new_object() { return heap_.make<Object>(); }

Function* Interpreter::new_native(std::string name, NativeFn fn) {
  Function* f = heap_.make<Function>();
  f->kind = Function::Kind::Native;
  f->name = std::move(name);
  f->native = std::move(fn);
  return f;
}

void Interpreter::log_output(std::string line) {
  if (hooks_.on_output) hooks_.on_output(line);
  if (in_example_) output_.push_back(std::move(line));
}

void Interpreter::check_deadline() {
  if (Clock::now() > deadline_) {
    throw TimeoutError(fmt::format("exceeded the time budget of {} ms", format_number(config_.time_budget_ms)));
  }
}

// ---------------------------------------------------------------------------
// Modules

ModuleRecord* Interpreter::record(const std::string& name) {
  auto it = records_.find(name);
  return it == records_.end() ? nullptr : &it->second;
}

void Interpreter::instantiate(ModuleRecord& rec) {
  rec.env = make_env(global_, true);
  const Node& root = *rec.module->exec_tree;
  NodeId max_origin = 0;
  for (NodeId id : rec.module->id_map) max_origin = std::max(max_origin, id);
  rec.seen.assign(static_cast<std::size_t>(max_origin) + 1, 0);

  for (const Node& s : root.children) {
    const Node* d = &s;
    bool exported = false;
    if (d->kind == NodeKind::ExportDecl) {
      exported = true;
      const Node& inner = d->children[0];
      if (lang::is_expression_kind(inner.kind)) {
        Binding& b = rec.env->vars["*default*"];
        b.initialized = false;
        rec.exports["default"] = &b;
        continue;
      }
      d = &inner;
    }
    std::vector<std::string> names;
    if (d->kind == NodeKind::FunctionDecl) {
      Binding& b = rec.env->vars[d->text];
      b = Binding{Value(make_closure(*d, rec.env, false))};
      names.push_back(d->text);
    } else if (d->kind == NodeKind::ClassDecl) {
      rec.env->vars[d->text].initialized = false;
      names.push_back(d->text);
    } else if (d->kind == NodeKind::VarDecl) {
      for (const Node& decl : d->children) {
        Binding& b = rec.env->vars[decl.children[0].text];
        b.initialized = d->text == "var";
        names.push_back(decl.children[0].text);
      }
    }
    if (!exported) continue;
    for (const std::string& n : names) {
      Binding* b = &rec.env->vars[n];
      rec.exports[s.has_flag(lang::kFlagDefault) ? "default" : n] = b;
    }
  }
}

ModuleRecord& Interpreter::load(const std::string& name) {
  auto it = records_.find(name);
  if (it == records_.end()) {
    auto av = available_.find(name);
    if (av == available_.end()) throw ModuleError(fmt::format("module '{}' is not available", name));
    it = records_.emplace(name, ModuleRecord{}).first;
    it->second.name = name;
    it->second.module = av->second;
  }
  ModuleRecord& rec = it->second;
  switch (rec.state) {
    case ModuleRecord::State::Loaded:
    case ModuleRecord::State::Loading:
      return rec;
    case ModuleRecord::State::Failed:
      throw ModuleError(rec.error);
    case ModuleRecord::State::Unloaded:
      break;
  }
  rec.state = ModuleRecord::State::Loading;
  ++rec.load_count;
  if (!in_example_ && load_depth_ == 0) {
    deadline_ = Clock::now() + std::chrono::microseconds(static_cast<long>(config_.time_budget_ms * 1000));
  }
  ++load_depth_;
  ModuleRecord* saved = current_module_;
  Restore restore{current_module_, saved, load_depth_};
  current_module_ = &rec;
  instantiate(rec);

  auto fail = [&](const std::string& message) {
    rec.state = ModuleRecord::State::Failed;
    rec.error = message;
    return ModuleError(message);
  };
  const Node& root = *rec.module->exec_tree;
  try {
    for (const Node& s : root.children) {
      if (s.kind != NodeKind::ImportDecl) continue;
      ModuleRecord* dep = nullptr;
      try {
        dep = &load(s.detail);
      } catch (const ModuleError& e) {
        throw fail(fmt::format("import of '{}' failed: {}", s.detail, e.what()));
      }
      current_module_ = &rec;
      for (const Node& b : s.children) {
        if (b.has_flag(lang::kFlagNamespace)) {
          Object* ns = new_object();
          for (auto& [k, src] : dep->exports) {
            if (src->target().initialized) ns->props.set(k, src->target().value);
          }
          rec.env->vars[b.text] = Binding{Value(ns)};
          continue;
        }
        auto ex = dep->exports.find(b.detail);
        if (ex == dep->exports.end()) {
          throw fail(fmt::format("module '{}' has no export '{}'", s.detail, b.detail));
        }
        Binding alias;
        alias.alias = ex->second;
        alias.alias_owner = dep->env;
        rec.env->vars[b.text] = alias;
      }
    }
    for (const Node& s : root.children) {
      if (s.kind == NodeKind::ImportDecl || s.kind == NodeKind::ExampleBlock) continue;
      exec(s, rec.env);
    }
  } catch (const ModuleError& e) {
    if (rec.state != ModuleRecord::State::Failed) throw fail(e.what());
    throw;
  } catch (const RuntimeError& e) {
    throw fail(e.what());
  } catch (const TimeoutError& e) {
    throw fail(e.what());
  }
  rec.state = ModuleRecord::State::Loaded;
  return rec;
}

Value Interpreter::evaluate_detached(std::shared_ptr<const Node> expr) {
  detached_tree_ = std::move(expr);
  deadline_ = Clock::now() + std::chrono::microseconds(static_cast<long>(config_.time_budget_ms * 1000));
  return eval(*detached_tree_, make_env(global_, true));
}

// ---------------------------------------------------------------------------
// Examples

ExampleOutcome Interpreter::run_example(ModuleRecord& rec, const Node& block) {
  ExampleOutcome out;
  out.example_id = block.text;
  out.module = rec.name;
  out.name = block.detail;
  out.color_index = static_cast<int>(block.number);

  in_example_ = true;
  example_id_ = block.text;
  counters_.clear();
  slider_stack_.clear();
  touched_.clear();
  output_.clear();
  current_module_ = &rec;
  depth_ = 0;
  std::map<HostResource*, std::size_t> effects_before;
  for (auto& [name, v] : resources_) {
    if (v.is_resource()) effects_before[v.as_resource()] = v.as_resource()->output_log().size();
  }
  auto start = Clock::now();
  deadline_ = start + std::chrono::microseconds(static_cast<long>(config_.time_budget_ms * 1000));

  try {
    Environment* env = make_env(rec.env, true);
    Value self = eval(block.children[1], env);
    env->vars["this"] = Binding{self};
    std::vector<Value> args;
    for (const Node& decl : block.children[2].children) {
      exec(decl, env);
      args.push_back(env->vars[decl.children[0].children[0].text].value);
    }
    exec_block(block.children[3], env, false);
    // The prescript may rebind parameters.
    args.clear();
    for (const Node& decl : block.children[2].children) {
      args.push_back(env->vars[decl.children[0].children[0].text].value);
    }

    const Node& callee = block.children[0];
    Value fn;
    if (callee.kind == NodeKind::Member) {
      Value cls = eval(callee.children[0], env);
      if (!cls.is_function() || cls.as_function()->kind != Function::Kind::Class) {
        throw RuntimeError(fmt::format("{} is not a class", callee.children[0].text));
      }
      Function* c = cls.as_function();
      if (block.has_flag(lang::kFlagStatic)) {
        const Value* m = c->props.find(callee.text);
        if (m) fn = *m;
      } else {
        auto m = c->methods.find(callee.text);
        if (m != c->methods.end()) fn = Value(m->second);
      }
      if (fn.is_null()) throw RuntimeError(fmt::format("{} has no method {}", c->name, callee.text));
    } else {
      fn = eval(callee, env);
    }
    Value result = call(fn, self, std::move(args));
    exec_block(block.children[4], env, false);
    out.return_snapshot = snapshot(result, config_.snapshot_depth, identities_);
  } catch (const TimeoutError& e) {
    out.status = ExampleOutcome::Status::Timeout;
    out.error_message = e.what();
  } catch (const RuntimeError& e) {
    out.status = ExampleOutcome::Status::Error;
    out.error_message = e.what();
  }
  out.elapsed_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();

  in_example_ = false;
  out.slider_counts = counters_;
  slider_stack_.clear();
  for (ModuleRecord* m : touched_) {
    auto& ids = out.executed_node_ids[m->name];
    for (NodeId id : m->hits) {
      ids.insert(id);
      m->seen[static_cast<std::size_t>(id)] = 0;
    }
    m->hits.clear();
  }
  touched_.clear();
  out.output_log = std::move(output_);
  output_.clear();
  for (auto& [res, before] : effects_before) {
    std::vector<std::string> log = res->output_log();
    for (std::size_t i = before; i < log.size(); ++i) out.output_log.push_back(log[i]);
  }
  return out;
}

void Interpreter::cover(const Node& stmt) {
  if (!current_module_) return;
  if (hooks_.on_statement) hooks_.on_statement(in_example_ ? example_id_ : std::string(), current_module_->name, stmt);
  if (!in_example_) return;
  if (stmt.has_flag(lang::kFlagSynthetic) || stmt.origin < 0) return;
  ModuleRecord& m = *current_module_;
  auto idx = static_cast<std::size_t>(stmt.origin);
  if (idx >= m.seen.size()) return;
  if (m.hits.empty()) touched_.push_back(&m);
  if (!m.seen[idx]) {
    m.seen[idx] = 1;
    m.hits.push_back(stmt.origin);
  }
}

IterationVector Interpreter::iteration_vector() const {
  IterationVector out;
  for (auto it = slider_stack_.rbegin(); it != slider_stack_.rend(); ++it) {
    bool seen = false;
    for (auto& e : out) seen = seen || e.first == it->first;
    if (!seen) out.push_back(*it);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

void Interpreter::record_capture(const Node& capture, const Value* value) {
  if (!in_example_) return;
  if (hooks_.on_trace_record) hooks_.on_trace_record();
  TraceEvent ev;
  ev.probe_id = capture.text;
  ev.example_id = example_id_;
  ev.phase = capture.has_flag(lang::kFlagAfter) ? Phase::After : Phase::Before;
  ev.capture_index = static_cast<int>(capture.number);
  ev.iteration_vector = iteration_vector();
  ev.snapshot = value ? snapshot(*value, config_.snapshot_depth, identities_) : unavailable_snapshot();
  trace_.record(std::move(ev));
}

// ---------------------------------------------------------------------------
// Statements

void Interpreter::declare(Environment* env, const std::string& name, Value value, const std::string& kind) {
  Environment* target = kind == "var" ? env->function_env() : env;
  Binding& b = target->vars[name];
  b.value = std::move(value);
  b.initialized = true;
  b.is_const = kind == "const";
  b.alias = nullptr;
}

void Interpreter::hoist(const Node& block, Environment* env) {
  for (const Node& s : block.children) {
    if (s.kind == NodeKind::FunctionDecl) declare(env, s.text, Value(make_closure(s, env, false)), "let");
  }
}

Interpreter::Flow Interpreter::exec_block(const Node& block, Environment* env, bool new_scope) {
  Environment* scope = env;
  if (new_scope && declares_lexically(block)) scope = make_env(env, false);
  hoist(block, scope);
  std::size_t mark = slider_stack_.size();
  for (const Node& s : block.children) {
    if (exec(s, scope) == Flow::Return) {
      if (slider_stack_.size() > mark) slider_stack_.resize(mark);
      return Flow::Return;
    }
  }
  if (slider_stack_.size() > mark) slider_stack_.resize(mark);
  return Flow::Normal;
}

Interpreter::Flow Interpreter::exec(const Node& n, Environment* env) {
  switch (n.kind) {
    case NodeKind::GuardCheck:
      check_deadline();
      return Flow::Normal;
    case NodeKind::CounterBump:
      if (in_example_) slider_stack_.emplace_back(n.text, ++counters_[n.text]);
      return Flow::Normal;
    case NodeKind::ProbeCapture: {
      if (n.detail == "unavailable" || n.children.empty()) {
        record_capture(n, nullptr);
        return Flow::Normal;
      }
      Value v;
      try {
        v = eval(n.children[0], env);
      } catch (const RuntimeError&) {
        return Flow::Normal;
      }
      record_capture(n, &v);
      return Flow::Normal;
    }
    case NodeKind::FactoryDecl: {
      Function* f = heap_.make<Function>();
      f->name = n.text;
      f->decl = &n;
      f->tree = current_module_ ? current_module_->module->exec_tree : detached_tree_;
      f->env = env;
      f->module = current_module_;
      if (current_module_) current_module_->factories[n.text] = f;
      return Flow::Normal;
    }
    case NodeKind::ExampleBlock:
    case NodeKind::ImportDecl:
      return Flow::Normal;
    default:
      break;
  }

  cover(n);
  switch (n.kind) {
    case NodeKind::Empty:
    case NodeKind::FunctionDecl:
      return Flow::Normal;
    case NodeKind::ExportDecl: {
      const Node& inner = n.children[0];
      if (lang::is_expression_kind(inner.kind)) {
        Binding& b = env->vars["*default*"];
        b.value = eval(inner, env);
        b.initialized = true;
        return Flow::Normal;
      }
      return exec(inner, env);
    }
    case NodeKind::ClassDecl:
      declare(env, n.text, Value(make_class(n, env)), "let");
      return Flow::Normal;
    case NodeKind::VarDecl:
      for (const Node& d : n.children) {
        Value v = d.children.size() > 1 ? eval(d.children[1], env) : Value();
        declare(env, d.children[0].text, std::move(v), n.text);
      }
      return Flow::Normal;
    case NodeKind::ExprStmt:
      eval(n.children[0], env);
      return Flow::Normal;
    case NodeKind::Block:
      return exec_block(n, env, true);
    case NodeKind::If:
      if (truthy(eval(n.children[0], env))) return exec(n.children[1], env);
      if (n.children.size() > 2) return exec(n.children[2], env);
      return Flow::Normal;
    case NodeKind::While:
      while (truthy(eval(n.children[0], env))) {
        check_deadline();
        if (exec(n.children[1], env) == Flow::Return) return Flow::Return;
      }
      return Flow::Normal;
    case NodeKind::For: {
      Environment* scope = env;
      const Node& init = n.children[0];
      if (init.kind == NodeKind::VarDecl && init.text != "var") scope = make_env(env, false);
      if (init.kind != NodeKind::Empty) exec(init, scope);
      while (n.children[1].kind == NodeKind::Empty || truthy(eval(n.children[1], scope))) {
        check_deadline();
        if (exec(n.children[3], scope) == Flow::Return) return Flow::Return;
        if (n.children[2].kind != NodeKind::Empty) eval(n.children[2], scope);
      }
      return Flow::Normal;
    }
    case NodeKind::Return:
      return_value_ = n.children.empty() ? Value() : eval(n.children[0], env);
      return Flow::Return;
    default:
      throw RuntimeError(fmt::format("cannot execute {}", lang::kind_name(n.kind)));
  }
}

// ---------------------------------------------------------------------------
// Functions

Function* Interpreter::make_closure(const Node& decl, Environment* env, bool arrow) {
  Function* f = heap_.make<Function>();
  f->kind = Function::Kind::Closure;
  const Node* name = lang::function_name(decl);
  f->name = name ? name->text : decl.text;
  f->decl = &decl;
  f->tree = current_module_ ? current_module_->module->exec_tree : detached_tree_;
  f->env = env;
  f->module = current_module_;
  f->arrow = arrow;
  return f;
}

Function* Interpreter::make_class(const Node& decl, Environment* env) {
  Function* cls = heap_.make<Function>();
  cls->kind = Function::Kind::Class;
  cls->name = decl.text;
  cls->module = current_module_;
  for (std::size_t i = 1; i < decl.children.size(); ++i) {
    const Node& m = decl.children[i];
    Function* f = make_closure(m, env, false);
    if (m.has_flag(lang::kFlagStatic)) {
      cls->props.set(m.text, Value(f));
    } else if (m.text == "constructor") {
      cls->ctor = f;
    } else {
      cls->methods[m.text] = f;
    }
  }
  return cls;
}

Value Interpreter::call(const Value& callee, const Value& self, std::vector<Value> args) {
  if (!callee.is_function()) throw RuntimeError(fmt::format("{} is not a function", to_string(callee)));
  return call_function(callee.as_function(), self, args);
}

Value Interpreter::call_function(Function* f, const Value& self, std::vector<Value>& args) {
  if (f->kind == Function::Kind::Native) return f->native(*this, self, args);
  if (f->kind == Function::Kind::Class) {
    throw RuntimeError(fmt::format("Class constructor {} cannot be invoked without 'new'", f->name));
  }
  if (depth_ + 1 > config_.max_activations) throw RuntimeError("Maximum call stack size exceeded");
  ++depth_;
  Restore restore{current_module_, current_module_, depth_};
  if (f->module) current_module_ = f->module;
  if (hooks_.on_call) hooks_.on_call(in_example_ ? example_id_ : std::string(), *f);

  Environment* fenv = make_env(f->env, true);
  const Node& decl = *f->decl;
  if (decl.kind == NodeKind::FactoryDecl) {
    Flow fl = exec_block(decl.children[0], fenv, false);
    return fl == Flow::Return ? return_value_ : Value();
  }
  if (!f->arrow) fenv->vars["this"] = Binding{self};
  auto params = lang::function_params(decl);
  for (std::size_t i = 0; i < params.size(); ++i) {
    fenv->vars[params[i]->text] = Binding{i < args.size() ? args[i] : Value()};
  }
  const Node& body = lang::function_body(decl);
  if (decl.has_flag(lang::kFlagExprBody)) return eval(body, fenv);
  Flow fl = exec_block(body, fenv, false);
  Value result = fl == Flow::Return ? return_value_ : Value();
  return_value_ = Value();
  return result;
}

// ---------------------------------------------------------------------------
// Expressions

Value Interpreter::lookup(const std::string& name, Environment* env) {
  Binding* b = env->lookup(name);
  if (!b) {
    if (name == "this") return Value();
    throw RuntimeError(fmt::format("{} is not defined", name));
  }
  Binding& t = b->target();
  if (!t.initialized) throw RuntimeError(fmt::format("Cannot access '{}' before initialization", name));
  return t.value;
}

std::string Interpreter::property_key(const Value& key) { return to_string(key); }

Value Interpreter::eval(const Node& n, Environment* env) {
  switch (n.kind) {
    case NodeKind::NumberLit:
      return Value(n.number);
    case NodeKind::StringLit:
      return Value(n.text);
    case NodeKind::BoolLit:
      return Value(n.text == "true");
    case NodeKind::NullLit:
      return Value();
    case NodeKind::Identifier:
      return lookup(n.text, env);
    case NodeKind::TemplateLit: {
      std::string out;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        out += i % 2 == 0 ? n.children[i].text : to_string(eval(n.children[i], env));
      }
      return Value(std::move(out));
    }
    case NodeKind::ArrayLit: {
      std::vector<Value> items;
      items.reserve(n.children.size());
      for (const Node& c : n.children) items.push_back(eval(c, env));
      return Value(new_array(std::move(items)));
    }
    case NodeKind::ObjectLit: {
      Object* obj = new_object();
      for (const Node& p : n.children) {
        if (p.kind == NodeKind::MethodDef) {
          obj->props.set(p.text, Value(make_closure(p, env, false)));
        } else {
          obj->props.set(p.text, eval(p.children[0], env));
        }
      }
      return Value(obj);
    }
    case NodeKind::FunctionExpr:
      return Value(make_closure(n, env, false));
    case NodeKind::ArrowExpr:
      return Value(make_closure(n, env, true));
    case NodeKind::Assignment:
      return eval_assignment(n, env);
    case NodeKind::Update:
      return eval_update(n, env);
    case NodeKind::Unary: {
      Value v = eval(n.children[0], env);
      if (n.text == "!") return Value(!truthy(v));
      if (n.text == "-") return Value(-to_number(v));
      throw RuntimeError(fmt::format("unsupported operator {}", n.text));
    }
    case NodeKind::Binary: {
      if (n.text == "&&") {
        Value l = eval(n.children[0], env);
        return truthy(l) ? eval(n.children[1], env) : l;
      }
      if (n.text == "||") {
        Value l = eval(n.children[0], env);
        return truthy(l) ? l : eval(n.children[1], env);
      }
      Value l = eval(n.children[0], env);
      Value r = eval(n.children[1], env);
      return binary(n.text, l, r);
    }
    case NodeKind::Member:
      return get_property(eval(n.children[0], env), n.text);
    case NodeKind::Index: {
      Value target = eval(n.children[0], env);
      Value key = eval(n.children[1], env);
      if (target.is_array() && key.is_number()) {
        auto i = array_index(key.as_number());
        Array* a = target.as_array();
        return i && *i < a->items.size() ? a->items[*i] : Value();
      }
      return get_property(target, property_key(key));
    }
    case NodeKind::Call:
      return eval_call(n, env);
    case NodeKind::New:
      return eval_new(n, env);
    case NodeKind::ProbeCapture: {
      Value v = eval(n.children[0], env);
      record_capture(n, &v);
      return v;
    }
    case NodeKind::FactoryCall: {
      ModuleRecord& owner = load(n.detail);
      auto it = owner.factories.find(n.text);
      if (it == owner.factories.end()) throw RuntimeError(fmt::format("unknown template \"{}\"", n.text));
      std::vector<Value> none;
      return call_function(it->second, Value(), none);
    }
    case NodeKind::ResourceRef: {
      if (hooks_.on_resource_access) hooks_.on_resource_access(n.text);
      auto it = resources_.find(n.text);
      if (it == resources_.end()) throw RuntimeError(fmt::format("unknown resource \"{}\"", n.text));
      return it->second;
    }
    default:
      throw RuntimeError(fmt::format("cannot evaluate {}", lang::kind_name(n.kind)));
  }
}

void Interpreter::assign(const Node& target, Value value, Environment* env) {
  switch (target.kind) {
    case NodeKind::Identifier: {
      Binding* b = env->lookup(target.text);
      if (!b) throw RuntimeError(fmt::format("{} is not defined", target.text));
      if (b->alias) throw RuntimeError(fmt::format("Assignment to imported binding '{}'", target.text));
      if (!b->initialized) {
        throw RuntimeError(fmt::format("Cannot access '{}' before initialization", target.text));
      }
      if (b->is_const) throw RuntimeError("Assignment to constant variable.");
      b->value = std::move(value);
      return;
    }
    case NodeKind::Member:
      set_property(eval(target.children[0], env), target.text, std::move(value));
      return;
    case NodeKind::Index: {
      Value obj = eval(target.children[0], env);
      Value key = eval(target.children[1], env);
      set_property(obj, property_key(key), std::move(value));
      return;
    }
    default:
      throw RuntimeError("Invalid assignment target");
  }
}

Value Interpreter::eval_assignment(const Node& n, Environment* env) {
  const Node& target = n.children[0];
  if (n.text == "=") {
    Value v = eval(n.children[1], env);
    assign(target, v, env);
    return v;
  }
  // Compound: evaluate the target's object and key once.
  std::string op = n.text.substr(0, 1);
  if (target.kind == NodeKind::Identifier) {
    Value v = binary(op, lookup(target.text, env), eval(n.children[1], env));
    assign(target, v, env);
    return v;
  }
  Value obj = eval(target.children[0], env);
  std::string key = target.kind == NodeKind::Member ? target.text : property_key(eval(target.children[1], env));
  Value v = binary(op, get_property(obj, key), eval(n.children[1], env));
  set_property(obj, key, v);
  return v;
}

Value Interpreter::eval_update(const Node& n, Environment* env) {
  const Node& target = n.children[0];
  double delta = n.text == "++" ? 1 : -1;
  if (target.kind == NodeKind::Identifier) {
    double old = to_number(lookup(target.text, env));
    assign(target, Value(old + delta), env);
    return Value(n.has_flag(lang::kFlagPrefix) ? old + delta : old);
  }
  if (target.kind != NodeKind::Member && target.kind != NodeKind::Index) {
    throw RuntimeError("Invalid update target");
  }
  Value obj = eval(target.children[0], env);
  std::string key = target.kind == NodeKind::Member ? target.text : property_key(eval(target.children[1], env));
  double old = to_number(get_property(obj, key));
  set_property(obj, key, Value(old + delta));
  return Value(n.has_flag(lang::kFlagPrefix) ? old + delta : old);
}

Value Interpreter::eval_call(const Node& n, Environment* env) {
  const Node& callee = n.children[0];
  Value self, fn;
  if (callee.kind == NodeKind::Member) {
    self = eval(callee.children[0], env);
    fn = get_property(self, callee.text);
  } else if (callee.kind == NodeKind::Index) {
    self = eval(callee.children[0], env);
    fn = get_property(self, property_key(eval(callee.children[1], env)));
  } else {
    fn = eval(callee, env);
  }
  std::vector<Value> args;
  args.reserve(n.children.size() - 1);
  for (std::size_t i = 1; i < n.children.size(); ++i) args.push_back(eval(n.children[i], env));
  if (!fn.is_function()) throw RuntimeError(fmt::format("{} is not a function", describe_callee(callee)));
  return call_function(fn.as_function(), self, args);
}

Value Interpreter::eval_new(const Node& n, Environment* env) {
  Value c = eval(n.children[0], env);
  std::vector<Value> args;
  for (std::size_t i = 1; i < n.children.size(); ++i) args.push_back(eval(n.children[i], env));
  if (!c.is_function() || c.as_function()->kind == Function::Kind::Native) {
    throw RuntimeError(fmt::format("{} is not a constructor", describe_callee(n.children[0])));
  }
  Function* f = c.as_function();
  Object* obj = new_object();
  if (f->kind == Function::Kind::Class) {
    obj->klass = f;
    if (f->ctor) call_function(f->ctor, Value(obj), args);
  } else {
    call_function(f, Value(obj), args);
  }
  return Value(obj);
}

Value Interpreter::binary(const std::string& op, const Value& a, const Value& b) {
  if (op == "+") {
    bool textual = a.is_string() || b.is_string() || a.is_array() || b.is_array() || a.is_object() ||
                   b.is_object() || a.is_function() || b.is_function() || a.is_resource() || b.is_resource();
    if (textual) return Value(to_string(a) + to_string(b));
    return Value(to_number(a) + to_number(b));
  }
  if (op == "-") return Value(to_number(a) - to_number(b));
  if (op == "*") return Value(to_number(a) * to_number(b));
  if (op == "/") return Value(to_number(a) / to_number(b));
  if (op == "%") return Value(std::fmod(to_number(a), to_number(b)));
  if (op == ">>") {
    auto shift = static_cast<std::uint32_t>(to_int32(to_number(b))) & 31u;
    return Value(static_cast<double>(to_int32(to_number(a)) >> shift));
  }
  if (op == "===") return Value(strict_equals(a, b));
  if (op == "!==") return Value(!strict_equals(a, b));
  if (op == "==") return Value(loose_equals(a, b));
  if (op == "!=") return Value(!loose_equals(a, b));
  if (op == "<" || op == "<=" || op == ">" || op == ">=") {
    int cmp;
    if (a.is_string() && b.is_string()) {
      int c = a.as_string().compare(b.as_string());
      cmp = c < 0 ? -1 : (c > 0 ? 1 : 0);
    } else {
      double x = to_number(a), y = to_number(b);
      if (std::isnan(x) || std::isnan(y)) return Value(false);
      cmp = x < y ? -1 : (x > y ? 1 : 0);
    }
    if (op == "<") return Value(cmp < 0);
    if (op == "<=") return Value(cmp <= 0);
    if (op == ">") return Value(cmp > 0);
    return Value(cmp >= 0);
  }
  throw RuntimeError(fmt::format("unsupported operator {}", op));
}

// ---------------------------------------------------------------------------
// Properties and conversions

Function* Interpreter::builtin_method(const Value& target, const std::string& key) {
  std::string cache_key = (target.is_array() ? "a:" : "s:") + key;
  auto it = method_cache_.find(cache_key);
  if (it != method_cache_.end()) return it->second;
  Value m = target.is_array() ? array_method(*this, key) : string_method(*this, key);
  Function* f = m.is_function() ? m.as_function() : nullptr;
  method_cache_[cache_key] = f;
  return f;
}

Value Interpreter::get_property(const Value& target, const std::string& key) {
  if (target.is_object()) {
    Object* o = target.as_object();
    if (const Value* v = o->props.find(key)) return *v;
    if (o->klass) {
      auto m = o->klass->methods.find(key);
      if (m != o->klass->methods.end()) return Value(m->second);
    }
    return Value();
  }
  if (target.is_array()) {
    Array* a = target.as_array();
    if (key == "length") return Value(static_cast<double>(a->items.size()));
    if (auto i = array_index(key)) return *i < a->items.size() ? a->items[*i] : Value();
    if (Function* f = builtin_method(target, key)) return Value(f);
    return Value();
  }
  if (target.is_string()) {
    const std::string& s = target.as_string();
    if (key == "length") return Value(static_cast<double>(code_points(s)));
    if (auto i = array_index(key)) {
      std::size_t cp = 0;
      for (std::size_t b = 0; b < s.size(); ++cp) {
        std::size_t len = 1;
        while (b + len < s.size() && (static_cast<unsigned char>(s[b + len]) & 0xC0) == 0x80) ++len;
        if (cp == *i) return Value(s.substr(b, len));
        b += len;
      }
      return Value();
    }
    if (Function* f = builtin_method(target, key)) return Value(f);
    return Value();
  }
  if (target.is_function()) {
    Function* f = target.as_function();
    if (const Value* v = f->props.find(key)) return *v;
    if (key == "name") return Value(f->name);
    return Value();
  }
  if (target.is_resource()) return target.as_resource()->get(*this, key);
  if (target.is_null()) {
    throw RuntimeError(fmt::format("Cannot read properties of null (reading '{}')", key));
  }
  return Value();
}

void Interpreter::set_property(const Value& target, const std::string& key, Value value) {
  if (target.is_object()) {
    target.as_object()->props.set(key, std::move(value));
    return;
  }
  if (target.is_array()) {
    Array* a = target.as_array();
    if (auto i = array_index(key)) {
      if (*i >= a->items.size()) a->items.resize(*i + 1);
      a->items[*i] = std::move(value);
      return;
    }
    if (key == "length") {
      auto n = array_index(to_number(value));
      if (!n) throw RuntimeError("Invalid array length");
      a->items.resize(*n);
      return;
    }
    throw RuntimeError(fmt::format("Cannot set property '{}' on an array", key));
  }
  if (target.is_function()) {
    target.as_function()->props.set(key, std::move(value));
    return;
  }
  if (target.is_resource()) {
    target.as_resource()->set(key, std::move(value));
    return;
  }
  throw RuntimeError(fmt::format("Cannot set properties of {} (setting '{}')", type_tag(target), key));
}

std::string Interpreter::to_string(const Value& v) {
  if (v.is_null()) return "null";
  if (v.is_bool()) return v.as_bool() ? "true" : "false";
  if (v.is_number()) return format_number(v.as_number());
  if (v.is_string()) return v.as_string();
  if (v.is_array()) {
    std::string out;
    const auto& items = v.as_array()->items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (i) out += ",";
      if (!items[i].is_null()) out += to_string(items[i]);
    }
    return out;
  }
  if (v.is_object()) return "[object Object]";
  if (v.is_function()) return fmt::format("[function {}]", v.as_function()->name);
  return fmt::format("[object {}]", v.as_resource()->kind());
}

double Interpreter::to_number(const Value& v) {
  if (v.is_null()) return 0;
  if (v.is_bool()) return v.as_bool() ? 1 : 0;
  if (v.is_number()) return v.as_number();
  if (v.is_string()) return parse_number(v.as_string());
  if (v.is_array()) {
    const auto& items = v.as_array()->items;
    if (items.empty()) return 0;
    if (items.size() == 1) return parse_number(to_string(v));
  }
  return std::nan("");
}

bool Interpreter::truthy(const Value& v) {
  if (v.is_null()) return false;
  if (v.is_bool()) return v.as_bool();
  if (v.is_number()) return v.as_number() != 0 && !std::isnan(v.as_number());
  if (v.is_string()) return !v.as_string().empty();
  return true;
}

bool Interpreter::strict_equals(const Value& a, const Value& b) {
  if (a.v.index() != b.v.index()) return false;
  if (a.is_number()) return a.as_number() == b.as_number();
  return a.v == b.v;
}

bool Interpreter::loose_equals(const Value& a, const Value& b) {
  if (a.is_number() && b.is_string()) return a.as_number() == parse_number(b.as_string());
  if (a.is_string() && b.is_number()) return parse_number(a.as_string()) == b.as_number();
  return strict_equals(a, b);
}

}  // namespace babylon::runtime
