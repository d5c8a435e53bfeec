#include "babylon/session/session.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <queue>

#include "babylon/lang/lexer.hpp"
#include "babylon/lang/parser.hpp"
#include "babylon/lang/printer.hpp"

namespace babylon::session {

using annotations::Annotation;
using annotations::AnnotationKind;
using annotations::ValueSpec;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string where(const SourceSpan& span) { return fmt::format("{}:{}", span.start.line, span.start.column); }

std::string_view probe_kind_name(instrument::ProbeKind kind) {
  using K = instrument::ProbeKind;
  switch (kind) {
    case K::Identifier: return "identifier";
    case K::Parameter: return "parameter";
    case K::Declarator: return "declarator";
    case K::Member: return "member";
    case K::Index: return "index";
    case K::Return: return "return";
  }
  return "identifier";
}

bool is_line_statement(lang::NodeKind k) {
  using lang::NodeKind;
  return k == NodeKind::VarDecl || k == NodeKind::ExprStmt || k == NodeKind::If || k == NodeKind::While ||
         k == NodeKind::For || k == NodeKind::Return;
}

void collect_executable(const lang::Node& n, bool in_function, std::set<int>& out) {
  if (in_function && is_line_statement(n.kind) && n.has_span) out.insert(n.span.start.line);
  bool inside = in_function || lang::is_function_like(n.kind);
  for (const lang::Node& c : n.children) collect_executable(c, inside, out);
}

// Value specs naming instance templates, which pull the owning module in.
std::vector<ValueSpec> value_specs(const Annotation& a) {
  std::vector<ValueSpec> out;
  if (a.kind == AnnotationKind::Example) {
    auto ex = a.example();
    out.push_back(ex.this_binding);
    for (auto& [k, v] : ex.params) out.push_back(v);
  } else if (a.kind == AnnotationKind::InstanceTemplate) {
    for (auto& v : a.instance_template().ctor_args) out.push_back(v);
  }
  return out;
}

bool contains(const SourceSpan& span, SourcePos pos) {
  auto before = [](SourcePos a, SourcePos b) {
    return a.line < b.line || (a.line == b.line && a.column <= b.column);
  };
  return before(span.start, pos) && before(pos, span.end);
}

}  // namespace

// ---------------------------------------------------------------------------

ResourceSpec ResourceSpec::from_json(const nlohmann::json& j) {
  ResourceSpec spec;
  if (j.is_string()) {
    spec.text = j.get<std::string>();
  } else if (j.is_object() && j.contains("mock")) {
    spec.kind = Kind::Mock;
    spec.text = j.at("mock").get<std::string>();
  } else if (j.is_object() && j.contains("expression")) {
    spec.text = j.at("expression").get<std::string>();
  } else {
    throw std::invalid_argument("resource must be an expression string, {\"expression\": ...} or {\"mock\": ...}");
  }
  return spec;
}

nlohmann::json ResourceSpec::to_json() const {
  return kind == Kind::Mock ? nlohmann::json{{"mock", text}} : nlohmann::json{{"expression", text}};
}

const ModuleReport* EvaluationReport::module(const std::string& name) const {
  for (const auto& m : modules) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

const ExampleReport* EvaluationReport::example(const std::string& id) const {
  for (const auto& e : examples) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

const ExampleReport* EvaluationReport::example_named(const std::string& module, const std::string& name) const {
  for (const auto& e : examples) {
    if (e.module == module && e.name == name) return &e;
  }
  return nullptr;
}

const ProbeReport* EvaluationReport::probe(const std::string& id) const {
  for (const auto& p : probes) {
    if (p.id == id) return &p;
  }
  return nullptr;
}

const SliderReport* EvaluationReport::slider(const std::string& id) const {
  for (const auto& s : sliders) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

bool EvaluationReport::examples_ok() const {
  return std::all_of(examples.begin(), examples.end(), [](const ExampleReport& e) {
    return !e.enabled || !e.status || *e.status == runtime::ExampleOutcome::Status::Ok;
  });
}

bool EvaluationReport::inputs_valid() const {
  return std::all_of(modules.begin(), modules.end(),
                     [](const ModuleReport& m) { return !m.parse_error && m.diagnostics.empty(); });
}

std::set<int> executable_lines(const lang::IdentifiedAst& ast) {
  std::set<int> out;
  collect_executable(ast.root(), false, out);
  return out;
}

std::map<std::string, std::set<int>> compute_faded_lines(
    const std::map<std::string, std::set<int>>& executable,
    const std::vector<std::map<std::string, std::set<int>>>& enabled_coverage) {
  std::map<std::string, std::set<int>> out;
  for (const auto& [module, lines] : executable) {
    auto& faded = out[module];
    if (enabled_coverage.empty()) continue;
    for (int line : lines) {
      bool hit = std::any_of(enabled_coverage.begin(), enabled_coverage.end(), [&](const auto& cov) {
        auto it = cov.find(module);
        return it != cov.end() && it->second.count(line);
      });
      if (!hit) faded.insert(line);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Session::ModuleState {
  std::string name;
  std::string text;
  bool dirty = true;
  std::optional<lang::IdentifiedAst> ast;  // last good parse
  std::optional<std::string> parse_error;
  SourceSpan parse_error_span;
  std::vector<Annotation> bound;
  std::vector<annotations::AttachError> attach_errors;
  std::vector<annotations::AnnotationSyntaxError> syntax_errors;
  std::set<int> executable;
};

Session::Session(SessionConfig config) : config_(config) {
  runtime_ = std::make_unique<runtime::Runtime>(
      runtime::RuntimeConfig{config.time_budget_ms, config.snapshot_depth, config.max_activations});
  auto adapting = [this] { return phase_ == Phase::Parse || phase_ == Phase::Transform; };
  runtime_->hooks().on_trace_record = [this, adapting] {
    if (adapting()) ++audit_.trace_records_during_adaptation;
  };
  runtime_->hooks().on_resource_access = [this, adapting](const std::string&) {
    if (adapting()) ++audit_.resource_accesses_during_adaptation;
  };
}

Session::~Session() = default;

void Session::set_config(const SessionConfig& config) {
  config_ = config;
  runtime_->config() = {config.time_budget_ms, config.snapshot_depth, config.max_activations};
}

Session::ModuleState& Session::state(const std::string& module) {
  auto it = modules_.find(module);
  if (it == modules_.end()) throw std::invalid_argument(fmt::format("unknown module \"{}\"", module));
  return *it->second;
}

const Session::ModuleState& Session::state(const std::string& module) const {
  auto it = modules_.find(module);
  if (it == modules_.end()) throw std::invalid_argument(fmt::format("unknown module \"{}\"", module));
  return *it->second;
}

void Session::update_source(const std::string& module, std::string text) {
  auto& slot = modules_[module];
  if (!slot) {
    slot = std::make_unique<ModuleState>();
    slot->name = module;
  }
  slot->text = lang::normalize_newlines(text);
  slot->dirty = true;
}

void Session::remove_module(const std::string& module) { modules_.erase(module); }

std::vector<std::string> Session::module_names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : modules_) out.push_back(k);
  return out;
}

const std::string& Session::source(const std::string& module) const { return state(module).text; }

const lang::IdentifiedAst* Session::ast(const std::string& module) const {
  const ModuleState& s = state(module);
  return s.ast ? &*s.ast : nullptr;
}

void Session::set_templates(const std::string& sidecar) { templates_ = annotations::parse_templates(sidecar); }

void Session::set_resource(const std::string& name, const ResourceSpec& spec) {
  if (spec.kind == ResourceSpec::Kind::Mock) {
    runtime_->bind_mock(name, spec.text);
  } else {
    runtime_->bind_resource_expression(name, spec.text);
  }
  resources_[name] = spec;
}

std::string with_annotation(std::string_view text, SourcePos at, const Annotation& annotation) {
  std::string out(text);
  for (const lang::Comment& c : lang::lex(out).comments) {
    if (c.span.start == at && c.block && c.text.rfind("/*@", 0) == 0) {
      out = annotations::remove_annotation(out, at);
      break;
    }
  }
  return annotations::insert_annotation(out, at, annotation);
}

std::string with_example_enabled(std::string_view text, const std::string& name, bool enabled) {
  for (Annotation a : annotations::extract_annotations(text).annotations) {
    if (a.kind != AnnotationKind::Example || a.payload.value("name", "") != name) continue;
    a.payload["enabled"] = enabled;
    return with_annotation(text, a.anchor_span.start, a);
  }
  throw std::invalid_argument(fmt::format("no example named \"{}\"", name));
}

void Session::set_annotation(const std::string& module, SourcePos at, const Annotation& annotation) {
  update_source(module, with_annotation(state(module).text, at, annotation));
}

void Session::remove_annotation(const std::string& module, SourcePos at) {
  update_source(module, annotations::remove_annotation(state(module).text, at));
}

void Session::set_example_enabled(const std::string& module, const std::string& name, bool enabled) {
  update_source(module, with_example_enabled(state(module).text, name, enabled));
}

std::vector<std::string> Session::applicable_annotations(const std::string& module, SourcePos at) const {
  const ModuleState& s = state(module);
  std::vector<std::string> out;
  if (!s.ast) return out;
  const lang::Node* best = nullptr;
  for (std::size_t i = 0; i < s.ast->size(); ++i) {
    const lang::Node* n = s.ast->node(static_cast<lang::NodeId>(i));
    if (!n->has_span || !contains(n->span, at) || n->kind == lang::NodeKind::Module) continue;
    // Pre-order, so a later containing node is at least as deep.
    best = n;
  }
  if (!best) return out;
  if (annotations::can_be_probe(*best, *s.ast)) out.emplace_back("probe");
  if (annotations::can_be_slider(*best, *s.ast)) out.emplace_back("slider");
  if (annotations::can_be_example_target(*best, *s.ast)) out.emplace_back("example");
  if (annotations::can_be_replaced(*best, *s.ast)) out.emplace_back("replace");
  const lang::Node* cls = best;
  if (best->kind == lang::NodeKind::Identifier && s.ast->parent(best->id) != lang::kNoId) {
    const lang::Node* p = s.ast->node(s.ast->parent(best->id));
    if (p->kind == lang::NodeKind::ClassDecl && &p->children[0] == best) cls = p;
  }
  if (cls->kind == lang::NodeKind::ClassDecl) out.emplace_back("instance");
  return out;
}

int Session::subscribe(Subscriber subscriber) {
  int id = next_subscriber_++;
  subscribers_[id] = std::move(subscriber);
  return id;
}

void Session::unsubscribe(int id) { subscribers_.erase(id); }

void Session::parse_dirty() {
  for (auto& [name, s] : modules_) {
    if (!s->dirty) continue;
    s->dirty = false;
    try {
      lang::IdentifiedAst ast = lang::parse_module(s->text, name);
      auto extracted = annotations::extract_annotations(ast.comments());
      auto attached = annotations::attach(std::move(extracted.annotations), ast);
      s->syntax_errors = std::move(extracted.errors);
      s->bound = std::move(attached.bound);
      s->attach_errors = std::move(attached.errors);
      s->executable = executable_lines(ast);
      s->ast = std::move(ast);
      s->parse_error.reset();
    } catch (const lang::ParseError& e) {
      s->parse_error = e.what();
      s->parse_error_span = e.span;
    }
  }
}

std::shared_ptr<const EvaluationReport> Session::evaluate(const std::function<bool()>& cancelled) {
  auto report = std::make_shared<EvaluationReport>();
  struct PhaseReset {
    Phase& phase;
    ~PhaseReset() { phase = Phase::Idle; }
  } reset{phase_};

  // Parse.
  phase_ = Phase::Parse;
  auto t0 = Clock::now();
  parse_dirty();
  report->timings.parse_ms = ms_since(t0);
  if (cancelled && cancelled()) return nullptr;

  // Transform.
  phase_ = Phase::Transform;
  t0 = Clock::now();
  std::map<std::string, std::vector<std::string>> diagnostics;
  std::set<std::string> healthy;
  for (auto& [name, s] : modules_) {
    if (!s->parse_error) healthy.insert(name);
  }
  instrument::SessionCatalog catalog;
  catalog.known_modules = healthy;
  catalog.custom_templates = templates_;
  for (auto& [name, spec] : resources_) catalog.resources.insert(name);
  std::set<std::string> custom_names;
  for (const auto& t : templates_) custom_names.insert(t.name);
  for (const std::string& name : healthy) {
    ModuleState& s = *modules_[name];
    for (auto& t : instrument::collect_instance_templates(*s.ast, s.bound)) {
      if (catalog.instance_templates.count(t.name) || custom_names.count(t.name)) {
        diagnostics[name].push_back(fmt::format("duplicate template name \"{}\"", t.name));
        continue;
      }
      catalog.instance_templates[t.name] = t;
    }
  }

  // Scope: modules with enabled examples and everything they depend on.
  std::map<std::string, std::set<std::string>> imports, deps;
  std::set<std::string> scope;
  std::vector<std::string> frontier;
  for (const std::string& name : healthy) {
    ModuleState& s = *modules_[name];
    for (const lang::Node& st : s.ast->root().children) {
      if (st.kind != lang::NodeKind::ImportDecl) continue;
      std::string dep = instrument::module_name_for_import(st.text);
      if (healthy.count(dep)) imports[name].insert(dep);
    }
    deps[name] = imports[name];
    bool enabled = false;
    for (const Annotation& a : s.bound) {
      if (a.kind == AnnotationKind::Example && a.example().enabled) enabled = true;
      for (const ValueSpec& v : value_specs(a)) {
        if (v.variant != ValueSpec::Variant::Template) continue;
        auto it = catalog.instance_templates.find(v.text);
        if (it != catalog.instance_templates.end() && it->second.module != name) deps[name].insert(it->second.module);
      }
    }
    if (enabled) frontier.push_back(name);
  }
  while (!frontier.empty()) {
    std::string m = frontier.back();
    frontier.pop_back();
    if (!scope.insert(m).second) continue;
    for (const std::string& d : deps[m]) frontier.push_back(d);
  }
  instrument::InstrumentConfig icfg{config_.time_budget_ms, config_.snapshot_depth, healthy};
  std::map<std::string, std::shared_ptr<const instrument::InstrumentedModule>> available;
  std::map<std::string, std::string> instrument_errors;
  for (const std::string& name : scope) {
    ModuleState& s = *modules_[name];
    try {
      available[name] = std::make_shared<const instrument::InstrumentedModule>(
          instrument::instrument(*s.ast, s.bound, icfg, catalog));
    } catch (const instrument::InstrumentError& e) {
      instrument_errors[name] = fmt::format("instrumentation failed at {}: {}", where(e.span), e.what());
    } catch (const std::exception& e) {
      instrument_errors[name] = fmt::format("instrumentation failed: {}", e.what());
    }
  }

  // Dependencies first, ties broken by name.
  std::vector<std::string> order;
  {
    std::map<std::string, int> pending;
    for (auto& [name, mod] : available) {
      int n = 0;
      for (const std::string& d : imports[name]) n += available.count(d) && d != name ? 1 : 0;
      pending[name] = n;
    }
    std::set<std::string> placed;
    while (placed.size() < available.size()) {
      std::string next;
      for (auto& [name, n] : pending) {
        if (!placed.count(name) && n == 0) {
          next = name;
          break;
        }
      }
      if (next.empty()) {
        // Import cycle: take the first remaining module by name.
        for (auto& [name, n] : pending) {
          if (!placed.count(name)) {
            next = name;
            break;
          }
        }
      }
      placed.insert(next);
      order.push_back(next);
      for (auto& [name, n] : pending) {
        if (!placed.count(name) && imports[name].count(next)) --n;
      }
    }
  }
  report->timings.transform_ms = ms_since(t0);
  if (cancelled && cancelled()) return nullptr;

  // Execute.
  phase_ = Phase::Execute;
  t0 = Clock::now();
  lang::ScopedParseObserver observer([this](const std::string& module) {
    if ((phase_ == Phase::Execute || phase_ == Phase::Update) && modules_.count(module)) {
      ++audit_.parses_during_emergence;
    }
  });
  runtime_->collect_garbage();
  runtime::EvaluationResult result = runtime_->evaluate(order, available);
  report->timings.execute_ms = ms_since(t0);

  // Update.
  phase_ = Phase::Update;
  t0 = Clock::now();
  report->execution_order = order;
  report->load_counts = result.load_counts;
  std::map<std::string, const runtime::ExampleOutcome*> outcomes;
  std::map<std::string, const runtime::ModuleEvaluation*> evaluations;
  for (const auto& me : result.modules) {
    evaluations[me.module] = &me;
    for (const auto& o : me.outcomes) outcomes[o.example_id] = &o;
  }
  auto trace = std::make_shared<runtime::TraceStore>(std::move(result.trace));
  report->trace = trace;
  const EvaluationReport* previous = last_report_.get();

  std::map<std::string, std::set<int>> executable;
  std::vector<std::map<std::string, std::set<int>>> enabled_coverage;
  for (auto& [name, sp] : modules_) {
    ModuleState& s = *sp;
    ModuleReport mr;
    mr.name = name;
    mr.in_scope = scope.count(name) > 0;
    if (s.parse_error) {
      mr.parse_error = s.parse_error;
      mr.parse_error_span = s.parse_error_span;
      mr.stale = true;
      if (previous) {
        if (const ModuleReport* old = previous->module(name)) {
          mr.executable_lines = old->executable_lines;
          mr.faded_lines = old->faded_lines;
        }
        for (ExampleReport e : previous->examples) {
          if (e.module != name) continue;
          e.stale = true;
          report->examples.push_back(std::move(e));
        }
        for (ProbeReport p : previous->probes) {
          if (p.module != name) continue;
          p.stale = true;
          report->probes.push_back(std::move(p));
        }
        for (SliderReport sl : previous->sliders) {
          if (sl.module != name) continue;
          sl.stale = true;
          report->sliders.push_back(std::move(sl));
        }
      }
      report->modules.push_back(std::move(mr));
      continue;
    }
    for (const auto& e : s.syntax_errors) mr.diagnostics.push_back(fmt::format("{}: {}", where(e.span), e.message));
    for (const auto& e : s.attach_errors) {
      mr.diagnostics.push_back(fmt::format("{}: {}", where(e.annotation.anchor_span), e.reason));
    }
    for (const auto& d : diagnostics[name]) mr.diagnostics.push_back(d);
    auto ie = instrument_errors.find(name);
    if (ie != instrument_errors.end()) mr.diagnostics.push_back(ie->second);
    auto av = available.find(name);
    if (av != available.end()) {
      for (const auto& d : av->second->diagnostics) {
        mr.diagnostics.push_back(fmt::format("{}: {}", where(d.span), d.message));
      }
    }
    auto ev = evaluations.find(name);
    if (ev != evaluations.end() && ev->second->module_error) {
      mr.diagnostics.push_back("module error: " + *ev->second->module_error);
    }
    mr.executable_lines = s.executable;
    executable[name] = s.executable;

    for (const Annotation& a : s.bound) {
      if (a.kind != AnnotationKind::Example) continue;
      auto payload = a.example();
      ExampleReport er;
      er.id = instrument::example_id(name, payload.color_index);
      er.module = name;
      er.name = payload.name;
      er.color_index = payload.color_index;
      er.enabled = payload.enabled;
      er.span = a.anchor_span;
      er.callable = s.ast->node(*a.target_node)->text;
      if (er.enabled) {
        auto o = outcomes.find(er.id);
        if (o != outcomes.end()) {
          const runtime::ExampleOutcome& oc = *o->second;
          er.status = oc.status;
          er.error_message = oc.error_message;
          er.return_snapshot = oc.return_snapshot;
          er.output_log = oc.output_log;
          er.elapsed_ms = oc.elapsed_ms;
          for (const auto& [mod, ids] : oc.executed_node_ids) {
            auto ms = modules_.find(mod);
            if (ms == modules_.end() || !ms->second->ast) continue;
            auto& lines = er.coverage_lines[mod];
            for (lang::NodeId id : ids) {
              const lang::Node* n = ms->second->ast->node(id);
              if (n && n->has_span) lines.insert(n->span.start.line);
            }
          }
        } else {
          er.status = runtime::ExampleOutcome::Status::Error;
          er.error_message = ie != instrument_errors.end() ? ie->second : "module was not evaluated";
        }
        enabled_coverage.push_back(er.coverage_lines);
      }
      report->examples.push_back(std::move(er));
    }

    if (av == available.end()) {
      report->modules.push_back(std::move(mr));
      continue;
    }
    for (const auto& p : av->second->probes) {
      ProbeReport pr;
      pr.id = p.id;
      pr.module = name;
      pr.label = p.label;
      pr.kind = std::string(probe_kind_name(p.kind));
      pr.span = p.span;
      report->probes.push_back(std::move(pr));
    }
    for (const auto& sl : av->second->sliders) {
      SliderReport sr;
      sr.id = sl.id;
      sr.module = name;
      sr.label = sl.label;
      sr.span = sl.span;
      report->sliders.push_back(std::move(sr));
    }
    report->modules.push_back(std::move(mr));
  }

  auto faded = compute_faded_lines(executable, enabled_coverage);
  for (auto& mr : report->modules) {
    if (!mr.stale) mr.faded_lines = faded[mr.name];
  }

  for (auto& pr : report->probes) {
    if (pr.stale) continue;
    for (const auto& er : report->examples) {
      if (!er.enabled || er.stale) continue;
      auto events = runtime::query_probe(*trace, pr.id, er.id);
      if (events.empty()) continue;
      pr.rows.push_back({er.id, er.name, er.color_index, runtime::capture_points(events)});
    }
  }
  for (auto& sr : report->sliders) {
    if (sr.stale) continue;
    for (const auto& er : report->examples) {
      auto o = outcomes.find(er.id);
      if (!er.enabled || o == outcomes.end()) continue;
      auto c = o->second->slider_counts.find(sr.id);
      if (c != o->second->slider_counts.end() && c->second > 0) sr.iterations[er.id] = c->second;
    }
  }
  std::stable_sort(report->examples.begin(), report->examples.end(),
                   [](const ExampleReport& a, const ExampleReport& b) { return a.module < b.module; });
  report->timings.update_ms = ms_since(t0);

  report->revision = ++revision_;
  last_report_ = report;
  for (auto& [id, sub] : subscribers_) sub(report);
  return report;
}

}  // namespace babylon::session
