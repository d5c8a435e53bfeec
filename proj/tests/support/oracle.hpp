#pragma once

// Reference results computed without the instrumenter: every example is
// rewritten into a plain exported function appended to its stripped module,
// then run on the unannotated tree.

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "babylon/annotations/annotation.hpp"
#include "babylon/annotations/templates.hpp"
#include "babylon/instrument/instrumenter.hpp"
#include "babylon/lang/parser.hpp"
#include "babylon/runtime/interpreter.hpp"
#include "babylon/runtime/runtime.hpp"

namespace babylon::testing {

struct CleanInputs {
  std::map<std::string, std::string> sources;  // module -> text
  std::string templates;                       // sidecar text
  nlohmann::json resources = nlohmann::json::object();
};

struct CleanOutcome {
  std::string module;
  std::string name;
  runtime::ExampleOutcome::Status status = runtime::ExampleOutcome::Status::Ok;
  std::string error_message;
  std::string rendered_return;  // empty unless ok
  std::vector<std::string> output_log;
  std::map<std::string, int> calls;  // function name -> calls
  // Start lines of executed statements, per module. Lines of the appended
  // wrappers are included; callers intersect with the original lines.
  std::map<std::string, std::set<int>> lines;
};

namespace oracle_detail {

using annotations::Annotation;
using annotations::AnnotationKind;
using annotations::ValueSpec;
using lang::Node;
using lang::NodeKind;

struct ModuleInfo {
  std::string name;
  std::string text;
  lang::IdentifiedAst ast;
  std::vector<Annotation> bound;
};

inline const Node* class_decl(const lang::IdentifiedAst& ast, const Node* n) {
  if (n->kind == NodeKind::ExportDecl && !n->children.empty()) n = &n->children[0];
  return n->kind == NodeKind::ClassDecl ? n : nullptr;
}

inline std::string enclosing_class(const lang::IdentifiedAst& ast, lang::NodeId id) {
  for (lang::NodeId p = ast.parent(id); p != lang::kNoId; p = ast.parent(p)) {
    const Node* n = ast.node(p);
    if (n->kind == NodeKind::ClassDecl) return n->children[0].text;
  }
  throw std::runtime_error("method outside a class");
}

class Builder {
 public:
  Builder(const std::vector<ModuleInfo>& modules, const std::string& sidecar) {
    for (const auto& t : annotations::parse_templates(sidecar)) custom_[t.name] = t.body;
    for (const auto& m : modules) {
      for (const auto& a : m.bound) {
        if (a.kind != AnnotationKind::InstanceTemplate) continue;
        const Node* cls = class_decl(m.ast, m.ast.node(*a.target_node));
        if (!cls) throw std::runtime_error("instance template without class");
        auto payload = a.instance_template();
        instances_[payload.name] = {cls->children[0].text, payload.ctor_args};
      }
    }
  }

  std::string value(const ValueSpec& spec) const {
    switch (spec.variant) {
      case ValueSpec::Variant::Literal:
        return "(" + spec.text + ")";
      case ValueSpec::Variant::Resource:
        return fmt::format("__resources[\"{}\"]", spec.text);
      case ValueSpec::Variant::Template:
      case ValueSpec::Variant::Custom:
        if (auto it = instances_.find(spec.text); it != instances_.end()) {
          std::vector<std::string> args;
          for (const auto& a : it->second.second) args.push_back(value(a));
          return fmt::format("new {}({})", it->second.first, fmt::join(args, ", "));
        }
        if (auto it = custom_.find(spec.text); it != custom_.end()) {
          lang::parse_expression(it->second);  // single-expression bodies only
          return "(" + it->second + ")";
        }
        throw std::runtime_error("unknown template " + spec.text);
    }
    return {};
  }

 private:
  std::map<std::string, std::string> custom_;
  std::map<std::string, std::pair<std::string, std::vector<ValueSpec>>> instances_;
};

inline std::string apply_replacements(const ModuleInfo& m) {
  std::vector<std::pair<const Node*, std::string>> edits;
  for (const auto& a : m.bound) {
    if (a.kind == AnnotationKind::Replacement) edits.emplace_back(m.ast.node(*a.target_node), a.replacement().replacement_source);
  }
  std::sort(edits.begin(), edits.end(), [](auto& x, auto& y) { return x.first->span.start > y.first->span.start; });
  std::string text = m.text;
  for (const auto& [node, with] : edits) {
    std::size_t from = annotations::byte_offset(text, node->span.start);
    std::size_t to = annotations::byte_offset(text, node->span.end);
    text.replace(from, to - from, "(" + with + ")");
  }
  return annotations::strip_annotations(text);
}

struct Wrapper {
  std::string module;
  std::string name;
  std::string function;
};

}  // namespace oracle_detail

// Examples in the order the session reports them: module name, then
// document order. Disabled examples are skipped.
inline std::vector<CleanOutcome> clean_run(const CleanInputs& in, const runtime::RuntimeConfig& config = {}) {
  using namespace oracle_detail;
  std::vector<ModuleInfo> modules;
  for (const auto& [name, text] : in.sources) {
    ModuleInfo m{name, text, lang::parse_module(text, name), {}};
    m.bound = annotations::attach(annotations::extract_annotations(text).annotations, m.ast).bound;
    modules.push_back(std::move(m));
  }
  Builder values(modules, in.templates);

  std::vector<Wrapper> wrappers;
  std::map<std::string, std::shared_ptr<const instrument::InstrumentedModule>> available;
  instrument::SessionCatalog catalog;
  for (const auto& m : modules) catalog.known_modules.insert(m.name);
  instrument::InstrumentConfig icfg;
  icfg.time_budget_ms = config.time_budget_ms;
  icfg.snapshot_depth = config.snapshot_depth;
  icfg.session_modules = catalog.known_modules;

  for (const auto& m : modules) {
    std::string text = apply_replacements(m);
    std::vector<const Annotation*> examples;
    for (const auto& a : m.bound) {
      if (a.kind == AnnotationKind::Example) examples.push_back(&a);
    }
    std::sort(examples.begin(), examples.end(),
              [](const Annotation* a, const Annotation* b) { return a->anchor_span.start < b->anchor_span.start; });
    for (const Annotation* a : examples) {
      auto ex = a->example();
      if (!ex.enabled) continue;
      const Node* target = m.ast.node(*a->target_node);
      std::string fn = fmt::format("__oracle_{}", wrappers.size());
      std::string body = fmt::format("  let __this = {};\n", values.value(ex.this_binding));
      std::vector<std::string> args;
      for (const Node* p : lang::function_params(*target)) {
        std::string spec = "undefined";
        for (const auto& [name, v] : ex.params) {
          if (name == p->text) spec = values.value(v);
        }
        body += fmt::format("  let {} = {};\n", p->text, spec);
        args.push_back(p->text);
      }
      if (ex.prescript) body += *ex.prescript + "\n";
      std::string callee = lang::function_name(*target)->text;
      if (target->kind == NodeKind::MethodDef) {
        callee = (target->has_flag(lang::kFlagStatic) ? enclosing_class(m.ast, target->id) : "__this") + "." + callee;
      }
      body += fmt::format("  let __result = {}({});\n", callee, fmt::join(args, ", "));
      if (ex.postscript) body += *ex.postscript + "\n";
      text += fmt::format("\nexport function {}(__resources) {{\n{}  return __result;\n}}\n", fn, body);
      wrappers.push_back({m.name, ex.name, fn});
    }
    auto ast = lang::parse_module(text, m.name);
    available[m.name] =
        std::make_shared<instrument::InstrumentedModule>(instrument::prepare_plain(ast, icfg, catalog));
  }

  runtime::Runtime rt(config);
  for (const auto& [name, spec] : in.resources.items()) {
    if (spec.is_object() && spec.contains("mock")) rt.bind_mock(name, spec["mock"].get<std::string>());
    else rt.bind_resource_expression(name, spec.is_string() ? spec.get<std::string>() : spec["expression"].get<std::string>());
  }
  std::map<std::string, runtime::Value> resources;
  for (const auto& name : rt.resource_names()) resources[name] = rt.resource(name);

  std::vector<CleanOutcome> out;
  for (const auto& w : wrappers) {
    CleanOutcome o;
    o.module = w.module;
    o.name = w.name;
    std::vector<std::string> console;
    bool capturing = false;
    runtime::Hooks hooks;
    hooks.on_output = [&](const std::string& line) {
      if (capturing) console.push_back(line);
    };
    hooks.on_call = [&](const std::string&, const runtime::Function& f) {
      if (capturing) ++o.calls[f.name];
    };
    hooks.on_statement = [&](const std::string&, const std::string& module, const lang::Node& st) {
      if (capturing && st.has_span && !st.has_flag(lang::kFlagSynthetic)) o.lines[module].insert(st.span.start.line);
    };
    std::map<const runtime::HostResource*, std::size_t> before;
    for (auto& [name, v] : resources) {
      if (v.is_resource()) before[v.as_resource()] = v.as_resource()->output_log().size();
    }
    runtime::run_with_large_stack([&] {
      runtime::Interpreter interp(rt.heap(), rt.config(), hooks, resources, available);
      try {
        runtime::ModuleRecord& rec = interp.load(w.module);
        runtime::Object* res = interp.new_object();
        for (auto& [name, v] : resources) interp.set_property(runtime::Value(res), name, v);
        capturing = true;
        runtime::Value result = interp.call(rec.exports.at(w.function)->value, runtime::Value(), {runtime::Value(res)});
        capturing = false;
        runtime::IdentityRegistry ids;
        o.rendered_return = runtime::render(*runtime::snapshot(result, config.snapshot_depth, ids));
      } catch (const runtime::TimeoutError& e) {
        o.status = runtime::ExampleOutcome::Status::Timeout;
        o.error_message = e.what();
      } catch (const runtime::RuntimeError& e) {
        o.status = runtime::ExampleOutcome::Status::Error;
        o.error_message = e.what();
      }
      capturing = false;
    });
    o.output_log = console;
    for (auto& [res, n] : before) {
      auto log = res->output_log();
      for (std::size_t i = n; i < log.size(); ++i) o.output_log.push_back(log[i]);
    }
    out.push_back(std::move(o));
  }
  return out;
}

}  // namespace babylon::testing
