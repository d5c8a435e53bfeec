#include "babylon/instrument/instrumenter.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <functional>

#include "babylon/lang/parser.hpp"
#include "babylon/lang/printer.hpp"

namespace babylon::instrument {

using annotations::AnnotationKind;
using lang::kFlagSynthetic;
using lang::kNoId;
using lang::NodeKind;

UnresolvedImport::UnresolvedImport(SourceSpan span, std::string name)
    : InstrumentError(span, fmt::format("cannot resolve import \"{}\"", name)), name(std::move(name)) {}

UnresolvedValueSpec::UnresolvedValueSpec(SourceSpan span, std::string name)
    : InstrumentError(span, fmt::format("unknown template or resource \"{}\"", name)),
      name(std::move(name)) {}

std::string probe_id(const std::string& module, NodeId node) { return fmt::format("{}@{}", module, node); }

std::string example_id(const std::string& module, int color_index) {
  return fmt::format("{}#{}", module, color_index);
}

std::string module_name_for_import(const std::string& path) {
  std::string name = path;
  while (name.rfind("./", 0) == 0) name = name.substr(2);
  std::size_t slash = name.find_last_of('/');
  if (slash != std::string::npos) name = name.substr(slash + 1);
  std::size_t dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return name;
}

namespace {

// ProbeCapture.number: how the capture pairs up with its neighbour.
constexpr double kOpensPair = 0;
constexpr double kClosesPair = 1;
constexpr double kStandalone = 2;

Node synth(NodeKind kind, NodeId origin) {
  Node n;
  n.kind = kind;
  n.origin = origin;
  n.flags = kFlagSynthetic;
  return n;
}

void mark_synthetic(Node& n, NodeId origin) {
  n.origin = origin;
  n.flags |= kFlagSynthetic;
  n.has_span = false;
  for (Node& c : n.children) mark_synthetic(c, origin);
}

// Path from root to the original (non-synthetic) node with this origin.
bool find_path(Node& n, NodeId origin, std::vector<Node*>& path) {
  path.push_back(&n);
  if (n.origin == origin && !n.has_flag(kFlagSynthetic)) return true;
  for (Node& c : n.children) {
    if (find_path(c, origin, path)) return true;
  }
  path.pop_back();
  return false;
}

std::vector<Node*> path_to(Node& root, NodeId origin) {
  std::vector<Node*> path;
  find_path(root, origin, path);
  return path;
}

bool has_effects(const Node& n) {
  switch (n.kind) {
    case NodeKind::Call:
    case NodeKind::New:
    case NodeKind::Assignment:
    case NodeKind::Update:
    case NodeKind::ProbeCapture:
    case NodeKind::FactoryCall:
      return true;
    default:
      break;
  }
  return std::any_of(n.children.begin(), n.children.end(), has_effects);
}

std::size_t after_guard(const Node& block) {
  return !block.children.empty() && block.children[0].kind == NodeKind::GuardCheck ? 1 : 0;
}

void renumber(Node& root, std::vector<NodeId>& id_map) {
  id_map.clear();
  std::vector<Node*> stack{&root};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    n->id = static_cast<NodeId>(id_map.size());
    id_map.push_back(n->origin);
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) stack.push_back(&*it);
  }
}

const Node* original_parent(const IdentifiedAst& ast, NodeId id) {
  NodeId p = ast.parent(id);
  return p == kNoId ? nullptr : ast.node(p);
}

bool is_param_of(const Node& fn, const Node& ident) {
  for (const Node* p : lang::function_params(fn)) {
    if (p == &ident) return true;
  }
  return false;
}

Node value_expression(const ValueSpec& spec, const std::string& module, NodeId origin,
                      SourceSpan span, const SessionCatalog& catalog) {
  using V = ValueSpec::Variant;
  switch (spec.variant) {
    case V::Literal: {
      Node e = lang::parse_expression(spec.text);
      mark_synthetic(e, origin);
      return e;
    }
    case V::Template:
    case V::Custom: {
      Node call = synth(NodeKind::FactoryCall, origin);
      call.text = spec.text;
      if (spec.variant == V::Template) {
        auto it = catalog.instance_templates.find(spec.text);
        if (it != catalog.instance_templates.end()) {
          call.detail = it->second.module;
          return call;
        }
      }
      bool custom = std::any_of(catalog.custom_templates.begin(), catalog.custom_templates.end(),
                                [&](const auto& t) { return t.name == spec.text; });
      if (!custom) throw UnresolvedValueSpec(span, spec.text);
      call.detail = module;
      return call;
    }
    case V::Resource: {
      if (!catalog.resources.count(spec.text)) throw UnresolvedValueSpec(span, spec.text);
      Node ref = synth(NodeKind::ResourceRef, origin);
      ref.text = spec.text;
      return ref;
    }
  }
  throw std::logic_error("unhandled value spec");
}

Node script_block(const std::optional<std::string>& script, NodeId origin) {
  Node block = script ? lang::parse_statements(*script) : synth(NodeKind::Block, origin);
  mark_synthetic(block, origin);
  passes::normalize_blocks(block);
  passes::insert_guards(block);
  mark_synthetic(block, origin);
  return block;
}

std::string probe_label(const Node& target, ProbeKind kind) {
  switch (kind) {
    case ProbeKind::Return: return "return";
    case ProbeKind::Member:
    case ProbeKind::Index: return lang::print_expression(target);
    default: return target.text;
  }
}

ProbeKind classify_probe(const Node& target, const IdentifiedAst& ast) {
  switch (target.kind) {
    case NodeKind::Return: return ProbeKind::Return;
    case NodeKind::Member: return ProbeKind::Member;
    case NodeKind::Index: return ProbeKind::Index;
    default: break;
  }
  const Node* parent = original_parent(ast, target.id);
  if (parent && lang::is_function_like(parent->kind) && is_param_of(*parent, target)) {
    return ProbeKind::Parameter;
  }
  if (parent && parent->kind == NodeKind::Declarator && &parent->children[0] == &target) {
    return ProbeKind::Declarator;
  }
  return ProbeKind::Identifier;
}

bool inside(const std::set<NodeId>& replaced, NodeId id) { return replaced.count(id) > 0; }

void collect_ids(const Node& n, std::set<NodeId>& out) {
  out.insert(n.id);
  for (const Node& c : n.children) collect_ids(c, out);
}

}  // namespace

namespace passes {

void normalize_blocks(Node& root) {
  auto wrap = [](Node& slot) {
    if (slot.kind == NodeKind::Block) return;
    Node block = synth(NodeKind::Block, slot.origin);
    block.span = slot.span;
    block.has_span = slot.has_span;
    block.children.push_back(std::move(slot));
    slot = std::move(block);
  };
  switch (root.kind) {
    case NodeKind::If:
      wrap(root.children[1]);
      if (root.children.size() > 2) wrap(root.children[2]);
      break;
    case NodeKind::While:
      wrap(root.children[1]);
      break;
    case NodeKind::For:
      wrap(root.children[3]);
      break;
    default:
      break;
  }
  for (Node& c : root.children) normalize_blocks(c);
}

void rewrite_imports(Node& root, const InstrumentConfig& config, const SessionCatalog& catalog,
                     std::vector<std::string>* resolved) {
  for (Node& s : root.children) {
    if (s.kind != NodeKind::ImportDecl) continue;
    std::string name = module_name_for_import(s.text);
    if (!catalog.known_modules.count(name)) throw UnresolvedImport(s.span, s.text);
    s.detail = name;
    if (config.session_modules.count(name)) {
      s.flags |= lang::kFlagInstrumented;
    } else {
      s.flags &= ~lang::kFlagInstrumented;
    }
    if (resolved) resolved->push_back(name);
  }
}

void insert_guards(Node& root) {
  if (root.kind == NodeKind::Block || root.kind == NodeKind::Module) {
    if (root.children.empty() || root.children[0].kind != NodeKind::GuardCheck) {
      root.children.insert(root.children.begin(), synth(NodeKind::GuardCheck, root.origin));
    }
  }
  for (Node& c : root.children) insert_guards(c);
}

std::set<NodeId> apply_replacements(Node& root, const IdentifiedAst& ast,
                                    const std::vector<Annotation>& replacements) {
  std::set<NodeId> replaced;
  for (const Annotation& a : replacements) {
    if (a.kind != AnnotationKind::Replacement) continue;
    NodeId target = *a.target_node;
    if (inside(replaced, target)) continue;
    std::vector<Node*> path = path_to(root, target);
    if (path.empty()) continue;
    Node expr;
    try {
      expr = lang::parse_expression(a.replacement().replacement_source);
    } catch (const lang::ParseError& e) {
      throw ReplacementParseError(a.anchor_span, e.what());
    }
    collect_ids(*ast.node(target), replaced);
    mark_synthetic(expr, target);
    *path.back() = std::move(expr);
  }
  return replaced;
}

void instrument_probes(Node& root, const std::vector<ProbeInfo>& probes) {
  for (const ProbeInfo& probe : probes) {
    std::vector<Node*> path = path_to(root, probe.target);
    if (path.empty()) continue;
    Node& target = *path.back();

    Node capture = synth(NodeKind::ProbeCapture, probe.target);
    capture.text = probe.id;

    if (probe.kind == ProbeKind::Return) {
      Node operand = target.children.empty() ? synth(NodeKind::NullLit, probe.target)
                                             : std::move(target.children[0]);
      capture.flags |= lang::kFlagPassThrough;
      capture.number = kStandalone;
      capture.children.push_back(std::move(operand));
      target.children.clear();
      target.children.push_back(std::move(capture));
      continue;
    }

    if (probe.kind == ProbeKind::Parameter) {
      Node& fn = *path[path.size() - 2];
      Node& body = lang::function_body(fn);
      if (body.kind != NodeKind::Block) continue;
      Node value = target;
      mark_synthetic(value, probe.target);
      capture.number = kStandalone;
      capture.children.push_back(std::move(value));
      body.children.insert(body.children.begin() + static_cast<long>(after_guard(body)),
                           std::move(capture));
      continue;
    }

    // The enclosing statement is the nearest ancestor sitting directly in a
    // block.
    std::size_t level = path.size() - 1;
    while (level > 0 && path[level - 1]->kind != NodeKind::Block &&
           path[level - 1]->kind != NodeKind::Module) {
      --level;
    }
    if (level == 0) continue;
    Node& block = *path[level - 1];
    const Node* stmt = path[level];
    std::size_t index = static_cast<std::size_t>(stmt - block.children.data());
    bool exits = stmt->kind == NodeKind::Return;

    Node value = target;
    if (probe.kind == ProbeKind::Index && has_effects(target.children[1])) {
      value = target.children[0];
    }
    mark_synthetic(value, probe.target);
    if (has_effects(value)) {
      capture.detail = "unavailable";
    } else {
      capture.children.push_back(std::move(value));
    }

    Node after = capture;
    after.flags |= lang::kFlagAfter;
    after.number = probe.kind == ProbeKind::Declarator ? kStandalone : kClosesPair;
    capture.number = exits ? kStandalone : kOpensPair;
    if (!exits) {
      block.children.insert(block.children.begin() + static_cast<long>(index + 1), std::move(after));
    }
    if (probe.kind != ProbeKind::Declarator) {
      block.children.insert(block.children.begin() + static_cast<long>(index), std::move(capture));
    }
  }
}

void instrument_sliders(Node& root, const std::vector<SliderInfo>& sliders) {
  for (const SliderInfo& slider : sliders) {
    std::vector<Node*> path = path_to(root, slider.target);
    if (path.empty()) continue;
    Node& target = *path.back();
    Node* body = nullptr;
    if (target.kind == NodeKind::While) {
      body = &target.children[1];
    } else if (target.kind == NodeKind::For) {
      body = &target.children[3];
    } else if (path.size() >= 2 && lang::is_function_like(path[path.size() - 2]->kind)) {
      body = &lang::function_body(*path[path.size() - 2]);
    }
    if (!body || body->kind != NodeKind::Block) continue;
    Node bump = synth(NodeKind::CounterBump, slider.target);
    bump.text = slider.id;
    body->children.insert(body->children.begin() + static_cast<long>(after_guard(*body)),
                          std::move(bump));
  }
}

void emit_factories(Node& root, const std::string& module,
                    const std::vector<InstanceTemplateInfo>& templates,
                    const SessionCatalog& catalog) {
  for (const InstanceTemplateInfo& t : templates) {
    const Node* cls = nullptr;
    for (const Node& s : root.children) {
      const Node* decl = &s;
      if (s.kind == NodeKind::ExportDecl && !s.children.empty()) decl = &s.children[0];
      if (decl->kind == NodeKind::ClassDecl && decl->text == t.class_name) cls = decl;
    }
    if (t.class_name.empty() || !cls) {
      throw UnknownClass({}, fmt::format("template \"{}\" names unknown class \"{}\"", t.name, t.class_name));
    }
    NodeId origin = cls->origin;
    Node ctor = synth(NodeKind::New, origin);
    Node callee = synth(NodeKind::Identifier, origin);
    callee.text = t.class_name;
    ctor.children.push_back(std::move(callee));
    for (const ValueSpec& arg : t.ctor_args) {
      ctor.children.push_back(value_expression(arg, module, origin, cls->span, catalog));
    }
    Node ret = synth(NodeKind::Return, origin);
    ret.children.push_back(std::move(ctor));
    Node body = synth(NodeKind::Block, origin);
    body.children.push_back(synth(NodeKind::GuardCheck, origin));
    body.children.push_back(std::move(ret));
    Node factory = synth(NodeKind::FactoryDecl, origin);
    factory.text = t.name;
    factory.detail = "instance";
    factory.children.push_back(std::move(body));
    root.children.push_back(std::move(factory));
  }
  for (const annotations::CustomTemplate& t : catalog.custom_templates) {
    Node body = lang::parse_statements(t.body);
    Node last = std::move(body.children.back());
    Node ret = synth(NodeKind::Return, root.origin);
    ret.children.push_back(std::move(last.children[0]));
    body.children.back() = std::move(ret);
    normalize_blocks(body);
    insert_guards(body);
    mark_synthetic(body, root.origin);
    Node factory = synth(NodeKind::FactoryDecl, root.origin);
    factory.text = t.name;
    factory.detail = "custom";
    factory.children.push_back(std::move(body));
    root.children.push_back(std::move(factory));
  }
}

void append_example_blocks(Node& root, const IdentifiedAst& ast,
                           const std::vector<Annotation>& examples, const SessionCatalog& catalog) {
  const std::string& module = ast.module_name();
  for (const Annotation& a : examples) {
    if (a.kind != AnnotationKind::Example) continue;
    annotations::ExamplePayload ex = a.example();
    const Node& fn = *ast.node(*a.target_node);
    NodeId origin = fn.id;

    Node callee;
    if (fn.kind == NodeKind::MethodDef) {
      const Node* cls = original_parent(ast, fn.id);
      callee = synth(NodeKind::Member, origin);
      callee.text = fn.text;
      Node cls_ref = synth(NodeKind::Identifier, origin);
      cls_ref.text = cls->text;
      callee.children.push_back(std::move(cls_ref));
    } else {
      callee = synth(NodeKind::Identifier, origin);
      callee.text = fn.text;
    }

    Node this_expr = value_expression(ex.this_binding, module, origin, a.anchor_span, catalog);
    Node bindings = synth(NodeKind::Block, origin);
    for (const Node* p : lang::function_params(fn)) {
      auto it = std::find_if(ex.params.begin(), ex.params.end(),
                             [&](const auto& kv) { return kv.first == p->text; });
      Node decl = synth(NodeKind::VarDecl, origin);
      decl.text = "let";
      Node d = synth(NodeKind::Declarator, origin);
      Node name = synth(NodeKind::Identifier, origin);
      name.text = p->text;
      d.children.push_back(std::move(name));
      d.children.push_back(value_expression(it->second, module, origin, a.anchor_span, catalog));
      decl.children.push_back(std::move(d));
      bindings.children.push_back(std::move(decl));
    }
    Node pre = script_block(ex.prescript, origin);
    Node post = script_block(ex.postscript, origin);
    if (!ex.enabled) continue;

    Node block = synth(NodeKind::ExampleBlock, origin);
    block.text = example_id(module, ex.color_index);
    block.detail = ex.name;
    block.number = ex.color_index;
    if (fn.has_flag(lang::kFlagStatic)) block.flags |= lang::kFlagStatic;
    block.children.push_back(std::move(callee));
    block.children.push_back(std::move(this_expr));
    block.children.push_back(std::move(bindings));
    block.children.push_back(std::move(pre));
    block.children.push_back(std::move(post));
    root.children.push_back(std::move(block));
  }
}

}  // namespace passes

std::vector<InstanceTemplateInfo> collect_instance_templates(const IdentifiedAst& ast,
                                                             const std::vector<Annotation>& bound) {
  std::vector<InstanceTemplateInfo> out;
  for (const Annotation& a : bound) {
    if (a.kind != AnnotationKind::InstanceTemplate) continue;
    annotations::InstanceTemplatePayload p = a.instance_template();
    out.push_back({p.name, ast.module_name(), ast.node(*a.target_node)->text, p.ctor_args});
  }
  return out;
}

InstrumentedModule instrument(const IdentifiedAst& ast, const std::vector<Annotation>& bound,
                              const InstrumentConfig& config, const SessionCatalog& catalog) {
  if (config.time_budget_ms <= 0) throw std::invalid_argument("time budget must be positive");
  InstrumentedModule out;
  out.module_name = ast.module_name();
  const std::string& module = out.module_name;
  Node root = ast.root();

  std::vector<Annotation> replacements, examples;
  std::vector<ProbeInfo> probes;
  std::vector<SliderInfo> sliders;
  for (const Annotation& a : bound) {
    const Node& target = *ast.node(*a.target_node);
    switch (a.kind) {
      case AnnotationKind::Probe: {
        ProbeKind kind = classify_probe(target, ast);
        probes.push_back({probe_id(module, target.id), target.id, kind, probe_label(target, kind),
                          target.span});
        break;
      }
      case AnnotationKind::Slider: {
        std::string label = target.kind == NodeKind::Identifier ? target.text
                                                                : std::string(lang::kind_name(target.kind));
        sliders.push_back({probe_id(module, target.id), target.id, label, target.span});
        break;
      }
      case AnnotationKind::Example: {
        annotations::ExamplePayload ex = a.example();
        out.example_table.push_back({example_id(module, ex.color_index), ex.name, ex.color_index,
                                     ex.enabled, target.id, target.text, a.anchor_span});
        examples.push_back(a);
        break;
      }
      case AnnotationKind::Replacement:
        replacements.push_back(a);
        break;
      case AnnotationKind::InstanceTemplate:
        break;
    }
  }

  passes::normalize_blocks(root);
  passes::rewrite_imports(root, config, catalog, &out.imports);
  passes::insert_guards(root);
  std::set<NodeId> replaced = passes::apply_replacements(root, ast, replacements);

  std::vector<ProbeInfo> live_probes;
  std::set<std::string> seen;
  for (ProbeInfo& p : probes) {
    if (!seen.insert(p.id).second) continue;
    if (inside(replaced, p.target)) {
      out.diagnostics.push_back({p.span, fmt::format("probe on {} dropped: its target was replaced", p.label)});
      continue;
    }
    live_probes.push_back(p);
  }
  passes::instrument_probes(root, live_probes);
  std::vector<SliderInfo> live_sliders;
  for (SliderInfo& s : sliders) {
    if (!seen.insert(s.id).second) continue;
    if (inside(replaced, s.target)) {
      out.diagnostics.push_back({s.span, fmt::format("slider on {} dropped: its target was replaced", s.label)});
      continue;
    }
    live_sliders.push_back(s);
  }
  passes::instrument_sliders(root, live_sliders);
  passes::emit_factories(root, module, collect_instance_templates(ast, bound), catalog);
  passes::append_example_blocks(root, ast, examples, catalog);

  for (const ProbeInfo& p : live_probes) out.probe_table.emplace(p.id, p.target);
  for (const SliderInfo& s : live_sliders) out.slider_table.emplace(s.id, s.target);
  out.probes = std::move(live_probes);
  out.sliders = std::move(live_sliders);
  renumber(root, out.id_map);
  out.exec_tree = std::make_shared<const Node>(std::move(root));
  return out;
}

InstrumentedModule prepare_plain(const IdentifiedAst& ast, const InstrumentConfig& config,
                                 const SessionCatalog& catalog) {
  InstrumentedModule out;
  out.module_name = ast.module_name();
  Node root = ast.root();
  passes::normalize_blocks(root);
  passes::rewrite_imports(root, config, catalog, &out.imports);
  passes::insert_guards(root);
  renumber(root, out.id_map);
  out.exec_tree = std::make_shared<const Node>(std::move(root));
  return out;
}

}  // namespace babylon::instrument
