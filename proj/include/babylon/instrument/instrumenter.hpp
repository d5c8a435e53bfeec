#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "babylon/annotations/annotation.hpp"
#include "babylon/annotations/templates.hpp"
#include "babylon/lang/ast.hpp"

namespace babylon::instrument {

using annotations::Annotation;
using annotations::ValueSpec;
using lang::IdentifiedAst;
using lang::Node;
using lang::NodeId;
using lang::SourceSpan;

struct InstrumentConfig {
  double time_budget_ms = 500.0;
  int snapshot_depth = 3;
  std::set<std::string> session_modules;
};

struct InstanceTemplateInfo {
  std::string name;
  std::string module;
  std::string class_name;
  std::vector<ValueSpec> ctor_args;
};

// Everything outside the module being instrumented that ValueSpecs and
// imports may refer to.
struct SessionCatalog {
  std::set<std::string> known_modules;
  std::map<std::string, InstanceTemplateInfo> instance_templates;
  std::vector<annotations::CustomTemplate> custom_templates;
  std::set<std::string> resources;
};

enum class ProbeKind { Identifier, Parameter, Declarator, Member, Index, Return };

struct ProbeInfo {
  std::string id;  // "module@node"
  NodeId target = lang::kNoId;
  ProbeKind kind = ProbeKind::Identifier;
  std::string label;
  SourceSpan span;
};

struct SliderInfo {
  std::string id;
  NodeId target = lang::kNoId;
  std::string label;
  SourceSpan span;
};

struct ExampleInfo {
  std::string id;  // "module#color"
  std::string name;
  int color_index = 0;
  bool enabled = true;
  NodeId target = lang::kNoId;
  std::string callable;
  SourceSpan span;  // the example comment
};

struct Diagnostic {
  SourceSpan span;
  std::string message;
};

struct InstrumentedModule {
  std::string module_name;
  std::shared_ptr<const Node> exec_tree;
  std::vector<NodeId> id_map;  // exec node ID -> original node ID
  std::map<std::string, NodeId> probe_table;
  std::map<std::string, NodeId> slider_table;
  std::vector<ProbeInfo> probes;
  std::vector<SliderInfo> sliders;
  std::vector<ExampleInfo> example_table;  // document order, disabled included
  std::vector<std::string> imports;        // resolved module names
  std::vector<Diagnostic> diagnostics;
};

struct InstrumentError : std::runtime_error {
  InstrumentError(SourceSpan span, const std::string& message)
      : std::runtime_error(message), span(span) {}
  SourceSpan span;
};
struct UnresolvedImport : InstrumentError {
  UnresolvedImport(SourceSpan span, std::string name);
  std::string name;
};
struct ReplacementParseError : InstrumentError {
  using InstrumentError::InstrumentError;
};
struct UnknownClass : InstrumentError {
  using InstrumentError::InstrumentError;
};
struct UnresolvedValueSpec : InstrumentError {
  UnresolvedValueSpec(SourceSpan span, std::string name);
  std::string name;
};

std::string probe_id(const std::string& module, NodeId node);
std::string example_id(const std::string& module, int color_index);

// "./person.baby" -> "person".
std::string module_name_for_import(const std::string& path);

// Instance templates and their owning classes, as found in one module.
std::vector<InstanceTemplateInfo> collect_instance_templates(
    const IdentifiedAst& ast, const std::vector<Annotation>& bound);

InstrumentedModule instrument(const IdentifiedAst& ast, const std::vector<Annotation>& bound,
                              const InstrumentConfig& config, const SessionCatalog& catalog);

// Normalized and guarded tree with imports resolved, for modules loaded
// without annotations.
InstrumentedModule prepare_plain(const IdentifiedAst& ast, const InstrumentConfig& config,
                                 const SessionCatalog& catalog);

// Individual passes, exposed for tests. `instrument` is the only entry point
// that guarantees their order.
namespace passes {

void normalize_blocks(Node& root);
void rewrite_imports(Node& root, const InstrumentConfig& config, const SessionCatalog& catalog,
                     std::vector<std::string>* resolved = nullptr);
void insert_guards(Node& root);
// Returns the original IDs of every node that was substituted away.
std::set<NodeId> apply_replacements(Node& root, const IdentifiedAst& ast,
                                    const std::vector<Annotation>& replacements);
void instrument_probes(Node& root, const std::vector<ProbeInfo>& probes);
void instrument_sliders(Node& root, const std::vector<SliderInfo>& sliders);
void emit_factories(Node& root, const std::string& module,
                    const std::vector<InstanceTemplateInfo>& templates,
                    const SessionCatalog& catalog);
void append_example_blocks(Node& root, const IdentifiedAst& ast,
                           const std::vector<Annotation>& examples, const SessionCatalog& catalog);

}  // namespace passes

}  // namespace babylon::instrument
