#pragma once

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "babylon/lang/ast.hpp"

namespace babylon::annotations {

using lang::NodeId;
using lang::SourcePos;
using lang::SourceSpan;

enum class AnnotationKind { Probe, Slider, Example, Replacement, InstanceTemplate };

// Comment keyword: probe, slider, example, replace, instance.
std::string_view kind_keyword(AnnotationKind kind);
std::optional<AnnotationKind> kind_from_keyword(std::string_view keyword);

struct ValueSpec {
  enum class Variant { Literal, Template, Custom, Resource };
  Variant variant = Variant::Literal;
  std::string text;  // expression source or referenced name

  // "@template:NAME", "@custom:NAME", "@resource:NAME", anything else is a
  // literal expression. Throws std::invalid_argument if a literal does not
  // parse as one expression.
  static ValueSpec decode(const std::string& encoded);
  std::string encode() const;
  bool operator==(const ValueSpec&) const = default;
};

struct ExamplePayload {
  std::string name;
  bool enabled = true;
  int color_index = 0;
  ValueSpec this_binding{ValueSpec::Variant::Literal, "null"};
  std::vector<std::pair<std::string, ValueSpec>> params;
  std::optional<std::string> prescript;
  std::optional<std::string> postscript;
};

struct InstanceTemplatePayload {
  std::string name;
  std::vector<ValueSpec> ctor_args;
};

struct ReplacementPayload {
  std::string replacement_source;
};

struct Annotation {
  AnnotationKind kind = AnnotationKind::Probe;
  nlohmann::json payload;  // null when the comment has no payload
  SourceSpan anchor_span;
  std::optional<NodeId> target_node;
  int color_index = 0;  // examples only

  ExamplePayload example() const;
  InstanceTemplatePayload instance_template() const;
  ReplacementPayload replacement() const;
};

struct AnnotationSyntaxError {
  SourceSpan span;
  std::string message;
};

struct ExtractResult {
  std::vector<Annotation> annotations;
  std::vector<AnnotationSyntaxError> errors;
};

// Lexes `source` to find comments, so annotation-like text inside string
// literals is ignored. Throws lang::ParseError if the source does not lex.
ExtractResult extract_annotations(std::string_view source);
ExtractResult extract_annotations(const std::vector<lang::Comment>& comments);

std::string serialize_annotation(const Annotation& annotation);

bool can_be_probe(const lang::Node& node, const lang::IdentifiedAst& ast);
bool can_be_slider(const lang::Node& node, const lang::IdentifiedAst& ast);
bool can_be_example_target(const lang::Node& node, const lang::IdentifiedAst& ast);
bool can_be_replaced(const lang::Node& node, const lang::IdentifiedAst& ast);

struct AttachError {
  Annotation annotation;
  std::string reason;
};

struct AttachedAnnotations {
  std::vector<Annotation> bound;  // target_node set on every entry
  std::vector<AttachError> errors;
};

AttachedAnnotations attach(std::vector<Annotation> annotations,
                           const lang::IdentifiedAst& ast);

// Source editing used by the service. Positions use code-point columns.
std::size_t byte_offset(std::string_view source, SourcePos pos);
std::string insert_annotation(std::string_view source, SourcePos at,
                              const Annotation& annotation);
// Removes the annotation comment whose span starts at `at`. Throws
// std::invalid_argument if there is none.
std::string remove_annotation(std::string_view source, SourcePos at);
std::string strip_annotations(std::string_view source);

}  // namespace babylon::annotations
