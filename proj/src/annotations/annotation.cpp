#include "babylon/annotations/annotation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <set>

#include "babylon/lang/lexer.hpp"
#include "babylon/lang/parser.hpp"

namespace babylon::annotations {

using lang::IdentifiedAst;
using lang::Node;
using lang::NodeKind;

namespace {

constexpr std::string_view kTemplatePrefix = "@template:";
constexpr std::string_view kCustomPrefix = "@custom:";
constexpr std::string_view kResourcePrefix = "@resource:";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\n");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\n");
  return std::string(s.substr(b, e - b + 1));
}

void require_expression(const std::string& text, const char* what) {
  try {
    lang::parse_expression(text);
  } catch (const lang::ParseError& e) {
    throw std::invalid_argument(fmt::format("{} is not an expression: {}", what, e.what()));
  }
}

void require_statements(const std::string& text, const char* what) {
  try {
    lang::parse_statements(text);
  } catch (const lang::ParseError& e) {
    throw std::invalid_argument(fmt::format("{} does not parse: {}", what, e.what()));
  }
}

const std::string& require_string(const nlohmann::json& j, const char* what) {
  if (!j.is_string()) throw std::invalid_argument(fmt::format("{} must be a string", what));
  return j.get_ref<const std::string&>();
}

void validate(AnnotationKind kind, const nlohmann::json& payload) {
  switch (kind) {
    case AnnotationKind::Probe:
    case AnnotationKind::Slider:
      if (!payload.is_null()) throw std::invalid_argument("unexpected payload");
      return;
    case AnnotationKind::Replacement:
      require_expression(require_string(payload, "replacement"), "replacement");
      return;
    case AnnotationKind::InstanceTemplate: {
      if (!payload.is_object()) throw std::invalid_argument("payload must be an object");
      for (const auto& [key, value] : payload.items()) {
        if (key != "name" && key != "args") {
          throw std::invalid_argument(fmt::format("unknown key \"{}\"", key));
        }
      }
      if (!payload.contains("name") || require_string(payload["name"], "name").empty()) {
        throw std::invalid_argument("instance template needs a name");
      }
      if (payload.contains("args")) {
        if (!payload["args"].is_array()) throw std::invalid_argument("args must be an array");
        for (const auto& a : payload["args"]) ValueSpec::decode(require_string(a, "argument"));
      }
      return;
    }
    case AnnotationKind::Example: {
      if (!payload.is_object()) throw std::invalid_argument("payload must be an object");
      static const std::set<std::string> keys = {"name", "enabled", "this",
                                                 "params", "prescript", "postscript"};
      for (const auto& [key, value] : payload.items()) {
        if (!keys.count(key)) throw std::invalid_argument(fmt::format("unknown key \"{}\"", key));
      }
      if (!payload.contains("name") || require_string(payload["name"], "name").empty()) {
        throw std::invalid_argument("example needs a name");
      }
      if (payload.contains("enabled") && !payload["enabled"].is_boolean()) {
        throw std::invalid_argument("enabled must be a boolean");
      }
      if (payload.contains("this")) ValueSpec::decode(require_string(payload["this"], "this"));
      if (payload.contains("params")) {
        if (!payload["params"].is_object()) throw std::invalid_argument("params must be an object");
        for (const auto& [key, value] : payload["params"].items()) {
          ValueSpec::decode(require_string(value, "parameter value"));
        }
      }
      for (const char* script : {"prescript", "postscript"}) {
        if (payload.contains(script)) require_statements(require_string(payload[script], script), script);
      }
      return;
    }
  }
}

const Node* parent_of(const Node& node, const IdentifiedAst& ast) {
  NodeId p = ast.parent(node.id);
  return p == lang::kNoId ? nullptr : ast.node(p);
}

std::size_t child_index(const Node& parent, const Node& child) {
  for (std::size_t i = 0; i < parent.children.size(); ++i) {
    if (&parent.children[i] == &child) return i;
  }
  return parent.children.size();
}

bool is_name_identifier(const Node& node, const Node* parent) {
  if (!parent || node.kind != NodeKind::Identifier) return false;
  bool named = parent->kind == NodeKind::FunctionDecl || parent->kind == NodeKind::MethodDef ||
               parent->kind == NodeKind::ClassDecl;
  return named && child_index(*parent, node) == 0;
}

bool is_parameter(const Node& node, const Node* parent) {
  if (!parent || node.kind != NodeKind::Identifier || !lang::is_function_like(parent->kind)) {
    return false;
  }
  for (const Node* p : lang::function_params(*parent)) {
    if (p == &node) return true;
  }
  return false;
}

bool is_module_level(const Node& node, const IdentifiedAst& ast) {
  const Node* parent = parent_of(node, ast);
  if (parent && parent->kind == NodeKind::ExportDecl) parent = parent_of(*parent, ast);
  return parent && parent->kind == NodeKind::Module;
}

// Function-shaped target for an example comment: the declaration itself or
// its name identifier.
const Node* example_callable(const Node& node, const IdentifiedAst& ast) {
  const Node* fn = &node;
  if (node.kind == NodeKind::Identifier) {
    const Node* parent = parent_of(node, ast);
    if (!is_name_identifier(node, parent)) return nullptr;
    fn = parent;
  }
  if (fn->kind == NodeKind::FunctionDecl) return is_module_level(*fn, ast) ? fn : nullptr;
  if (fn->kind == NodeKind::MethodDef) {
    const Node* cls = parent_of(*fn, ast);
    if (cls && cls->kind == NodeKind::ClassDecl && is_module_level(*cls, ast)) return fn;
  }
  return nullptr;
}

bool identifier_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
         (static_cast<unsigned char>(c) & 0x80);
}

bool is_annotation_comment(const lang::Comment& c) {
  return c.block && starts_with(c.text, "/*@");
}

}  // namespace

std::string_view kind_keyword(AnnotationKind kind) {
  switch (kind) {
    case AnnotationKind::Probe: return "probe";
    case AnnotationKind::Slider: return "slider";
    case AnnotationKind::Example: return "example";
    case AnnotationKind::Replacement: return "replace";
    case AnnotationKind::InstanceTemplate: return "instance";
  }
  return "";
}

std::optional<AnnotationKind> kind_from_keyword(std::string_view keyword) {
  for (AnnotationKind k : {AnnotationKind::Probe, AnnotationKind::Slider, AnnotationKind::Example,
                           AnnotationKind::Replacement, AnnotationKind::InstanceTemplate}) {
    if (kind_keyword(k) == keyword) return k;
  }
  return std::nullopt;
}

ValueSpec ValueSpec::decode(const std::string& encoded) {
  std::string_view s = encoded;
  if (starts_with(s, kTemplatePrefix)) {
    return {Variant::Template, std::string(s.substr(kTemplatePrefix.size()))};
  }
  if (starts_with(s, kCustomPrefix)) return {Variant::Custom, std::string(s.substr(kCustomPrefix.size()))};
  if (starts_with(s, kResourcePrefix)) {
    return {Variant::Resource, std::string(s.substr(kResourcePrefix.size()))};
  }
  require_expression(encoded, "value");
  return {Variant::Literal, encoded};
}

std::string ValueSpec::encode() const {
  switch (variant) {
    case Variant::Literal: return text;
    case Variant::Template: return std::string(kTemplatePrefix) + text;
    case Variant::Custom: return std::string(kCustomPrefix) + text;
    case Variant::Resource: return std::string(kResourcePrefix) + text;
  }
  return text;
}

ExamplePayload Annotation::example() const {
  ExamplePayload out;
  out.name = payload.at("name").get<std::string>();
  out.enabled = payload.value("enabled", true);
  out.color_index = color_index;
  if (payload.contains("this")) out.this_binding = ValueSpec::decode(payload["this"]);
  if (payload.contains("params")) {
    for (const auto& [key, value] : payload["params"].items()) {
      out.params.emplace_back(key, ValueSpec::decode(value.get<std::string>()));
    }
  }
  if (payload.contains("prescript")) out.prescript = payload["prescript"].get<std::string>();
  if (payload.contains("postscript")) out.postscript = payload["postscript"].get<std::string>();
  return out;
}

InstanceTemplatePayload Annotation::instance_template() const {
  InstanceTemplatePayload out;
  out.name = payload.at("name").get<std::string>();
  if (payload.contains("args")) {
    for (const auto& a : payload["args"]) out.ctor_args.push_back(ValueSpec::decode(a.get<std::string>()));
  }
  return out;
}

ReplacementPayload Annotation::replacement() const {
  return {payload.get<std::string>()};
}

ExtractResult extract_annotations(std::string_view source) {
  return extract_annotations(lang::lex(source).comments);
}

ExtractResult extract_annotations(const std::vector<lang::Comment>& comments) {
  ExtractResult out;
  int examples = 0;
  for (const lang::Comment& c : comments) {
    if (!is_annotation_comment(c)) continue;
    std::string_view inner = std::string_view(c.text).substr(3, c.text.size() - 5);
    std::size_t kind_end = 0;
    while (kind_end < inner.size() && std::islower(static_cast<unsigned char>(inner[kind_end]))) {
      ++kind_end;
    }
    std::string_view keyword = inner.substr(0, kind_end);
    std::string_view rest = inner.substr(kind_end);
    auto kind = kind_from_keyword(keyword);
    if (!kind) {
      out.errors.push_back({c.span, fmt::format("unknown annotation kind \"{}\"", keyword)});
      continue;
    }
    if (!rest.empty() && rest.front() != ' ' && rest.front() != '\t' && rest.front() != '\n') {
      out.errors.push_back({c.span, "expected whitespace after annotation kind"});
      continue;
    }
    Annotation a;
    a.kind = *kind;
    a.anchor_span = c.span;
    std::string payload_text = trim(rest);
    try {
      if (!payload_text.empty()) a.payload = nlohmann::json::parse(payload_text);
      validate(a.kind, a.payload);
    } catch (const nlohmann::json::exception& e) {
      out.errors.push_back({c.span, fmt::format("malformed payload: {}", e.what())});
      continue;
    } catch (const std::invalid_argument& e) {
      out.errors.push_back({c.span, e.what()});
      continue;
    }
    if (a.kind == AnnotationKind::Example) a.color_index = examples++;
    out.annotations.push_back(std::move(a));
  }
  return out;
}

std::string serialize_annotation(const Annotation& annotation) {
  std::string out = "/*@";
  out += kind_keyword(annotation.kind);
  if (!annotation.payload.is_null()) out += " " + annotation.payload.dump();
  out += "*/";
  return out;
}

bool can_be_probe(const Node& node, const IdentifiedAst& ast) {
  switch (node.kind) {
    case NodeKind::Member:
    case NodeKind::Index:
    case NodeKind::Return:
      return true;
    case NodeKind::Identifier: {
      const Node* parent = parent_of(node, ast);
      if (!parent) return false;
      if (parent->kind == NodeKind::ImportDecl) return false;
      return !is_name_identifier(node, parent);
    }
    default:
      return false;
  }
}

bool can_be_slider(const Node& node, const IdentifiedAst& ast) {
  if (node.kind == NodeKind::While || node.kind == NodeKind::For) return true;
  if (node.kind != NodeKind::Identifier) return false;
  const Node* parent = parent_of(node, ast);
  return parent && parent->kind != NodeKind::ClassDecl && is_name_identifier(node, parent);
}

bool can_be_example_target(const Node& node, const IdentifiedAst& ast) {
  return example_callable(node, ast) != nullptr;
}

bool can_be_replaced(const Node& node, const IdentifiedAst& ast) {
  if (!lang::is_expression_kind(node.kind)) return false;
  const Node* parent = parent_of(node, ast);
  if (!parent) return false;
  if (parent->kind == NodeKind::TemplateLit && child_index(*parent, node) % 2 == 0) return false;
  if (node.kind != NodeKind::Identifier) return true;
  if (parent->kind == NodeKind::ImportDecl || is_name_identifier(node, parent) ||
      is_parameter(node, parent) || parent->kind == NodeKind::Update) {
    return false;
  }
  if ((parent->kind == NodeKind::Declarator || parent->kind == NodeKind::Assignment) &&
      child_index(*parent, node) == 0) {
    return false;
  }
  return true;
}

AttachedAnnotations attach(std::vector<Annotation> annotations, const IdentifiedAst& ast) {
  std::vector<const Node*> nodes;
  nodes.reserve(ast.size());
  for (std::size_t i = 0; i < ast.size(); ++i) {
    const Node* n = ast.node(static_cast<NodeId>(i));
    if (n->has_span && n->kind != NodeKind::Module) nodes.push_back(n);
  }
  std::stable_sort(nodes.begin(), nodes.end(), [](const Node* a, const Node* b) {
    return a->span.start < b->span.start;
  });

  // Stacked annotation comments share one reach: the target may sit on the
  // line after the last comment of the run.
  std::vector<int> reach(annotations.size());
  for (std::size_t i = annotations.size(); i-- > 0;) {
    reach[i] = annotations[i].anchor_span.end.line + 1;
    if (i + 1 < annotations.size() && annotations[i + 1].anchor_span.start.line <= reach[i]) {
      reach[i] = std::max(reach[i], reach[i + 1]);
    }
  }

  AttachedAnnotations out;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    Annotation& a = annotations[i];
    SourcePos end = a.anchor_span.end;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), end,
                               [](const Node* n, SourcePos p) { return n->span.start < p; });
    const Node* target = nullptr;
    for (; it != nodes.end() && (*it)->span.start.line <= reach[i]; ++it) {
      const Node& n = **it;
      bool ok = false;
      switch (a.kind) {
        case AnnotationKind::Probe: ok = can_be_probe(n, ast); break;
        case AnnotationKind::Slider: ok = can_be_slider(n, ast); break;
        case AnnotationKind::Example: ok = can_be_example_target(n, ast); break;
        case AnnotationKind::Replacement: ok = can_be_replaced(n, ast); break;
        case AnnotationKind::InstanceTemplate: ok = n.kind == NodeKind::ClassDecl; break;
      }
      if (ok) {
        target = a.kind == AnnotationKind::Example ? example_callable(n, ast) : &n;
        break;
      }
    }
    if (!target) {
      std::string reason = fmt::format("no node eligible for a {} follows {}",
                                       kind_keyword(a.kind), lang::to_string(a.anchor_span));
      out.errors.push_back({std::move(a), std::move(reason)});
      continue;
    }
    if (a.kind == AnnotationKind::Example) {
      std::set<std::string> expected;
      for (const Node* p : lang::function_params(*target)) expected.insert(p->text);
      std::set<std::string> given;
      for (const auto& [name, spec] : a.example().params) given.insert(name);
      if (expected != given) {
        std::string reason = fmt::format("example \"{}\" parameters do not match {}",
                                         a.example().name, target->text);
        out.errors.push_back({std::move(a), std::move(reason)});
        continue;
      }
    }
    a.target_node = target->id;
    out.bound.push_back(std::move(a));
  }
  return out;
}

std::size_t byte_offset(std::string_view source, SourcePos pos) {
  std::size_t i = 0;
  for (int line = 1; line < pos.line; ++line) {
    std::size_t nl = source.find('\n', i);
    if (nl == std::string_view::npos) throw std::out_of_range("line past end of source");
    i = nl + 1;
  }
  for (int col = 0; col < pos.column; ++col) {
    if (i >= source.size() || source[i] == '\n') throw std::out_of_range("column past end of line");
    ++i;
    while (i < source.size() && (static_cast<unsigned char>(source[i]) & 0xC0) == 0x80) ++i;
  }
  return i;
}

std::string insert_annotation(std::string_view source, SourcePos at, const Annotation& annotation) {
  std::size_t offset = byte_offset(source, at);
  std::string out(source.substr(0, offset));
  out += serialize_annotation(annotation);
  out += source.substr(offset);
  return out;
}

std::string remove_annotation(std::string_view source, SourcePos at) {
  for (const lang::Comment& c : lang::lex(source).comments) {
    if (is_annotation_comment(c) && c.span.start == at) {
      std::size_t b = byte_offset(source, c.span.start);
      std::size_t e = byte_offset(source, c.span.end);
      std::string out(source.substr(0, b));
      out += source.substr(e);
      return out;
    }
  }
  throw std::invalid_argument(fmt::format("no annotation at {}:{}", at.line, at.column));
}

std::string strip_annotations(std::string_view source) {
  std::string out(source);
  auto comments = lang::lex(source).comments;
  for (auto it = comments.rbegin(); it != comments.rend(); ++it) {
    if (!is_annotation_comment(*it)) continue;
    std::size_t b = byte_offset(source, it->span.start);
    std::size_t e = byte_offset(source, it->span.end);
    bool glue = b > 0 && e < out.size() && identifier_char(out[b - 1]) && identifier_char(out[e]);
    out.replace(b, e - b, glue ? " " : "");
  }
  return out;
}

}  // namespace babylon::annotations
