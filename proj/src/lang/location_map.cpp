#include "babylon/lang/location_map.hpp"

#include <fmt/format.h>

namespace babylon::lang {

std::optional<NodeId> LocationMap::find(const LocationKey& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string_view anchor_keyword(const Node& node) {
  switch (node.kind) {
    case NodeKind::If: return "if";
    case NodeKind::While: return "while";
    case NodeKind::For: return "for";
    case NodeKind::Return: return "return";
    case NodeKind::VarDecl: return node.text;
    case NodeKind::ClassDecl: return "class";
    case NodeKind::FunctionDecl: return "function";
    case NodeKind::ImportDecl: return "import";
    case NodeKind::ExportDecl: return "export";
    default: return {};
  }
}

SourceSpan anchored_span(const Node& node) {
  std::string_view keyword = anchor_keyword(node);
  if (keyword.empty()) return node.span;
  SourceSpan span = node.span;
  span.end.line = span.start.line;
  span.end.column = span.start.column + static_cast<int>(keyword.size());
  return span;
}

LocationMap build_location_map(const Node& root) {
  LocationMap map;
  std::vector<const Node*> stack{&root};
  while (!stack.empty()) {
    const Node* node = stack.back();
    stack.pop_back();
    if (node->id == kNoId) {
      throw InvalidAst(fmt::format("{} node without an ID", kind_name(node->kind)));
    }
    if (node->has_span) map.assign(location_key(anchored_span(*node)), node->id);
    for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
      stack.push_back(&*it);
    }
  }
  return map;
}

LocationMap build_location_map(const IdentifiedAst& ast) {
  return build_location_map(ast.root());
}

}  // namespace babylon::lang
