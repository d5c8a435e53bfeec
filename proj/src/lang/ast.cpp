#include "babylon/lang/ast.hpp"

#include <fmt/format.h>

namespace babylon::lang {

std::string to_string(const SourceSpan& span) {
  return fmt::format("{}:{}-{}:{}", span.start.line, span.start.column,
                     span.end.line, span.end.column);
}

std::string_view kind_name(NodeKind kind) {
  switch (kind) {
    case NodeKind::Module: return "Module";
    case NodeKind::ImportDecl: return "ImportDecl";
    case NodeKind::ExportDecl: return "ExportDecl";
    case NodeKind::FunctionDecl: return "FunctionDecl";
    case NodeKind::ClassDecl: return "ClassDecl";
    case NodeKind::MethodDef: return "MethodDef";
    case NodeKind::VarDecl: return "VarDecl";
    case NodeKind::Declarator: return "Declarator";
    case NodeKind::Block: return "Block";
    case NodeKind::If: return "If";
    case NodeKind::While: return "While";
    case NodeKind::For: return "For";
    case NodeKind::Return: return "Return";
    case NodeKind::ExprStmt: return "ExprStmt";
    case NodeKind::Empty: return "Empty";
    case NodeKind::Assignment: return "Assignment";
    case NodeKind::Binary: return "Binary";
    case NodeKind::Unary: return "Unary";
    case NodeKind::Update: return "Update";
    case NodeKind::Call: return "Call";
    case NodeKind::New: return "New";
    case NodeKind::Member: return "Member";
    case NodeKind::Index: return "Index";
    case NodeKind::Identifier: return "Identifier";
    case NodeKind::NumberLit: return "NumberLit";
    case NodeKind::StringLit: return "StringLit";
    case NodeKind::TemplateLit: return "TemplateLit";
    case NodeKind::BoolLit: return "BoolLit";
    case NodeKind::NullLit: return "NullLit";
    case NodeKind::ArrayLit: return "ArrayLit";
    case NodeKind::ObjectLit: return "ObjectLit";
    case NodeKind::Property: return "Property";
    case NodeKind::FunctionExpr: return "FunctionExpr";
    case NodeKind::ArrowExpr: return "ArrowExpr";
    case NodeKind::ProbeCapture: return "ProbeCapture";
    case NodeKind::CounterBump: return "CounterBump";
    case NodeKind::GuardCheck: return "GuardCheck";
    case NodeKind::ExampleBlock: return "ExampleBlock";
    case NodeKind::FactoryDecl: return "FactoryDecl";
    case NodeKind::FactoryCall: return "FactoryCall";
    case NodeKind::ResourceRef: return "ResourceRef";
  }
  return "?";
}

bool is_statement_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::VarDecl:
    case NodeKind::If:
    case NodeKind::While:
    case NodeKind::For:
    case NodeKind::Return:
    case NodeKind::ExprStmt:
      return true;
    default:
      return false;
  }
}

bool is_expression_kind(NodeKind kind) {
  switch (kind) {
    case NodeKind::Assignment:
    case NodeKind::Binary:
    case NodeKind::Unary:
    case NodeKind::Update:
    case NodeKind::Call:
    case NodeKind::New:
    case NodeKind::Member:
    case NodeKind::Index:
    case NodeKind::Identifier:
    case NodeKind::NumberLit:
    case NodeKind::StringLit:
    case NodeKind::TemplateLit:
    case NodeKind::BoolLit:
    case NodeKind::NullLit:
    case NodeKind::ArrayLit:
    case NodeKind::ObjectLit:
    case NodeKind::FunctionExpr:
    case NodeKind::ArrowExpr:
    case NodeKind::FactoryCall:
    case NodeKind::ResourceRef:
      return true;
    default:
      return false;
  }
}

bool is_function_like(NodeKind kind) {
  return kind == NodeKind::FunctionDecl || kind == NodeKind::MethodDef ||
         kind == NodeKind::FunctionExpr || kind == NodeKind::ArrowExpr ||
         kind == NodeKind::FactoryDecl;
}

namespace {
bool has_name_child(const Node& fn) {
  return fn.kind == NodeKind::FunctionDecl || fn.kind == NodeKind::MethodDef;
}
}  // namespace

const Node& function_body(const Node& fn) { return fn.children.back(); }
Node& function_body(Node& fn) { return fn.children.back(); }

std::vector<const Node*> function_params(const Node& fn) {
  std::vector<const Node*> params;
  std::size_t first = has_name_child(fn) ? 1 : 0;
  for (std::size_t i = first; i + 1 < fn.children.size(); ++i) {
    params.push_back(&fn.children[i]);
  }
  return params;
}

const Node* function_name(const Node& fn) {
  return has_name_child(fn) ? &fn.children.front() : nullptr;
}

ParseError::ParseError(SourceSpan s, const std::string& message)
    : std::runtime_error(fmt::format("{}:{}: {}", s.start.line, s.start.column,
                                     message)),
      span(s) {}

IdentifiedAst IdentifiedAst::identify(Node root, std::string module_name,
                                      std::string source,
                                      std::vector<Comment> comments) {
  IdentifiedAst ast;
  auto owned = std::make_shared<Node>(std::move(root));
  std::vector<std::pair<Node*, NodeId>> stack{{owned.get(), kNoId}};
  while (!stack.empty()) {
    auto [node, parent] = stack.back();
    stack.pop_back();
    node->id = static_cast<NodeId>(ast.by_id_.size());
    node->origin = node->id;
    ast.by_id_.push_back(node);
    ast.parent_.push_back(parent);
    for (auto it = node->children.rbegin(); it != node->children.rend(); ++it) {
      stack.emplace_back(&*it, node->id);
    }
  }
  ast.root_ = std::move(owned);
  ast.module_name_ = std::move(module_name);
  ast.source_ = std::move(source);
  ast.comments_ = std::move(comments);
  return ast;
}

const Node* IdentifiedAst::node(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= by_id_.size()) return nullptr;
  return by_id_[static_cast<std::size_t>(id)];
}

NodeId IdentifiedAst::parent(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= parent_.size()) return kNoId;
  return parent_[static_cast<std::size_t>(id)];
}

}  // namespace babylon::lang
