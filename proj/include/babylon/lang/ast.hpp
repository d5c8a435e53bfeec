#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "babylon/lang/source_span.hpp"

namespace babylon::lang {

enum class NodeKind : std::uint8_t {
  // Statements and declarations.
  Module,
  ImportDecl,
  ExportDecl,
  FunctionDecl,
  ClassDecl,
  MethodDef,
  VarDecl,
  Declarator,
  Block,
  If,
  While,
  For,
  Return,
  ExprStmt,
  Empty,
  // Expressions.
  Assignment,
  Binary,
  Unary,
  Update,
  Call,
  New,
  Member,
  Index,
  Identifier,
  NumberLit,
  StringLit,
  TemplateLit,
  BoolLit,
  NullLit,
  ArrayLit,
  ObjectLit,
  Property,
  FunctionExpr,
  ArrowExpr,
  // Interpreter-internal kinds produced by instrumentation.
  ProbeCapture,
  CounterBump,
  GuardCheck,
  ExampleBlock,
  FactoryDecl,
  FactoryCall,
  ResourceRef,
};

std::string_view kind_name(NodeKind kind);

using NodeId = int;
inline constexpr NodeId kNoId = -1;

enum NodeFlag : std::uint32_t {
  kFlagStatic = 1u << 0,     // MethodDef
  kFlagDefault = 1u << 1,    // ExportDecl, import specifier
  kFlagPrefix = 1u << 2,     // Update
  kFlagExprBody = 1u << 3,   // ArrowExpr
  kFlagSynthetic = 1u << 4,  // inserted by instrumentation
  kFlagAfter = 1u << 5,      // ProbeCapture phase
  kFlagPassThrough = 1u << 6,  // ProbeCapture that yields its operand
  kFlagNamespace = 1u << 7,  // `import * as ns`
  kFlagShorthand = 1u << 8,  // Property `{x}`
  kFlagInstrumented = 1u << 9,  // ImportDecl retargeted to a session module
};

// One syntax tree node. Children are owned by value, so copying a node copies
// the whole subtree.
//
// Child layout per kind:
//   Module, Block, ArrayLit, ObjectLit: elements
//   ImportDecl: Identifier per binding (text=local, detail=imported name);
//               text holds the module path, detail the resolved target
//   ExportDecl: [declaration or expression]
//   FunctionDecl, MethodDef: [name Identifier, params..., body Block]
//   FunctionExpr, ArrowExpr: [params..., body]; FunctionExpr text is its name
//   ClassDecl: [name Identifier, MethodDef...]
//   VarDecl: Declarator...; text is var/let/const
//   Declarator: [Identifier, init?]
//   If: [cond, then, else?]    While: [cond, body]
//   For: [init, cond, update, body] with Empty for absent parts
//   Return: [operand?]         ExprStmt: [expr]
//   Assignment, Binary: [lhs, rhs] with text = operator
//   Unary, Update: [operand] with text = operator
//   Call, New: [callee, args...]
//   Member: [object] with text = property name
//   Index: [object, key]
//   TemplateLit: alternating StringLit quasis and expressions
//   Property: [value]; text = key
struct Node {
  NodeKind kind = NodeKind::Empty;
  NodeId id = kNoId;
  NodeId origin = kNoId;
  SourceSpan span{};
  bool has_span = false;
  std::string text;
  std::string detail;
  double number = 0.0;
  std::uint32_t flags = 0;
  std::vector<Node> children;

  bool has_flag(NodeFlag f) const { return (flags & f) != 0; }
};

bool is_statement_kind(NodeKind kind);
bool is_expression_kind(NodeKind kind);
bool is_function_like(NodeKind kind);

// Accessors for function-shaped nodes (FunctionDecl, MethodDef, FunctionExpr,
// ArrowExpr).
const Node& function_body(const Node& fn);
Node& function_body(Node& fn);
std::vector<const Node*> function_params(const Node& fn);
const Node* function_name(const Node& fn);

struct ParseError : std::runtime_error {
  ParseError(SourceSpan span, const std::string& message);
  SourceSpan span;
};

struct InvalidAst : std::logic_error {
  using std::logic_error::logic_error;
};

struct Comment {
  SourceSpan span;
  std::string text;  // including delimiters
  bool block = false;
};

// Immutable parsed module with pre-order node IDs and a parent index.
class IdentifiedAst {
 public:
  // Assigns pre-order IDs starting at 0 and sets origin = id.
  static IdentifiedAst identify(Node root, std::string module_name,
                                std::string source,
                                std::vector<Comment> comments);

  const Node& root() const { return *root_; }
  std::shared_ptr<const Node> shared_root() const { return root_; }
  const std::string& module_name() const { return module_name_; }
  const std::string& source() const { return source_; }
  const std::vector<Comment>& comments() const { return comments_; }

  std::size_t size() const { return by_id_.size(); }
  const Node* node(NodeId id) const;
  NodeId parent(NodeId id) const;

 private:
  std::shared_ptr<const Node> root_;
  std::string module_name_;
  std::string source_;
  std::vector<Comment> comments_;
  std::vector<const Node*> by_id_;
  std::vector<NodeId> parent_;
};

}  // namespace babylon::lang
