#include "babylon/lang/parser.hpp"

#include <fmt/format.h>

#include "babylon/lang/lexer.hpp"

namespace babylon::lang {

namespace {

int binary_precedence(const Token& tok) {
  if (tok.kind != TokenKind::Punct) return -1;
  const std::string& t = tok.text;
  if (t == "||") return 1;
  if (t == "&&") return 2;
  if (t == "==" || t == "!=" || t == "===" || t == "!==") return 3;
  if (t == "<" || t == "<=" || t == ">" || t == ">=") return 4;
  if (t == ">>") return 5;
  if (t == "+" || t == "-") return 6;
  if (t == "*" || t == "/" || t == "%") return 7;
  return -1;
}

bool is_assignment_op(const Token& tok) {
  return tok.kind == TokenKind::Punct &&
         (tok.text == "=" || tok.text == "+=" || tok.text == "-=" ||
          tok.text == "*=");
}

Node make(NodeKind kind, SourceSpan span) {
  Node n;
  n.kind = kind;
  n.span = span;
  n.has_span = true;
  return n;
}

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : toks_(tokens) {}

  Node module() {
    Node mod = make(NodeKind::Module, {{1, 0}, {1, 0}});
    while (!at_end()) mod.children.push_back(statement(true));
    mod.span.end = toks_.back().span.end;
    return mod;
  }

  Node statement_list() {
    Node block = make(NodeKind::Block, peek().span);
    while (!at_end()) block.children.push_back(statement(false));
    block.span.end = prev_end_;
    if (block.children.empty()) block.span.end = block.span.start;
    return block;
  }

  Node single_expression() {
    Node e = expression();
    if (!at_end()) fail(peek(), "expected end of expression");
    return e;
  }

  bool at_end() const { return peek().kind == TokenKind::End; }

 private:
  const Token& peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }

  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    prev_end_ = t.span.end;
    return t;
  }

  [[noreturn]] void fail(const Token& at, const std::string& message) {
    std::string what = message;
    if (at.kind == TokenKind::End) {
      what += " (found end of input)";
    } else if (!at.text.empty()) {
      what += fmt::format(" (found '{}')", at.text);
    }
    throw ParseError(at.span, what);
  }

  bool accept_punct(std::string_view p) {
    if (peek().is_punct(p)) {
      next();
      return true;
    }
    return false;
  }

  const Token& expect_punct(std::string_view p) {
    if (!peek().is_punct(p)) fail(peek(), fmt::format("expected '{}'", p));
    return next();
  }

  const Token& expect_name(std::string_view name) {
    if (!peek().is_name(name)) fail(peek(), fmt::format("expected '{}'", name));
    return next();
  }

  Node identifier(const char* what = "expected identifier") {
    const Token& t = peek();
    if (t.kind != TokenKind::Name || is_reserved_word(t.text)) fail(t, what);
    next();
    Node id = make(NodeKind::Identifier, t.span);
    id.text = t.text;
    return id;
  }

  // Automatic semicolon insertion: a statement may end at a newline, a
  // closing brace, or end of input.
  void end_statement(Node& stmt) {
    if (peek().is_punct(";")) {
      next();
      stmt.span.end = prev_end_;
      return;
    }
    if (at_end() || peek().is_punct("}") || peek().newline_before) return;
    fail(peek(), "expected ';'");
  }

  Node statement(bool top_level) {
    const Token& t = peek();
    if (t.kind == TokenKind::Name) {
      if (t.text == "import") {
        if (!top_level) fail(t, "import is only allowed at module level");
        return import_decl();
      }
      if (t.text == "export") {
        if (!top_level) fail(t, "export is only allowed at module level");
        return export_decl();
      }
      if (t.text == "function") return function_decl();
      if (t.text == "class") return class_decl();
      if (t.text == "var" || t.text == "let" || t.text == "const") {
        Node decl = var_decl();
        end_statement(decl);
        return decl;
      }
      if (t.text == "if") return if_stmt();
      if (t.text == "while") return while_stmt();
      if (t.text == "for") return for_stmt();
      if (t.text == "return") return return_stmt();
    }
    if (t.is_punct("{")) return block();
    if (t.is_punct(";")) {
      next();
      return make(NodeKind::Empty, t.span);
    }
    Node expr = expression();
    Node stmt = make(NodeKind::ExprStmt, expr.span);
    stmt.children.push_back(std::move(expr));
    end_statement(stmt);
    return stmt;
  }

  Node block() {
    const Token& open = expect_punct("{");
    Node b = make(NodeKind::Block, open.span);
    while (!peek().is_punct("}")) {
      if (at_end()) fail(peek(), "expected '}'");
      b.children.push_back(statement(false));
    }
    next();
    b.span.end = prev_end_;
    return b;
  }

  Node import_decl() {
    const Token& kw = next();
    Node decl = make(NodeKind::ImportDecl, kw.span);
    auto binding = [&](std::string imported, std::uint32_t flags) {
      Node local = identifier();
      local.detail = std::move(imported);
      local.flags |= flags;
      decl.children.push_back(std::move(local));
    };
    if (peek().kind == TokenKind::String) {
      // bare `import "x";`
    } else {
      if (peek().kind == TokenKind::Name && !peek().is_name("from")) {
        binding("default", kFlagDefault);
        accept_punct(",");
      }
      if (accept_punct("*")) {
        expect_name("as");
        binding("*", kFlagNamespace);
      } else if (accept_punct("{")) {
        while (!peek().is_punct("}")) {
          const Token& name = peek();
          if (name.kind != TokenKind::Name) fail(name, "expected import name");
          std::string imported = name.text;
          if (peek(1).is_name("as")) {
            next();
            next();
            binding(imported, 0);
          } else {
            binding(imported, 0);
          }
          if (!accept_punct(",")) break;
        }
        expect_punct("}");
      }
      expect_name("from");
    }
    const Token& path = peek();
    if (path.kind != TokenKind::String) fail(path, "expected module path");
    next();
    decl.text = path.text;
    decl.span.end = prev_end_;
    end_statement(decl);
    return decl;
  }

  Node export_decl() {
    const Token& kw = next();
    Node decl = make(NodeKind::ExportDecl, kw.span);
    if (peek().is_name("default")) {
      next();
      decl.flags |= kFlagDefault;
      if (peek().is_name("function")) {
        decl.children.push_back(function_decl());
      } else if (peek().is_name("class")) {
        decl.children.push_back(class_decl());
      } else {
        decl.children.push_back(expression());
        decl.span.end = prev_end_;
        end_statement(decl);
        return decl;
      }
    } else if (peek().is_name("function")) {
      decl.children.push_back(function_decl());
    } else if (peek().is_name("class")) {
      decl.children.push_back(class_decl());
    } else if (peek().is_name("var") || peek().is_name("let") ||
               peek().is_name("const")) {
      Node v = var_decl();
      end_statement(v);
      decl.children.push_back(std::move(v));
    } else {
      fail(peek(), "expected declaration after export");
    }
    decl.span.end = decl.children.back().span.end;
    return decl;
  }

  void params(Node& fn) {
    expect_punct("(");
    while (!peek().is_punct(")")) {
      fn.children.push_back(identifier("expected parameter name"));
      if (!accept_punct(",")) break;
    }
    expect_punct(")");
  }

  Node function_decl() {
    const Token& kw = next();
    Node fn = make(NodeKind::FunctionDecl, kw.span);
    fn.children.push_back(identifier("expected function name"));
    fn.text = fn.children.front().text;
    params(fn);
    fn.children.push_back(block());
    fn.span.end = prev_end_;
    return fn;
  }

  Node method(SourceSpan start, bool is_static) {
    Node m = make(NodeKind::MethodDef, start);
    const Token& name = peek();
    if (name.kind != TokenKind::Name) fail(name, "expected method name");
    next();
    Node id = make(NodeKind::Identifier, name.span);
    id.text = name.text;
    m.text = name.text;
    m.children.push_back(std::move(id));
    if (is_static) m.flags |= kFlagStatic;
    params(m);
    m.children.push_back(block());
    m.span.end = prev_end_;
    return m;
  }

  Node class_decl() {
    const Token& kw = next();
    Node cls = make(NodeKind::ClassDecl, kw.span);
    cls.children.push_back(identifier("expected class name"));
    cls.text = cls.children.front().text;
    expect_punct("{");
    while (!peek().is_punct("}")) {
      if (at_end()) fail(peek(), "expected '}'");
      if (accept_punct(";")) continue;
      SourceSpan start = peek().span;
      bool is_static = false;
      if (peek().is_name("static") && peek(1).kind == TokenKind::Name) {
        next();
        is_static = true;
      }
      cls.children.push_back(method(start, is_static));
    }
    next();
    cls.span.end = prev_end_;
    return cls;
  }

  // Without the terminating semicolon.
  Node var_decl() {
    const Token& kw = next();
    Node decl = make(NodeKind::VarDecl, kw.span);
    decl.text = kw.text;
    do {
      Node target = identifier("expected variable name");
      Node d = make(NodeKind::Declarator, target.span);
      d.children.push_back(std::move(target));
      if (accept_punct("=")) {
        d.children.push_back(assignment());
        d.span.end = prev_end_;
      } else if (kw.text == "const") {
        fail(peek(), "missing initializer in const declaration");
      }
      decl.children.push_back(std::move(d));
    } while (accept_punct(","));
    decl.span.end = prev_end_;
    return decl;
  }

  Node paren_condition() {
    expect_punct("(");
    Node cond = expression();
    expect_punct(")");
    return cond;
  }

  Node if_stmt() {
    const Token& kw = next();
    Node n = make(NodeKind::If, kw.span);
    n.children.push_back(paren_condition());
    n.children.push_back(statement(false));
    if (peek().is_name("else")) {
      next();
      n.children.push_back(statement(false));
    }
    n.span.end = prev_end_;
    return n;
  }

  Node while_stmt() {
    const Token& kw = next();
    Node n = make(NodeKind::While, kw.span);
    n.children.push_back(paren_condition());
    n.children.push_back(statement(false));
    n.span.end = prev_end_;
    return n;
  }

  Node empty_here() {
    SourcePos p = peek().span.start;
    return make(NodeKind::Empty, {p, p});
  }

  Node for_stmt() {
    const Token& kw = next();
    Node n = make(NodeKind::For, kw.span);
    expect_punct("(");
    if (peek().is_punct(";")) {
      n.children.push_back(empty_here());
    } else if (peek().is_name("var") || peek().is_name("let") ||
               peek().is_name("const")) {
      n.children.push_back(var_decl());
    } else {
      Node e = expression();
      Node s = make(NodeKind::ExprStmt, e.span);
      s.children.push_back(std::move(e));
      n.children.push_back(std::move(s));
    }
    expect_punct(";");
    n.children.push_back(peek().is_punct(";") ? empty_here() : expression());
    expect_punct(";");
    n.children.push_back(peek().is_punct(")") ? empty_here() : expression());
    expect_punct(")");
    n.children.push_back(statement(false));
    n.span.end = prev_end_;
    return n;
  }

  Node return_stmt() {
    const Token& kw = next();
    Node n = make(NodeKind::Return, kw.span);
    const Token& t = peek();
    if (!t.is_punct(";") && !t.is_punct("}") && t.kind != TokenKind::End &&
        !t.newline_before) {
      n.children.push_back(expression());
      n.span.end = prev_end_;
    }
    end_statement(n);
    return n;
  }

  Node expression() { return assignment(); }

  // At `(`: does the matching `)` precede `=>`?
  bool paren_starts_arrow() const {
    int depth = 0;
    for (std::size_t i = pos_; i < toks_.size(); ++i) {
      const Token& t = toks_[i];
      if (t.kind == TokenKind::End) return false;
      if (t.is_punct("(")) ++depth;
      if (t.is_punct(")")) {
        if (--depth == 0) {
          return i + 1 < toks_.size() && toks_[i + 1].is_punct("=>");
        }
      }
    }
    return false;
  }

  Node arrow() {
    Node fn = make(NodeKind::ArrowExpr, peek().span);
    if (peek().kind == TokenKind::Name) {
      fn.children.push_back(identifier("expected parameter name"));
    } else {
      params(fn);
    }
    expect_punct("=>");
    if (peek().is_punct("{")) {
      fn.children.push_back(block());
    } else {
      fn.flags |= kFlagExprBody;
      fn.children.push_back(assignment());
    }
    fn.span.end = prev_end_;
    return fn;
  }

  Node assignment() {
    const Token& t = peek();
    if ((t.kind == TokenKind::Name && !is_reserved_word(t.text) &&
         peek(1).is_punct("=>")) ||
        (t.is_punct("(") && paren_starts_arrow())) {
      return arrow();
    }
    Node lhs = binary(1);
    if (is_assignment_op(peek())) {
      if (lhs.kind != NodeKind::Identifier && lhs.kind != NodeKind::Member &&
          lhs.kind != NodeKind::Index) {
        fail(peek(), "invalid assignment target");
      }
      std::string op = next().text;
      Node rhs = assignment();
      Node n = make(NodeKind::Assignment, {lhs.span.start, rhs.span.end});
      n.text = std::move(op);
      n.children.push_back(std::move(lhs));
      n.children.push_back(std::move(rhs));
      return n;
    }
    return lhs;
  }

  Node binary(int min_prec) {
    Node lhs = unary();
    for (;;) {
      int prec = binary_precedence(peek());
      if (prec < min_prec) return lhs;
      std::string op = next().text;
      Node rhs = binary(prec + 1);
      Node n = make(NodeKind::Binary, {lhs.span.start, rhs.span.end});
      n.text = std::move(op);
      n.children.push_back(std::move(lhs));
      n.children.push_back(std::move(rhs));
      lhs = std::move(n);
    }
  }

  void check_update_target(const Node& target, const Token& at) {
    if (target.kind != NodeKind::Identifier && target.kind != NodeKind::Member &&
        target.kind != NodeKind::Index) {
      fail(at, "invalid update target");
    }
  }

  Node unary() {
    const Token& t = peek();
    if (t.is_punct("!") || t.is_punct("-")) {
      next();
      Node operand = unary();
      Node n = make(NodeKind::Unary, {t.span.start, operand.span.end});
      n.text = t.text;
      n.children.push_back(std::move(operand));
      return n;
    }
    if (t.is_punct("++") || t.is_punct("--")) {
      next();
      Node operand = unary();
      check_update_target(operand, t);
      Node n = make(NodeKind::Update, {t.span.start, operand.span.end});
      n.text = t.text;
      n.flags |= kFlagPrefix;
      n.children.push_back(std::move(operand));
      return n;
    }
    Node e = call_chain(primary(), true);
    const Token& post = peek();
    if ((post.is_punct("++") || post.is_punct("--")) && !post.newline_before) {
      check_update_target(e, post);
      next();
      Node n = make(NodeKind::Update, {e.span.start, prev_end_});
      n.text = post.text;
      n.children.push_back(std::move(e));
      return n;
    }
    return e;
  }

  void arguments(Node& call) {
    expect_punct("(");
    while (!peek().is_punct(")")) {
      call.children.push_back(assignment());
      if (!accept_punct(",")) break;
    }
    expect_punct(")");
  }

  Node call_chain(Node e, bool allow_calls) {
    for (;;) {
      if (peek().is_punct(".")) {
        next();
        const Token& name = peek();
        if (name.kind != TokenKind::Name) fail(name, "expected property name");
        next();
        Node m = make(NodeKind::Member, {e.span.start, name.span.end});
        m.text = name.text;
        m.children.push_back(std::move(e));
        e = std::move(m);
      } else if (peek().is_punct("[")) {
        next();
        Node key = expression();
        expect_punct("]");
        Node m = make(NodeKind::Index, {e.span.start, prev_end_});
        m.children.push_back(std::move(e));
        m.children.push_back(std::move(key));
        e = std::move(m);
      } else if (allow_calls && peek().is_punct("(")) {
        Node c = make(NodeKind::Call, e.span);
        c.children.push_back(std::move(e));
        arguments(c);
        c.span.end = prev_end_;
        e = std::move(c);
      } else {
        return e;
      }
    }
  }

  Node template_literal(const Token& t) {
    Node n = make(NodeKind::TemplateLit, t.span);
    for (std::size_t i = 0; i < t.quasis.size(); ++i) {
      Node q = make(NodeKind::StringLit, t.quasis[i].span);
      q.text = t.quasis[i].cooked;
      n.children.push_back(std::move(q));
      if (i < t.exprs.size()) {
        Parser inner(t.exprs[i]);
        if (inner.at_end()) {
          throw ParseError(t.quasis[i].span, "empty template substitution");
        }
        n.children.push_back(inner.single_expression());
      }
    }
    return n;
  }

  Node object_literal() {
    const Token& open = next();
    Node obj = make(NodeKind::ObjectLit, open.span);
    while (!peek().is_punct("}")) {
      const Token& key = peek();
      if (key.kind != TokenKind::Name && key.kind != TokenKind::String &&
          key.kind != TokenKind::Number) {
        fail(key, "expected property key");
      }
      if (key.kind == TokenKind::Name && peek(1).is_punct("(")) {
        obj.children.push_back(method(key.span, false));
      } else {
        next();
        Node prop = make(NodeKind::Property, key.span);
        prop.text = key.text;
        if (accept_punct(":")) {
          prop.children.push_back(assignment());
        } else if (key.kind == TokenKind::Name && !is_reserved_word(key.text)) {
          Node id = make(NodeKind::Identifier, key.span);
          id.text = key.text;
          prop.flags |= kFlagShorthand;
          prop.children.push_back(std::move(id));
        } else {
          fail(peek(), "expected ':'");
        }
        prop.span.end = prev_end_;
        obj.children.push_back(std::move(prop));
      }
      if (!accept_punct(",")) break;
    }
    expect_punct("}");
    obj.span.end = prev_end_;
    return obj;
  }

  Node primary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number: {
        next();
        Node n = make(NodeKind::NumberLit, t.span);
        n.number = t.number;
        n.text = t.text;
        return n;
      }
      case TokenKind::String: {
        next();
        Node n = make(NodeKind::StringLit, t.span);
        n.text = t.text;
        return n;
      }
      case TokenKind::Template:
        next();
        return template_literal(t);
      case TokenKind::Name: {
        if (t.text == "true" || t.text == "false") {
          next();
          Node n = make(NodeKind::BoolLit, t.span);
          n.text = t.text;
          n.number = t.text == "true" ? 1.0 : 0.0;
          return n;
        }
        if (t.text == "null") {
          next();
          return make(NodeKind::NullLit, t.span);
        }
        if (t.text == "this") {
          next();
          Node n = make(NodeKind::Identifier, t.span);
          n.text = "this";
          return n;
        }
        if (t.text == "function") return function_expr();
        if (t.text == "new") return new_expr();
        return identifier("unexpected keyword");
      }
      case TokenKind::Punct:
        if (t.is_punct("(")) {
          next();
          Node e = expression();
          expect_punct(")");
          return e;
        }
        if (t.is_punct("[")) {
          next();
          Node arr = make(NodeKind::ArrayLit, t.span);
          while (!peek().is_punct("]")) {
            arr.children.push_back(assignment());
            if (!accept_punct(",")) break;
          }
          expect_punct("]");
          arr.span.end = prev_end_;
          return arr;
        }
        if (t.is_punct("{")) return object_literal();
        fail(t, "expected expression");
      case TokenKind::End:
        fail(t, "expected expression");
    }
    fail(t, "expected expression");
  }

  Node function_expr() {
    const Token& kw = next();
    Node fn = make(NodeKind::FunctionExpr, kw.span);
    if (peek().kind == TokenKind::Name && !peek().is_punct("(")) {
      fn.text = identifier("expected function name").text;
    }
    params(fn);
    fn.children.push_back(block());
    fn.span.end = prev_end_;
    return fn;
  }

  Node new_expr() {
    const Token& kw = next();
    Node n = make(NodeKind::New, kw.span);
    Node callee = call_chain(primary(), false);
    n.children.push_back(std::move(callee));
    if (peek().is_punct("(")) arguments(n);
    n.span.end = prev_end_;
    return n;
  }

  const std::vector<Token>& toks_;
  std::size_t pos_ = 0;
  SourcePos prev_end_{1, 0};
};

}  // namespace

namespace {
thread_local const ParseObserver* parse_observer = nullptr;
}  // namespace

ScopedParseObserver::ScopedParseObserver(ParseObserver observer)
    : observer_(std::move(observer)), previous_(parse_observer) {
  parse_observer = &observer_;
}

ScopedParseObserver::~ScopedParseObserver() { parse_observer = previous_; }

IdentifiedAst parse_module(std::string_view source, std::string module_name) {
  if (parse_observer) (*parse_observer)(module_name);
  std::string text = normalize_newlines(source);
  LexResult lexed = lex(text);
  Parser parser(lexed.tokens);
  Node root = parser.module();
  return IdentifiedAst::identify(std::move(root), std::move(module_name),
                                 std::move(text), std::move(lexed.comments));
}

Node parse_expression(std::string_view source) {
  std::string text = normalize_newlines(source);
  LexResult lexed = lex(text);
  Parser parser(lexed.tokens);
  if (parser.at_end()) {
    throw ParseError({{1, 0}, {1, 0}}, "expected expression (found end of input)");
  }
  return parser.single_expression();
}

Node parse_statements(std::string_view source) {
  std::string text = normalize_newlines(source);
  LexResult lexed = lex(text);
  Parser parser(lexed.tokens);
  return parser.statement_list();
}

}  // namespace babylon::lang
