#include "babylon/lang/printer.hpp"

#include <nlohmann/json.hpp>

#include <stdexcept>

namespace babylon::lang {

namespace {

std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

std::string template_quasi(const std::string& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '`' || c == '\\' || (c == '$' && i + 1 < s.size() && s[i + 1] == '{')) {
      out.push_back('\\');
    }
    out.push_back(c);
  }
  return out;
}

class Printer {
 public:
  std::string take() { return std::move(out_); }

  void statement(const Node& n, int indent) {
    pad(indent);
    switch (n.kind) {
      case NodeKind::ImportDecl: {
        out_ += "import ";
        std::vector<const Node*> named;
        bool first = true;
        for (const Node& b : n.children) {
          if (b.has_flag(kFlagDefault)) {
            out_ += b.text;
            first = false;
          } else if (b.has_flag(kFlagNamespace)) {
            out_ += (first ? "" : ", ") + std::string("* as ") + b.text;
            first = false;
          } else {
            named.push_back(&b);
          }
        }
        if (!named.empty()) {
          out_ += first ? "{" : ", {";
          for (std::size_t i = 0; i < named.size(); ++i) {
            if (i) out_ += ", ";
            out_ += named[i]->detail;
            if (named[i]->detail != named[i]->text) out_ += " as " + named[i]->text;
          }
          out_ += "}";
          first = false;
        }
        if (!n.children.empty()) out_ += " from ";
        out_ += quote(n.text) + ";\n";
        return;
      }
      case NodeKind::ExportDecl: {
        out_ += "export ";
        if (n.has_flag(kFlagDefault)) out_ += "default ";
        const Node& inner = n.children.front();
        if (is_expression_kind(inner.kind)) {
          expression(inner);
          out_ += ";\n";
        } else {
          std::string saved = take();
          statement(inner, indent);
          std::string body = take();
          out_ = saved + body.substr(static_cast<std::size_t>(indent) * 2);
        }
        return;
      }
      case NodeKind::FunctionDecl:
        out_ += "function " + n.text;
        params(n);
        out_ += " ";
        block(function_body(n), indent);
        out_ += "\n";
        return;
      case NodeKind::ClassDecl:
        out_ += "class " + n.text + " {\n";
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          pad(indent + 1);
          method(n.children[i], indent + 1);
          out_ += "\n";
        }
        pad(indent);
        out_ += "}\n";
        return;
      case NodeKind::VarDecl:
        var_decl(n);
        out_ += ";\n";
        return;
      case NodeKind::Block:
        block(n, indent);
        out_ += "\n";
        return;
      case NodeKind::If:
        out_ += "if (";
        expression(n.children[0]);
        out_ += ") ";
        body(n.children[1], indent);
        if (n.children.size() > 2) {
          out_ += " else ";
          body(n.children[2], indent);
        }
        out_ += "\n";
        return;
      case NodeKind::While:
        out_ += "while (";
        expression(n.children[0]);
        out_ += ") ";
        body(n.children[1], indent);
        out_ += "\n";
        return;
      case NodeKind::For: {
        out_ += "for (";
        const Node& init = n.children[0];
        if (init.kind == NodeKind::VarDecl) {
          var_decl(init);
        } else if (init.kind == NodeKind::ExprStmt) {
          expression(init.children[0]);
        }
        out_ += "; ";
        if (n.children[1].kind != NodeKind::Empty) expression(n.children[1]);
        out_ += "; ";
        if (n.children[2].kind != NodeKind::Empty) expression(n.children[2]);
        out_ += ") ";
        body(n.children[3], indent);
        out_ += "\n";
        return;
      }
      case NodeKind::Return:
        out_ += "return";
        if (!n.children.empty()) {
          out_ += " ";
          expression(n.children[0]);
        }
        out_ += ";\n";
        return;
      case NodeKind::ExprStmt:
        // A leading `{` would reparse as a block.
        if (n.children[0].kind == NodeKind::ObjectLit) {
          out_ += "(";
          expression(n.children[0]);
          out_ += ");\n";
        } else {
          expression(n.children[0]);
          out_ += ";\n";
        }
        return;
      case NodeKind::Empty:
        out_ += ";\n";
        return;
      default:
        throw std::invalid_argument(std::string("cannot print statement ") +
                                    std::string(kind_name(n.kind)));
    }
  }

  void expression(const Node& n) {
    switch (n.kind) {
      case NodeKind::Identifier:
        out_ += n.text;
        return;
      case NodeKind::NumberLit:
        out_ += n.text.empty() ? nlohmann::json(n.number).dump() : n.text;
        return;
      case NodeKind::StringLit:
        out_ += quote(n.text);
        return;
      case NodeKind::BoolLit:
        out_ += n.text;
        return;
      case NodeKind::NullLit:
        out_ += "null";
        return;
      case NodeKind::TemplateLit:
        out_ += "`";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          const Node& part = n.children[i];
          if (i % 2 == 0) {
            out_ += template_quasi(part.text);
          } else {
            out_ += "${";
            expression(part);
            out_ += "}";
          }
        }
        out_ += "`";
        return;
      case NodeKind::ArrayLit:
        out_ += "[";
        list(n.children, 0);
        out_ += "]";
        return;
      case NodeKind::ObjectLit:
        out_ += "{";
        for (std::size_t i = 0; i < n.children.size(); ++i) {
          if (i) out_ += ", ";
          const Node& p = n.children[i];
          if (p.kind == NodeKind::MethodDef) {
            method(p, 0, false);
          } else if (p.has_flag(kFlagShorthand)) {
            out_ += p.text;
          } else {
            out_ += quote(p.text) + ": ";
            expression(p.children[0]);
          }
        }
        out_ += "}";
        return;
      case NodeKind::FunctionExpr:
        out_ += "function";
        if (!n.text.empty()) out_ += " " + n.text;
        params(n);
        out_ += " ";
        block(function_body(n), 0, false);
        return;
      case NodeKind::ArrowExpr:
        params(n);
        out_ += " => ";
        if (n.has_flag(kFlagExprBody)) {
          operand(function_body(n));
        } else {
          block(function_body(n), 0, false);
        }
        return;
      case NodeKind::Assignment:
      case NodeKind::Binary:
        operand(n.children[0]);
        out_ += " " + n.text + " ";
        operand(n.children[1]);
        return;
      case NodeKind::Unary:
        out_ += n.text;
        operand(n.children[0]);
        return;
      case NodeKind::Update:
        if (n.has_flag(kFlagPrefix)) {
          out_ += n.text;
          operand(n.children[0]);
        } else {
          operand(n.children[0]);
          out_ += n.text;
        }
        return;
      case NodeKind::Call:
        operand(n.children[0]);
        out_ += "(";
        list(n.children, 1);
        out_ += ")";
        return;
      case NodeKind::New:
        out_ += "new ";
        operand(n.children[0]);
        out_ += "(";
        list(n.children, 1);
        out_ += ")";
        return;
      case NodeKind::Member:
        operand(n.children[0]);
        out_ += "." + n.text;
        return;
      case NodeKind::Index:
        operand(n.children[0]);
        out_ += "[";
        expression(n.children[1]);
        out_ += "]";
        return;
      default:
        throw std::invalid_argument(std::string("cannot print expression ") +
                                    std::string(kind_name(n.kind)));
    }
  }

 private:
  void pad(int indent) { out_.append(static_cast<std::size_t>(indent) * 2, ' '); }

  // Compound operands are always parenthesized so precedence survives.
  void operand(const Node& n) {
    bool simple = n.kind == NodeKind::Identifier || n.kind == NodeKind::NumberLit ||
                  n.kind == NodeKind::StringLit || n.kind == NodeKind::BoolLit ||
                  n.kind == NodeKind::NullLit || n.kind == NodeKind::Member ||
                  n.kind == NodeKind::Index || n.kind == NodeKind::Call ||
                  n.kind == NodeKind::ArrayLit || n.kind == NodeKind::TemplateLit;
    if (!simple) out_ += "(";
    expression(n);
    if (!simple) out_ += ")";
  }

  void list(const std::vector<Node>& items, std::size_t from) {
    for (std::size_t i = from; i < items.size(); ++i) {
      if (i > from) out_ += ", ";
      expression(items[i]);
    }
  }

  void params(const Node& fn) {
    out_ += "(";
    auto ps = function_params(fn);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i) out_ += ", ";
      out_ += ps[i]->text;
    }
    out_ += ")";
  }

  void method(const Node& m, int indent, bool allow_static = true) {
    if (allow_static && m.has_flag(kFlagStatic)) out_ += "static ";
    out_ += m.text;
    params(m);
    out_ += " ";
    block(function_body(m), indent, false);
  }

  void var_decl(const Node& n) {
    out_ += n.text + " ";
    for (std::size_t i = 0; i < n.children.size(); ++i) {
      if (i) out_ += ", ";
      const Node& d = n.children[i];
      out_ += d.children[0].text;
      if (d.children.size() > 1) {
        out_ += " = ";
        expression(d.children[1]);
      }
    }
  }

  void block(const Node& b, int indent, bool /*trailing*/ = true) {
    out_ += "{\n";
    for (const Node& s : b.children) statement(s, indent + 1);
    pad(indent);
    out_ += "}";
  }

  // Branch bodies; non-block statements are printed on their own line.
  void body(const Node& s, int indent) {
    if (s.kind == NodeKind::Block) {
      block(s, indent);
      return;
    }
    out_ += "\n";
    std::string saved = take();
    statement(s, indent + 1);
    std::string text = take();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    out_ = saved + text + "\n";
    pad(indent);
  }

  std::string out_;
};

}  // namespace

std::string print_module(const Node& module) {
  Printer p;
  for (const Node& s : module.children) p.statement(s, 0);
  return p.take();
}

std::string print_expression(const Node& expr) {
  Printer p;
  p.expression(expr);
  return p.take();
}

bool same_shape(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.flags != b.flags ||
      a.children.size() != b.children.size()) {
    return false;
  }
  if (a.kind == NodeKind::NumberLit) {
    if (a.number != b.number) return false;
  } else if (a.text != b.text) {
    return false;
  }
  if (a.kind == NodeKind::Identifier && a.detail != b.detail) return false;
  for (std::size_t i = 0; i < a.children.size(); ++i) {
    if (!same_shape(a.children[i], b.children[i])) return false;
  }
  return true;
}

}  // namespace babylon::lang
