#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "babylon/lang/ast.hpp"

namespace babylon::lang {

// Notified with the module name of every parse_module call on this thread
// while in scope.
using ParseObserver = std::function<void(const std::string& module_name)>;

class ScopedParseObserver {
 public:
  explicit ScopedParseObserver(ParseObserver observer);
  ~ScopedParseObserver();
  ScopedParseObserver(const ScopedParseObserver&) = delete;
  ScopedParseObserver& operator=(const ScopedParseObserver&) = delete;

 private:
  ParseObserver observer_;
  const ParseObserver* previous_;
};

// Full module parse with IDs. Throws ParseError; never returns a partial tree.
IdentifiedAst parse_module(std::string_view source, std::string module_name);

// Parses text that must consist of exactly one expression. The returned node
// carries spans relative to `source` but no IDs.
Node parse_expression(std::string_view source);

// Parses a statement list (scripts, template bodies) into a Block node.
Node parse_statements(std::string_view source);

}  // namespace babylon::lang
