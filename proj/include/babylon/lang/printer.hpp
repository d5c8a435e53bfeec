#pragma once

#include <string>

#include "babylon/lang/ast.hpp"

namespace babylon::lang {

// Renders a surface tree back to BabyLang source. Interpreter-internal kinds
// are not printable.
std::string print_module(const Node& module);
std::string print_expression(const Node& expr);

// Structural equality ignoring IDs and spans.
bool same_shape(const Node& a, const Node& b);

}  // namespace babylon::lang
