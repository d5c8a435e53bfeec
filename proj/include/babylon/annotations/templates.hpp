#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace babylon::annotations {

struct CustomTemplate {
  std::string name;
  std::string body;  // statements ending in the expression to return
};

struct TemplateSyntaxError : std::runtime_error {
  TemplateSyntaxError(int line, const std::string& message);
  int line;
};

// Sidecar format: repeated `template NAME { statements }` blocks.
std::vector<CustomTemplate> parse_templates(std::string_view text);
std::string serialize_templates(const std::vector<CustomTemplate>& templates);

}  // namespace babylon::annotations
