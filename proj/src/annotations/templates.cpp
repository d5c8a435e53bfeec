#include "babylon/annotations/templates.hpp"

#include <fmt/format.h>

#include <set>

#include "babylon/lang/parser.hpp"

namespace babylon::annotations {

TemplateSyntaxError::TemplateSyntaxError(int line, const std::string& message)
    : std::runtime_error(fmt::format("templates line {}: {}", line, message)), line(line) {}

namespace {

class Scanner {
 public:
  explicit Scanner(std::string_view text) : text_(text) {}

  bool done() {
    skip_space();
    return pos_ >= text_.size();
  }
  int line() const { return line_; }

  void expect_word(std::string_view word) {
    skip_space();
    if (text_.substr(pos_, word.size()) != word) {
      throw TemplateSyntaxError(line_, fmt::format("expected \"{}\"", word));
    }
    advance(word.size());
  }

  std::string name() {
    std::size_t open = text_.find('{', pos_);
    if (open == std::string_view::npos) throw TemplateSyntaxError(line_, "expected \"{\"");
    std::string_view raw = text_.substr(pos_, open - pos_);
    std::size_t b = raw.find_first_not_of(" \t\n");
    std::size_t e = raw.find_last_not_of(" \t\n");
    if (b == std::string_view::npos) throw TemplateSyntaxError(line_, "template without a name");
    std::string out(raw.substr(b, e - b + 1));
    if (out.find('\n') != std::string::npos) throw TemplateSyntaxError(line_, "name spans lines");
    advance(open - pos_);
    return out;
  }

  // Body between the braces, skipping strings, template literals and
  // comments when matching braces.
  std::string body() {
    int start_line = line_;
    advance(1);
    std::size_t start = pos_;
    int depth = 0;
    std::vector<int> template_depths;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '"' || c == '\'') {
        skip_string(c);
        continue;
      }
      if (c == '`') {
        advance(1);
        if (skip_template_text()) template_depths.push_back(depth++);
        continue;
      }
      if (text_.substr(pos_, 2) == "//") {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
        continue;
      }
      if (text_.substr(pos_, 2) == "/*") {
        std::size_t end = text_.find("*/", pos_ + 2);
        if (end == std::string_view::npos) throw TemplateSyntaxError(line_, "unterminated comment");
        advance(end + 2 - pos_);
        continue;
      }
      if (c == '{') {
        ++depth;
      } else if (c == '}') {
        if (depth == 0) {
          std::string out(text_.substr(start, pos_ - start));
          advance(1);
          return out;
        }
        --depth;
        if (!template_depths.empty() && template_depths.back() == depth) {
          template_depths.pop_back();
          advance(1);
          if (skip_template_text()) template_depths.push_back(depth++);
          continue;
        }
      }
      advance(1);
    }
    throw TemplateSyntaxError(start_line, "unterminated template body");
  }

 private:
  void advance(std::size_t n) {
    for (std::size_t i = 0; i < n && pos_ < text_.size(); ++i) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        advance(1);
      } else if (text_.substr(pos_, 2) == "//") {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance(1);
      } else {
        break;
      }
    }
  }

  void skip_string(char quote) {
    int start_line = line_;
    advance(1);
    while (pos_ < text_.size() && text_[pos_] != quote) {
      if (text_[pos_] == '\\') advance(1);
      if (text_[pos_] == '\n') throw TemplateSyntaxError(start_line, "unterminated string");
      advance(1);
    }
    if (pos_ >= text_.size()) throw TemplateSyntaxError(start_line, "unterminated string");
    advance(1);
  }

  // Skips literal template text; true when stopped at `${`.
  bool skip_template_text() {
    int start_line = line_;
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (c == '\\') {
        advance(2);
      } else if (c == '`') {
        advance(1);
        return false;
      } else if (c == '$' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '{') {
        advance(2);
        return true;
      } else {
        advance(1);
      }
    }
    throw TemplateSyntaxError(start_line, "unterminated template literal");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

std::string trim_body(const std::string& body) {
  std::size_t b = body.find_first_not_of(" \t\n");
  if (b == std::string::npos) return {};
  std::size_t e = body.find_last_not_of(" \t\n");
  return body.substr(b, e - b + 1);
}

}  // namespace

std::vector<CustomTemplate> parse_templates(std::string_view text) {
  Scanner scanner(text);
  std::vector<CustomTemplate> out;
  std::set<std::string> names;
  while (!scanner.done()) {
    scanner.expect_word("template");
    int line = scanner.line();
    CustomTemplate t;
    t.name = scanner.name();
    t.body = trim_body(scanner.body());
    if (!names.insert(t.name).second) {
      throw TemplateSyntaxError(line, fmt::format("duplicate template \"{}\"", t.name));
    }
    lang::Node block;
    try {
      block = lang::parse_statements(t.body);
    } catch (const lang::ParseError& e) {
      throw TemplateSyntaxError(line, fmt::format("template \"{}\": {}", t.name, e.what()));
    }
    if (block.children.empty() || block.children.back().kind != lang::NodeKind::ExprStmt) {
      throw TemplateSyntaxError(line, fmt::format("template \"{}\" must end in an expression", t.name));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::string serialize_templates(const std::vector<CustomTemplate>& templates) {
  std::string out;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    if (i) out += "\n";
    out += fmt::format("template {} {{\n  {}\n}}\n", templates[i].name, templates[i].body);
  }
  return out;
}

}  // namespace babylon::annotations
