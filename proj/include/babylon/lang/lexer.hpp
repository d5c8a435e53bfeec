#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "babylon/lang/ast.hpp"

namespace babylon::lang {

enum class TokenKind { Name, Number, String, Template, Punct, End };

struct Token;

struct TemplatePiece {
  std::string cooked;
  SourceSpan span;
};

struct Token {
  TokenKind kind = TokenKind::End;
  std::string text;  // name, punctuator, or cooked string value
  double number = 0.0;
  SourceSpan span{};
  bool newline_before = false;
  // Template literals: quasis.size() == exprs.size() + 1.
  std::vector<TemplatePiece> quasis;
  std::vector<std::vector<Token>> exprs;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(TokenKind::Punct, t); }
  bool is_name(std::string_view t) const { return is(TokenKind::Name, t); }
};

struct LexResult {
  std::vector<Token> tokens;  // terminated by an End token
  std::vector<Comment> comments;
};

// CRLF and lone CR become LF.
std::string normalize_newlines(std::string_view source);

// Expects already normalized text. Throws ParseError.
LexResult lex(std::string_view source);

bool is_reserved_word(std::string_view word);

}  // namespace babylon::lang
