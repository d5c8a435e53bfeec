#include "babylon/lang/lexer.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>

namespace babylon::lang {

std::string normalize_newlines(std::string_view source) {
  std::string out;
  out.reserve(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    char c = source[i];
    if (c == '\r') {
      out.push_back('\n');
      if (i + 1 < source.size() && source[i + 1] == '\n') ++i;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

bool is_reserved_word(std::string_view word) {
  static constexpr std::array<std::string_view, 19> kReserved = {
      "import", "export", "default", "function", "class", "new",  "return",
      "if",     "else",   "while",   "for",      "var",   "let",  "const",
      "true",   "false",  "null",    "this",     "extends"};
  for (auto w : kReserved) {
    if (w == word) return true;
  }
  return false;
}

namespace {

bool is_ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         c == '$' || c >= 0x80;
}

bool is_ident_part(unsigned char c) {
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Longest match first.
constexpr std::array<std::string_view, 35> kPunctuators = {
    "===", "!==", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=",
    "-=",  "*=",  ">>", "(",  ")",  "{",  "}",  "[",  "]",  ";",  ",",  ".",
    ":",   "=",   "+",  "-",  "*",  "/",  "%",  "<",  ">",  "!",  "?"};

class Lexer {
 public:
  Lexer(std::string_view src, std::vector<Comment>& comments)
      : src_(src), comments_(comments) {}

  // Lexes until End, or until an unmatched `}` when `stop_at_brace` is set
  // (template substitution bodies).
  std::vector<Token> run(bool stop_at_brace) {
    std::vector<Token> tokens;
    int depth = 0;
    bool newline = false;
    for (;;) {
      newline = skip_trivia() || newline;
      if (at_end()) {
        if (stop_at_brace) fail(here_span(), "unterminated template literal");
        Token end;
        end.kind = TokenKind::End;
        end.span = here_span();
        end.newline_before = true;
        tokens.push_back(std::move(end));
        return tokens;
      }
      if (stop_at_brace && peek() == '}' && depth == 0) {
        Token end;
        end.kind = TokenKind::End;
        end.span = here_span();
        tokens.push_back(std::move(end));
        advance();
        return tokens;
      }
      Token tok = next_token();
      tok.newline_before = newline || tokens.empty();
      newline = false;
      if (tok.is_punct("{")) ++depth;
      if (tok.is_punct("}")) --depth;
      tokens.push_back(std::move(tok));
    }
  }

 private:
  bool at_end() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }
  SourcePos here() const { return {line_, column_}; }
  SourceSpan here_span() const { return {here(), here()}; }

  void advance() {
    unsigned char c = static_cast<unsigned char>(src_[pos_++]);
    if (c == '\n') {
      ++line_;
      column_ = 0;
    } else if ((c & 0xC0) != 0x80) {
      ++column_;
    }
  }

  [[noreturn]] void fail(SourceSpan span, const std::string& message) {
    throw ParseError(span, message);
  }

  // Returns true when a newline was crossed.
  bool skip_trivia() {
    bool newline = false;
    while (!at_end()) {
      char c = peek();
      if (c == '\n') {
        newline = true;
        advance();
      } else if (c == ' ' || c == '\t' || c == '\f' || c == '\v') {
        advance();
      } else if (c == '/' && peek(1) == '/') {
        Comment comment;
        comment.span.start = here();
        std::size_t begin = pos_;
        while (!at_end() && peek() != '\n') advance();
        comment.span.end = here();
        comment.text = std::string(src_.substr(begin, pos_ - begin));
        comments_.push_back(std::move(comment));
      } else if (c == '/' && peek(1) == '*') {
        Comment comment;
        comment.block = true;
        comment.span.start = here();
        std::size_t begin = pos_;
        advance();
        advance();
        for (;;) {
          if (at_end()) fail(comment.span, "unterminated comment");
          if (peek() == '*' && peek(1) == '/') {
            advance();
            advance();
            break;
          }
          if (peek() == '\n') newline = true;
          advance();
        }
        comment.span.end = here();
        comment.text = std::string(src_.substr(begin, pos_ - begin));
        comments_.push_back(std::move(comment));
      } else {
        break;
      }
    }
    return newline;
  }

  Token next_token() {
    Token tok;
    tok.span.start = here();
    unsigned char c = static_cast<unsigned char>(peek());
    if (is_ident_start(c)) {
      std::size_t begin = pos_;
      while (!at_end() && is_ident_part(static_cast<unsigned char>(peek()))) {
        advance();
      }
      tok.kind = TokenKind::Name;
      tok.text = std::string(src_.substr(begin, pos_ - begin));
    } else if (is_digit(static_cast<char>(c)) ||
               (c == '.' && is_digit(peek(1)))) {
      lex_number(tok);
    } else if (c == '"' || c == '\'') {
      tok.kind = TokenKind::String;
      tok.text = lex_string(static_cast<char>(c));
    } else if (c == '`') {
      lex_template(tok);
    } else {
      bool matched = false;
      for (auto p : kPunctuators) {
        if (src_.substr(pos_, p.size()) == p) {
          for (std::size_t i = 0; i < p.size(); ++i) advance();
          tok.kind = TokenKind::Punct;
          tok.text = std::string(p);
          matched = true;
          break;
        }
      }
      if (!matched) {
        fail(here_span(), std::string("unexpected character '") +
                              static_cast<char>(c) + "'");
      }
    }
    tok.span.end = here();
    return tok;
  }

  void lex_number(Token& tok) {
    std::size_t begin = pos_;
    if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
      advance();
      advance();
      std::size_t digits = pos_;
      while (!at_end() && std::isxdigit(static_cast<unsigned char>(peek()))) {
        advance();
      }
      std::uint64_t value = 0;
      auto text = src_.substr(digits, pos_ - digits);
      auto [ptr, ec] =
          std::from_chars(text.data(), text.data() + text.size(), value, 16);
      if (ec != std::errc() || text.empty()) {
        fail(tok.span, "malformed hexadecimal literal");
      }
      tok.kind = TokenKind::Number;
      tok.number = static_cast<double>(value);
      tok.text = std::string(src_.substr(begin, pos_ - begin));
      return;
    }
    while (is_digit(peek())) advance();
    if (peek() == '.') {
      advance();
      while (is_digit(peek())) advance();
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save_pos = pos_;
      int save_col = column_;
      advance();
      if (peek() == '+' || peek() == '-') advance();
      if (!is_digit(peek())) {
        pos_ = save_pos;
        column_ = save_col;
      } else {
        while (is_digit(peek())) advance();
      }
    }
    if (is_ident_start(static_cast<unsigned char>(peek()))) {
      fail(here_span(), "identifier directly after number");
    }
    tok.kind = TokenKind::Number;
    tok.text = std::string(src_.substr(begin, pos_ - begin));
    auto [ptr, ec] = std::from_chars(tok.text.data(),
                                     tok.text.data() + tok.text.size(),
                                     tok.number);
    if (ec != std::errc()) fail(tok.span, "malformed number");
  }

  // Handles the escape after a backslash; appends the cooked text.
  void lex_escape(std::string& out) {
    SourceSpan at = here_span();
    advance();  // backslash
    if (at_end()) fail(at, "unterminated escape");
    char e = peek();
    advance();
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case '0': out.push_back('\0'); break;
      case '\n': break;  // line continuation
      case 'u': {
        std::uint32_t cp = 0;
        for (int i = 0; i < 4; ++i) {
          char h = peek();
          if (!std::isxdigit(static_cast<unsigned char>(h))) {
            fail(at, "malformed unicode escape");
          }
          cp = cp * 16 + static_cast<std::uint32_t>(
                             std::isdigit(static_cast<unsigned char>(h))
                                 ? h - '0'
                                 : (std::tolower(h) - 'a' + 10));
          advance();
        }
        append_utf8(out, cp);
        break;
      }
      default: out.push_back(e); break;
    }
  }

  std::string lex_string(char quote) {
    SourceSpan at = here_span();
    advance();
    std::string out;
    for (;;) {
      if (at_end() || peek() == '\n') fail(at, "unterminated string literal");
      char c = peek();
      if (c == quote) {
        advance();
        return out;
      }
      if (c == '\\') {
        lex_escape(out);
      } else {
        out.push_back(c);
        advance();
      }
    }
  }

  void lex_template(Token& tok) {
    tok.kind = TokenKind::Template;
    SourceSpan at = here_span();
    advance();  // backtick
    TemplatePiece piece;
    piece.span.start = here();
    for (;;) {
      if (at_end()) fail(at, "unterminated template literal");
      char c = peek();
      if (c == '`') {
        piece.span.end = here();
        tok.quasis.push_back(std::move(piece));
        advance();
        return;
      }
      if (c == '$' && peek(1) == '{') {
        piece.span.end = here();
        tok.quasis.push_back(std::move(piece));
        piece = TemplatePiece{};
        advance();
        advance();
        Lexer inner(src_, comments_);
        inner.pos_ = pos_;
        inner.line_ = line_;
        inner.column_ = column_;
        auto expr = inner.run(true);
        pos_ = inner.pos_;
        line_ = inner.line_;
        column_ = inner.column_;
        tok.exprs.push_back(std::move(expr));
        piece.span.start = here();
        continue;
      }
      if (c == '\\') {
        lex_escape(piece.cooked);
      } else {
        piece.cooked.push_back(c);
        advance();
      }
    }
  }

  std::string_view src_;
  std::vector<Comment>& comments_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int column_ = 0;
};

}  // namespace

LexResult lex(std::string_view source) {
  LexResult result;
  Lexer lexer(source, result.comments);
  result.tokens = lexer.run(false);
  return result;
}

}  // namespace babylon::lang
