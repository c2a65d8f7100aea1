#include "splitlab/scheme.hpp"

#include <cctype>
#include <charconv>
#include <optional>
#include <sstream>

namespace splitlab {

ParseError::ParseError(const std::string& message, int line, int column)
    : SchemeError(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

namespace {

enum class Tok { ident, integer, symbol, newline, end };

struct Token {
  Tok kind;
  std::string text;
  int line;
  int column;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (c == '\n') {
        out.push_back({Tok::newline, "\\n", line_, col_});
        advance();
      } else if (c == ' ' || c == '\t' || c == '\r') {
        advance();
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        out.push_back(take(Tok::ident, [](char ch) {
          return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_';
        }));
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        out.push_back(
            take(Tok::integer, [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); }));
      } else if (c == '{' || c == '}' || c == ':' || c == '+' || c == '*' || c == '/' ||
                 c == '-') {
        out.push_back({Tok::symbol, std::string(1, c), line_, col_});
        advance();
      } else {
        std::string shown = static_cast<unsigned char>(c) < 0x20 || static_cast<unsigned char>(c) >= 0x7f
                                ? "byte 0x" + hex(static_cast<unsigned char>(c))
                                : "'" + std::string(1, c) + "'";
        throw ParseError("unknown token " + shown, line_, col_);
      }
    }
    out.push_back({Tok::end, "end of input", line_, col_});
    return out;
  }

 private:
  static std::string hex(unsigned char c) {
    static const char* digits = "0123456789abcdef";
    return {digits[c >> 4], digits[c & 0xf]};
  }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else if ((static_cast<unsigned char>(src_[pos_]) & 0xC0) != 0x80) {
      ++col_;  // count code points, not UTF-8 continuation bytes
    }
    ++pos_;
  }

  template <class Pred>
  Token take(Tok kind, Pred pred) {
    Token tok{kind, {}, line_, col_};
    while (pos_ < src_.size() && pred(src_[pos_])) {
      tok.text.push_back(src_[pos_]);
      advance();
    }
    return tok;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct Reference {
  std::string stage;
  std::string from;  // referencing stage id, or "output"
  int line;
  int column;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  SchemeSpec run() {
    skip_newlines();
    expect_keyword("scheme");
    scheme_.name = expect(Tok::ident, "scheme name").text;
    expect_symbol("{");
    skip_newlines();

    bool have_output = false;
    while (!at_symbol("}")) {
      if (peek().kind == Tok::end) fail("expected '}' before end of input");
      if (have_output) fail("the output clause must be the last statement");
      if (at_keyword("stage")) {
        parse_stage();
      } else if (at_keyword("output")) {
        parse_output();
        have_output = true;
      } else {
        fail("expected 'stage' or 'output', found " + describe(peek()));
      }
      if (!at_symbol("}")) {
        expect(Tok::newline, "end of line");
        skip_newlines();
      }
    }
    next();  // '}'
    skip_newlines();
    if (peek().kind != Tok::end) fail("unexpected " + describe(peek()) + " after scheme");

    check_references();
    return std::move(scheme_);
  }

 private:
  const Token& peek() const { return toks_[idx_]; }
  const Token& next() { return toks_[idx_ < toks_.size() - 1 ? idx_++ : idx_]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().column);
  }

  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::newline: return "end of line";
      case Tok::end: return "end of input";
      default: return "'" + t.text + "'";
    }
  }

  void skip_newlines() {
    while (peek().kind == Tok::newline) next();
  }

  bool at_symbol(std::string_view s) const { return peek().kind == Tok::symbol && peek().text == s; }
  bool at_keyword(std::string_view s) const { return peek().kind == Tok::ident && peek().text == s; }

  const Token& expect(Tok kind, const std::string& what) {
    if (peek().kind != kind) fail("expected " + what + ", found " + describe(peek()));
    return next();
  }
  void expect_symbol(std::string_view s) {
    if (!at_symbol(s)) fail("expected '" + std::string(s) + "', found " + describe(peek()));
    next();
  }
  void expect_keyword(std::string_view s) {
    if (!at_keyword(s)) fail("expected '" + std::string(s) + "', found " + describe(peek()));
    next();
  }

  std::int64_t parse_integer_token(const Token& t) const {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), value);
    if (ec != std::errc{} || ptr != t.text.data() + t.text.size()) {
      throw ParseError("integer '" + t.text + "' out of range", t.line, t.column);
    }
    return value;
  }

  Rational parse_rational() {
    bool negative = false;
    if (at_symbol("-")) {
      negative = true;
      next();
    }
    const std::int64_t num = parse_integer_token(expect(Tok::integer, "integer"));
    std::int64_t den = 1;
    if (at_symbol("/")) {
      next();
      const Token& d = expect(Tok::integer, "positive integer denominator");
      den = parse_integer_token(d);
      if (den == 0) throw ParseError("denominator must be positive", d.line, d.column);
    }
    return Rational(negative ? -num : num, den);
  }

  void parse_stage() {
    next();  // 'stage'
    const Token& id = expect(Tok::ident, "stage id");
    if (scheme_.find_stage(id.text)) {
      throw ParseError("duplicate stage id '" + id.text + "'", id.line, id.column);
    }
    expect_symbol(":");
    Stage stage{id.text, expect(Tok::ident, "process name").text, {}};
    expect_keyword("from");
    expect_keyword("base");
    while (at_symbol("+")) {
      next();
      if (!(at_symbol("-") || peek().kind == Tok::integer)) {
        fail("expected coefficient (rational) before stage reference, found " + describe(peek()));
      }
      const Rational coefficient = parse_rational();
      expect_symbol("*");
      const Token& ref = expect(Tok::ident, "stage id");
      refs_.push_back({ref.text, stage.id, ref.line, ref.column});
      stage.input.push_back({ref.text, coefficient});
    }
    scheme_.stages.push_back(std::move(stage));
  }

  void parse_output() {
    next();  // 'output'
    expect_symbol(":");
    expect_keyword("base");
    scheme_.explicit_output = true;
    while (at_symbol("+")) {
      next();
      Rational weight{1};
      if (at_symbol("-") || peek().kind == Tok::integer) {
        weight = parse_rational();
        expect_symbol("*");
      }
      const Token& ref = expect(Tok::ident, "stage id");
      refs_.push_back({ref.text, "output", ref.line, ref.column});
      scheme_.output_weights[ref.text] += weight;
    }
  }

  void check_references() const {
    for (const auto& ref : refs_) {
      std::size_t target = scheme_.stages.size();
      std::size_t source = scheme_.stages.size();
      for (std::size_t i = 0; i < scheme_.stages.size(); ++i) {
        if (scheme_.stages[i].id == ref.stage) target = i;
        if (scheme_.stages[i].id == ref.from) source = i;
      }
      if (target == scheme_.stages.size()) {
        throw ParseError("reference to unknown stage '" + ref.stage + "'", ref.line, ref.column);
      }
      if (ref.from != "output" && target >= source) {
        throw ParseError("forward reference to stage '" + ref.stage + "' from stage '" +
                             ref.from + "'",
                         ref.line, ref.column);
      }
    }
  }

  std::vector<Token> toks_;
  std::size_t idx_ = 0;
  SchemeSpec scheme_;
  std::vector<Reference> refs_;
};

}  // namespace

SchemeSpec parse_scheme(std::string_view text) { return Parser(Lexer(text).run()).run(); }

std::string format_scheme(const SchemeSpec& scheme) {
  std::ostringstream out;
  out << "scheme " << scheme.name << " {\n";
  for (const auto& stage : scheme.stages) {
    out << "  stage " << stage.id << ": " << stage.process << " from base";
    for (const auto& term : stage.input) {
      out << " + " << to_string(term.coefficient) << "*" << term.stage;
    }
    out << "\n";
  }
  if (scheme.explicit_output) {
    out << "  output: base";
    for (const auto& stage : scheme.stages) {
      const auto it = scheme.output_weights.find(stage.id);
      if (it != scheme.output_weights.end()) {
        out << " + " << to_string(it->second) << "*" << stage.id;
      }
    }
    out << "\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace splitlab
