#pragma once

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "plvoi/error.hpp"
#include "plvoi/program.hpp"

namespace plvoi {

namespace detail {

struct Token {
  enum class Kind {
    end,
    ident,     // lowercase-initial or quoted symbol
    variable,  // uppercase or underscore initial
    integer,
    decimal,
    lparen,
    rparen,
    comma,
    semicolon,
    period,
    prob_sep,  // ::
    neck,      // :-
    op_less,
    op_greater,
    op_less_equal,
    op_greater_equal,
    naf,  // \+
  };
  Kind kind = Kind::end;
  std::string text;
  bool quoted = false;
  std::size_t line = 1;
  std::size_t column = 1;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> tokenize() {
    std::vector<Token> out;
    for (;;) {
      skip_space();
      Token t;
      t.line = line_;
      t.column = col_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c)) ||
          (c == '-' && pos_ + 1 < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number(t);
      } else if (std::islower(static_cast<unsigned char>(c))) {
        t.kind = Token::Kind::ident;
        t.text = take_word();
      } else if (std::isupper(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Token::Kind::variable;
        t.text = take_word();
      } else if (c == '\'') {
        lex_quoted(t);
      } else {
        lex_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, col_, msg); }

  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == '%') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else {
        break;
      }
    }
  }

  std::string take_word() {
    std::string w;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
      w += src_[pos_];
      advance();
    }
    return w;
  }

  bool digit_at(std::size_t i) const {
    return i < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i]));
  }

  void lex_number(Token& t) {
    std::string s;
    if (src_[pos_] == '-') {
      s += '-';
      advance();
    }
    while (digit_at(pos_)) {
      s += src_[pos_];
      advance();
    }
    t.kind = Token::Kind::integer;
    // A period is a decimal point only when a digit follows; otherwise it ends the clause.
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' && digit_at(pos_ + 1)) {
      t.kind = Token::Kind::decimal;
      s += '.';
      advance();
      while (digit_at(pos_)) {
        s += src_[pos_];
        advance();
      }
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (digit_at(look)) {
        t.kind = Token::Kind::decimal;
        while (pos_ < look) {
          s += src_[pos_];
          advance();
        }
        while (digit_at(pos_)) {
          s += src_[pos_];
          advance();
        }
      }
    }
    t.text = std::move(s);
  }

  void lex_quoted(Token& t) {
    advance();
    std::string s;
    while (pos_ < src_.size() && src_[pos_] != '\'') {
      if (src_[pos_] == '\\' && pos_ + 1 < src_.size()) advance();
      s += src_[pos_];
      advance();
    }
    if (pos_ >= src_.size()) fail("unterminated quoted atom");
    advance();
    if (s.empty()) fail("empty quoted atom");
    t.kind = Token::Kind::ident;
    t.text = std::move(s);
    t.quoted = true;
  }

  void lex_punct(Token& t) {
    auto starts = [&](std::string_view p) { return src_.substr(pos_, p.size()) == p; };
    auto take = [&](Token::Kind k, std::size_t n) {
      t.kind = k;
      t.text = std::string(src_.substr(pos_, n));
      for (std::size_t i = 0; i < n; ++i) advance();
    };
    if (starts("::")) return take(Token::Kind::prob_sep, 2);
    if (starts(":-")) return take(Token::Kind::neck, 2);
    if (starts(">=")) return take(Token::Kind::op_greater_equal, 2);
    if (starts("=<")) return take(Token::Kind::op_less_equal, 2);
    if (starts("\\+")) return take(Token::Kind::naf, 2);
    switch (src_[pos_]) {
      case '(': return take(Token::Kind::lparen, 1);
      case ')': return take(Token::Kind::rparen, 1);
      case ',': return take(Token::Kind::comma, 1);
      case ';': return take(Token::Kind::semicolon, 1);
      case '.': return take(Token::Kind::period, 1);
      case '<': return take(Token::Kind::op_less, 1);
      case '>': return take(Token::Kind::op_greater, 1);
      default: break;
    }
    fail(std::string("unexpected character '") + src_[pos_] + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(Lexer(src).tokenize()) {}

  Theory parse_theory() {
    Theory t;
    while (peek().kind != Token::Kind::end) parse_clause(t);
    return t;
  }

  Atom parse_single_atom() {
    Atom a = parse_atom();
    if (peek().kind == Token::Kind::period) next();
    expect_end();
    return a;
  }

  Term parse_single_term() {
    Term t = parse_term();
    expect_end();
    return t;
  }

  /// Comma-separated atom list at nesting depth zero; empty input gives an empty list.
  std::vector<Atom> parse_atom_list() {
    std::vector<Atom> out;
    if (peek().kind == Token::Kind::end) return out;
    out.push_back(parse_atom());
    while (peek().kind == Token::Kind::comma) {
      next();
      out.push_back(parse_atom());
    }
    expect_end();
    return out;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  [[noreturn]] void fail_at(const Token& t, const std::string& msg) const {
    throw ParseError(t.line, t.column, msg);
  }
  const Token& expect(Token::Kind k, const char* what) {
    if (peek().kind != k) fail_at(peek(), std::string("expected ") + what);
    return next();
  }
  void expect_end() {
    if (peek().kind != Token::Kind::end) fail_at(peek(), "unexpected trailing input");
  }

  static bool is_compare(Token::Kind k) {
    return k == Token::Kind::op_less || k == Token::Kind::op_greater || k == Token::Kind::op_less_equal ||
           k == Token::Kind::op_greater_equal;
  }
  static CompareOp to_op(Token::Kind k) {
    switch (k) {
      case Token::Kind::op_less: return CompareOp::less;
      case Token::Kind::op_greater: return CompareOp::greater;
      case Token::Kind::op_less_equal: return CompareOp::less_equal;
      default: return CompareOp::greater_equal;
    }
  }

  double parse_number(const Token& t) {
    double v = 0;
    auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.text.data() + t.text.size()) fail_at(t, "bad number '" + t.text + "'");
    return v;
  }

  Term parse_term() {
    const Token& t = peek();
    switch (t.kind) {
      case Token::Kind::variable: {
        next();
        return t.text == "_" ? Term::anonymous() : Term::variable(t.text);
      }
      case Token::Kind::integer: {
        next();
        std::int64_t v = 0;
        auto res = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
        if (res.ec != std::errc{}) fail_at(t, "integer out of range");
        return Term::integer(v);
      }
      case Token::Kind::decimal: fail_at(t, "decimal numbers are only allowed as probabilities and costs");
      case Token::Kind::ident: {
        std::string name = next().text;
        if (peek().kind != Token::Kind::lparen) return Term::symbol(std::move(name));
        next();
        std::vector<Term> args;
        args.push_back(parse_term());
        while (peek().kind == Token::Kind::comma) {
          next();
          args.push_back(parse_term());
        }
        expect(Token::Kind::rparen, "')'");
        return Term::compound(std::move(name), std::move(args));
      }
      default: fail_at(t, "expected a term");
    }
  }

  Atom term_to_atom(const Term& t, const Token& where) {
    if (t.kind == Term::Kind::symbol) return Atom{t.name, {}};
    if (t.kind == Term::Kind::compound) return Atom{t.name, t.args};
    fail_at(where, "expected an atom");
  }

  Atom parse_atom() {
    const Token& start = peek();
    if (start.kind != Token::Kind::ident) fail_at(start, "expected an atom");
    return term_to_atom(parse_term(), start);
  }

  Literal parse_literal() {
    const Token& start = peek();
    if (start.kind == Token::Kind::naf) {
      next();
      bool paren = peek().kind == Token::Kind::lparen;
      if (paren) next();
      Atom a = parse_atom();
      if (paren) expect(Token::Kind::rparen, "')'");
      return AtomLiteral{std::move(a), true};
    }
    if (start.kind == Token::Kind::ident && !start.quoted && start.text == "not" &&
        peek(1).kind == Token::Kind::ident) {
      next();
      return AtomLiteral{parse_atom(), true};
    }
    Term lhs = parse_term();
    if (is_compare(peek().kind)) {
      CompareOp op = to_op(next().kind);
      Term rhs = parse_term();
      return Comparison{op, std::move(lhs), std::move(rhs)};
    }
    if (lhs.kind == Term::Kind::compound && !start.quoted) {
      if (lhs.name == "not" && lhs.args.size() == 1)
        return AtomLiteral{term_to_atom(lhs.args[0], start), true};
      if (lhs.name == "findall" && lhs.args.size() == 3)
        return Findall{lhs.args[0], term_to_atom(lhs.args[1], start), lhs.args[2]};
      if (lhs.name == "length" && lhs.args.size() == 2) return Length{lhs.args[0], lhs.args[1]};
    }
    return AtomLiteral{term_to_atom(lhs, start), false};
  }

  std::vector<std::vector<Literal>> parse_body() {
    std::vector<std::vector<Literal>> alternatives(1);
    alternatives.back().push_back(parse_literal());
    for (;;) {
      if (peek().kind == Token::Kind::comma) {
        next();
        alternatives.back().push_back(parse_literal());
      } else if (peek().kind == Token::Kind::semicolon) {
        next();
        alternatives.emplace_back();
        alternatives.back().push_back(parse_literal());
      } else {
        return alternatives;
      }
    }
  }

  void parse_observable(Theory& t, const Token& start) {
    expect(Token::Kind::lparen, "'('");
    Atom pattern = parse_atom();
    expect(Token::Kind::comma, "','");
    const Token& cost_tok = peek();
    if (cost_tok.kind != Token::Kind::integer && cost_tok.kind != Token::Kind::decimal)
      fail_at(cost_tok, "observable cost must be a number");
    next();
    double cost = parse_number(cost_tok);
    if (!(cost > 0)) fail_at(cost_tok, "observable cost must be positive");
    expect(Token::Kind::rparen, "')'");
    expect(Token::Kind::period, "'.'");
    for (const auto& a : pattern.args)
      if (a.kind == Term::Kind::variable || (!a.is_ground() && a.kind != Term::Kind::anonymous))
        fail_at(start, "observable template arguments must be ground terms or '_'");
    t.observables.push_back(ObservableDecl{std::move(pattern), cost});
  }

  void parse_evidence(Theory& t, const Token& start) {
    expect(Token::Kind::lparen, "'('");
    Atom atom = parse_atom();
    bool value = true;
    if (peek().kind == Token::Kind::comma) {
      next();
      const Token& v = expect(Token::Kind::ident, "true or false");
      if (v.text == "true") value = true;
      else if (v.text == "false") value = false;
      else fail_at(v, "evidence value must be true or false");
    }
    expect(Token::Kind::rparen, "')'");
    expect(Token::Kind::period, "'.'");
    if (!atom.is_ground()) fail_at(start, "evidence atom must be ground");
    t.evidence.push_back(EvidenceFact{std::move(atom), value});
  }

  void parse_clause(Theory& t) {
    const Token& start = peek();
    if (start.kind == Token::Kind::ident && !start.quoted && peek(1).kind == Token::Kind::lparen) {
      if (start.text == "observable") {
        next();
        return parse_observable(t, start);
      }
      if (start.text == "evidence") {
        next();
        return parse_evidence(t, start);
      }
    }

    std::optional<double> prob;
    if (start.kind == Token::Kind::integer || start.kind == Token::Kind::decimal) {
      next();
      double p = parse_number(start);
      if (!(p >= 0.0 && p <= 1.0)) fail_at(start, "probability " + start.text + " outside [0,1]");
      expect(Token::Kind::prob_sep, "'::'");
      prob = p;
    }
    Atom head = parse_atom();
    std::vector<std::vector<Literal>> bodies{{}};
    if (peek().kind == Token::Kind::neck) {
      next();
      bodies = parse_body();
    }
    expect(Token::Kind::period, "'.'");
    if (prob) {
      if (bodies.size() > 1) fail_at(start, "disjunctive bodies are not supported in probabilistic clauses");
      t.prob_clauses.push_back(ProbClause{*prob, std::move(head), std::move(bodies.front())});
    } else {
      for (auto& b : bodies) t.bk_clauses.push_back(Clause{head, std::move(b)});
    }
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses program text into a Theory. Throws ParseError with line/column.
inline Theory parse_theory(std::string_view source) { return detail::Parser(source).parse_theory(); }

/// Parses a single atom, e.g. a query given on the command line.
inline Atom parse_atom(std::string_view text) { return detail::Parser(text).parse_single_atom(); }

/// Parses `a(1,_), b` into atoms; empty text gives an empty list.
inline std::vector<Atom> parse_atom_list(std::string_view text) {
  return detail::Parser(text).parse_atom_list();
}

}  // namespace plvoi
