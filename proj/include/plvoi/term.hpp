#pragma once

#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace plvoi {

/// A first-order term: constant symbol, integer, named variable, anonymous
/// variable `_`, or compound. Anonymous variables never bind by name.
struct Term {
  enum class Kind : std::uint8_t { symbol, integer, variable, anonymous, compound };

  Kind kind = Kind::symbol;
  std::string name;  // symbol text, variable name or functor
  std::int64_t value = 0;
  std::vector<Term> args;

  static Term symbol(std::string s) { return Term{Kind::symbol, std::move(s), 0, {}}; }
  static Term integer(std::int64_t v) { return Term{Kind::integer, {}, v, {}}; }
  static Term variable(std::string n) { return Term{Kind::variable, std::move(n), 0, {}}; }
  static Term anonymous() { return Term{Kind::anonymous, "_", 0, {}}; }
  static Term compound(std::string functor, std::vector<Term> args) {
    return Term{Kind::compound, std::move(functor), 0, std::move(args)};
  }

  bool is_var() const noexcept { return kind == Kind::variable || kind == Kind::anonymous; }

  bool is_ground() const noexcept {
    if (is_var()) return false;
    for (const auto& a : args)
      if (!a.is_ground()) return false;
    return true;
  }

  friend bool operator==(const Term& a, const Term& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
      case Kind::integer: return a.value == b.value;
      case Kind::anonymous: return true;
      case Kind::compound: return a.name == b.name && a.args == b.args;
      default: return a.name == b.name;
    }
  }
};

struct Atom {
  std::string predicate;
  std::vector<Term> args;

  std::size_t arity() const noexcept { return args.size(); }

  bool is_ground() const noexcept {
    for (const auto& a : args)
      if (!a.is_ground()) return false;
    return true;
  }

  /// `name/arity`, the key used for predicate-level analyses.
  std::string signature() const { return predicate + "/" + std::to_string(args.size()); }

  friend bool operator==(const Atom&, const Atom&) = default;
};

// ---------------------------------------------------------------------------
// Printing

inline bool is_plain_symbol(const std::string& s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

inline std::string quote_symbol(const std::string& s) {
  if (is_plain_symbol(s)) return s;
  std::string out = "'";
  for (char c : s) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  out += '\'';
  return out;
}

inline void print_term(std::string& out, const Term& t) {
  switch (t.kind) {
    case Term::Kind::symbol: out += quote_symbol(t.name); break;
    case Term::Kind::integer: out += std::to_string(t.value); break;
    case Term::Kind::variable: out += t.name; break;
    case Term::Kind::anonymous: out += '_'; break;
    case Term::Kind::compound:
      out += quote_symbol(t.name);
      out += '(';
      for (std::size_t i = 0; i < t.args.size(); ++i) {
        if (i) out += ',';
        print_term(out, t.args[i]);
      }
      out += ')';
      break;
  }
}

/// Canonical printing: no whitespace, symbols quoted only when needed.
inline std::string to_string(const Term& t) {
  std::string out;
  print_term(out, t);
  return out;
}

inline std::string to_string(const Atom& a) {
  std::string out = quote_symbol(a.predicate);
  if (!a.args.empty()) {
    out += '(';
    for (std::size_t i = 0; i < a.args.size(); ++i) {
      if (i) out += ',';
      print_term(out, a.args[i]);
    }
    out += ')';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Substitutions

/// Variable bindings. Anonymous slots of a template are keyed `_1`, `_2`, ...
/// in left-to-right occurrence order.
using Substitution = std::map<std::string, Term>;

namespace detail {

inline bool match_term(const Term& pattern, const Term& ground, Substitution& s, std::size_t& slot) {
  switch (pattern.kind) {
    case Term::Kind::anonymous:
      s.emplace("_" + std::to_string(++slot), ground);
      return true;
    case Term::Kind::variable: {
      auto [it, inserted] = s.emplace(pattern.name, ground);
      return inserted || it->second == ground;
    }
    case Term::Kind::compound:
      if (ground.kind != Term::Kind::compound || ground.name != pattern.name ||
          ground.args.size() != pattern.args.size())
        return false;
      for (std::size_t i = 0; i < pattern.args.size(); ++i)
        if (!match_term(pattern.args[i], ground.args[i], s, slot)) return false;
      return true;
    default: return pattern == ground;
  }
}

inline Term apply_term(const Term& t, const Substitution& s, std::size_t& slot) {
  switch (t.kind) {
    case Term::Kind::anonymous: {
      auto it = s.find("_" + std::to_string(++slot));
      return it == s.end() ? t : it->second;
    }
    case Term::Kind::variable: {
      auto it = s.find(t.name);
      return it == s.end() ? t : it->second;
    }
    case Term::Kind::compound: {
      Term out = t;
      for (auto& a : out.args) a = apply_term(a, s, slot);
      return out;
    }
    default: return t;
  }
}

}  // namespace detail

/// One-way matching of `pattern` against a ground atom, extending `bindings`.
inline bool match_into(const Atom& pattern, const Atom& ground, Substitution& bindings) {
  if (pattern.predicate != ground.predicate || pattern.args.size() != ground.args.size()) return false;
  std::size_t slot = 0;
  for (std::size_t i = 0; i < pattern.args.size(); ++i)
    if (!detail::match_term(pattern.args[i], ground.args[i], bindings, slot)) return false;
  return true;
}

/// Returns σ with template·σ = ground_atom, or nothing if `ground_atom` is not
/// an instance of `template_atom`.
inline std::optional<Substitution> match(const Atom& template_atom, const Atom& ground_atom) {
  Substitution s;
  if (!match_into(template_atom, ground_atom, s)) return std::nullopt;
  return s;
}

inline Term substitute(const Term& t, const Substitution& s) {
  std::size_t slot = 0;
  return detail::apply_term(t, s, slot);
}

inline Atom substitute(const Atom& a, const Substitution& s) {
  Atom out{a.predicate, {}};
  out.args.reserve(a.args.size());
  std::size_t slot = 0;
  for (const auto& t : a.args) out.args.push_back(detail::apply_term(t, s, slot));
  return out;
}

inline void collect_variables(const Term& t, std::vector<std::string>& out) {
  if (t.kind == Term::Kind::variable) {
    for (const auto& v : out)
      if (v == t.name) return;
    out.push_back(t.name);
  }
  for (const auto& a : t.args) collect_variables(a, out);
}

inline std::vector<std::string> variables_of(const Atom& a) {
  std::vector<std::string> out;
  for (const auto& t : a.args) collect_variables(t, out);
  return out;
}

/// True when some ground atom is an instance of both (variables treated as
/// wildcards, shared names ignored). Used for observable template overlap.
inline bool may_overlap(const Term& a, const Term& b) {
  if (a.is_var() || b.is_var()) return true;
  if (a.kind != b.kind) return false;
  if (a.kind == Term::Kind::compound) {
    if (a.name != b.name || a.args.size() != b.args.size()) return false;
    for (std::size_t i = 0; i < a.args.size(); ++i)
      if (!may_overlap(a.args[i], b.args[i])) return false;
    return true;
  }
  return a == b;
}

inline bool may_overlap(const Atom& a, const Atom& b) {
  if (a.predicate != b.predicate || a.args.size() != b.args.size()) return false;
  for (std::size_t i = 0; i < a.args.size(); ++i)
    if (!may_overlap(a.args[i], b.args[i])) return false;
  return true;
}

}  // namespace plvoi
