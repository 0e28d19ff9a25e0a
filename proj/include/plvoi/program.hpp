#pragma once

#include <charconv>
#include <string>
#include <variant>
#include <vector>

#include "plvoi/term.hpp"

namespace plvoi {

enum class CompareOp { less, greater, less_equal, greater_equal };

inline const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::less: return "<";
    case CompareOp::greater: return ">";
    case CompareOp::less_equal: return "=<";
    case CompareOp::greater_equal: return ">=";
  }
  return "?";
}

inline bool compare(CompareOp op, std::int64_t a, std::int64_t b) {
  switch (op) {
    case CompareOp::less: return a < b;
    case CompareOp::greater: return a > b;
    case CompareOp::less_equal: return a <= b;
    case CompareOp::greater_equal: return a >= b;
  }
  return false;
}

struct AtomLiteral {
  Atom atom;
  bool negated = false;
  friend bool operator==(const AtomLiteral&, const AtomLiteral&) = default;
};

struct Comparison {
  CompareOp op;
  Term lhs;
  Term rhs;
  friend bool operator==(const Comparison&, const Comparison&) = default;
};

/// findall(Template, Goal, Result)
struct Findall {
  Term pattern;
  Atom goal;
  Term result;
  friend bool operator==(const Findall&, const Findall&) = default;
};

/// length(List, Count)
struct Length {
  Term list;
  Term count;
  friend bool operator==(const Length&, const Length&) = default;
};

using Literal = std::variant<AtomLiteral, Comparison, Findall, Length>;

struct Clause {
  Atom head;
  std::vector<Literal> body;
  friend bool operator==(const Clause&, const Clause&) = default;
};

struct ProbClause {
  double probability = 1.0;
  Atom head;
  std::vector<Literal> body;
  friend bool operator==(const ProbClause&, const ProbClause&) = default;
};

struct ObservableDecl {
  Atom pattern;  // arguments are ground terms or `_`
  double cost = 1.0;
  friend bool operator==(const ObservableDecl&, const ObservableDecl&) = default;
};

struct EvidenceFact {
  Atom atom;
  bool value = true;
  friend bool operator==(const EvidenceFact&, const EvidenceFact&) = default;
};

struct Theory {
  std::vector<ProbClause> prob_clauses;
  std::vector<Clause> bk_clauses;
  std::vector<ObservableDecl> observables;
  std::vector<EvidenceFact> evidence;
  friend bool operator==(const Theory&, const Theory&) = default;
};

// ---------------------------------------------------------------------------
// Serialization

/// Shortest decimal text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string to_string(const Literal& lit) {
  struct Printer {
    std::string operator()(const AtomLiteral& a) const {
      return a.negated ? "not(" + to_string(a.atom) + ")" : to_string(a.atom);
    }
    std::string operator()(const Comparison& c) const {
      return to_string(c.lhs) + std::string(to_string(c.op)) + to_string(c.rhs);
    }
    std::string operator()(const Findall& f) const {
      return "findall(" + to_string(f.pattern) + "," + to_string(f.goal) + "," + to_string(f.result) + ")";
    }
    std::string operator()(const Length& l) const {
      return "length(" + to_string(l.list) + "," + to_string(l.count) + ")";
    }
  };
  return std::visit(Printer{}, lit);
}

inline std::string body_to_string(const std::vector<Literal>& body) {
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (i) out += ", ";
    out += to_string(body[i]);
  }
  return out;
}

inline std::string to_string(const Clause& c) {
  std::string out = to_string(c.head);
  if (!c.body.empty()) out += " :- " + body_to_string(c.body);
  return out + ".";
}

inline std::string to_string(const ProbClause& c) {
  std::string out = format_number(c.probability) + "::" + to_string(c.head);
  if (!c.body.empty()) out += " :- " + body_to_string(c.body);
  return out + ".";
}

/// Program text that parses back to an identical Theory.
inline std::string serialize(const Theory& t) {
  std::string out;
  for (const auto& c : t.prob_clauses) out += to_string(c) + "\n";
  for (const auto& c : t.bk_clauses) out += to_string(c) + "\n";
  for (const auto& o : t.observables)
    out += "observable(" + to_string(o.pattern) + ", " + format_number(o.cost) + ").\n";
  for (const auto& e : t.evidence)
    out += "evidence(" + to_string(e.atom) + ", " + (e.value ? "true" : "false") + ").\n";
  return out;
}

}  // namespace plvoi
