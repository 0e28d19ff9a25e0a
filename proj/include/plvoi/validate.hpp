#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "plvoi/program.hpp"

namespace plvoi {

struct Violation {
  enum class Kind {
    non_stratified,
    not_range_restricted,
    unsupported_builtin,
    overlapping_observables,
    unknown_observable,
  };
  Kind kind;
  std::string message;
};

inline const char* to_string(Violation::Kind k) {
  switch (k) {
    case Violation::Kind::non_stratified: return "non-stratified";
    case Violation::Kind::not_range_restricted: return "not-range-restricted";
    case Violation::Kind::unsupported_builtin: return "unsupported-builtin";
    case Violation::Kind::overlapping_observables: return "overlapping-observables";
    case Violation::Kind::unknown_observable: return "unknown-observable";
  }
  return "?";
}

namespace detail {

struct RangeCheck {
  std::set<std::string> bound;
  std::set<std::string> lists;   // bound by findall
  std::set<std::string> counts;  // bound by length
  std::vector<Violation>* out;
  std::string where;

  void report(Violation::Kind k, const std::string& msg) { out->push_back({k, where + ": " + msg}); }

  bool aggregate_var(const Term& t) const {
    std::vector<std::string> vs;
    collect_variables(t, vs);
    for (const auto& v : vs)
      if (lists.count(v) || counts.count(v)) return true;
    return false;
  }

  bool all_bound(const Term& t) const {
    std::vector<std::string> vs;
    collect_variables(t, vs);
    for (const auto& v : vs)
      if (!bound.count(v)) return false;
    return true;
  }

  static bool has_anonymous(const Term& t) {
    if (t.kind == Term::Kind::anonymous) return true;
    for (const auto& a : t.args)
      if (has_anonymous(a)) return true;
    return false;
  }

  void literal(const Literal& lit) {
    if (auto* a = std::get_if<AtomLiteral>(&lit)) {
      for (const auto& t : a->atom.args)
        if (aggregate_var(t)) report(Violation::Kind::unsupported_builtin, "aggregate result used as a term in " + to_string(a->atom));
      if (a->negated) {
        for (const auto& t : a->atom.args)
          if (!all_bound(t)) report(Violation::Kind::not_range_restricted, "unbound variable in negated literal " + to_string(a->atom));
      } else {
        for (const auto& v : variables_of(a->atom)) bound.insert(v);
      }
    } else if (auto* c = std::get_if<Comparison>(&lit)) {
      for (const Term* side : {&c->lhs, &c->rhs}) {
        if (side->kind == Term::Kind::integer) continue;
        if (side->kind == Term::Kind::variable && (bound.count(side->name) || counts.count(side->name))) continue;
        report(Violation::Kind::not_range_restricted, "comparison operand " + to_string(*side) + " is not a bound integer");
      }
    } else if (auto* f = std::get_if<Findall>(&lit)) {
      auto goal_vars = variables_of(f->goal);
      std::vector<std::string> pattern_vars;
      collect_variables(f->pattern, pattern_vars);
      for (const auto& v : pattern_vars)
        if (std::find(goal_vars.begin(), goal_vars.end(), v) == goal_vars.end())
          report(Violation::Kind::not_range_restricted, "findall template variable " + v + " not in goal");
      if (f->result.kind != Term::Kind::variable || bound.count(f->result.name))
        report(Violation::Kind::unsupported_builtin, "findall result must be a fresh variable");
      else
        lists.insert(f->result.name);
    } else if (auto* l = std::get_if<Length>(&lit)) {
      if (l->list.kind != Term::Kind::variable || !lists.count(l->list.name))
        report(Violation::Kind::unsupported_builtin, "length/2 is only supported on a findall result");
      if (l->count.kind != Term::Kind::variable || bound.count(l->count.name) || counts.count(l->count.name))
        report(Violation::Kind::unsupported_builtin, "length/2 count must be a fresh variable");
      else
        counts.insert(l->count.name);
    }
  }

  void head(const Atom& h) {
    for (const auto& t : h.args) {
      if (has_anonymous(t)) report(Violation::Kind::not_range_restricted, "anonymous variable in head");
      if (aggregate_var(t)) report(Violation::Kind::unsupported_builtin, "aggregate result used in head");
      else if (!all_bound(t)) report(Violation::Kind::not_range_restricted, "head variable not bound by a positive body literal");
    }
  }
};

inline void check_range_restricted(const Atom& head, const std::vector<Literal>& body, const std::string& where,
                                   std::vector<Violation>& out) {
  RangeCheck rc;
  rc.out = &out;
  rc.where = where;
  for (const auto& lit : body) rc.literal(lit);
  rc.head(head);
}

}  // namespace detail

/// Clause-local checks: range restriction, builtin usage and observable
/// declarations. Stratification needs the ground program; see validate_theory.
inline std::vector<Violation> validate_structure(const Theory& t) {
  std::vector<Violation> out;

  for (const auto& c : t.prob_clauses) detail::check_range_restricted(c.head, c.body, to_string(c), out);
  for (const auto& c : t.bk_clauses) detail::check_range_restricted(c.head, c.body, to_string(c), out);

  std::set<std::string> heads;
  for (const auto& c : t.prob_clauses) heads.insert(c.head.signature());
  for (const auto& c : t.bk_clauses) heads.insert(c.head.signature());
  for (std::size_t i = 0; i < t.observables.size(); ++i) {
    const auto& a = t.observables[i].pattern;
    if (!heads.count(a.signature()))
      out.push_back({Violation::Kind::unknown_observable, "observable " + to_string(a) + " matches no program predicate"});
    for (std::size_t j = i + 1; j < t.observables.size(); ++j)
      if (may_overlap(a, t.observables[j].pattern))
        out.push_back({Violation::Kind::overlapping_observables,
                       "observables " + to_string(a) + " and " + to_string(t.observables[j].pattern) + " overlap"});
  }
  return out;
}

}  // namespace plvoi
