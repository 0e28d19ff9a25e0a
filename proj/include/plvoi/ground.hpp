#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "plvoi/error.hpp"
#include "plvoi/parser.hpp"
#include "plvoi/program.hpp"
#include "plvoi/validate.hpp"

namespace plvoi {

using AtomId = std::uint32_t;

/// One independent Bernoulli choice: a ground instance of a probabilistic clause.
struct GroundFact {
  double probability = 0.0;
  std::size_t clause = 0;  // index into Theory::prob_clauses
  std::string label;       // the ground clause text, for diagnostics
};

struct GroundOperand {
  bool is_count = false;
  std::int64_t value = 0;     // constant, when !is_count
  std::size_t aggregate = 0;  // index into GroundRule::aggregates, when is_count
};

struct GroundComparison {
  CompareOp op;
  GroundOperand lhs;
  GroundOperand rhs;
};

/// head :- positive..., none-of(negative groups), count tests, [choice].
struct GroundRule {
  AtomId head = 0;
  std::vector<AtomId> positive;
  std::vector<std::vector<AtomId>> negative;    // each group: no member may hold
  std::vector<std::vector<AtomId>> aggregates;  // candidate sets counted by findall/length
  std::vector<GroundComparison> comparisons;
  int choice = -1;  // index into GroundProgram::facts, or -1
  int stratum = 0;
};

struct GroundOptions {
  std::size_t max_rules = 1'000'000;
};

/// The relevance-restricted ground program.
struct GroundProgram {
  std::vector<Atom> atoms;  // relevant ground atoms
  std::vector<int> atom_stratum;
  std::unordered_map<std::string, AtomId> index;
  std::vector<GroundFact> facts;
  std::vector<GroundRule> rules;  // ordered by stratum
  int strata = 1;
  std::unordered_set<std::string> herbrand;  // every atom true in some world, before relevance
  std::size_t rules_before_relevance = 0;

  std::optional<AtomId> find(const Atom& a) const {
    auto it = index.find(to_string(a));
    if (it == index.end()) return std::nullopt;
    return it->second;
  }

  /// False means the atom is in no least model of any world.
  bool possible(const Atom& a) const { return herbrand.count(to_string(a)) > 0; }

  std::vector<AtomId> instances(const Atom& pattern) const {
    std::vector<AtomId> out;
    for (AtomId i = 0; i < atoms.size(); ++i)
      if (match(pattern, atoms[i])) out.push_back(i);
    return out;
  }
};

namespace detail {

class Grounder {
 public:
  Grounder(const Theory& t, GroundOptions opts) : theory_(t), opts_(opts) {}

  GroundProgram run(std::span<const Atom> goals) {
    prepare();
    return finish(goals);
  }

  /// Grounds every clause and assigns atom-level strata. Throws on the first
  /// cycle through negation or an aggregate.
  void prepare() {
    for (const auto& v : validate_structure(theory_)) {
      if (v.kind == Violation::Kind::not_range_restricted || v.kind == Violation::Kind::unsupported_builtin)
        throw input_error(std::string("cannot ground: ") + to_string(v.kind) + ": " + v.message);
    }
    std::vector<Spec> specs;
    for (std::size_t i = 0; i < theory_.prob_clauses.size(); ++i) {
      const auto& c = theory_.prob_clauses[i];
      Spec s{&c.head, &c.body, static_cast<int>(i), c.probability, {}};
      s.vars = variables_of(c.head);
      for (const auto& lit : c.body)
        if (auto* a = std::get_if<AtomLiteral>(&lit); a && !a->negated)
          for (const auto& v : variables_of(a->atom))
            if (std::find(s.vars.begin(), s.vars.end(), v) == s.vars.end()) s.vars.push_back(v);
      specs.push_back(std::move(s));
    }
    for (const auto& c : theory_.bk_clauses) specs.push_back(Spec{&c.head, &c.body, -1, 1.0, {}});

    // Possible atoms: positive fixpoint, ignoring negation and counts.
    collecting_ = true;
    for (std::size_t before = SIZE_MAX; before != atoms_.size();) {
      before = atoms_.size();
      for (const auto& spec : specs) {
        Partial p;
        expand(spec, 0, p);
      }
    }
    // Rules against the now fixed atom set.
    collecting_ = false;
    for (const auto& spec : specs) {
      Partial p;
      expand(spec, 0, p);
    }
    assign_strata();
  }

 private:
  struct Spec {
    const Atom* head;
    const std::vector<Literal>* body;
    int prob_clause;  // -1 for background clauses
    double probability;
    std::vector<std::string> vars;
  };

  struct Partial {
    Substitution subst;
    std::vector<AtomId> positive;
    std::vector<std::vector<AtomId>> negative;
    std::vector<std::vector<AtomId>> aggregates;
    std::vector<GroundComparison> comparisons;
    std::map<std::string, std::size_t> lists;   // findall result var -> aggregate
    std::map<std::string, std::size_t> counts;  // length count var -> aggregate
  };

  AtomId intern(const Atom& a) {
    std::string key = to_string(a);
    auto it = index_.find(key);
    if (it != index_.end()) return it->second;
    AtomId id = static_cast<AtomId>(atoms_.size());
    atoms_.push_back(a);
    index_.emplace(std::move(key), id);
    by_pred_[a.signature()].push_back(id);
    return id;
  }

  std::vector<AtomId> matching(const Atom& pattern) const {
    std::vector<AtomId> out;
    auto it = by_pred_.find(pattern.signature());
    if (it == by_pred_.end()) return out;
    for (AtomId id : it->second)
      if (match(pattern, atoms_[id])) out.push_back(id);
    return out;
  }

  GroundOperand operand(const Term& t, const Partial& p) const {
    if (t.kind == Term::Kind::integer) return {false, t.value, 0};
    if (t.kind == Term::Kind::variable) {
      if (auto c = p.counts.find(t.name); c != p.counts.end()) return {true, 0, c->second};
      if (auto b = p.subst.find(t.name); b != p.subst.end() && b->second.kind == Term::Kind::integer)
        return {false, b->second.value, 0};
    }
    throw input_error("comparison operand " + to_string(substitute(t, p.subst)) + " is not an integer");
  }

  void expand(const Spec& spec, std::size_t i, Partial& p) {
    if (i == spec.body->size()) return emit(spec, p);
    const Literal& lit = (*spec.body)[i];
    if (auto* a = std::get_if<AtomLiteral>(&lit)) {
      Atom pattern = substitute(a->atom, p.subst);
      if (a->negated) {
        Partial q = p;
        auto group = matching(pattern);
        if (!group.empty()) q.negative.push_back(std::move(group));
        return expand(spec, i + 1, q);
      }
      auto it = by_pred_.find(pattern.signature());
      if (it == by_pred_.end()) return;
      // Copy: recursion may intern new atoms of the same predicate.
      std::vector<AtomId> candidates = it->second;
      for (AtomId id : candidates) {
        Partial q = p;
        if (!match_into(pattern, atoms_[id], q.subst)) continue;
        q.positive.push_back(id);
        expand(spec, i + 1, q);
      }
      return;
    }
    Partial q = p;
    if (auto* c = std::get_if<Comparison>(&lit)) {
      GroundComparison g{c->op, operand(c->lhs, q), operand(c->rhs, q)};
      if (!g.lhs.is_count && !g.rhs.is_count) {
        if (!compare(g.op, g.lhs.value, g.rhs.value)) return;
      } else {
        q.comparisons.push_back(g);
      }
    } else if (auto* f = std::get_if<Findall>(&lit)) {
      q.aggregates.push_back(matching(substitute(f->goal, q.subst)));
      q.lists[f->result.name] = q.aggregates.size() - 1;
    } else if (auto* l = std::get_if<Length>(&lit)) {
      q.counts[l->count.name] = q.lists.at(l->list.name);
    }
    expand(spec, i + 1, q);
  }

  void emit(const Spec& spec, Partial& p) {
    Atom head = substitute(*spec.head, p.subst);
    if (collecting_) {
      intern(head);
      if (atoms_.size() > opts_.max_rules)
        throw Error(ErrorCode::resource_limit, "grounding exceeds " + std::to_string(opts_.max_rules) +
                                                   " ground atoms; instance too large for exact enumeration");
      return;
    }
    GroundRule r;
    std::sort(p.positive.begin(), p.positive.end());
    p.positive.erase(std::unique(p.positive.begin(), p.positive.end()), p.positive.end());
    std::string key = std::to_string(spec.prob_clause) + "|" + to_string(head);
    if (spec.prob_clause >= 0) {
      std::string choice_key = std::to_string(spec.prob_clause);
      for (const auto& v : spec.vars) choice_key += "|" + to_string(p.subst.at(v));
      auto [it, inserted] = choice_index_.emplace(choice_key, facts_.size());
      if (inserted) {
        std::string label = format_number(spec.probability) + "::" + to_string(head);
        facts_.push_back(GroundFact{spec.probability, static_cast<std::size_t>(spec.prob_clause), label});
      }
      r.choice = static_cast<int>(it->second);
      key += "|c" + std::to_string(r.choice);
    }
    for (AtomId id : p.positive) key += "|+" + std::to_string(id);
    for (const auto& g : p.negative) {
      key += "|-";
      for (AtomId id : g) key += std::to_string(id) + ",";
    }
    for (const auto& g : p.aggregates) {
      key += "|#";
      for (AtomId id : g) key += std::to_string(id) + ",";
    }
    for (const auto& c : p.comparisons)
      key += "|" + std::string(to_string(c.op)) + (c.lhs.is_count ? "n" : "") +
             std::to_string(c.lhs.is_count ? c.lhs.aggregate : static_cast<std::size_t>(c.lhs.value)) +
             (c.rhs.is_count ? "n" : "") +
             std::to_string(c.rhs.is_count ? c.rhs.aggregate : static_cast<std::size_t>(c.rhs.value));
    if (!rule_keys_.insert(key).second) return;
    if (rules_.size() >= opts_.max_rules)
      throw Error(ErrorCode::resource_limit,
                  "grounding exceeds " + std::to_string(opts_.max_rules) + " ground rules; instance too large for exact enumeration");
    r.head = intern(head);
    r.positive = std::move(p.positive);
    r.negative = std::move(p.negative);
    r.aggregates = std::move(p.aggregates);
    r.comparisons = std::move(p.comparisons);
    rules_.push_back(std::move(r));
  }

  void assign_strata() {
    const std::size_t n = atoms_.size();
    struct Edge {
      AtomId to;
      bool strict;
    };
    std::vector<std::vector<Edge>> deps(n);
    for (const auto& r : rules_) {
      for (AtomId b : r.positive) deps[r.head].push_back({b, false});
      for (const auto& g : r.negative)
        for (AtomId b : g) deps[r.head].push_back({b, true});
      for (const auto& g : r.aggregates)
        for (AtomId b : g) deps[r.head].push_back({b, true});
    }

    // Iterative Tarjan; components come out dependencies first.
    constexpr std::uint32_t unvisited = UINT32_MAX;
    std::vector<std::uint32_t> order(n, unvisited), low(n, 0), component(n, unvisited);
    std::vector<AtomId> stack;
    std::vector<char> on_stack(n, 0);
    std::vector<std::pair<AtomId, std::size_t>> call;
    std::uint32_t counter = 0, components = 0;
    stratum_.assign(n, 0);
    std::vector<int> component_stratum;
    for (AtomId root = 0; root < n; ++root) {
      if (order[root] != unvisited) continue;
      call.push_back({root, 0});
      order[root] = low[root] = counter++;
      stack.push_back(root);
      on_stack[root] = 1;
      while (!call.empty()) {
        auto& [v, next] = call.back();
        if (next < deps[v].size()) {
          AtomId w = deps[v][next++].to;
          if (order[w] == unvisited) {
            order[w] = low[w] = counter++;
            stack.push_back(w);
            on_stack[w] = 1;
            call.push_back({w, 0});
          } else if (on_stack[w]) {
            low[v] = std::min(low[v], order[w]);
          }
          continue;
        }
        AtomId done = v;
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        if (low[done] != order[done]) continue;
        std::vector<AtomId> members;
        for (AtomId m = unvisited; m != done;) {
          m = stack.back();
          stack.pop_back();
          on_stack[m] = 0;
          component[m] = components;
          members.push_back(m);
        }
        int level = 0;
        for (AtomId m : members) {
          for (const auto& e : deps[m]) {
            if (component[e.to] == components) {
              if (e.strict)
                throw input_error("non-stratified: " + to_string(atoms_[m]) + " depends on " + to_string(atoms_[e.to]) +
                                  " through negation or an aggregate within a cycle; no unique least model");
              continue;
            }
            level = std::max(level, component_stratum[component[e.to]] + (e.strict ? 1 : 0));
          }
        }
        component_stratum.push_back(level);
        for (AtomId m : members) stratum_[m] = level;
        ++components;
      }
    }
    for (auto& r : rules_) r.stratum = stratum_[r.head];
  }

  GroundProgram finish(std::span<const Atom> goals) {
    std::vector<std::vector<std::size_t>> rules_by_head(atoms_.size());
    for (std::size_t i = 0; i < rules_.size(); ++i) rules_by_head[rules_[i].head].push_back(i);

    std::vector<char> atom_seen(atoms_.size(), 0), rule_seen(rules_.size(), 0);
    std::deque<AtomId> work;
    auto visit = [&](AtomId id) {
      if (!atom_seen[id]) {
        atom_seen[id] = 1;
        work.push_back(id);
      }
    };
    for (const auto& g : goals)
      for (AtomId id : matching(g)) visit(id);
    while (!work.empty()) {
      AtomId a = work.front();
      work.pop_front();
      for (std::size_t ri : rules_by_head[a]) {
        if (rule_seen[ri]) continue;
        rule_seen[ri] = 1;
        const auto& r = rules_[ri];
        for (AtomId b : r.positive) visit(b);
        for (const auto& g : r.negative)
          for (AtomId b : g) visit(b);
        for (const auto& g : r.aggregates)
          for (AtomId b : g) visit(b);
      }
    }

    GroundProgram out;
    out.strata = 1;
    out.rules_before_relevance = rules_.size();
    for (const auto& [key, _] : index_) out.herbrand.insert(key);

    std::vector<AtomId> remap(atoms_.size(), 0);
    for (AtomId i = 0; i < atoms_.size(); ++i) {
      if (!atom_seen[i]) continue;
      remap[i] = static_cast<AtomId>(out.atoms.size());
      out.index.emplace(to_string(atoms_[i]), remap[i]);
      out.atoms.push_back(atoms_[i]);
      out.atom_stratum.push_back(stratum_[i]);
      out.strata = std::max(out.strata, stratum_[i] + 1);
    }
    std::vector<int> fact_remap(facts_.size(), -1);
    for (std::size_t i = 0; i < rules_.size(); ++i)
      if (rule_seen[i] && rules_[i].choice >= 0) fact_remap[static_cast<std::size_t>(rules_[i].choice)] = 0;
    for (std::size_t i = 0; i < facts_.size(); ++i) {
      if (fact_remap[i] < 0) continue;
      fact_remap[i] = static_cast<int>(out.facts.size());
      out.facts.push_back(facts_[i]);
    }
    auto remap_group = [&](std::vector<AtomId>& g) {
      for (auto& id : g) id = remap[id];
    };
    for (std::size_t i = 0; i < rules_.size(); ++i) {
      if (!rule_seen[i]) continue;
      GroundRule r = rules_[i];
      r.head = remap[r.head];
      remap_group(r.positive);
      for (auto& g : r.negative) remap_group(g);
      for (auto& g : r.aggregates) remap_group(g);
      if (r.choice >= 0) r.choice = fact_remap[static_cast<std::size_t>(r.choice)];
      out.rules.push_back(std::move(r));
    }
    std::stable_sort(out.rules.begin(), out.rules.end(),
                     [](const GroundRule& a, const GroundRule& b) { return a.stratum < b.stratum; });
    return out;
  }

  const Theory& theory_;
  GroundOptions opts_;
  bool collecting_ = false;
  std::vector<int> stratum_;

  std::vector<Atom> atoms_;
  std::unordered_map<std::string, AtomId> index_;
  std::unordered_map<std::string, std::vector<AtomId>> by_pred_;
  std::vector<GroundRule> rules_;
  std::unordered_set<std::string> rule_keys_;
  std::vector<GroundFact> facts_;
  std::unordered_map<std::string, std::size_t> choice_index_;
};

}  // namespace detail

/// Bottom-up grounding over the finite Herbrand base, restricted to the
/// rules and probabilistic facts some goal atom depends on. Goals may be
/// templates with `_` slots; every possible matching atom becomes a goal.
inline GroundProgram ground(const Theory& t, std::span<const Atom> goals, GroundOptions opts = {}) {
  return detail::Grounder(t, opts).run(goals);
}

/// Every violation that prevents grounding, plus observable declaration
/// problems. Empty means the theory is usable.
inline std::vector<Violation> validate_theory(const Theory& t, GroundOptions opts = {}) {
  auto out = validate_structure(t);
  for (const auto& v : out)
    if (v.kind == Violation::Kind::not_range_restricted || v.kind == Violation::Kind::unsupported_builtin) return out;
  try {
    detail::Grounder(t, opts).prepare();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::input) throw;
    std::string msg = e.what();
    const std::string prefix = "non-stratified: ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    out.insert(out.begin(), Violation{Violation::Kind::non_stratified, msg});
  }
  return out;
}

/// Parses and validates program text; every violation becomes one line of
/// the thrown input error.
inline Theory load_theory(std::string_view text, GroundOptions opts = {}) {
  Theory t = parse_theory(text);
  auto violations = validate_theory(t, opts);
  if (!violations.empty()) {
    std::string msg = "invalid program:";
    for (const auto& v : violations) msg += std::string("\n  ") + to_string(v.kind) + ": " + v.message;
    throw input_error(msg);
  }
  return t;
}

}  // namespace plvoi
