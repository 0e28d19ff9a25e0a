#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "plvoi/plan.hpp"
#include "plvoi/utility.hpp"
#include "plvoi/worlds.hpp"

namespace plvoi {

/// VoI values within this distance of zero count as zero.
inline constexpr double kVoiEpsilon = 1e-9;

struct ObservableStatus {
  enum class Failure {
    none,
    holds_everywhere,  // some realization is in every model
    holds_nowhere,     // no realization is in any model
    not_exclusive,     // a model holds two realizations
    not_exhaustive,    // a model holds no realization
  };
  Failure failure = Failure::none;
  std::string reason;

  bool observable() const noexcept { return failure == Failure::none; }
};

inline ObservableStatus validate_observable(const Engine& engine, const Atom& pattern, const Scenario& s) {
  std::vector<Atom> need = evidence_atoms(engine.theory(), s);
  need.push_back(pattern);
  auto table = engine.table(need);
  Selection sel = select(*table, engine.theory(), s);
  TemplateReader reader(*table, pattern);
  const std::string name = to_string(pattern);

  std::vector<std::size_t> seen(reader.arity(), 0);
  bool multiple = false, missing = false;
  for (const auto* e : sel.entries) {
    int r = reader.read(*e);
    if (r == TemplateReader::multiple) multiple = true;
    else if (r == TemplateReader::none) missing = true;
    else ++seen[static_cast<std::size_t>(r)];
  }
  const std::size_t n = sel.entries.size();
  using F = ObservableStatus::Failure;
  if (reader.is_ground()) {
    if (seen[0] == n) return {F::holds_everywhere, name + " holds in every model"};
    if (seen[0] == 0) return {F::holds_nowhere, name + " holds in no model"};
    return {};
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] == n) return {F::holds_everywhere, reader.label(static_cast<int>(i)) + " holds in every model"};
  bool any = false;
  for (auto c : seen) any = any || c > 0;
  if (!any && !multiple) return {F::holds_nowhere, "no instance of " + name + " holds in any model"};
  if (multiple) return {F::not_exclusive, "some model holds two instances of " + name};
  if (missing) return {F::not_exhaustive, "some model holds no instance of " + name};
  return {};
}

struct WeightedRealization {
  Realization realization;
  double probability = 0.0;
};

/// Realizations with positive posterior probability, in canonical order
/// (true before false; instances by canonical text).
inline std::vector<WeightedRealization> realizations(const Engine& engine, const Atom& pattern, const Scenario& s) {
  std::vector<Atom> need = evidence_atoms(engine.theory(), s);
  need.push_back(pattern);
  auto table = engine.table(need);
  Selection sel = select(*table, engine.theory(), s);
  TemplateReader reader(*table, pattern);
  std::vector<CompensatedSum> mass(reader.arity());
  for (const auto* e : sel.entries) {
    int r = reader.read(*e);
    if (r < 0) throw input_error(to_string(pattern) + " has no well-defined realization in scenario {" + s.canonical() + "}");
    mass[static_cast<std::size_t>(r)].add(e->mass);
  }
  std::vector<WeightedRealization> out;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    double p = mass[i].value() / sel.mass;
    if (p <= 0) continue;
    auto ev = reader.evidence(static_cast<int>(i));
    out.push_back({Realization{ev.atom, ev.value, reader.label(static_cast<int>(i))}, p});
  }
  return out;
}

/// Adds a realization as evidence. Observing an already present realization
/// leaves the scenario unchanged.
inline Scenario observe(const Engine& engine, const Scenario& s, const Realization& r) {
  Scenario probe = s;
  probe.evidence.push_back(r.evidence());
  std::vector<Atom> need = evidence_atoms(engine.theory(), probe);
  auto table = engine.table(need);
  Selection base = select(*table, engine.theory(), s);
  double joint = 0.0;
  for (const auto* e : base.entries)
    if (table->holds(*e, r.atom) == r.value) joint += e->mass;
  if (!(joint > 0)) throw Error(ErrorCode::inconsistent, "realization " + r.label + " has probability zero");
  if (s.has(r.evidence())) return s;
  return probe;
}

inline double utility(const Engine& engine, const Atom& query, const Scenario& s, const UtilitySpec& u) {
  return u(success_probability(engine, query, s));
}

/// Σ_o Pr(o|s)·U(q, s∪o) − U(q, s) over joint realizations of `templates`.
inline double voi_set(const Engine& engine, std::span<const Atom> templates, const Atom& query, const Scenario& s,
                      const UtilitySpec& u) {
  std::vector<Atom> need = evidence_atoms(engine.theory(), s);
  need.insert(need.end(), templates.begin(), templates.end());
  need.push_back(query);
  auto table = engine.table(need);
  Selection sel = select(*table, engine.theory(), s);
  std::vector<TemplateReader> readers;
  for (const auto& t : templates) readers.emplace_back(*table, t);

  struct Cell {
    CompensatedSum mass, query_mass;
  };
  std::map<std::vector<int>, Cell> cells;
  CompensatedSum q_total;
  for (const auto* e : sel.entries) {
    std::vector<int> key;
    for (const auto& r : readers) {
      int v = r.read(*e);
      if (v < 0) throw input_error(to_string(r.pattern()) + " has no well-defined realization in scenario {" + s.canonical() + "}");
      key.push_back(v);
    }
    bool q = table->holds(*e, query);
    auto& c = cells[key];
    c.mass.add(e->mass);
    if (q) {
      c.query_mass.add(e->mass);
      q_total.add(e->mass);
    }
  }
  CompensatedSum expected;
  for (const auto& [_, c] : cells) {
    double m = c.mass.value();
    if (m <= 0) continue;
    expected.add(m / sel.mass * u(c.query_mass.value() / m));
  }
  expected.add(-u(q_total.value() / sel.mass));
  return expected.value();
}

inline double voi_set(const Engine& engine, std::initializer_list<Atom> templates, const Atom& query,
                      const Scenario& s, const UtilitySpec& u) {
  return voi_set(engine, std::span<const Atom>(templates.begin(), templates.size()), query, s, u);
}

/// A total assignment of realizations to every declared observable.
struct Reality {
  std::vector<Realization> realizations;  // parallel to Theory::observables
  double probability = 0.0;
};

inline std::vector<Reality> enumerate_realities(const Engine& engine, const Scenario& s) {
  const auto& obs = engine.theory().observables;
  std::vector<Atom> need = evidence_atoms(engine.theory(), s);
  for (const auto& o : obs) need.push_back(o.pattern);
  auto table = engine.table(need);
  Selection sel = select(*table, engine.theory(), s);
  std::vector<TemplateReader> readers;
  for (const auto& o : obs) readers.emplace_back(*table, o.pattern);

  std::map<std::vector<int>, CompensatedSum> cells;
  for (const auto* e : sel.entries) {
    std::vector<int> key;
    for (const auto& r : readers) {
      int v = r.read(*e);
      if (v < 0) throw input_error(to_string(r.pattern()) + " has no well-defined realization in scenario {" + s.canonical() + "}");
      key.push_back(v);
    }
    cells[key].add(e->mass);
  }
  std::vector<Reality> out;
  for (const auto& [key, m] : cells) {
    double p = m.value() / sel.mass;
    if (p <= 0) continue;
    Reality r;
    r.probability = p;
    for (std::size_t i = 0; i < key.size(); ++i) {
      auto ev = readers[i].evidence(key[i]);
      r.realizations.push_back(Realization{ev.atom, ev.value, readers[i].label(key[i])});
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// VoI of a plan by walking it once per reality: Σ_R Pr(R)·U(q, S_π(R)) − U(q, S_root).
inline double plan_voi_by_reality(const Engine& engine, const DecisionTree& plan, const Atom& query,
                                  const UtilitySpec& u) {
  if (!plan.root) throw Error(ErrorCode::malformed_plan, "plan has no root");
  const Scenario& root = plan.root->scenario;
  CompensatedSum expected;
  for (const auto& reality : enumerate_realities(engine, root)) {
    const PlanNode* node = plan.root.get();
    Scenario path = root;
    while (!node->is_leaf()) {
      if (!node->choice || *node->choice >= reality.realizations.size())
        throw Error(ErrorCode::malformed_plan, "internal plan node without a valid choice");
      const Realization& r = reality.realizations[*node->choice];
      const PlanNode* child = nullptr;
      for (const auto& b : node->next)
        if (b.realization.label == r.label) child = b.child.get();
      if (!child)
        throw Error(ErrorCode::malformed_plan, "no branch for realization " + r.label + " at a node choosing " +
                                                   to_string(engine.theory().observables[*node->choice].pattern));
      path.evidence.push_back(r.evidence());
      node = child;
    }
    expected.add(reality.probability * utility(engine, query, path, u));
  }
  expected.add(-utility(engine, query, root, u));
  return expected.value();
}

}  // namespace plvoi
