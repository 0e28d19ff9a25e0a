#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "plvoi/program.hpp"
#include "plvoi/utility.hpp"
#include "plvoi/worlds.hpp"

namespace plvoi {

/// One measured outcome of an observable: a truth value for a ground
/// template, or the ground instance that holds for a non-ground one.
struct Realization {
  Atom atom;
  bool value = true;
  std::string label;

  EvidenceFact evidence() const { return EvidenceFact{atom, value}; }
  friend bool operator==(const Realization&, const Realization&) = default;
};

enum class LeafReason { no_observables, insufficient_budget, no_gain };

inline const char* to_string(LeafReason r) {
  switch (r) {
    case LeafReason::no_observables: return "no-observables";
    case LeafReason::insufficient_budget: return "insufficient-budget";
    case LeafReason::no_gain: return "no-gain";
  }
  return "?";
}

inline std::optional<LeafReason> leaf_reason_from_string(const std::string& s) {
  if (s == "no-observables") return LeafReason::no_observables;
  if (s == "insufficient-budget") return LeafReason::insufficient_budget;
  if (s == "no-gain") return LeafReason::no_gain;
  return std::nullopt;
}

/// Upper bound on summed observation cost; infinite when unbounded.
struct Budget {
  double value = std::numeric_limits<double>::infinity();

  static Budget unbounded() { return {}; }
  static Budget of(double v) {
    if (!(v >= 0)) throw input_error("budget must be nonnegative");
    return Budget{v};
  }
  bool is_unbounded() const noexcept { return std::isinf(value); }
  bool affords(double cost) const noexcept { return cost <= value; }
  Budget minus(double cost) const noexcept { return is_unbounded() ? *this : Budget{value - cost}; }
};

struct PlanNode;

struct Branch {
  Realization realization;
  double probability = 0.0;  // of the realization, given the parent's scenario
  std::unique_ptr<PlanNode> child;
};

struct PlanNode {
  Scenario scenario;
  Budget budget;
  std::optional<std::size_t> choice;  // index into Theory::observables
  std::vector<Branch> next;
  double utility = 0.0;
  double reach = 1.0;
  std::optional<LeafReason> leaf_reason;  // unset on unexpanded frontier nodes

  bool is_leaf() const noexcept { return next.empty(); }
};

struct Expansion {
  std::size_t observable = 0;
  double voi = 0.0;       // single-step VoI of the choice at the node
  double reach = 0.0;
  double tree_voi = 0.0;  // VoI of the whole tree after this expansion
};

struct DecisionTree {
  Atom query;
  UtilitySpec utility;
  Budget budget;
  std::unique_ptr<PlanNode> root;
  std::vector<Expansion> log;
};

template <typename F>
void for_each_node(const PlanNode& n, F&& f, std::size_t depth = 0) {
  f(n, depth);
  for (const auto& b : n.next) for_each_node(*b.child, f, depth + 1);
}

/// Leaf-expectation VoI: Σ leaves reach·utility − root utility.
inline double tree_voi(const DecisionTree& t) {
  if (!t.root) return 0.0;
  CompensatedSum leaves;
  for_each_node(*t.root, [&](const PlanNode& n, std::size_t) {
    if (n.is_leaf()) leaves.add(n.reach * n.utility);
  });
  leaves.add(-t.root->utility);
  return leaves.value();
}

}  // namespace plvoi
