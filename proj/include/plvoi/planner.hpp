#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "plvoi/plan.hpp"
#include "plvoi/voi.hpp"

namespace plvoi {

/// Argmax candidates closer than this are tied.
inline constexpr double kTieEpsilon = 1e-12;
/// Realizations at or below this posterior get no child.
inline constexpr double kBranchEpsilon = 1e-12;

/// True when some evidence atom in `s` realizes `pattern`.
inline bool is_observed(const Atom& pattern, const Scenario& s) {
  for (const auto& e : s.evidence)
    if (match(pattern, e.atom)) return true;
  return false;
}

/// Declared observables not yet observed in `s` that pass observability
/// validation there, in declaration order.
inline std::vector<std::size_t> candidate_observables(const Engine& engine, const Scenario& s) {
  std::vector<std::size_t> out;
  const auto& obs = engine.theory().observables;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (is_observed(obs[i].pattern, s)) continue;
    if (!validate_observable(engine, obs[i].pattern, s).observable()) continue;
    out.push_back(i);
  }
  return out;
}

struct Choice {
  std::size_t observable = 0;
  double voi = 0.0;
};

namespace detail {

inline std::optional<Choice> argmax_voi(const Engine& engine, const std::vector<std::size_t>& candidates,
                                        const Atom& q, const Scenario& s, Budget b, const UtilitySpec& u) {
  std::optional<Choice> best;
  const auto& obs = engine.theory().observables;
  for (auto i : candidates) {
    if (!b.affords(obs[i].cost)) continue;
    Atom t = obs[i].pattern;
    double v = voi_set(engine, std::span<const Atom>(&t, 1), q, s, u);
    if (!best || v > best->voi + kTieEpsilon) best = Choice{i, v};
  }
  return best;
}

inline LeafReason classify(const Engine& engine, const std::vector<std::size_t>& candidates, Budget b) {
  if (candidates.empty()) return LeafReason::no_observables;
  for (auto i : candidates)
    if (b.affords(engine.theory().observables[i].cost)) return LeafReason::no_gain;
  return LeafReason::insufficient_budget;
}

}  // namespace detail

/// The affordable candidate with maximal single-step VoI; earliest declared
/// wins ties.
inline std::optional<Choice> best_single(const Engine& engine, const Scenario& s, const Atom& q, Budget b,
                                         const UtilitySpec& u) {
  return detail::argmax_voi(engine, candidate_observables(engine, s), q, s, b, u);
}

inline LeafReason classify_leaf(const Engine& engine, const PlanNode& node, const Atom& /*q*/,
                                const UtilitySpec& /*u*/) {
  return detail::classify(engine, candidate_observables(engine, node.scenario), node.budget);
}

enum class Priority { reach, fifo };

inline std::optional<Priority> priority_from_string(const std::string& s) {
  if (s == "reach") return Priority::reach;
  if (s == "fifo") return Priority::fifo;
  return std::nullopt;
}

struct AnytimeOptions {
  /// Returns true when `a` should be expanded before `b`; insertion order
  /// breaks remaining ties.
  std::function<bool(const PlanNode& a, const PlanNode& b)> before;
  std::optional<std::size_t> max_expansions;
  std::optional<std::chrono::milliseconds> time_limit;

  static AnytimeOptions by(Priority p) {
    AnytimeOptions o;
    if (p == Priority::reach) o.before = [](const PlanNode& a, const PlanNode& b) { return a.reach > b.reach; };
    return o;
  }
};

namespace detail {

inline std::unique_ptr<PlanNode> make_node(const Engine& engine, Scenario s, Budget b, double reach, const Atom& q,
                                           const UtilitySpec& u) {
  auto n = std::make_unique<PlanNode>();
  n->scenario = std::move(s);
  n->budget = b;
  n->reach = reach;
  n->utility = utility(engine, q, n->scenario, u);
  return n;
}

/// Gives `node` one child per positive realization of `choice`. Returns the
/// resulting change of tree VoI.
inline double expand(const Engine& engine, PlanNode& node, std::size_t choice, const Atom& q, const UtilitySpec& u) {
  const auto& o = engine.theory().observables[choice];
  node.choice = choice;
  node.leaf_reason.reset();
  CompensatedSum delta;
  for (auto& wr : realizations(engine, o.pattern, node.scenario)) {
    if (wr.probability <= kBranchEpsilon) continue;
    Scenario s = observe(engine, node.scenario, wr.realization);
    auto child = make_node(engine, std::move(s), node.budget.minus(o.cost), node.reach * wr.probability, q, u);
    delta.add(child->reach * child->utility);
    node.next.push_back(Branch{std::move(wr.realization), wr.probability, std::move(child)});
  }
  delta.add(-node.reach * node.utility);
  return delta.value();
}

}  // namespace detail

/// Best-first plan construction: pops nodes in priority order, expands each
/// with its best single observation while that has positive VoI, and stops
/// early when a limit fires (remaining frontier nodes keep no leaf reason).
inline DecisionTree anytime_plan(const Engine& engine, const Scenario& s0, const Atom& q, Budget B,
                                 const UtilitySpec& u, const AnytimeOptions& opts) {
  if (!q.is_ground()) throw input_error("query must be ground: " + to_string(q));
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  DecisionTree tree;
  tree.query = q;
  tree.utility = u;
  tree.budget = B;
  tree.root = detail::make_node(engine, s0, B, 1.0, q, u);

  struct Item {
    PlanNode* node;
    std::uint64_t seq;
  };
  auto later = [&](const Item& a, const Item& b) {
    if (opts.before) {
      if (opts.before(*a.node, *b.node)) return false;
      if (opts.before(*b.node, *a.node)) return true;
    }
    return a.seq > b.seq;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(later)> work(later);
  std::uint64_t seq = 0;
  work.push({tree.root.get(), seq++});

  double voi = 0.0;
  while (!work.empty()) {
    if (opts.max_expansions && tree.log.size() >= *opts.max_expansions) break;
    if (opts.time_limit && Clock::now() - start >= *opts.time_limit) break;
    PlanNode& n = *work.top().node;
    work.pop();
    auto candidates = candidate_observables(engine, n.scenario);
    auto best = detail::argmax_voi(engine, candidates, q, n.scenario, n.budget, u);
    if (!best || best->voi <= kVoiEpsilon) {
      n.leaf_reason = best ? LeafReason::no_gain : detail::classify(engine, candidates, n.budget);
      continue;
    }
    voi += detail::expand(engine, n, best->observable, q, u);
    tree.log.push_back(Expansion{best->observable, best->voi, n.reach, voi});
    for (auto& b : n.next) work.push({b.child.get(), seq++});
  }
  return tree;
}

/// Greedy decision tree with a FIFO worklist, run to completion.
inline DecisionTree greedy_plan(const Engine& engine, const Scenario& s0, const Atom& q, Budget B,
                                const UtilitySpec& u) {
  return anytime_plan(engine, s0, q, B, u, AnytimeOptions::by(Priority::fifo));
}

/// Exhaustive lookahead over all feasible observation sequences. Limited to
/// small instances: at most 5 observables with at most 3 realizations each.
inline DecisionTree optimal_plan(const Engine& engine, const Scenario& s0, const Atom& q, Budget B,
                                 const UtilitySpec& u, std::optional<std::size_t> depth_limit = std::nullopt) {
  if (!q.is_ground()) throw input_error("query must be ground: " + to_string(q));
  const auto& obs = engine.theory().observables;
  if (obs.size() > 5) throw Error(ErrorCode::resource_limit, "optimal planning supports at most 5 observables");
  for (const auto& o : obs)
    if (realizations(engine, o.pattern, s0).size() > 3)
      throw Error(ErrorCode::resource_limit, "optimal planning supports at most 3 realizations per observable");

  struct Best {
    double value = 0.0;  // expected utility of the best subplan
    std::optional<std::size_t> choice;
  };
  std::map<std::string, Best> memo;
  std::function<Best(const Scenario&, Budget, std::size_t)> solve = [&](const Scenario& s, Budget b,
                                                                        std::size_t depth) -> Best {
    std::string key = s.canonical() + "|" + format_number(b.value) + "|" + std::to_string(depth);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    Best best{utility(engine, q, s, u), std::nullopt};
    const double here = best.value;
    if (!depth_limit || depth < *depth_limit) {
      for (auto i : candidate_observables(engine, s)) {
        if (!b.affords(obs[i].cost)) continue;
        CompensatedSum ev;
        for (const auto& wr : realizations(engine, obs[i].pattern, s)) {
          if (wr.probability <= kBranchEpsilon) continue;
          ev.add(wr.probability * solve(observe(engine, s, wr.realization), b.minus(obs[i].cost), depth + 1).value);
        }
        double v = ev.value();
        if (v - here > kVoiEpsilon && v > best.value + kTieEpsilon) best = Best{v, i};
      }
    }
    memo.emplace(std::move(key), best);
    return best;
  };

  DecisionTree tree;
  tree.query = q;
  tree.utility = u;
  tree.budget = B;
  tree.root = detail::make_node(engine, s0, B, 1.0, q, u);
  double voi = 0.0;
  std::function<void(PlanNode&, std::size_t)> build = [&](PlanNode& n, std::size_t depth) {
    Best best = solve(n.scenario, n.budget, depth);
    if (!best.choice) {
      n.leaf_reason = detail::classify(engine, candidate_observables(engine, n.scenario), n.budget);
      return;
    }
    Atom t = obs[*best.choice].pattern;
    double single = voi_set(engine, std::span<const Atom>(&t, 1), q, n.scenario, u);
    voi += detail::expand(engine, n, *best.choice, q, u);
    tree.log.push_back(Expansion{*best.choice, single, n.reach, voi});
    for (auto& b : n.next) build(*b.child, depth + 1);
  };
  build(*tree.root, 0);
  return tree;
}

}  // namespace plvoi
