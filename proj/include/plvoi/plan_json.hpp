#pragma once

#include <string>

#include "json.hpp"
#include "plvoi/parser.hpp"
#include "plvoi/plan.hpp"

namespace plvoi {

using ordered_json = nlohmann::ordered_json;

inline ordered_json budget_to_json(Budget b) {
  if (b.is_unbounded()) return "inf";
  return b.value;
}

template <typename Json>
Budget budget_from_json(const Json& j) {
  if (j.is_string() && j.template get<std::string>() == "inf") return Budget::unbounded();
  if (j.is_number()) return Budget::of(j.template get<double>());
  throw input_error("budget must be a nonnegative number or \"inf\"");
}

inline ordered_json evidence_to_json(const Scenario& s) {
  ordered_json ev = ordered_json::array();
  for (const auto& e : s.evidence) ev.push_back(ordered_json::array({to_string(e.atom), e.value}));
  return ev;
}

inline ordered_json node_to_json(const PlanNode& n, const Theory& t) {
  ordered_json j;
  j["evidence"] = evidence_to_json(n.scenario);
  j["budget"] = budget_to_json(n.budget);
  j["utility"] = n.utility;
  j["reach"] = n.reach;
  j["choice"] = n.choice ? ordered_json(to_string(t.observables.at(*n.choice).pattern)) : ordered_json(nullptr);
  j["leaf_reason"] = n.leaf_reason ? ordered_json(to_string(*n.leaf_reason)) : ordered_json(nullptr);
  j["children"] = ordered_json::object();
  for (const auto& b : n.next) j["children"][b.realization.label] = node_to_json(*b.child, t);
  return j;
}

inline ordered_json plan_to_json(const DecisionTree& tree, const Theory& t) {
  ordered_json j;
  j["query"] = to_string(tree.query);
  j["utility"] = tree.utility.to_json();
  j["budget"] = budget_to_json(tree.budget);
  j["root"] = tree.root ? node_to_json(*tree.root, t) : ordered_json(nullptr);
  return j;
}

namespace detail {

[[noreturn]] inline void malformed(const std::string& what) { throw Error(ErrorCode::malformed_plan, "malformed plan: " + what); }

/// Realization named by a child key under a node that chose `pattern`.
inline Realization realization_from_label(const Atom& pattern, const std::string& label) {
  if (pattern.is_ground()) {
    const std::string base = to_string(pattern);
    if (label == base + "=true") return Realization{pattern, true, label};
    if (label == base + "=false") return Realization{pattern, false, label};
    malformed("child key " + label + " is not a realization of " + base);
  }
  Atom a;
  try {
    a = parse_atom(label);
  } catch (const Error&) {
    malformed("child key " + label + " is not an atom");
  }
  if (!a.is_ground() || !match(pattern, a)) malformed("child key " + label + " is not an instance of " + to_string(pattern));
  return Realization{a, true, to_string(a)};
}

template <typename Json>
std::unique_ptr<PlanNode> node_from_json(const Json& j, const Theory& t) {
  if (!j.is_object()) malformed("node is not an object");
  auto n = std::make_unique<PlanNode>();
  try {
    for (const auto& e : j.at("evidence")) {
      if (!e.is_array() || e.size() != 2 || !e[1].is_boolean()) malformed("evidence entries must be [atom, bool]");
      n->scenario.evidence.push_back(EvidenceFact{parse_atom(e[0].template get<std::string>()), e[1].template get<bool>()});
    }
    n->budget = budget_from_json(j.at("budget"));
    n->utility = j.at("utility").template get<double>();
    n->reach = j.at("reach").template get<double>();
    const auto& choice = j.at("choice");
    if (!choice.is_null()) {
      Atom pattern = parse_atom(choice.template get<std::string>());
      for (std::size_t i = 0; i < t.observables.size(); ++i)
        if (t.observables[i].pattern == pattern) n->choice = i;
      if (!n->choice) malformed("choice " + to_string(pattern) + " is not a declared observable");
    }
    const auto& reason = j.at("leaf_reason");
    if (!reason.is_null()) {
      n->leaf_reason = leaf_reason_from_string(reason.template get<std::string>());
      if (!n->leaf_reason) malformed("unknown leaf reason " + reason.dump());
    }
    const auto& children = j.at("children");
    if (!children.is_object()) malformed("children must be an object");
    if (n->choice.has_value() == children.empty()) malformed("a node has a choice exactly when it has children");
    for (const auto& [label, child] : children.items()) {
      Realization r = realization_from_label(t.observables[*n->choice].pattern, label);
      auto c = node_from_json(child, t);
      double p = n->reach > 0 ? c->reach / n->reach : 0.0;
      n->next.push_back(Branch{std::move(r), p, std::move(c)});
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::malformed_plan) throw;
    malformed(e.what());
  }
  return n;
}

}  // namespace detail

/// Rebuilds a plan; choices are resolved against the theory's observables.
template <typename Json>
DecisionTree plan_from_json(const Json& j, const Theory& t) {
  DecisionTree tree;
  try {
    if (!j.is_object()) detail::malformed("plan is not an object");
    tree.query = parse_atom(j.at("query").template get<std::string>());
    tree.utility = UtilitySpec::from_json(nlohmann::json::parse(j.at("utility").dump()));
    tree.budget = budget_from_json(j.at("budget"));
    tree.root = detail::node_from_json(j.at("root"), t);
  } catch (const nlohmann::json::exception& e) {
    detail::malformed(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::malformed_plan) throw;
    detail::malformed(e.what());
  }
  return tree;
}

}  // namespace plvoi
