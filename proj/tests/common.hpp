#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "plvoi/ground.hpp"
#include "plvoi/planner.hpp"
#include "plvoi/voi.hpp"
#include "plvoi/worlds.hpp"

namespace plvoi::test {

inline std::string fixture_path(const std::string& name) { return std::string(PLVOI_FIXTURES) + "/" + name; }

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name));
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Theory load_fixture(const std::string& name) { return load_theory(read_fixture(name)); }

inline Scenario scenario_of(std::initializer_list<std::pair<const char*, bool>> ev) {
  Scenario s;
  for (const auto& [a, v] : ev) s.evidence.push_back(EvidenceFact{parse_atom(a), v});
  return s;
}

/// Structural invariants of a generated plan, plus agreement of the
/// reality-walk VoI with the leaf-expectation VoI.
inline void expect_well_formed(const Engine& engine, const DecisionTree& tree, bool complete = true) {
  ASSERT_TRUE(tree.root);
  EXPECT_DOUBLE_EQ(tree.root->reach, 1.0);
  const auto& obs = engine.theory().observables;
  for_each_node(*tree.root, [&](const PlanNode& n, std::size_t) {
    EXPECT_EQ(n.choice.has_value(), !n.next.empty());
    EXPECT_GE(n.budget.value, 0.0);
    if (n.is_leaf()) {
      if (complete) {
        EXPECT_TRUE(n.leaf_reason.has_value());
      }
      return;
    }
    EXPECT_FALSE(n.leaf_reason.has_value());
    double total = 0.0;
    for (const auto& b : n.next) {
      total += b.probability;
      EXPECT_GT(b.probability, 0.0);
      EXPECT_NEAR(b.child->reach, n.reach * b.probability, 1e-12);
      if (!n.budget.is_unbounded()) {
        EXPECT_NEAR(b.child->budget.value, n.budget.value - obs[*n.choice].cost, 1e-12);
      }
      Scenario expect = observe(engine, n.scenario, b.realization);
      EXPECT_EQ(b.child->scenario, expect);
    }
    EXPECT_NEAR(total, 1.0, 1e-9);
  });
  EXPECT_NEAR(plan_voi_by_reality(engine, tree, tree.query, tree.utility), tree_voi(tree), 1e-9);
}

// Reference values from tests/oracle/brute_force.py, which enumerates the
// fixture models directly without the parser or grounder.
namespace oracle {
inline constexpr double fig1_heat_on = 0.7550000000000001;
inline constexpr double fig1_entropy = 0.803256699776064;
inline constexpr double fig1_cond_entropy_12 = 0.3084518147307424;
inline constexpr double fig1_cond_entropy_13 = 0.18056395171386586;
inline constexpr double fig1_cond_entropy_23 = 0.3084518147307424;
inline constexpr double fig1_voi_13 = 0.6226927480621981;
inline constexpr double fig1_voi_single = 0.303400978899659;
inline constexpr double fig1_voi_all = 0.803256699776064;

inline constexpr double fig2_epidemic = 0.09390160000000024;
inline constexpr double fig2_entropy = 0.4493604832911811;
inline constexpr double fig2_voi_d1 = 0.032580464448195345;
inline constexpr double fig2_voi_d2 = 0.07277679272355697;
inline constexpr double fig2_post_entropy_d2 = 0.37658369056762414;
inline constexpr double fig2_epidemic_given_d2 = 0.2023356899895996;
inline constexpr double fig2_epidemic_given_not_d2 = 0.01861107737484621;
inline constexpr double fig2_greedy_b2 = 0.08397334490590397;
inline constexpr double fig2_greedy_unbounded = 0.17690278250095964;

inline constexpr double fig2pp_greedy_b2 = 0.1360152003902495;
inline constexpr double fig2pp_greedy_unbounded = 0.18519945547764793;
}  // namespace oracle

}  // namespace plvoi::test
