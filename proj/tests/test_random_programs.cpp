#include <gtest/gtest.h>

#include "common.hpp"
#include "random_program.hpp"

using namespace plvoi;

TEST(RandomPrograms, GreedyMatchesOptimalAtMinimumCost) {
  std::mt19937 rng(20240601);
  const UtilitySpec u = UtilitySpec::entropy();
  const Atom q = parse_atom("q");
  int informative = 0;
  for (int trial = 0; trial < 50; ++trial) {
    test::RandomProgram rp = test::random_program(rng);
    SCOPED_TRACE(rp.text);
    Theory t = load_theory(rp.text);
    Engine e(t);

    std::vector<Atom> goals = rp.observables;
    goals.push_back(q);
    auto g = ground(t, goals);
    CompensatedSum mass;
    for (WorldMask w = 0; w < (WorldMask{1} << g.facts.size()); ++w) mass.add(world_probability(g, w));
    EXPECT_NEAR(mass.value(), 1.0, 1e-9);
    EXPECT_NEAR(e.table()->total_mass(), 1.0, 1e-9);

    double min_cost = t.observables[0].cost;
    for (const auto& o : t.observables) min_cost = std::min(min_cost, o.cost);
    Budget b = Budget::of(min_cost);

    DecisionTree greedy = greedy_plan(e, {}, q, b, u);
    DecisionTree optimal = optimal_plan(e, {}, q, b, u);
    EXPECT_NEAR(tree_voi(greedy), tree_voi(optimal), 1e-9);
    EXPECT_EQ(greedy.root->choice.has_value(), optimal.root->choice.has_value());
    if (greedy.root->choice && optimal.root->choice) {
      ++informative;
      if (*greedy.root->choice != *optimal.root->choice) {
        // Only an exact tie may separate the two choices.
        Atom a = t.observables[*greedy.root->choice].pattern;
        Atom c = t.observables[*optimal.root->choice].pattern;
        EXPECT_NEAR(voi_set(e, {a}, q, {}, u), voi_set(e, {c}, q, {}, u), 1e-9);
      }
    }
    test::expect_well_formed(e, greedy);
    test::expect_well_formed(e, optimal);
  }
  // The generator must exercise non-trivial plans.
  EXPECT_GE(informative, 20);
}
