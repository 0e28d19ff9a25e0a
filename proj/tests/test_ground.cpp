#include <gtest/gtest.h>

#include "common.hpp"

using namespace plvoi;

namespace {

std::vector<Atom> tb_goals() {
  std::vector<Atom> goals{parse_atom("epidemic")};
  for (int i = 1; i <= 4; ++i) {
    goals.push_back(parse_atom("diagnosis(" + std::to_string(i) + ")"));
    goals.push_back(parse_atom("tb(" + std::to_string(i) + ",_)"));
  }
  return goals;
}

}  // namespace

TEST(Ground, PerPersonXrayHasEighteenFacts) {
  auto g = ground(test::load_fixture("fig2_per_person.pl"), tb_goals());
  // 4 priors, 6 transmissions along friendships, 8 x-ray readings.
  EXPECT_EQ(g.facts.size(), 18u);
}

TEST(Ground, SharedXrayHasTwelveFacts) {
  auto g = ground(test::load_fixture("fig2.pl"), tb_goals());
  EXPECT_EQ(g.facts.size(), 12u);
}

TEST(Ground, TransmissionWithoutFriendshipIsIrrelevant) {
  auto g = ground(test::load_fixture("fig2.pl"), tb_goals());
  for (const auto& f : g.facts) {
    EXPECT_NE(f.label.find("::"), std::string::npos);
    EXPECT_EQ(f.label.find("tr(1,3)"), std::string::npos) << f.label;
    EXPECT_EQ(f.label.find("tr(1,1)"), std::string::npos) << f.label;
  }
}

TEST(Ground, SensorChainHasFiveFacts) {
  std::vector<Atom> goals{parse_atom("heat_on")};
  auto g = ground(test::load_fixture("fig1.pl"), goals);
  EXPECT_EQ(g.facts.size(), 5u);
  EXPECT_TRUE(g.possible(parse_atom("room(2,hi)")));
  EXPECT_FALSE(g.possible(parse_atom("room(4,lo)")));
}

TEST(Ground, RelevanceDropsUnrelatedFacts) {
  Theory t = parse_theory("0.5::a.\n0.5::b.\nc :- a.\n");
  std::vector<Atom> goals{parse_atom("c")};
  auto g = ground(t, goals);
  ASSERT_EQ(g.facts.size(), 1u);
  EXPECT_DOUBLE_EQ(g.facts[0].probability, 0.5);
}

TEST(Ground, DeterministicProgramHasOneWorld) {
  Engine e(parse_theory("a.\nb :- a.\nc :- not b.\n"));
  auto table = e.table({parse_atom("b"), parse_atom("c")});
  EXPECT_EQ(table->program().facts.size(), 0u);
  EXPECT_EQ(table->world_count(), 1u);
  EXPECT_DOUBLE_EQ(table->total_mass(), 1.0);
  EXPECT_DOUBLE_EQ(success_probability(e, parse_atom("b"), {}), 1.0);
  EXPECT_DOUBLE_EQ(success_probability(e, parse_atom("c"), {}), 0.0);
}

TEST(Ground, RuleCapIsAResourceLimit) {
  GroundOptions opts;
  opts.max_rules = 10;
  try {
    ground(test::load_fixture("fig2.pl"), tb_goals(), opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::resource_limit);
  }
}

TEST(Ground, StrataFollowNegation) {
  std::vector<Atom> goals{parse_atom("heat_on")};
  auto g = ground(test::load_fixture("fig1.pl"), goals);
  auto lo = g.find(parse_atom("room(1,lo)"));
  auto hi = g.find(parse_atom("room(1,hi)"));
  ASSERT_TRUE(lo && hi);
  EXPECT_LT(g.atom_stratum[*lo], g.atom_stratum[*hi]);
  for (std::size_t i = 1; i < g.rules.size(); ++i) EXPECT_LE(g.rules[i - 1].stratum, g.rules[i].stratum);
}

TEST(Ground, NonStratifiedMessageNamesAtoms) {
  try {
    load_theory(test::read_fixture("cyclic_negation.pl"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::input);
    std::string msg = e.what();
    EXPECT_NE(msg.find("non-stratified"), std::string::npos);
    EXPECT_NE(msg.find("q("), std::string::npos);
  }
}
