#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "common.hpp"

using namespace plvoi;
namespace oracle = plvoi::test::oracle;

namespace {

double conditional_entropy(const Engine& e, std::vector<Atom> given, const Atom& q) {
  Distribution joint = joint_distribution(e, given, q, {});
  Distribution marginal = joint_distribution(e, given, std::nullopt, {});
  return entropy(joint) - entropy(marginal);
}

}  // namespace

TEST(Worlds, WorldProbabilities) {
  std::vector<Atom> goals{parse_atom("heat_on")};
  auto g = ground(test::load_fixture("fig1.pl"), goals);
  EXPECT_NEAR(world_probability(g, 0), 0.02205, 1e-12);

  auto coin = ground(parse_theory("0.5::a.\nb :- a.\n"), std::vector<Atom>{parse_atom("b")});
  EXPECT_DOUBLE_EQ(world_probability(coin, 0), 0.5);
  EXPECT_DOUBLE_EQ(world_probability(coin, 1), 0.5);

  auto det = ground(parse_theory("a.\n"), std::vector<Atom>{parse_atom("a")});
  EXPECT_DOUBLE_EQ(world_probability(det, 0), 1.0);
}

TEST(Worlds, WorldProbabilitiesSumToOne) {
  std::vector<Atom> goals{parse_atom("epidemic")};
  auto g = ground(test::load_fixture("fig2.pl"), goals);
  CompensatedSum sum;
  for (WorldMask w = 0; w < (WorldMask{1} << g.facts.size()); ++w) sum.add(world_probability(g, w));
  EXPECT_NEAR(sum.value(), 1.0, 1e-12);
}

TEST(Worlds, LeastModels) {
  std::vector<Atom> goals{parse_atom("heat_on"), parse_atom("room(_,_)")};
  auto g = ground(test::load_fixture("fig1.pl"), goals);
  LeastModel none = least_model(g, 0);
  EXPECT_TRUE(none.contains(parse_atom("room(1,hi)")));
  EXPECT_TRUE(none.contains(parse_atom("room(2,hi)")));
  EXPECT_TRUE(none.contains(parse_atom("room(3,hi)")));
  EXPECT_FALSE(none.contains(parse_atom("heat_on")));

  LeastModel all = least_model(g, (WorldMask{1} << g.facts.size()) - 1);
  EXPECT_TRUE(all.contains(parse_atom("room(1,lo)")));
  EXPECT_TRUE(all.contains(parse_atom("room(2,lo)")));
  EXPECT_TRUE(all.contains(parse_atom("room(3,lo)")));
  EXPECT_TRUE(all.contains(parse_atom("heat_on")));
  EXPECT_FALSE(all.contains(parse_atom("room(2,hi)")));
}

TEST(Worlds, AggregateCountsInstances) {
  Theory t = parse_theory("0.5::p(1).\n0.5::p(2).\n0.5::p(3).\nmany :- findall(X, p(X), L), length(L, N), N >= 2.\n");
  Engine e(t);
  EXPECT_NEAR(success_probability(e, parse_atom("many"), {}), 0.5, 1e-15);
}

TEST(Worlds, SensorQuery) {
  Engine e(test::load_fixture("fig1.pl"));
  double p = success_probability(e, parse_atom("heat_on"), {});
  EXPECT_NEAR(p, oracle::fig1_heat_on, 1e-12);
  EXPECT_NEAR(binary_entropy(p), oracle::fig1_entropy, 1e-12);
}

TEST(Worlds, TuberculosisQuery) {
  Engine e(test::load_fixture("fig2.pl"));
  double p = success_probability(e, parse_atom("epidemic"), {});
  EXPECT_NEAR(p, oracle::fig2_epidemic, 1e-12);
  EXPECT_NEAR(binary_entropy(p), oracle::fig2_entropy, 1e-12);
  EXPECT_NEAR(success_probability(e, parse_atom("epidemic"), test::scenario_of({{"diagnosis(2)", true}})),
              oracle::fig2_epidemic_given_d2, 1e-12);
  EXPECT_NEAR(success_probability(e, parse_atom("epidemic"), test::scenario_of({{"diagnosis(2)", false}})),
              oracle::fig2_epidemic_given_not_d2, 1e-12);
}

TEST(Worlds, JointDistributionOverTemplates) {
  Engine e(test::load_fixture("fig1.pl"));
  std::vector<Atom> ts{parse_atom("room(1,_)"), parse_atom("room(2,_)")};
  Distribution d = joint_distribution(e, ts, std::nullopt, {});
  EXPECT_EQ(d.probability.size(), 4u);
  EXPECT_NEAR(d.total(), 1.0, 1e-15);
  EXPECT_NEAR(d.at({"room(1,lo)", "room(2,lo)"}), 0.35, 1e-15);
  EXPECT_NEAR(d.at({"room(1,lo)", "room(2,hi)"}), 0.15, 1e-15);
  EXPECT_NEAR(d.at({"room(1,hi)", "room(2,lo)"}), 0.15, 1e-15);
  EXPECT_NEAR(d.at({"room(1,hi)", "room(2,hi)"}), 0.35, 1e-15);
}

TEST(Worlds, ChainRuleConditionalEntropies) {
  Engine e(test::load_fixture("fig1.pl"));
  Atom q = parse_atom("heat_on");
  auto r = [](int i) { return parse_atom("room(" + std::to_string(i) + ",_)"); };
  EXPECT_NEAR(conditional_entropy(e, {r(1), r(2)}, q), oracle::fig1_cond_entropy_12, 1e-12);
  EXPECT_NEAR(conditional_entropy(e, {r(1), r(3)}, q), oracle::fig1_cond_entropy_13, 1e-12);
  EXPECT_NEAR(conditional_entropy(e, {r(2), r(3)}, q), oracle::fig1_cond_entropy_23, 1e-12);
  EXPECT_NEAR(conditional_entropy(e, {r(1), r(2)}, q), 0.31, 0.005);
  EXPECT_NEAR(conditional_entropy(e, {r(1), r(3)}, q), 0.18, 0.005);
}

TEST(Worlds, EntailedEvidenceChangesNothing) {
  Engine e(test::load_fixture("fig2.pl"));
  Atom q = parse_atom("epidemic");
  double base = success_probability(e, q, {});
  EXPECT_DOUBLE_EQ(success_probability(e, q, test::scenario_of({{"person(1)", true}})), base);
  EXPECT_DOUBLE_EQ(success_probability(e, q, test::scenario_of({{"friend(1,2)", true}, {"person(3)", true}})), base);
}

TEST(Worlds, ImpossibleEvidenceIsInconsistent) {
  Engine e(test::load_fixture("fig1.pl"));
  try {
    success_probability(e, parse_atom("heat_on"), test::scenario_of({{"room(1,lo)", true}, {"room(1,hi)", true}}));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::inconsistent);
  }
}

TEST(Worlds, ThreadCountDoesNotChangeResults) {
  EngineOptions one;
  one.threads = 1;
  EngineOptions many;
  many.threads = 4;
  Theory t = test::load_fixture("fig2_per_person.pl");
  Engine a(t, one);
  Engine b(t, many);
  Atom q = parse_atom("epidemic");
  for (auto s : {Scenario{}, test::scenario_of({{"diagnosis(2)", true}}), test::scenario_of({{"diagnosis(3)", false}})}) {
    double pa = success_probability(a, q, s);
    double pb = success_probability(b, q, s);
    EXPECT_EQ(std::memcmp(&pa, &pb, sizeof pa), 0) << pa << " vs " << pb;
  }
  EXPECT_EQ(a.table()->total_mass(), b.table()->total_mass());
}

TEST(Worlds, FactLimitIsAResourceLimit) {
  EngineOptions opts;
  opts.max_facts = 10;
  try {
    Engine e(test::load_fixture("fig2.pl"), opts);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::resource_limit);
  }
}
