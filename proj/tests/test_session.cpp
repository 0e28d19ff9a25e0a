#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "common.hpp"
#include "plvoi/session.hpp"

using namespace plvoi;
namespace oracle = plvoi::test::oracle;
using json = nlohmann::json;

namespace {

json fig2_body(json budget = 2) {
  return {{"program", test::read_fixture("fig2.pl")}, {"query", "epidemic"}, {"budget", budget}, {"utility", "entropy"}};
}

int status_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

std::string code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServiceError& e) {
    return e.code();
  }
  return "";
}

json obs(const std::string& o, const std::string& r, const std::string& key = "") {
  json j{{"observable", o}, {"realization", r}};
  if (!key.empty()) j["idempotency_key"] = key;
  return j;
}

}  // namespace

TEST(Session, FreshStateRecommendsDiagnosisTwo) {
  SessionManager m;
  auto created = m.create(fig2_body());
  const auto& st = created["state"];
  EXPECT_EQ(st["recommendation"]["observable"], "diagnosis(2)");
  EXPECT_NEAR(st["recommendation"]["voi"].get<double>(), 0.08, 0.01);
  EXPECT_NEAR(st["probability"].get<double>(), oracle::fig2_epidemic, 1e-12);
  EXPECT_NEAR(st["entropy"].get<double>(), oracle::fig2_entropy, 1e-12);
  EXPECT_EQ(st["budget"], 2.0);
  EXPECT_EQ(st["candidates"].size(), 4u);
  EXPECT_TRUE(st["leaf_reason"].is_null());
}

TEST(Session, BudgetZero) {
  SessionManager m;
  auto st = m.create(fig2_body(0))["state"];
  EXPECT_TRUE(st["recommendation"].is_null());
  EXPECT_EQ(st["leaf_reason"], "insufficient-budget");
}

TEST(Session, InvalidCreateBodies) {
  SessionManager m;
  EXPECT_EQ(status_of([&] { m.create({{"program", "p :- "}, {"query", "p"}}); }), 400);
  EXPECT_EQ(status_of([&] { m.create({{"query", "p"}}); }), 400);
  EXPECT_EQ(status_of([&] { m.create(json::array()); }), 400);
  EXPECT_EQ(status_of([&] { m.create({{"program", test::read_fixture("cyclic_negation.pl")}, {"query", "q(0)"}}); }), 400);
  EXPECT_EQ(status_of([&] { m.create({{"program", "0.5::a."}, {"query", "a"}, {"budget", -1}}); }), 400);
  EXPECT_EQ(status_of([&] { m.create({{"program", "0.5::a."}, {"query", "a"}, {"utility", "meu"}}); }), 400);
  EXPECT_EQ(status_of([&] { m.create({{"program", "0.5::a.\nevidence(a).\nevidence(a, false)."}, {"query", "a"}}); }), 409);
  EXPECT_EQ(m.size(), 0u);
}

TEST(Session, MeuSession) {
  SessionManager m;
  json body{{"program", test::read_fixture("fig1.pl")},
            {"query", "heat_on"},
            {"utility", "meu"},
            {"actions", json::parse(test::read_fixture("heat_actions.json"))}};
  auto st = m.create(body)["state"];
  EXPECT_EQ(st["utility_kind"], "meu");
  EXPECT_EQ(st["budget"], "inf");
  Engine e(test::load_fixture("fig1.pl"));
  UtilitySpec u = UtilitySpec::meu(ActionTable::from_json(body["actions"]));
  EXPECT_NEAR(st["utility"].get<double>(), utility(e, parse_atom("heat_on"), {}, u), 1e-12);
}

TEST(Session, ObserveErrors) {
  SessionManager m;
  std::string id = m.create(fig2_body())["id"];
  EXPECT_EQ(status_of([&] { m.state("nope"); }), 404);
  EXPECT_EQ(status_of([&] { m.observe("nope", obs("diagnosis(2)", "true")); }), 404);
  EXPECT_EQ(status_of([&] { m.observe(id, json{{"observable", 3}}); }), 400);
  EXPECT_EQ(status_of([&] { m.observe(id, obs("person(1)", "true")); }), 400);
  EXPECT_EQ(status_of([&] { m.observe(id, obs("diagnosis(2)", "maybe")); }), 400);

  auto st = m.observe(id, obs("diagnosis(2)", "true"));
  EXPECT_EQ(st["budget"], 1.0);
  EXPECT_EQ(st["spent"], 1.0);
  EXPECT_EQ(st["history"].size(), 1u);
  EXPECT_EQ(status_of([&] { m.observe(id, obs("diagnosis(2)", "false")); }), 409);
  EXPECT_EQ(code_of([&] { m.observe(id, obs("diagnosis(2)", "false")); }), "inconsistent");
  EXPECT_EQ(status_of([&] { m.observe(id, obs("diagnosis(2)", "true")); }), 400);

  m.observe(id, obs("diagnosis(3)", "false"));
  EXPECT_EQ(status_of([&] { m.observe(id, obs("diagnosis(1)", "true")); }), 402);
  EXPECT_EQ(code_of([&] { m.observe(id, obs("diagnosis(1)", "true")); }), "budget-exceeded");
  EXPECT_EQ(m.state(id)["budget"], 0.0);
}

TEST(Session, IdempotentReplay) {
  SessionManager m;
  std::string id = m.create(fig2_body())["id"];
  auto first = m.observe(id, obs("diagnosis(2)", "true", "k1"));
  auto again = m.observe(id, obs("diagnosis(2)", "true", "k1"));
  EXPECT_EQ(first, again);
  EXPECT_EQ(m.observe(id, obs("diagnosis(2)", "diagnosis(2)=true", "k1")), first);
  EXPECT_EQ(m.state(id)["budget"], 1.0);
  EXPECT_EQ(m.state(id)["history"].size(), 1u);
  EXPECT_EQ(status_of([&] { m.observe(id, obs("diagnosis(3)", "true", "k1")); }), 409);
  EXPECT_EQ(code_of([&] { m.observe(id, obs("diagnosis(3)", "true", "k1")); }), "idempotency-conflict");
}

TEST(Session, WhatIfRows) {
  SessionManager m;
  std::string id = m.create(fig2_body())["id"];
  auto w = m.whatif(id);
  const auto& rows = w["rows"];
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0]["observable"], "diagnosis(2)");
  // Ties keep declaration order.
  EXPECT_EQ(rows[1]["observable"], "diagnosis(3)");
  EXPECT_EQ(rows[2]["observable"], "diagnosis(1)");
  EXPECT_EQ(rows[3]["observable"], "diagnosis(4)");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i - 1]["voi"].get<double>(), rows[i]["voi"].get<double>());

  Engine e(test::load_fixture("fig2.pl"));
  for (const auto& r : rows) {
    Atom t = parse_atom(r["observable"].get<std::string>());
    EXPECT_NEAR(r["voi"].get<double>(), voi_set(e, {t}, parse_atom("epidemic"), {}, UtilitySpec::entropy()), 1e-9);
    EXPECT_NEAR(r["expected_utility"].get<double>(), -oracle::fig2_entropy + r["voi"].get<double>(), 1e-9);
  }
}

TEST(Session, NoGainLeafRows) {
  SessionManager m;
  std::string id = m.create({{"program", test::read_fixture("fig1.pl")}, {"query", "heat_on"}})["id"];
  auto st = m.observe(id, obs("room(1,_)", "room(1,lo)"));
  EXPECT_EQ(st["leaf_reason"], "no-gain");
  for (const auto& r : m.whatif(id)["rows"]) EXPECT_LE(r["voi"].get<double>(), 1e-9);
}

TEST(Session, FullWalkMatchesPlanLeaf) {
  Engine e(test::load_fixture("fig2.pl"));
  auto tree = greedy_plan(e, {}, parse_atom("epidemic"), Budget::of(2), UtilitySpec::entropy());
  for (const auto& first : tree.root->next) {
    for (const auto& second : first.child->next) {
      SessionManager m;
      std::string id = m.create(fig2_body())["id"];
      const auto& obs_list = e.theory().observables;
      auto st = m.observe(id, obs(to_string(obs_list[*tree.root->choice].pattern), first.realization.value ? "true" : "false"));
      EXPECT_EQ(st["recommendation"]["observable"], to_string(obs_list[*first.child->choice].pattern));
      st = m.observe(id, obs(to_string(obs_list[*first.child->choice].pattern), second.realization.value ? "true" : "false"));
      EXPECT_NEAR(st["utility"].get<double>(), second.child->utility, 1e-9);
      EXPECT_EQ(st["leaf_reason"], "insufficient-budget");
    }
  }
}

TEST(Session, PlanFromCurrentState) {
  SessionManager m;
  std::string id = m.create(fig2_body())["id"];
  m.observe(id, obs("diagnosis(2)", "true"));
  auto p = m.plan(id);
  EXPECT_EQ(p["budget"], 1.0);
  EXPECT_EQ(p["root"]["evidence"], ordered_json::parse(R"j([["diagnosis(2)", true]])j"));
  EXPECT_FALSE(p["root"]["choice"].is_null());
  for (const auto& [_, child] : p["root"]["children"].items()) EXPECT_EQ(child["leaf_reason"], "insufficient-budget");
}

TEST(Session, ReplayReproducesState) {
  SessionManager a, b;
  std::string ida = a.create(fig2_body("inf"))["id"];
  std::string idb = b.create(fig2_body("inf"))["id"];
  for (auto [o, r] : {std::pair{"diagnosis(2)", "true"}, {"diagnosis(1)", "false"}, {"diagnosis(4)", "true"}}) {
    a.observe(ida, obs(o, r));
    b.observe(idb, obs(o, r));
  }
  auto sa = a.state(ida), sb = b.state(idb);
  sa.erase("id");
  sb.erase("id");
  EXPECT_EQ(sa, sb);
}

TEST(Session, DeleteSession) {
  SessionManager m;
  std::string id = m.create(fig2_body())["id"];
  EXPECT_EQ(m.size(), 1u);
  m.remove(id);
  EXPECT_EQ(m.size(), 0u);
  EXPECT_EQ(status_of([&] { m.remove(id); }), 404);
}

TEST(Session, StateDirPersistence) {
  auto dir = std::filesystem::temp_directory_path() / ("plvoi-state-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::string id;
  ordered_json before;
  {
    SessionManager m({}, dir);
    id = m.create(fig2_body())["id"];
    m.observe(id, obs("diagnosis(2)", "false", "key-a"));
    before = m.state(id);
    EXPECT_TRUE(std::filesystem::exists(dir / (id + ".json")));
  }
  {
    SessionManager m({}, dir);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_EQ(m.state(id), before);
    // Keys survive a restart.
    m.observe(id, obs("diagnosis(2)", "false", "key-a"));
    EXPECT_EQ(m.state(id)["budget"], 1.0);
    m.remove(id);
    EXPECT_FALSE(std::filesystem::exists(dir / (id + ".json")));
  }
  std::filesystem::remove_all(dir);
}

TEST(Session, ParseRealization) {
  auto ground = parse_atom("diagnosis(2)");
  EXPECT_TRUE(parse_realization(ground, "true").value);
  EXPECT_FALSE(parse_realization(ground, "diagnosis(2)=false").value);
  auto tmpl = parse_atom("room(1,_)");
  EXPECT_EQ(parse_realization(tmpl, "room(1, lo)").label, "room(1,lo)");
  EXPECT_THROW(parse_realization(tmpl, "room(2,lo)"), Error);
  EXPECT_THROW(parse_realization(ground, "yes"), Error);
}
