#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "plvoi/error.hpp"

namespace plvoi {

/// Actions whose payoff depends on the query's truth value.
struct ActionTable {
  struct Payoff {
    double if_true = 0.0;
    double if_false = 0.0;
  };
  std::vector<std::string> actions;
  std::map<std::string, Payoff> utility;

  /// `{"actions": [..], "utility": {"name": {"true": x, "false": y}, ..}}`
  static ActionTable from_json(const nlohmann::json& j) {
    ActionTable t;
    try {
      for (const auto& a : j.at("actions")) t.actions.push_back(a.get<std::string>());
      for (const auto& a : t.actions) {
        const auto& u = j.at("utility").at(a);
        t.utility[a] = Payoff{u.at("true").get<double>(), u.at("false").get<double>()};
      }
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("malformed action table: ") + e.what());
    }
    if (t.actions.empty()) throw input_error("action table needs at least one action");
    return t;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["actions"] = actions;
    j["utility"] = nlohmann::ordered_json::object();
    for (const auto& a : actions) j["utility"][a] = {{"true", utility.at(a).if_true}, {"false", utility.at(a).if_false}};
    return j;
  }
};

/// Utility of a query posterior: negated binary entropy, or maximum expected
/// action payoff.
struct UtilitySpec {
  enum class Kind { entropy, meu };
  Kind kind = Kind::entropy;
  ActionTable table;

  static UtilitySpec entropy() { return {}; }
  static UtilitySpec meu(ActionTable t) { return UtilitySpec{Kind::meu, std::move(t)}; }

  const char* name() const { return kind == Kind::entropy ? "entropy" : "meu"; }

  double operator()(double p) const {
    if (kind == Kind::entropy) {
      double u = 0.0;
      if (p > 0) u += p * std::log2(p);
      if (p < 1) u += (1 - p) * std::log2(1 - p);
      return u;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& a : table.actions) {
      const auto& pay = table.utility.at(a);
      best = std::max(best, p * pay.if_true + (1 - p) * pay.if_false);
    }
    return best;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = name();
    if (kind == Kind::meu) {
      auto t = table.to_json();
      j["actions"] = t["actions"];
      j["utility"] = t["utility"];
    }
    return j;
  }

  static UtilitySpec from_json(const nlohmann::json& j) {
    std::string kind;
    try {
      kind = j.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw input_error(std::string("malformed utility: ") + e.what());
    }
    if (kind == "entropy") return entropy();
    if (kind == "meu") return meu(ActionTable::from_json(j));
    throw input_error("unknown utility kind: " + kind);
  }
};

}  // namespace plvoi
