#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "plvoi/ground.hpp"
#include "plvoi/plan_json.hpp"
#include "plvoi/planner.hpp"

namespace plvoi {

/// A request failure carrying its HTTP status and a short machine code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& detail)
      : std::runtime_error(detail), status_(status), code_(std::move(code)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }

 private:
  int status_;
  std::string code_;
};

inline ServiceError bad_request(const std::string& detail) { return ServiceError(400, "invalid-request", detail); }

/// Maps library errors onto service errors.
inline ServiceError to_service_error(const Error& e) {
  switch (e.code()) {
    case ErrorCode::inconsistent: return ServiceError(409, "inconsistent", e.what());
    case ErrorCode::resource_limit: return ServiceError(422, "resource-limit", e.what());
    case ErrorCode::input:
    case ErrorCode::malformed_plan: break;
  }
  return ServiceError(400, "invalid-input", e.what());
}

struct HistoryEntry {
  std::string observable;
  std::string realization;
  double cost = 0.0;
  std::string idempotency_key;
};

/// Reads a realization written as the instance atom (non-ground templates) or
/// as `atom=true|false` / `true|false` (ground templates).
inline Realization parse_realization(const Atom& pattern, const std::string& text) {
  if (pattern.is_ground()) {
    std::string value = text;
    if (auto eq = text.rfind('='); eq != std::string::npos) {
      if (parse_atom(text.substr(0, eq)) != pattern)
        throw input_error("realization " + text + " does not name " + to_string(pattern));
      value = text.substr(eq + 1);
    }
    if (value != "true" && value != "false")
      throw input_error("realization of " + to_string(pattern) + " must be true or false, got " + text);
    bool v = value == "true";
    return Realization{pattern, v, to_string(pattern) + (v ? "=true" : "=false")};
  }
  Atom a = parse_atom(text);
  if (!a.is_ground() || !match(pattern, a))
    throw input_error(text + " is not a ground instance of " + to_string(pattern));
  return Realization{a, true, to_string(a)};
}

/// One interactive observation session. Callers hold `mutex` around every use.
class Session {
 public:
  Session(std::string id, std::string program, const Atom& query, Budget budget, UtilitySpec utility,
          EngineOptions opts)
      : id_(std::move(id)), program_(std::move(program)), query_(query), initial_(budget), remaining_(budget),
        utility_(std::move(utility)) {
    if (!query_.is_ground()) throw input_error("query must be ground: " + to_string(query_));
    engine_ = std::make_shared<Engine>(load_theory(program_, opts.ground), opts);
    // Fails early on inconsistent declared evidence.
    success_probability(*engine_, query_, scenario_);
  }

  std::mutex mutex;

  const std::string& id() const noexcept { return id_; }
  const Engine& engine() const noexcept { return *engine_; }
  const Scenario& scenario() const noexcept { return scenario_; }
  Budget remaining() const noexcept { return remaining_; }
  const std::vector<HistoryEntry>& history() const noexcept { return history_; }

  ordered_json state() const {
    const auto& obs = engine_->theory().observables;
    double p = success_probability(*engine_, query_, scenario_);
    ordered_json j;
    j["id"] = id_;
    j["query"] = to_string(query_);
    j["probability"] = p;
    j["entropy"] = binary_entropy(p);
    j["utility"] = utility_(p);
    j["utility_kind"] = utility_.name();
    j["budget"] = budget_to_json(remaining_);
    j["initial_budget"] = budget_to_json(initial_);
    double spent = 0.0;
    ordered_json hist = ordered_json::array();
    for (const auto& h : history_) {
      spent += h.cost;
      hist.push_back({{"observable", h.observable}, {"realization", h.realization}, {"cost", h.cost}});
    }
    j["spent"] = spent;
    j["evidence"] = evidence_to_json(scenario_);
    j["history"] = hist;

    auto rows = candidate_rows();
    std::optional<Row> best;
    ordered_json cands = ordered_json::array();
    for (const auto& r : rows) {
      cands.push_back(row_json(r));
      if (r.affordable && (!best || r.voi > best->voi + kTieEpsilon)) best = r;
    }
    j["candidates"] = cands;
    if (best && best->voi > kVoiEpsilon) {
      j["recommendation"] = {{"observable", to_string(obs[best->index].pattern)}, {"cost", best->cost}, {"voi", best->voi}};
      j["leaf_reason"] = nullptr;
    } else {
      std::vector<std::size_t> idx;
      for (const auto& r : rows) idx.push_back(r.index);
      j["recommendation"] = nullptr;
      j["leaf_reason"] = to_string(detail::classify(*engine_, idx, remaining_));
    }
    return j;
  }

  /// One row per admissible observable, by VoI descending then declaration order.
  ordered_json whatif() const {
    auto rows = candidate_rows();
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.voi > b.voi; });
    double here = utility(*engine_, query_, scenario_, utility_);
    ordered_json out = ordered_json::array();
    for (const auto& r : rows) {
      auto j = row_json(r);
      j["expected_utility"] = here + r.voi;
      out.push_back(std::move(j));
    }
    return {{"id", id_}, {"rows", out}};
  }

  /// Greedy plan from the current scenario and remaining budget.
  ordered_json plan() const {
    auto tree = greedy_plan(*engine_, scenario_, query_, remaining_, utility_);
    return plan_to_json(tree, engine_->theory());
  }

  ordered_json observe(const std::string& observable, const std::string& realization,
                       const std::string& idempotency_key = {}) {
    Atom pattern;
    Realization r;
    std::optional<std::string> parse_failure;
    try {
      pattern = parse_atom(observable);
      r = parse_realization(pattern, realization);
    } catch (const Error& e) {
      parse_failure = e.what();
    }
    // Requests naming the same observation in different spellings share a fingerprint.
    const std::string fingerprint =
        parse_failure ? observable + "\n" + realization : to_string(pattern) + "\n" + r.label;
    if (!idempotency_key.empty()) {
      if (auto it = replies_.find(idempotency_key); it != replies_.end()) {
        if (it->second.first != fingerprint)
          throw ServiceError(409, "idempotency-conflict", "idempotency key " + idempotency_key + " was used for a different observation");
        return it->second.second;
      }
    }
    if (parse_failure) throw bad_request(*parse_failure);
    const auto& obs = engine_->theory().observables;
    std::optional<std::size_t> index;
    for (std::size_t i = 0; i < obs.size(); ++i)
      if (obs[i].pattern == pattern) index = i;
    if (!index) throw bad_request(observable + " is not a declared observable");

    bool possible = false;
    for (const auto& wr : realizations(*engine_, pattern, scenario_))
      if (wr.realization.label == r.label && wr.probability > 0) possible = true;
    if (!possible)
      throw ServiceError(409, "inconsistent", r.label + " has probability zero given the current evidence");
    if (is_observed(pattern, scenario_)) throw bad_request(observable + " has already been observed");
    auto status = validate_observable(*engine_, pattern, scenario_);
    if (!status.observable()) throw bad_request(observable + " is not observable here: " + status.reason);
    const double cost = obs[*index].cost;
    if (!remaining_.affords(cost))
      throw ServiceError(402, "budget-exceeded", "observing " + observable + " costs " + format_number(cost) +
                                                     " but only " + format_number(remaining_.value) + " remains");

    scenario_ = plvoi::observe(*engine_, scenario_, r);
    remaining_ = remaining_.minus(cost);
    history_.push_back(HistoryEntry{observable, r.label, cost, idempotency_key});
    ordered_json reply = state();
    if (!idempotency_key.empty()) replies_[idempotency_key] = {fingerprint, reply};
    return reply;
  }

  /// Everything needed to rebuild the session by replay.
  ordered_json snapshot() const {
    ordered_json hist = ordered_json::array();
    for (const auto& h : history_)
      hist.push_back({{"observable", h.observable}, {"realization", h.realization}, {"idempotency_key", h.idempotency_key}});
    ordered_json j;
    j["id"] = id_;
    j["program"] = program_;
    j["query"] = to_string(query_);
    j["budget"] = budget_to_json(initial_);
    j["utility"] = utility_.to_json();
    j["history"] = hist;
    return j;
  }

 private:
  struct Row {
    std::size_t index;
    double cost;
    double voi;
    bool affordable;
  };

  std::vector<Row> candidate_rows() const {
    const auto& obs = engine_->theory().observables;
    std::vector<Row> rows;
    for (auto i : candidate_observables(*engine_, scenario_)) {
      Atom t = obs[i].pattern;
      double v = voi_set(*engine_, std::span<const Atom>(&t, 1), query_, scenario_, utility_);
      rows.push_back(Row{i, obs[i].cost, v, remaining_.affords(obs[i].cost)});
    }
    return rows;
  }

  ordered_json row_json(const Row& r) const {
    return {{"observable", to_string(engine_->theory().observables[r.index].pattern)},
            {"cost", r.cost},
            {"voi", r.voi},
            {"affordable", r.affordable}};
  }

  std::string id_;
  std::string program_;
  Atom query_;
  Budget initial_;
  Budget remaining_;
  UtilitySpec utility_;
  std::shared_ptr<Engine> engine_;
  Scenario scenario_;
  std::vector<HistoryEntry> history_;
  std::map<std::string, std::pair<std::string, ordered_json>> replies_;
};

/// Owns all sessions. Distinct sessions are independent; each session is
/// serialized by its own mutex.
class SessionManager {
 public:
  explicit SessionManager(EngineOptions opts = {}, std::optional<std::filesystem::path> state_dir = std::nullopt)
      : opts_(opts), state_dir_(std::move(state_dir)) {
    if (state_dir_) {
      std::filesystem::create_directories(*state_dir_);
      restore();
    }
  }

  /// `{"program", "query", "budget"?, "utility"?, "actions"?}` -> `{"id", "state"}`.
  ordered_json create(const nlohmann::json& body) { return create_with_id(body, fresh_id()); }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "not-found", "no session " + id);
    return it->second;
  }

  ordered_json state(const std::string& id) const { return with(id, [](Session& s) { return s.state(); }); }
  ordered_json whatif(const std::string& id) const { return with(id, [](Session& s) { return s.whatif(); }); }
  ordered_json plan(const std::string& id) const { return with(id, [](Session& s) { return s.plan(); }); }

  ordered_json observe(const std::string& id, const nlohmann::json& body) {
    std::string observable, realization, key;
    try {
      observable = body.at("observable").get<std::string>();
      realization = body.at("realization").get<std::string>();
      if (body.contains("idempotency_key") && !body["idempotency_key"].is_null())
        key = body["idempotency_key"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw bad_request(std::string("observe body needs string fields observable and realization: ") + e.what());
    }
    return with(id, [&](Session& s) {
      auto reply = s.observe(observable, realization, key);
      persist(s);
      return reply;
    });
  }

  void remove(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mutex_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw ServiceError(404, "not-found", "no session " + id);
      s = it->second;
      sessions_.erase(it);
    }
    std::lock_guard lock(s->mutex);
    if (state_dir_) std::filesystem::remove(*state_dir_ / (id + ".json"));
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
  }

 private:
  template <typename F>
  ordered_json with(const std::string& id, F&& f) const {
    auto s = get(id);
    std::lock_guard lock(s->mutex);
    try {
      return f(*s);
    } catch (const Error& e) {
      throw to_service_error(e);
    }
  }

  ordered_json create_with_id(const nlohmann::json& body, const std::string& id) {
    if (!body.is_object()) throw bad_request("session body must be a JSON object");
    std::string program, query;
    Budget budget;
    UtilitySpec utility;
    try {
      program = body.at("program").get<std::string>();
      query = body.at("query").get<std::string>();
      if (body.contains("budget")) budget = budget_from_json(body["budget"]);
      if (body.contains("utility")) {
        const auto& u = body["utility"];
        if (u.is_object()) {
          utility = UtilitySpec::from_json(u);
        } else {
          const auto kind = u.get<std::string>();
          if (kind == "meu") {
            if (!body.contains("actions")) throw input_error("utility meu needs an actions table");
            utility = UtilitySpec::meu(ActionTable::from_json(body["actions"]));
          } else if (kind != "entropy") {
            throw input_error("unknown utility " + kind);
          }
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw bad_request(std::string("session body needs string fields program and query: ") + e.what());
    } catch (const Error& e) {
      throw to_service_error(e);
    }
    std::shared_ptr<Session> s;
    ordered_json st;
    try {
      s = std::make_shared<Session>(id, program, parse_atom(query), budget, utility, opts_);
      st = s->state();
    } catch (const Error& e) {
      throw to_service_error(e);
    }
    {
      std::lock_guard lock(mutex_);
      sessions_[id] = s;
    }
    persist(*s);
    return {{"id", id}, {"state", st}};
  }

  void persist(const Session& s) const {
    if (!state_dir_) return;
    auto path = *state_dir_ / (s.id() + ".json");
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp);
      out << s.snapshot().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
  }

  void restore() {
    for (const auto& entry : std::filesystem::directory_iterator(*state_dir_)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      auto snap = nlohmann::json::parse(in, nullptr, false);
      if (snap.is_discarded() || !snap.contains("id")) continue;
      const std::string id = snap["id"].get<std::string>();
      create_with_id(snap, id);
      for (const auto& h : snap.value("history", nlohmann::json::array())) observe(id, h);
    }
  }

  std::string fresh_id() {
    std::lock_guard lock(mutex_);
    static constexpr char hex[] = "0123456789abcdef";
    for (;;) {
      std::string id;
      auto bits = rng_();
      for (int i = 0; i < 16; ++i, bits >>= 4) id += hex[bits & 15u];
      if (!sessions_.count(id)) return id;
    }
  }

  EngineOptions opts_;
  std::optional<std::filesystem::path> state_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 rng_{std::random_device{}()};
};

}  // namespace plvoi
