#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "plvoi/ground.hpp"
#include "plvoi/plan_json.hpp"
#include "plvoi/planner.hpp"
#include "plvoi/service.hpp"

namespace plvoi::cli {

struct CliConfig {
  std::string program;
  std::string query;
  std::vector<std::string> evidence;
  std::string budget = "inf";
  std::string utility = "entropy";
  std::string actions;
  bool anytime = false;
  std::optional<long> time_limit_ms;
  std::optional<std::size_t> max_expansions;
  std::string priority = "reach";
  std::string out;
  std::size_t max_ground = GroundOptions{}.max_rules;
  bool no_timing = false;

  // voi
  std::optional<std::string> set;
  std::optional<std::size_t> all_subsets;
  // eval-plan, walk
  std::string plan;
  // serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string state_dir;
  std::string static_dir;
};

inline std::string fixed(double v, int places = 6) {
  if (v == 0) v = 0;  // no "-0.000000"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Budget parse_budget(const std::string& text) {
  if (text == "inf") return Budget::unbounded();
  double v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) throw input_error("budget must be a number or inf, got " + text);
  return Budget::of(v);
}

/// `atom=true|false`
inline EvidenceFact parse_evidence(const std::string& text) {
  auto eq = text.rfind('=');
  if (eq == std::string::npos) throw input_error("evidence must be atom=true|false, got " + text);
  std::string value = text.substr(eq + 1);
  if (value != "true" && value != "false") throw input_error("evidence must be atom=true|false, got " + text);
  Atom a = parse_atom(text.substr(0, eq));
  if (!a.is_ground()) throw input_error("evidence atom must be ground: " + text);
  return EvidenceFact{a, value == "true"};
}

class Runner {
 public:
  Runner(const CliConfig& c, std::istream& in, std::ostream& out, std::ostream& err)
      : c_(c), in_(in), out_(out), err_(err) {}

  int infer() {
    auto start = Clock::now();
    auto& e = engine();
    Atom q = query();
    double p = success_probability(e, q, scenario());
    out_ << fixed(p) << '\n' << "entropy " << fixed(binary_entropy(p), 3) << '\n';
    timing(start);
    return 0;
  }

  int voi() {
    auto start = Clock::now();
    auto& e = engine();
    Atom q = query();
    Scenario s = scenario();
    UtilitySpec u = utility();
    const auto& obs = e.theory().observables;
    if (c_.all_subsets) {
      struct Row {
        std::vector<std::size_t> members;
        double voi;
      };
      std::vector<Row> rows;
      std::vector<std::size_t> pick;
      std::function<void(std::size_t)> walk = [&](std::size_t from) {
        if (!pick.empty()) {
          std::vector<Atom> ts;
          for (auto i : pick) ts.push_back(obs[i].pattern);
          rows.push_back(Row{pick, voi_set(e, ts, q, s, u)});
        }
        if (pick.size() == *c_.all_subsets) return;
        for (std::size_t i = from; i < obs.size(); ++i) {
          pick.push_back(i);
          walk(i + 1);
          pick.pop_back();
        }
      };
      walk(0);
      std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.voi > b.voi; });
      for (const auto& r : rows) {
        std::string names;
        for (auto i : r.members) names += (names.empty() ? "" : ",") + to_string(obs[i].pattern);
        out_ << fixed(r.voi) << "  {" << names << "}\n";
      }
    } else {
      std::vector<Atom> ts = parse_atom_list(c_.set.value_or(""));
      for (const auto& t : ts) {
        bool declared = false;
        for (const auto& o : obs) declared = declared || o.pattern == t;
        if (!declared) throw input_error(to_string(t) + " is not a declared observable");
      }
      out_ << fixed(voi_set(e, ts, q, s, u)) << '\n';
    }
    timing(start);
    return 0;
  }

  int plan() {
    auto start = Clock::now();
    auto& e = engine();
    Atom q = query();
    Budget b = parse_budget(c_.budget);
    UtilitySpec u = utility();
    DecisionTree tree;
    if (c_.anytime || c_.time_limit_ms || c_.max_expansions) {
      auto p = priority_from_string(c_.priority);
      if (!p) throw input_error("priority must be reach or fifo, got " + c_.priority);
      auto opts = AnytimeOptions::by(*p);
      opts.max_expansions = c_.max_expansions;
      if (c_.time_limit_ms) opts.time_limit = std::chrono::milliseconds(*c_.time_limit_ms);
      tree = anytime_plan(e, scenario(), q, b, u, opts);
    } else {
      tree = greedy_plan(e, scenario(), q, b, u);
    }
    const std::string text = plan_to_json(tree, e.theory()).dump(2) + "\n";
    std::size_t nodes = 0;
    for_each_node(*tree.root, [&](const PlanNode&, std::size_t) { ++nodes; });
    std::ostream& report = c_.out.empty() ? err_ : out_;
    if (c_.out.empty()) {
      out_ << text;
    } else {
      std::ofstream f(c_.out, std::ios::binary);
      if (!f) throw input_error("cannot write " + c_.out);
      f << text;
    }
    report << "voi " << fixed(tree_voi(tree)) << '\n';
    report << "expansions " << tree.log.size() << '\n';
    report << "nodes " << nodes << '\n';
    if (!c_.out.empty()) timing(start);
    return 0;
  }

  int eval_plan() {
    auto start = Clock::now();
    auto& e = engine();
    DecisionTree tree = load_plan(e);
    double by_tree = tree_voi(tree);
    double by_reality = plan_voi_by_reality(e, tree, tree.query, tree.utility);
    out_ << "tree_voi " << fixed(by_tree) << '\n';
    out_ << "reality_voi " << fixed(by_reality) << '\n';
    out_ << "difference " << fixed(std::abs(by_tree - by_reality), 12) << '\n';
    timing(start);
    return 0;
  }

  int walk() {
    auto& e = engine();
    DecisionTree tree = load_plan(e);
    const auto& obs = e.theory().observables;
    const PlanNode* node = tree.root.get();
    double spent = 0.0;
    while (!node->is_leaf()) {
      const auto& o = obs[*node->choice];
      out_ << "observe " << to_string(o.pattern) << " (cost " << format_number(o.cost) << ")\n";
      out_ << "realizations:";
      for (const auto& b : node->next) out_ << ' ' << b.realization.label;
      out_ << '\n';
      const PlanNode* next = nullptr;
      while (!next) {
        out_ << "> " << std::flush;
        std::string line;
        if (!std::getline(in_, line)) throw input_error("input ended before reaching a leaf");
        line = trim(line);
        for (const auto& b : node->next) {
          const auto& label = b.realization.label;
          bool hit = line == label;
          if (!hit && o.pattern.is_ground()) hit = line == (b.realization.value ? "true" : "false");
          if (hit) next = b.child.get();
        }
        if (!next) out_ << "not a realization of " << to_string(o.pattern) << "; try again\n";
      }
      spent += o.cost;
      node = next;
    }
    double p = success_probability(e, tree.query, node->scenario);
    out_ << "leaf " << (node->leaf_reason ? to_string(*node->leaf_reason) : "frontier") << '\n';
    out_ << "posterior " << fixed(p) << '\n';
    out_ << "utility " << fixed(tree.utility(p)) << '\n';
    out_ << "spent " << fixed(spent) << '\n';
    return 0;
  }

  int serve() {
    std::optional<std::filesystem::path> dir;
    if (!c_.state_dir.empty()) dir = c_.state_dir;
    SessionManager sessions(engine_options(), dir);
    Service service(sessions);
    httplib::Server server;
    service.install(server);
    if (!c_.static_dir.empty() && !server.set_mount_point("/", c_.static_dir))
      throw input_error("cannot serve static files from " + c_.static_dir);
    out_ << "listening on " << c_.host << ':' << c_.port << std::endl;
    if (!server.listen(c_.host, c_.port)) throw input_error("cannot listen on " + c_.host + ":" + std::to_string(c_.port));
    return 0;
  }

 private:
  using Clock = std::chrono::steady_clock;

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  EngineOptions engine_options() const {
    EngineOptions o;
    o.ground.max_rules = c_.max_ground;
    return o;
  }

  Engine& engine() {
    if (!engine_) {
      if (c_.program.empty()) throw input_error("--program is required");
      engine_.emplace(load_theory(read_file(c_.program), engine_options().ground), engine_options());
    }
    return *engine_;
  }

  Atom query() const {
    if (c_.query.empty()) throw input_error("--query is required");
    Atom q = parse_atom(c_.query);
    if (!q.is_ground()) throw input_error("query must be ground: " + c_.query);
    return q;
  }

  Scenario scenario() const {
    Scenario s;
    for (const auto& t : c_.evidence) s.evidence.push_back(parse_evidence(t));
    return s;
  }

  UtilitySpec utility() const {
    if (c_.utility == "entropy") {
      if (!c_.actions.empty()) throw input_error("--actions only applies to --utility meu");
      return UtilitySpec::entropy();
    }
    if (c_.utility == "meu") {
      if (c_.actions.empty()) throw input_error("--utility meu needs --actions");
      auto j = nlohmann::json::parse(read_file(c_.actions), nullptr, false);
      if (j.is_discarded()) throw input_error(c_.actions + " is not valid JSON");
      return UtilitySpec::meu(ActionTable::from_json(j));
    }
    throw input_error("utility must be entropy or meu, got " + c_.utility);
  }

  DecisionTree load_plan(const Engine& e) const {
    if (c_.plan.empty()) throw input_error("--plan is required");
    auto j = ordered_json::parse(read_file(c_.plan), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::malformed_plan, "malformed plan: " + c_.plan + " is not valid JSON");
    return plan_from_json(j, e.theory());
  }

  void timing(Clock::time_point start) {
    if (c_.no_timing) return;
    auto ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    out_ << "time_ms " << fixed(ms, 1) << '\n';
  }

  const CliConfig& c_;
  std::istream& in_;
  std::ostream& out_;
  std::ostream& err_;
  std::optional<Engine> engine_;
};

inline void add_shared(CLI::App* sub, CliConfig& c) {
  sub->add_option("--program", c.program, "Program file");
  sub->add_option("--query", c.query, "Ground query atom");
  sub->add_option("--evidence", c.evidence, "Evidence atom=true|false (repeatable)");
  sub->add_option("--budget", c.budget, "Observation budget, a number or inf");
  sub->add_option("--utility", c.utility, "entropy or meu");
  sub->add_option("--actions", c.actions, "Action table JSON for meu");
  sub->add_flag("--anytime", c.anytime, "Best-first planning with stop limits");
  sub->add_option("--time-limit-ms", c.time_limit_ms, "Anytime wall-clock limit");
  sub->add_option("--max-expansions", c.max_expansions, "Anytime expansion limit");
  sub->add_option("--priority", c.priority, "Anytime order: reach or fifo");
  sub->add_option("--out", c.out, "Output file");
  sub->add_option("--max-ground", c.max_ground, "Ground atom and rule limit");
  sub->add_flag("--no-timing", c.no_timing, "Suppress timing lines");
}

/// Runs one command line. Returns the process exit code.
inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CliConfig c;
  CLI::App app{"Value-of-information planning over probabilistic logic programs", "plvoi"};
  app.require_subcommand(1);
  auto* infer = app.add_subcommand("infer", "Query probability and entropy");
  auto* voi = app.add_subcommand("voi", "VoI of an observable set");
  auto* plan = app.add_subcommand("plan", "Build an observation plan");
  auto* eval = app.add_subcommand("eval-plan", "Re-evaluate a plan file");
  auto* walk = app.add_subcommand("walk", "Execute a plan interactively");
  auto* serve = app.add_subcommand("serve", "Run the session service");
  for (auto* s : {infer, voi, plan, eval, walk, serve}) add_shared(s, c);
  voi->add_option("--set", c.set, "Comma-separated observable templates");
  voi->add_option("--all-subsets", c.all_subsets, "Rank all subsets up to this size");
  eval->add_option("--plan", c.plan, "Plan JSON file")->required();
  walk->add_option("--plan", c.plan, "Plan JSON file")->required();
  serve->add_option("--host", c.host, "Listen address");
  serve->add_option("--port", c.port, "Listen port");
  serve->add_option("--state-dir", c.state_dir, "Session snapshot directory");
  serve->add_option("--static-dir", c.static_dir, "Static files served at /");

  std::vector<std::string> argv_store{"plvoi"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(ErrorCode::input);
  }

  Runner r(c, in, out, err);
  try {
    if (*infer) return r.infer();
    if (*voi) return r.voi();
    if (*plan) return r.plan();
    if (*eval) return r.eval_plan();
    if (*walk) return r.walk();
    if (*serve) return r.serve();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(ErrorCode::input);
  }
  return exit_code(ErrorCode::input);
}

}  // namespace plvoi::cli
