#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "plvoi/error.hpp"
#include "plvoi/ground.hpp"
#include "plvoi/program.hpp"

namespace plvoi {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) comp_ += (sum_ - t) + x;
    else comp_ += (x - t) + sum_;
    sum_ = t;
  }
  void add(const CompensatedSum& o) noexcept {
    add(o.sum_);
    add(o.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// A world: truth assignment over the ground probabilistic facts, fact i
/// included iff bit i of the mask is set.
using WorldMask = std::uint64_t;

inline double world_probability(const GroundProgram& g, WorldMask w) {
  double p = 1.0;
  for (std::size_t i = 0; i < g.facts.size(); ++i)
    p *= ((w >> i) & 1u) ? g.facts[i].probability : 1.0 - g.facts[i].probability;
  return p;
}

/// Stratum-ordered bottom-up fixpoint over one world. Reusable across worlds.
class ModelEvaluator {
 public:
  explicit ModelEvaluator(const GroundProgram& g) : g_(&g) {
    stratum_begin_.assign(static_cast<std::size_t>(g.strata) + 1, g.rules.size());
    for (std::size_t i = g.rules.size(); i-- > 0;)
      stratum_begin_[static_cast<std::size_t>(g.rules[i].stratum)] = i;
    for (std::size_t s = stratum_begin_.size() - 1; s-- > 0;)
      stratum_begin_[s] = std::min(stratum_begin_[s], stratum_begin_[s + 1]);
    watch_.resize(g.atoms.size());
    same_count_.resize(g.rules.size());
    for (std::size_t r = 0; r < g.rules.size(); ++r) {
      const auto& rule = g.rules[r];
      for (AtomId a : rule.positive) {
        if (g.atom_stratum[a] == rule.stratum) {
          watch_[a].push_back(static_cast<std::uint32_t>(r));
          ++same_count_[r];
        }
      }
    }
    pending_.resize(g.rules.size());
    queue_.reserve(g.atoms.size());
  }

  /// Fills `truth` (one byte per relevant atom) with the world's least model.
  void evaluate(WorldMask w, std::vector<char>& truth) {
    const auto& g = *g_;
    truth.assign(g.atoms.size(), 0);
    for (int s = 0; s < g.strata; ++s) {
      queue_.clear();
      for (std::size_t r = stratum_begin_[static_cast<std::size_t>(s)];
           r < stratum_begin_[static_cast<std::size_t>(s) + 1]; ++r) {
        pending_[r] = enabled(g.rules[r], w, truth) ? static_cast<std::int32_t>(same_count_[r]) : -1;
        if (pending_[r] == 0) fire(g.rules[r].head, truth);
      }
      for (std::size_t qi = 0; qi < queue_.size(); ++qi) {
        for (std::uint32_t r : watch_[queue_[qi]]) {
          if (pending_[r] > 0 && --pending_[r] == 0) fire(g.rules[r].head, truth);
        }
      }
    }
  }

 private:
  void fire(AtomId head, std::vector<char>& truth) {
    if (!truth[head]) {
      truth[head] = 1;
      queue_.push_back(head);
    }
  }

  static std::int64_t value_of(const GroundOperand& o, const std::vector<std::int64_t>& counts) {
    return o.is_count ? counts[o.aggregate] : o.value;
  }

  bool enabled(const GroundRule& r, WorldMask w, const std::vector<char>& truth) {
    if (r.choice >= 0 && !((w >> r.choice) & 1u)) return false;
    for (AtomId a : r.positive)
      if (g_->atom_stratum[a] < r.stratum && !truth[a]) return false;
    for (const auto& group : r.negative)
      for (AtomId a : group)
        if (truth[a]) return false;
    if (!r.comparisons.empty()) {
      counts_.assign(r.aggregates.size(), 0);
      for (std::size_t k = 0; k < r.aggregates.size(); ++k)
        for (AtomId a : r.aggregates[k]) counts_[k] += truth[a] ? 1 : 0;
      for (const auto& c : r.comparisons)
        if (!compare(c.op, value_of(c.lhs, counts_), value_of(c.rhs, counts_))) return false;
    }
    return true;
  }

  const GroundProgram* g_;
  std::vector<std::size_t> stratum_begin_;
  std::vector<std::vector<std::uint32_t>> watch_;
  std::vector<std::uint32_t> same_count_;
  std::vector<std::int32_t> pending_;
  std::vector<AtomId> queue_;
  std::vector<std::int64_t> counts_;
};

/// Set of ground atoms true in the unique stratified model of one world.
struct LeastModel {
  std::vector<Atom> atoms;

  bool contains(const Atom& a) const { return std::find(atoms.begin(), atoms.end(), a) != atoms.end(); }
};

inline LeastModel least_model(const GroundProgram& g, WorldMask w) {
  ModelEvaluator ev(g);
  std::vector<char> truth;
  ev.evaluate(w, truth);
  LeastModel m;
  for (AtomId i = 0; i < g.atoms.size(); ++i)
    if (truth[i]) m.atoms.push_back(g.atoms[i]);
  return m;
}

struct EngineOptions {
  GroundOptions ground;
  unsigned max_facts = 30;  // 2^30 worlds
  unsigned threads = 0;     // 0: hardware concurrency
};

/// Probability mass of every distinct truth assignment to the tracked atoms,
/// accumulated over all worlds in one sweep.
class WorldTable {
 public:
  using Key = std::vector<std::uint64_t>;

  struct Entry {
    Key key;
    double mass = 0.0;
  };

  const GroundProgram& program() const noexcept { return program_; }
  const std::vector<Atom>& tracked() const noexcept { return tracked_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }
  const std::vector<Atom>& patterns() const noexcept { return patterns_; }
  double total_mass() const noexcept { return total_mass_; }
  std::uint64_t world_count() const noexcept { return std::uint64_t{1} << program_.facts.size(); }

  std::optional<std::size_t> slot(const Atom& a) const {
    auto it = slot_.find(to_string(a));
    if (it == slot_.end()) return std::nullopt;
    return it->second;
  }

  bool covers(const Atom& pattern) const {
    std::string key = to_string(pattern);
    for (const auto& p : patterns_)
      if (to_string(p) == key) return true;
    return false;
  }

  static bool bit(const Key& k, std::size_t i) noexcept { return (k[i / 64] >> (i % 64)) & 1u; }

  /// Truth of a ground atom in an entry. Atoms outside the Herbrand base are false.
  bool holds(const Entry& e, const Atom& a) const {
    if (auto s = slot(a)) return bit(e.key, *s);
    if (!program_.possible(a)) return false;
    throw std::logic_error("atom not tracked by world table: " + to_string(a));
  }

  /// Tracked ground instances of a template (ground templates: itself, if possible).
  std::vector<std::size_t> instance_slots(const Atom& pattern) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tracked_.size(); ++i)
      if (match(pattern, tracked_[i])) out.push_back(i);
    return out;
  }

  static std::shared_ptr<const WorldTable> build(const Theory& t, std::vector<Atom> patterns, const EngineOptions& opts) {
    auto table = std::shared_ptr<WorldTable>(new WorldTable());
    table->program_ = ground(t, patterns, opts.ground);
    table->patterns_ = std::move(patterns);
    const auto& g = table->program_;
    if (g.facts.size() > opts.max_facts || g.facts.size() >= 63)
      throw Error(ErrorCode::resource_limit, std::to_string(g.facts.size()) + " relevant probabilistic facts exceed the enumeration limit of " +
                                                 std::to_string(opts.max_facts));
    std::vector<std::string> keys;
    for (const auto& p : table->patterns_)
      for (AtomId id : g.instances(p)) {
        std::string k = to_string(g.atoms[id]);
        if (table->slot_.emplace(k, table->tracked_.size()).second) {
          table->tracked_.push_back(g.atoms[id]);
          table->tracked_ids_.push_back(id);
        }
      }
    table->sweep(opts.threads);
    return table;
  }

 private:
  WorldTable() = default;

  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::size_t h = 1469598103934665603ull;
      for (auto w : k) h = (h ^ w) * 1099511628211ull;
      return h;
    }
  };
  using Partial = std::unordered_map<Key, CompensatedSum, KeyHash>;

  // Worlds are split into fixed-size blocks independent of the thread count;
  // blocks are reduced in index order so results do not depend on parallelism.
  static constexpr unsigned kBlockBits = 12;

  void sweep_block(std::uint64_t begin, std::uint64_t end, Partial& out) const {
    ModelEvaluator ev(program_);
    std::vector<char> truth;
    Key key((tracked_.size() + 63) / 64, 0);
    for (WorldMask w = begin; w < end; ++w) {
      ev.evaluate(w, truth);
      std::fill(key.begin(), key.end(), 0);
      for (std::size_t i = 0; i < tracked_ids_.size(); ++i)
        if (truth[tracked_ids_[i]]) key[i / 64] |= std::uint64_t{1} << (i % 64);
      out[key].add(world_probability(program_, w));
    }
  }

  void sweep(unsigned threads) {
    const std::uint64_t worlds = world_count();
    const std::uint64_t block = std::uint64_t{1} << kBlockBits;
    const std::uint64_t nblocks = (worlds + block - 1) / block;
    std::vector<Partial> partial(nblocks);
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
      for (std::uint64_t b; (b = next.fetch_add(1)) < nblocks;)
        sweep_block(b * block, std::min(worlds, (b + 1) * block), partial[b]);
    };
    unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::uint64_t>(n, nblocks));
    if (n <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }
    std::map<Key, CompensatedSum> merged;
    CompensatedSum total;
    for (const auto& part : partial) {
      std::vector<std::pair<Key, CompensatedSum>> sorted(part.begin(), part.end());
      std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [k, s] : sorted) {
        merged[k].add(s);
        total.add(s);
      }
    }
    for (const auto& [k, s] : merged) entries_.push_back(Entry{k, s.value()});
    total_mass_ = total.value();
  }

  GroundProgram program_;
  std::vector<Atom> patterns_;
  std::vector<Atom> tracked_;
  std::vector<AtomId> tracked_ids_;
  std::unordered_map<std::string, std::size_t> slot_;
  std::vector<Entry> entries_;
  double total_mass_ = 0.0;
};

/// Base theory plus evidence accumulated by observations.
struct Scenario {
  std::vector<EvidenceFact> evidence;

  bool has(const EvidenceFact& e) const { return std::find(evidence.begin(), evidence.end(), e) != evidence.end(); }

  /// Evidence as a sorted set, the identity of the scenario for caching.
  std::string canonical() const {
    std::vector<std::string> parts;
    for (const auto& e : evidence) parts.push_back(to_string(e.atom) + (e.value ? "=true" : "=false"));
    std::sort(parts.begin(), parts.end());
    parts.erase(std::unique(parts.begin(), parts.end()), parts.end());
    std::string out;
    for (const auto& p : parts) out += p + ";";
    return out;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Grounds and sweeps a theory, caching world tables per tracked-pattern set.
/// Safe for concurrent use; tables are immutable once published.
class Engine {
 public:
  explicit Engine(Theory theory, EngineOptions opts = {}) : theory_(std::move(theory)), opts_(opts) {
    std::vector<Atom> base;
    for (const auto& e : theory_.evidence) base.push_back(e.atom);
    for (const auto& o : theory_.observables) base.push_back(o.pattern);
    table_ = WorldTable::build(theory_, dedupe(std::move(base)), opts_);
  }

  const Theory& theory() const noexcept { return theory_; }
  const EngineOptions& options() const noexcept { return opts_; }

  /// A table tracking at least `patterns` (re-sweeps when something is new).
  std::shared_ptr<const WorldTable> table(std::span<const Atom> patterns = {}) const {
    std::lock_guard lock(mu_);
    std::vector<Atom> missing;
    for (const auto& p : patterns)
      if (!table_->covers(p)) missing.push_back(p);
    if (missing.empty()) return table_;
    std::vector<Atom> all = table_->patterns();
    all.insert(all.end(), missing.begin(), missing.end());
    table_ = WorldTable::build(theory_, dedupe(std::move(all)), opts_);
    return table_;
  }

  std::shared_ptr<const WorldTable> table(std::initializer_list<Atom> patterns) const {
    return table(std::span<const Atom>(patterns.begin(), patterns.size()));
  }

 private:
  static std::vector<Atom> dedupe(std::vector<Atom> in) {
    std::vector<Atom> out;
    for (auto& a : in)
      if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(std::move(a));
    return out;
  }

  Theory theory_;
  EngineOptions opts_;
  mutable std::mutex mu_;
  mutable std::shared_ptr<const WorldTable> table_;
};

/// Table entries consistent with a scenario (program evidence included).
struct Selection {
  std::vector<const WorldTable::Entry*> entries;
  double mass = 0.0;
};

inline std::vector<Atom> evidence_atoms(const Theory& t, const Scenario& s) {
  std::vector<Atom> out;
  for (const auto& e : t.evidence) out.push_back(e.atom);
  for (const auto& e : s.evidence) out.push_back(e.atom);
  return out;
}

inline Selection select(const WorldTable& table, const Theory& t, const Scenario& s) {
  Selection sel;
  CompensatedSum mass;
  for (const auto& e : table.entries()) {
    bool ok = true;
    for (const auto& ev : t.evidence) ok = ok && table.holds(e, ev.atom) == ev.value;
    for (const auto& ev : s.evidence) ok = ok && table.holds(e, ev.atom) == ev.value;
    if (ok && e.mass > 0) {
      sel.entries.push_back(&e);
      mass.add(e.mass);
    }
  }
  sel.mass = mass.value();
  if (!(sel.mass > 0)) throw Error(ErrorCode::inconsistent, "evidence has probability zero: {" + s.canonical() + "}");
  return sel;
}

// ---------------------------------------------------------------------------
// Realizations of a template within one table entry

/// How a template is read off a world: ground templates by truth value,
/// non-ground templates by which ground instance holds.
class TemplateReader {
 public:
  static constexpr int none = -1;
  static constexpr int multiple = -2;

  TemplateReader(const WorldTable& table, const Atom& pattern) : table_(&table), pattern_(pattern) {
    ground_ = pattern.is_ground();
    if (ground_) {
      slot_ = table.slot(pattern);
    } else {
      slots_ = table.instance_slots(pattern);
      std::sort(slots_.begin(), slots_.end(), [&](std::size_t a, std::size_t b) {
        return to_string(table.tracked()[a]) < to_string(table.tracked()[b]);
      });
    }
  }

  bool is_ground() const noexcept { return ground_; }
  const Atom& pattern() const noexcept { return pattern_; }

  /// Number of distinct realization values (2 for ground templates).
  std::size_t arity() const noexcept { return ground_ ? 2 : slots_.size(); }

  /// Realization index: ground -> 0 true / 1 false; otherwise the instance
  /// index, or `none` / `multiple`.
  int read(const WorldTable::Entry& e) const {
    if (ground_) return (slot_ && WorldTable::bit(e.key, *slot_)) ? 0 : 1;
    int found = none;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      if (WorldTable::bit(e.key, slots_[i])) {
        if (found != none) return multiple;
        found = static_cast<int>(i);
      }
    }
    return found;
  }

  /// The evidence fact asserting realization `index`.
  EvidenceFact evidence(int index) const {
    if (ground_) return EvidenceFact{pattern_, index == 0};
    return EvidenceFact{table_->tracked()[slots_.at(static_cast<std::size_t>(index))], true};
  }

  std::string label(int index) const {
    if (index == none) return "<none>";
    if (index == multiple) return "<multiple>";
    if (ground_) return to_string(pattern_) + (index == 0 ? "=true" : "=false");
    return to_string(table_->tracked()[slots_.at(static_cast<std::size_t>(index))]);
  }

 private:
  const WorldTable* table_;
  Atom pattern_;
  bool ground_ = false;
  std::optional<std::size_t> slot_;
  std::vector<std::size_t> slots_;
};

// ---------------------------------------------------------------------------
// Distributions

using Outcome = std::vector<std::string>;

/// Finite outcome -> probability map.
struct Distribution {
  std::vector<std::string> variables;
  std::map<Outcome, double> probability;

  double total() const {
    CompensatedSum s;
    for (const auto& [_, p] : probability) s.add(p);
    return s.value();
  }

  double at(const Outcome& o) const {
    auto it = probability.find(o);
    return it == probability.end() ? 0.0 : it->second;
  }
};

/// Base-2 entropy with 0·log 0 = 0.
inline double entropy(const Distribution& d) {
  double h = 0.0;
  for (const auto& [_, p] : d.probability)
    if (p > 0) h -= p * std::log2(p);
  return h;
}

inline double binary_entropy(double p) {
  double h = 0.0;
  if (p > 0) h -= p * std::log2(p);
  if (p < 1) h -= (1 - p) * std::log2(1 - p);
  return h;
}

/// Joint distribution over the realizations of `templates` and, optionally,
/// the truth value of `query`, conditioned on the scenario.
inline Distribution joint_distribution(const Engine& engine, std::span<const Atom> templates,
                                       const std::optional<Atom>& query, const Scenario& s) {
  std::vector<Atom> need(templates.begin(), templates.end());
  if (query) need.push_back(*query);
  auto ev = evidence_atoms(engine.theory(), s);
  need.insert(need.end(), ev.begin(), ev.end());
  auto table = engine.table(need);
  Selection sel = select(*table, engine.theory(), s);

  std::vector<TemplateReader> readers;
  for (const auto& t : templates) readers.emplace_back(*table, t);

  Distribution d;
  for (const auto& t : templates) d.variables.push_back(to_string(t));
  if (query) d.variables.push_back(to_string(*query));

  std::map<Outcome, CompensatedSum> acc;
  for (const auto* e : sel.entries) {
    Outcome o;
    for (const auto& r : readers) o.push_back(r.label(r.read(*e)));
    if (query) o.push_back(table->holds(*e, *query) ? "true" : "false");
    acc[o].add(e->mass);
  }
  for (const auto& [o, m] : acc) d.probability[o] = m.value() / sel.mass;
  return d;
}

/// Pr(q | evidence): the `true` cell of the query's marginal.
inline double success_probability(const Engine& engine, const Atom& query, const Scenario& s) {
  if (!query.is_ground()) throw input_error("query must be ground: " + to_string(query));
  Distribution d = joint_distribution(engine, {}, query, s);
  return d.at({"true"});
}

}  // namespace plvoi
