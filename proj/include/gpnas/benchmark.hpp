#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gpnas/bohb.hpp"
#include "gpnas/rng.hpp"
#include "gpnas/search_space.hpp"

namespace gpnas::bench {

struct OracleSpec {
  int n_nodes = 4;
  int n_ops = 3;  // size of the generalized-operator domain; 156 is the full space
  std::uint64_t seed = 1;
  double noise_sd = 0.01;
  bohb::BudgetLadder ladder;

  void validate() const {
    if (n_nodes < 2 || n_nodes > 7) throw std::invalid_argument("OracleSpec: n_nodes in [2,7]");
    if (n_ops < 1 || n_ops > space::kNumGeneralizedOps)
      throw std::invalid_argument("OracleSpec: n_ops in [1,156]");
    if (noise_sd < 0.0) throw std::invalid_argument("OracleSpec: noise_sd >= 0");
    ladder.validate();
  }
};

struct BenchRecord {
  std::string cell_encoding;
  std::map<int, double> accuracy_by_budget;
  double test_accuracy = 0.0;
};

struct SpaceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownCell : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Evaluation oracle standing in for child-model training. Implementations
// are immutable after construction; queries are pure and thread-safe.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual double validation_accuracy(const space::CellGraph& cell, int budget) const = 0;
  virtual double test_accuracy(const space::CellGraph& cell) const = 0;
  virtual const std::vector<int>& budgets() const = 0;
  virtual const space::OpDomain& op_domain() const = 0;
  virtual int n_nodes() const = 0;
  virtual int eta() const = 0;
  // Known global optimum at max budget, when the space is enumerable.
  virtual std::optional<double> optimum_accuracy() const { return std::nullopt; }
  virtual const space::CellGraph* optimum_cell() const { return nullptr; }

  int max_budget() const { return budgets().back(); }
};

namespace detail {

inline double unit(std::uint64_t seed, std::initializer_list<std::uint64_t> tokens) {
  std::uint64_t h = mix64(seed);
  for (auto t : tokens) h = hash_combine(h, t);
  return unit_from_hash(h);
}

inline double gauss(std::uint64_t seed, std::initializer_list<std::uint64_t> tokens) {
  std::uint64_t h = mix64(seed ^ 0x5851f42d4c957f2dULL);
  for (auto t : tokens) h = hash_combine(h, t);
  const double u1 = std::max(unit_from_hash(h), 1e-12);
  const double u2 = unit_from_hash(mix64(h ^ 0xda3e39cb94b95bdbULL));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

enum FeatureTag : std::uint64_t {
  kEdgeCount = 1,
  kOpEffect = 2,
  kOpDegree = 3,
  kActInit = 4,
  kEdgePair = 5,
  kTimeConstant = 6,
  kValNoise = 7,
  kTestNoise = 8,
};

}  // namespace detail

// Deterministic synthetic tabular benchmark. The base score mixes hashed
// structural features (edge count, per-node operator effects,
// operator-degree and activation-initialization interactions, and
// edge-endpoint pairings) so neither sub-space is separable from the other;
// budgets follow a saturating per-cell learning curve and observation noise
// is itself a pure function of (cell, budget, seed).
class SyntheticOracle : public Oracle {
 public:
  explicit SyntheticOracle(OracleSpec spec)
      : spec_(std::move(spec)),
        domain_(spec_.n_ops == space::kNumGeneralizedOps ? space::OpDomain::full()
                                                         : space::OpDomain::reduced(spec_.n_ops)),
        levels_(spec_.ladder.levels()) {
    spec_.validate();
    if (exhaustive_cardinality() <= kExhaustiveLimit) compute_optimum();
  }

  double validation_accuracy(const space::CellGraph& cell, int budget) const override {
    check_cell(cell);
    if (std::find(levels_.begin(), levels_.end(), budget) == levels_.end())
      throw std::invalid_argument("SyntheticOracle: budget " + std::to_string(budget) +
                                  " is not on the ladder");
    const std::uint64_t ch = cell_hash(cell);
    double acc = ceiling(cell) * curve(budget, ch);
    if (spec_.noise_sd > 0.0)
      acc += spec_.noise_sd *
             detail::gauss(spec_.seed, {detail::kValNoise, ch, static_cast<std::uint64_t>(budget)});
    return std::clamp(acc, 0.0, 1.0);
  }

  double test_accuracy(const space::CellGraph& cell) const override {
    check_cell(cell);
    const std::uint64_t ch = cell_hash(cell);
    double acc = ceiling(cell) * curve(levels_.back(), ch);
    if (spec_.noise_sd > 0.0)
      acc += spec_.noise_sd * detail::gauss(spec_.seed, {detail::kTestNoise, ch});
    return std::clamp(acc, 0.0, 1.0);
  }

  const std::vector<int>& budgets() const override { return levels_; }
  const space::OpDomain& op_domain() const override { return domain_; }
  int n_nodes() const override { return spec_.n_nodes; }
  int eta() const override { return spec_.ladder.eta; }

  std::optional<double> optimum_accuracy() const override { return optimum_accuracy_; }
  const space::CellGraph* optimum_cell() const override {
    return optimum_cell_ ? &*optimum_cell_ : nullptr;
  }

  const OracleSpec& spec() const { return spec_; }

  long double exhaustive_cardinality() const {
    // valid patterns by inclusion-exclusion over isolated-vertex sets
    const int n = spec_.n_nodes;
    long long patterns = 0;
    for (int k = 0; k <= n; ++k) {
      long long choose = 1;
      for (int i = 0; i < k; ++i) choose = choose * (n - i) / (i + 1);
      const int m = (n - k) * (n - k - 1) / 2;
      patterns += (k % 2 ? -1LL : 1LL) * choose * (1LL << m);
    }
    long double count = static_cast<long double>(patterns);
    for (int i = 0; i < n; ++i) count *= domain_.size();
    return count;
  }

 private:
  static constexpr long double kExhaustiveLimit = 400000.0L;

  void check_cell(const space::CellGraph& cell) const {
    if (!cell.valid() || cell.skip.n_nodes != spec_.n_nodes)
      throw std::invalid_argument("SyntheticOracle: invalid cell for this space");
    for (const auto& g : cell.ops)
      if (!domain_.contains(g))
        throw std::invalid_argument("SyntheticOracle: operator outside the domain");
  }

  std::uint64_t cell_hash(const space::CellGraph& cell) const {
    return hash_str(spec_.seed, space::encode_cell(cell));
  }

  // Hash-random coefficients attached to smooth feature shapes, so single
  // edits move the score by a bounded amount while the operator, activation,
  // initialization and topology axes all interact.
  double ceiling(const space::CellGraph& cell) const {
    const auto u = [this](std::initializer_list<std::uint64_t> tokens) {
      return detail::unit(spec_.seed, tokens);
    };
    const int n = cell.skip.n_nodes;
    double op_effect = 0.0, op_degree = 0.0, act_init = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto gid = static_cast<std::uint64_t>(cell.ops[i].global_id());
      op_effect += u({detail::kOpEffect, gid});
      // per-operator affinity for connectivity, linear in the node degree
      op_degree += u({detail::kOpDegree, gid}) *
                   (static_cast<double>(cell.skip.degree(i)) / (n - 1));
      act_init += u({detail::kActInit, static_cast<std::uint64_t>(cell.ops[i].act),
                     static_cast<std::uint64_t>(cell.ops[i].init)});
    }
    op_effect /= n;
    op_degree /= n;
    act_init /= n;
    double pair_effect = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (!cell.skip.edge(i, j)) continue;
        const auto a = static_cast<std::uint64_t>(
            std::min(cell.ops[i].global_id(), cell.ops[j].global_id()));
        const auto b = static_cast<std::uint64_t>(
            std::max(cell.ops[i].global_id(), cell.ops[j].global_id()));
        pair_effect += u({detail::kEdgePair, a, b});
        ++pairs;
      }
    }
    pair_effect /= pairs;  // valid cells always have at least one edge
    // unimodal preference over the edge count with a hash-chosen peak
    const int max_edges = n * (n - 1) / 2;
    const double peak = std::round(u({detail::kEdgeCount}) * max_edges);
    const double edges =
        1.0 - std::fabs(static_cast<double>(cell.skip.edge_count()) - peak) / max_edges;
    const double base = 0.15 * edges + 0.42 * op_effect + 0.10 * op_degree +
                        0.25 * act_init + 0.08 * pair_effect;
    return 0.5 + 0.45 * base;
  }

  // Saturating learning curve. The time-constant band keeps the lowest
  // ladder rung noisy but rank-informative, as tabular benchmarks are.
  double curve(int budget, std::uint64_t cell_hash) const {
    const double tau = 3.0 + 7.0 * detail::unit(spec_.seed, {detail::kTimeConstant, cell_hash});
    return 1.0 - std::exp(-static_cast<double>(budget) / tau);
  }

  void compute_optimum();

  OracleSpec spec_;
  space::OpDomain domain_;
  std::vector<int> levels_;
  std::optional<double> optimum_accuracy_;
  std::optional<space::CellGraph> optimum_cell_;
};

// Visits every valid cell of the configured space in canonical order: skip
// patterns by ascending bitmask, operator assignments as an odometer over
// domain indices with node 0 most significant.
template <typename Fn>
void for_each_cell(int n_nodes, const space::OpDomain& domain, Fn&& fn) {
  const auto patterns = space::enumerate_skip_patterns(n_nodes);
  for (const auto& pattern : patterns) {
    std::vector<int> odometer(n_nodes, 0);
    while (true) {
      space::CellGraph cell;
      cell.skip = pattern;
      cell.ops.reserve(n_nodes);
      for (int v : odometer) cell.ops.push_back(domain.ops[v]);
      fn(cell);
      int d = n_nodes - 1;
      while (d >= 0 && ++odometer[d] == domain.size()) odometer[d--] = 0;
      if (d < 0) break;
    }
  }
}

inline void SyntheticOracle::compute_optimum() {
  const int top = levels_.back();
  for_each_cell(spec_.n_nodes, domain_, [&](const space::CellGraph& cell) {
    const double acc = validation_accuracy(cell, top);
    if (!optimum_accuracy_ || acc > *optimum_accuracy_ ||
        (acc == *optimum_accuracy_ &&
         space::encode_cell(cell) < space::encode_cell(*optimum_cell_))) {
      optimum_accuracy_ = acc;
      optimum_cell_ = cell;
    }
  });
}

// Materializes the whole space as records. Exhaustive mode is limited to
// n_nodes <= 5; the error reports the cardinality that was attempted.
inline std::vector<BenchRecord> enumerate_space(const OracleSpec& spec) {
  spec.validate();
  if (spec.n_nodes > 5) {
    std::ostringstream msg;
    msg << "enumerate_space: n_nodes " << spec.n_nodes << " exceeds the exhaustive limit of 5";
    throw SpaceTooLarge(msg.str());
  }
  const SyntheticOracle oracle(spec);
  const long double cardinality = oracle.exhaustive_cardinality();
  if (cardinality > 2e6L) {
    std::ostringstream msg;
    msg << "enumerate_space: space holds " << static_cast<double>(cardinality)
        << " cells, above the 2e6 limit";
    throw SpaceTooLarge(msg.str());
  }
  std::vector<BenchRecord> records;
  records.reserve(static_cast<std::size_t>(cardinality));
  for_each_cell(spec.n_nodes, oracle.op_domain(), [&](const space::CellGraph& cell) {
    BenchRecord rec;
    rec.cell_encoding = space::encode_cell(cell);
    for (int b : oracle.budgets())
      rec.accuracy_by_budget[b] = oracle.validation_accuracy(cell, b);
    rec.test_accuracy = oracle.test_accuracy(cell);
    records.push_back(std::move(rec));
  });
  return records;
}

// --- record files ------------------------------------------------------------
//
// Line format (tab separated, accuracies written with %.17g):
//   <cell-encoding> TAB budget=acc;budget=acc;... TAB test_acc

inline void save_records(const std::vector<BenchRecord>& records, std::ostream& out) {
  char buf[32];
  for (const auto& rec : records) {
    out << rec.cell_encoding << '\t';
    bool first = true;
    for (const auto& [budget, acc] : rec.accuracy_by_budget) {
      std::snprintf(buf, sizeof buf, "%.17g", acc);
      out << (first ? "" : ";") << budget << '=' << buf;
      first = false;
    }
    std::snprintf(buf, sizeof buf, "%.17g", rec.test_accuracy);
    out << '\t' << buf << '\n';
  }
}

inline void save_records_file(const std::vector<BenchRecord>& records,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_records: cannot open " + path);
  save_records(records, out);
}

inline std::vector<BenchRecord> parse_records(std::istream& in) {
  std::vector<BenchRecord> records;
  std::string line;
  int line_no = 0;
  const auto fail = [&line_no](const std::string& why) {
    throw ParseError("record file line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = space::detail::split(line, '\t');
    if (fields.size() != 3) fail("expected 3 tab-separated fields");
    BenchRecord rec;
    rec.cell_encoding = fields[0];
    try {
      space::decode_cell(rec.cell_encoding);
    } catch (const std::exception& e) {
      fail(std::string("bad cell encoding: ") + e.what());
    }
    for (const auto& item : space::detail::split(fields[1], ';')) {
      const auto kv = space::detail::split(item, '=');
      if (kv.size() != 2) fail("expected budget=accuracy, got: " + item);
      int budget = 0;
      double acc = 0.0;
      try {
        budget = space::detail::parse_int(kv[0], "budget");
        std::size_t pos = 0;
        acc = std::stod(kv[1], &pos);
        if (pos != kv[1].size()) fail("trailing junk after accuracy: " + kv[1]);
      } catch (const ParseError&) {
        throw;
      } catch (const std::exception&) {
        fail("malformed budget=accuracy pair: " + item);
      }
      if (budget < 1) fail("budget must be >= 1");
      if (acc < 0.0 || acc > 1.0) fail("accuracy " + kv[1] + " outside [0,1]");
      rec.accuracy_by_budget[budget] = acc;
    }
    if (rec.accuracy_by_budget.empty()) fail("no budget entries");
    try {
      std::size_t pos = 0;
      rec.test_accuracy = std::stod(fields[2], &pos);
      if (pos != fields[2].size()) fail("trailing junk after test accuracy");
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed test accuracy: " + fields[2]);
    }
    if (rec.test_accuracy < 0.0 || rec.test_accuracy > 1.0)
      fail("test accuracy outside [0,1]");
    records.push_back(std::move(rec));
  }
  return records;
}

// Lookup oracle over a fixed record set. The budget grid, node count and
// operator domain are inferred from the records; unknown cells are errors.
class TabularOracle : public Oracle {
 public:
  explicit TabularOracle(std::vector<BenchRecord> records) : records_(std::move(records)) {
    if (records_.empty()) throw std::invalid_argument("TabularOracle: no records");
    std::set<int> gids;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& rec = records_[i];
      const auto cell = space::decode_cell(rec.cell_encoding);
      if (i == 0) {
        n_nodes_ = cell.skip.n_nodes;
        for (const auto& [b, acc] : rec.accuracy_by_budget) levels_.push_back(b);
      } else {
        if (cell.skip.n_nodes != n_nodes_)
          throw std::invalid_argument("TabularOracle: mixed node counts");
        std::vector<int> budgets;
        for (const auto& [b, acc] : rec.accuracy_by_budget) budgets.push_back(b);
        if (budgets != levels_)
          throw std::invalid_argument("TabularOracle: records disagree on the budget grid");
      }
      for (const auto& g : cell.ops) gids.insert(g.global_id());
      if (!index_.emplace(rec.cell_encoding, i).second)
        throw std::invalid_argument("TabularOracle: duplicate cell " + rec.cell_encoding);
      const double top = rec.accuracy_by_budget.rbegin()->second;
      if (!optimum_accuracy_ || top > *optimum_accuracy_ ||
          (top == *optimum_accuracy_ && rec.cell_encoding < space::encode_cell(*optimum_cell_))) {
        optimum_accuracy_ = top;
        optimum_cell_ = cell;
      }
    }
    for (int gid : gids) domain_.ops.push_back(space::GeneralizedOp::from_global_id(gid));
    eta_ = levels_.size() >= 2 && levels_[1] % levels_[0] == 0 &&
                   levels_[1] / levels_[0] >= 2
               ? levels_[1] / levels_[0]
               : 3;
  }

  double validation_accuracy(const space::CellGraph& cell, int budget) const override {
    const auto& rec = find(cell);
    const auto it = rec.accuracy_by_budget.find(budget);
    if (it == rec.accuracy_by_budget.end())
      throw std::invalid_argument("TabularOracle: budget " + std::to_string(budget) +
                                  " is not on the ladder");
    return it->second;
  }

  double test_accuracy(const space::CellGraph& cell) const override {
    return find(cell).test_accuracy;
  }

  const std::vector<int>& budgets() const override { return levels_; }
  const space::OpDomain& op_domain() const override { return domain_; }
  int n_nodes() const override { return n_nodes_; }
  int eta() const override { return eta_; }
  std::optional<double> optimum_accuracy() const override { return optimum_accuracy_; }
  const space::CellGraph* optimum_cell() const override {
    return optimum_cell_ ? &*optimum_cell_ : nullptr;
  }
  std::size_t size() const { return records_.size(); }
  const std::vector<BenchRecord>& records() const { return records_; }

 private:
  const BenchRecord& find(const space::CellGraph& cell) const {
    const auto it = index_.find(space::encode_cell(cell));
    if (it == index_.end())
      throw UnknownCell("TabularOracle: no record for cell " + space::encode_cell(cell));
    return records_[it->second];
  }

  std::vector<BenchRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<int> levels_;
  space::OpDomain domain_;
  int n_nodes_ = 0;
  int eta_ = 3;
  std::optional<double> optimum_accuracy_;
  std::optional<space::CellGraph> optimum_cell_;
};

inline TabularOracle load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_records: cannot open " + path);
  return TabularOracle(parse_records(in));
}

}  // namespace gpnas::bench
