#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpnas/rng.hpp"
#include "gpnas/search_space.hpp"
#include "gpnas/tpe.hpp"

namespace gpnas::bohb {

// Geometric budget grid: min_budget * eta^k, k = 0, 1, ... while <= max.
struct BudgetLadder {
  int min_budget = 4;
  int max_budget = 108;
  int eta = 3;

  void validate() const {
    if (min_budget < 1 || max_budget < min_budget || eta < 2)
      throw std::invalid_argument("BudgetLadder: need 1 <= min <= max and eta >= 2");
  }

  std::vector<int> levels() const {
    validate();
    std::vector<int> out;
    for (long long b = min_budget; b <= max_budget; b *= eta)
      out.push_back(static_cast<int>(b));
    return out;
  }
};

// --- subspace projections --------------------------------------------------

// Skip patterns as independent binary edge dimensions, constrained to leave
// no node isolated.
inline tpe::Subspace skip_subspace(int n_nodes) {
  if (n_nodes < 2) throw std::invalid_argument("skip_subspace: n_nodes must be >= 2");
  tpe::Subspace s;
  s.cardinalities.assign(static_cast<std::size_t>(n_nodes) * (n_nodes - 1) / 2, 2);
  s.valid = [n_nodes](const std::vector<int>& x) {
    for (int i = 0; i < n_nodes; ++i) {
      bool connected = false;
      for (int j = 0; j < n_nodes && !connected; ++j) {
        if (i == j) continue;
        connected = x[space::SkipPattern::pair_index(i, j, n_nodes)] != 0;
      }
      if (!connected) return false;
    }
    return true;
  };
  return s;
}

// One categorical dimension per node, indexing into the generalized-operator
// domain (the triple is one unit, so interactions inside it stay visible to
// the density model).
inline tpe::Subspace op_subspace(int n_nodes, const space::OpDomain& domain) {
  tpe::Subspace s;
  s.cardinalities.assign(static_cast<std::size_t>(n_nodes), domain.size());
  return s;
}

inline std::vector<int> skip_to_config(const space::SkipPattern& p) {
  return std::vector<int>(p.bits.begin(), p.bits.end());
}

inline space::SkipPattern config_to_skip(const std::vector<int>& x, int n_nodes) {
  space::SkipPattern p(n_nodes);
  if (x.size() != p.bits.size())
    throw std::invalid_argument("config_to_skip: wrong dimension count");
  for (std::size_t i = 0; i < x.size(); ++i) p.bits[i] = x[i] ? 1 : 0;
  return p;
}

inline std::vector<int> ops_to_config(const std::vector<space::GeneralizedOp>& ops,
                                      const space::OpDomain& domain) {
  std::vector<int> x;
  x.reserve(ops.size());
  for (const auto& g : ops) x.push_back(domain.index_of(g));
  return x;
}

inline std::vector<space::GeneralizedOp> config_to_ops(const std::vector<int>& x,
                                                       const space::OpDomain& domain) {
  std::vector<space::GeneralizedOp> ops;
  ops.reserve(x.size());
  for (int v : x) {
    if (v < 0 || v >= domain.size())
      throw std::invalid_argument("config_to_ops: index outside the domain");
    ops.push_back(domain.ops[v]);
  }
  return ops;
}

// --- successive halving ------------------------------------------------------

// One successive-halving bracket. Slots are handed out rung by rung; a rung's
// promotions are exactly its top-capacity survivors by accuracy, earlier
// timestamp winning ties.
class Bracket {
 public:
  struct Assignment {
    int rung = 0;
    int slot = 0;
    int budget = 0;
    std::optional<space::CellGraph> promoted;  // set for rungs > 0
  };

  struct Entry {
    space::CellGraph config;
    double accuracy = 0.0;
    std::int64_t timestamp = 0;
  };

  Bracket(const std::vector<int>& rung_budgets, int base_capacity, int eta) {
    if (rung_budgets.empty() || base_capacity < 1 || eta < 2)
      throw std::invalid_argument("Bracket: bad arguments");
    int capacity = base_capacity;
    for (std::size_t k = 0; k < rung_budgets.size() && capacity >= 1; ++k) {
      rungs_.push_back(Rung{rung_budgets[k], capacity, 0, {}});
      capacity /= eta;
    }
  }

  // Next evaluation slot, or nullopt once the bracket is exhausted.
  std::optional<Assignment> next() {
    for (std::size_t r = 0; r < rungs_.size(); ++r) {
      Rung& rung = rungs_[r];
      if (rung.issued == rung.capacity) continue;
      if (r > 0) {
        const Rung& prev = rungs_[r - 1];
        if (static_cast<int>(prev.entries.size()) < prev.capacity)
          throw std::logic_error("Bracket: promotion requested before rung completed");
      }
      Assignment a;
      a.rung = static_cast<int>(r);
      a.slot = rung.issued;
      a.budget = rung.budget;
      if (r > 0) a.promoted = survivors(static_cast<int>(r) - 1)[rung.issued].config;
      ++rung.issued;
      return a;
    }
    return std::nullopt;
  }

  void report(const Assignment& a, const space::CellGraph& config, double accuracy,
              std::int64_t timestamp) {
    if (a.rung < 0 || a.rung >= static_cast<int>(rungs_.size()))
      throw std::invalid_argument("Bracket::report: bad rung");
    Rung& rung = rungs_[a.rung];
    if (static_cast<int>(rung.entries.size()) >= rung.capacity)
      throw std::logic_error("Bracket::report: rung already full");
    rung.entries.push_back(Entry{config, accuracy, timestamp});
  }

  bool exhausted() const {
    for (const auto& r : rungs_)
      if (static_cast<int>(r.entries.size()) < r.capacity) return false;
    return true;
  }

  // Top-k of a completed rung in promotion order.
  std::vector<Entry> survivors(int rung_index) const {
    const Rung& rung = rungs_.at(rung_index);
    std::vector<Entry> sorted = rung.entries;
    std::sort(sorted.begin(), sorted.end(), [](const Entry& a, const Entry& b) {
      if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
      return a.timestamp < b.timestamp;
    });
    const int keep = rung_index + 1 < static_cast<int>(rungs_.size())
                         ? rungs_[rung_index + 1].capacity
                         : 1;
    if (static_cast<int>(sorted.size()) > keep) sorted.resize(keep);
    return sorted;
  }

  long long total_epochs() const {
    long long sum = 0;
    for (const auto& r : rungs_) sum += static_cast<long long>(r.budget) * r.capacity;
    return sum;
  }

  std::vector<std::pair<int, int>> rung_shape() const {  // (budget, capacity)
    std::vector<std::pair<int, int>> out;
    for (const auto& r : rungs_) out.emplace_back(r.budget, r.capacity);
    return out;
  }

 private:
  struct Rung {
    int budget = 0;
    int capacity = 0;
    int issued = 0;
    std::vector<Entry> entries;
  };

  std::vector<Rung> rungs_;
};

// Standard Hyperband bracket sequence over a budget grid, cycled forever:
// stage s runs ceil((s_max+1)/(s+1)) * eta^s configurations starting at
// level s_max - s.
class HyperbandCycle {
 public:
  HyperbandCycle(std::vector<int> levels, int eta) : levels_(std::move(levels)), eta_(eta) {
    if (levels_.empty() || eta < 2) throw std::invalid_argument("HyperbandCycle: bad arguments");
    stage_ = s_max();
  }

  int s_max() const { return static_cast<int>(levels_.size()) - 1; }

  Bracket next_bracket() {
    const int s = stage_;
    stage_ = stage_ == 0 ? s_max() : stage_ - 1;
    std::vector<int> budgets(levels_.begin() + (s_max() - s), levels_.end());
    double pow_eta = 1.0;
    for (int i = 0; i < s; ++i) pow_eta *= eta_;
    const int n0 = static_cast<int>(
        std::ceil(static_cast<double>(s_max() + 1) / (s + 1) * pow_eta - 1e-9));
    return Bracket(budgets, n0, eta_);
  }

 private:
  std::vector<int> levels_;
  int eta_;
  int stage_;
};

// --- alternation -------------------------------------------------------------

// Runs the two coupled proposers, skip connections first, then operators,
// each against its own projected observation pool. A locked component is
// passed through untouched (used by the fixed-structure studies); a proposed
// skip pattern goes through the drop blocker before it is returned.
class AlternateSampler {
 public:
  AlternateSampler(int n_nodes, space::OpDomain domain, tpe::SplitSpec spec,
                   space::DropBlocker blocker)
      : n_nodes_(n_nodes),
        domain_(std::move(domain)),
        spec_(spec),
        blocker_(blocker),
        skip_space_(skip_subspace(n_nodes)),
        op_space_(op_subspace(n_nodes, domain_)) {
    spec_.validate();
  }

  space::CellGraph sample(Rng& rng) {
    space::CellGraph cell;
    const int attempts = fixed_skip_ && fixed_ops_ ? 1 : 4;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (fixed_skip_) {
        cell.skip = *fixed_skip_;
      } else {
        cell.skip = config_to_skip(tpe::propose(skip_pool_, spec_, skip_space_, rng), n_nodes_);
        cell.skip = space::apply_drop_blocker(cell.skip, blocker_, rng);
        blocker_.advance();
      }
      if (fixed_ops_) {
        cell.ops = *fixed_ops_;
      } else {
        // nudge the guided branch toward cells the run has not evaluated yet
        const auto fresh = [&](const std::vector<int>& ops_config) {
          space::CellGraph probe;
          probe.skip = cell.skip;
          probe.ops = config_to_ops(ops_config, domain_);
          return !evaluated_.count(space::encode_cell(probe));
        };
        cell.ops = config_to_ops(tpe::propose(op_pool_, spec_, op_space_, rng, fresh), domain_);
      }
      if (!evaluated_.count(space::encode_cell(cell))) break;
    }
    return cell;
  }

  // Feeds one evaluation back into both projected pools and the incumbent.
  void record(const space::CellGraph& cell, int budget, double accuracy) {
    if (accuracy < 0.0 || accuracy > 1.0)
      throw std::invalid_argument("record: accuracy must be in [0,1]");
    if (budget < 1) throw std::invalid_argument("record: budget must be >= 1");
    const std::int64_t ts = next_timestamp_++;
    skip_pool_.push_back({skip_to_config(cell.skip), budget, accuracy, ts});
    op_pool_.push_back({ops_to_config(cell.ops, domain_), budget, accuracy, ts});
    evaluated_.insert(space::encode_cell(cell));
    if (!incumbent_ || accuracy > incumbent_accuracy_) {
      incumbent_ = cell;
      incumbent_accuracy_ = accuracy;
    }
  }

  void lock_skip(space::SkipPattern p) {
    if (p.n_nodes != n_nodes_ || !p.valid())
      throw std::invalid_argument("lock_skip: invalid pattern");
    fixed_skip_ = std::move(p);
  }
  void unlock_skip() { fixed_skip_.reset(); }

  void lock_ops(std::vector<space::GeneralizedOp> ops) {
    if (ops.size() != static_cast<std::size_t>(n_nodes_))
      throw std::invalid_argument("lock_ops: wrong length");
    for (const auto& g : ops)
      if (!domain_.contains(g)) throw std::invalid_argument("lock_ops: op outside domain");
    fixed_ops_ = std::move(ops);
  }
  void unlock_ops() { fixed_ops_.reset(); }

  const std::optional<space::CellGraph>& incumbent() const { return incumbent_; }
  double incumbent_accuracy() const { return incumbent_accuracy_; }
  std::int64_t observations() const { return next_timestamp_; }
  const std::vector<tpe::Observation>& skip_pool() const { return skip_pool_; }
  const std::vector<tpe::Observation>& op_pool() const { return op_pool_; }
  const space::OpDomain& domain() const { return domain_; }
  int n_nodes() const { return n_nodes_; }
  const space::DropBlocker& blocker() const { return blocker_; }

 private:
  int n_nodes_;
  space::OpDomain domain_;
  tpe::SplitSpec spec_;
  space::DropBlocker blocker_;
  tpe::Subspace skip_space_;
  tpe::Subspace op_space_;
  std::vector<tpe::Observation> skip_pool_;
  std::vector<tpe::Observation> op_pool_;
  std::optional<space::SkipPattern> fixed_skip_;
  std::optional<std::vector<space::GeneralizedOp>> fixed_ops_;
  std::optional<space::CellGraph> incumbent_;
  double incumbent_accuracy_ = -1.0;
  std::int64_t next_timestamp_ = 0;
  std::set<std::string> evaluated_;
};

}  // namespace gpnas::bohb
