#pragma once

#include <deque>
#include <stdexcept>
#include <vector>

#include "gpnas/benchmark.hpp"
#include "gpnas/bohb.hpp"
#include "gpnas/rng.hpp"
#include "gpnas/search_space.hpp"
#include "gpnas/trace.hpp"

namespace gpnas::baselines {

// Evaluation bookkeeping shared by every searcher: charges the budget,
// maintains the validation incumbent and its test accuracy, and appends one
// trace step per oracle call.
class TraceRecorder {
 public:
  explicit TraceRecorder(const bench::Oracle& oracle) : oracle_(&oracle) {}

  bool fits(int budget, const RunLimits& limits) const {
    return cum_epochs_ + budget <= limits.max_cost && n_evals_ < limits.max_evals;
  }

  double observe(const space::CellGraph& cell, int budget) {
    const double val = oracle_->validation_accuracy(cell, budget);
    cum_epochs_ += budget;
    ++n_evals_;
    if (val > best_val_) {
      best_val_ = val;
      best_cell_ = cell;
      best_test_ = oracle_->test_accuracy(cell);
    }
    trace_.add(cum_epochs_, best_val_, best_test_);
    return val;
  }

  RunResult result() const {
    RunResult r;
    r.trace = trace_;
    r.best_cell = best_cell_;
    r.best_val = best_val_;
    r.best_test = best_test_;
    r.cum_epochs = cum_epochs_;
    r.n_evals = n_evals_;
    return r;
  }

  long long cum_epochs() const { return cum_epochs_; }
  long long n_evals() const { return n_evals_; }
  double best_val() const { return best_val_; }

 private:
  const bench::Oracle* oracle_;
  RegretTrace trace_;
  space::CellGraph best_cell_;
  double best_val_ = -1.0;
  double best_test_ = 0.0;
  long long cum_epochs_ = 0;
  long long n_evals_ = 0;
};

struct EvolutionConfig {
  int population_size = 50;
  int tournament_size = 10;

  void validate() const {
    if (population_size < 2)
      throw std::invalid_argument("EvolutionConfig: population_size >= 2");
    if (tournament_size < 1 || tournament_size > population_size)
      throw std::invalid_argument("EvolutionConfig: tournament_size in [1, population]");
  }
};

// One mutation: flip a skip edge, or move one coordinate (operator,
// activation, initialization) of one node to a different value that stays
// inside the domain. Restricted domains that pin coordinates together fall
// back to redrawing the whole node triple.
inline space::CellGraph mutate(const space::CellGraph& cell, const space::OpDomain& domain,
                               Rng& rng) {
  const int n = cell.skip.n_nodes;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const int kind = static_cast<int>(rng.uniform_index(4));
    space::CellGraph child = cell;
    if (kind == 0) {
      const auto bit = rng.uniform_index(child.skip.bits.size());
      child.skip.bits[bit] ^= 1;
      if (child.skip.valid()) return child;
      continue;
    }
    const int node = static_cast<int>(rng.uniform_index(n));
    const space::GeneralizedOp current = child.ops[node];
    std::vector<space::GeneralizedOp> candidates;
    for (const auto& g : domain.ops) {
      const bool differs_here = (kind == 1 && g.op != current.op && g.act == current.act &&
                                 g.init == current.init) ||
                                (kind == 2 && g.act != current.act && g.op == current.op &&
                                 g.init == current.init) ||
                                (kind == 3 && g.init != current.init && g.op == current.op &&
                                 g.act == current.act);
      if (differs_here) candidates.push_back(g);
    }
    if (candidates.empty()) {
      if (domain.size() < 2) continue;  // nothing to change but the edges
      space::GeneralizedOp g = current;
      while (g == current) g = domain.ops[rng.uniform_index(domain.ops.size())];
      child.ops[node] = g;
      return child;
    }
    child.ops[node] = candidates[rng.uniform_index(candidates.size())];
    return child;
  }
  throw std::runtime_error("mutate: no valid mutation found");
}

// Uniform sampling at full budget, memoryless.
inline RunResult run_random_search(const bench::Oracle& oracle, std::uint64_t seed,
                                   const RunLimits& limits, const EvalObserver& observer = {}) {
  Rng rng(seed);
  TraceRecorder recorder(oracle);
  const int budget = oracle.max_budget();
  while (recorder.fits(budget, limits)) {
    const auto cell = space::uniform_cell(oracle.n_nodes(), oracle.op_domain(), rng);
    const double val = recorder.observe(cell, budget);
    if (observer && observer(cell, budget, val)) break;
  }
  return recorder.result();
}

// Aging evolution: tournament selection over the current population, one
// mutation per child, and removal of the oldest member once the population
// is full (never the worst).
class RegularizedEvolution {
 public:
  struct Individual {
    space::CellGraph cell;
    double accuracy;
  };

  RegularizedEvolution(const bench::Oracle& oracle, EvolutionConfig config,
                       std::uint64_t seed)
      : oracle_(&oracle), config_(config), rng_(seed) {
    config_.validate();
  }

  // One evaluation: warm-up draws are uniform, afterwards a tournament
  // parent is mutated. Appends the child and retires the oldest member.
  std::pair<space::CellGraph, double> step(TraceRecorder& recorder) {
    space::CellGraph cell;
    if (static_cast<int>(population_.size()) < config_.population_size) {
      cell = space::uniform_cell(oracle_->n_nodes(), oracle_->op_domain(), rng_);
    } else {
      pick_.resize(population_.size());
      for (std::size_t i = 0; i < pick_.size(); ++i) pick_[i] = i;
      for (int i = 0; i < config_.tournament_size; ++i) {
        const std::size_t j = i + rng_.uniform_index(pick_.size() - i);
        std::swap(pick_[i], pick_[j]);
      }
      std::size_t parent = pick_[0];
      for (int i = 1; i < config_.tournament_size; ++i)
        if (population_[pick_[i]].accuracy > population_[parent].accuracy)
          parent = pick_[i];
      cell = mutate(population_[parent].cell, oracle_->op_domain(), rng_);
    }
    const double val = recorder.observe(cell, oracle_->max_budget());
    population_.push_back({cell, val});
    if (static_cast<int>(population_.size()) > config_.population_size)
      population_.pop_front();
    return {cell, val};
  }

  const std::deque<Individual>& population() const { return population_; }

 private:
  const bench::Oracle* oracle_;
  EvolutionConfig config_;
  Rng rng_;
  std::deque<Individual> population_;
  std::vector<std::size_t> pick_;
};

inline RunResult run_regularized_evolution(const bench::Oracle& oracle,
                                           const EvolutionConfig& config, std::uint64_t seed,
                                           const RunLimits& limits,
                                           const EvalObserver& observer = {}) {
  RegularizedEvolution evolution(oracle, config, seed);
  TraceRecorder recorder(oracle);
  while (recorder.fits(oracle.max_budget(), limits)) {
    const auto [cell, val] = evolution.step(recorder);
    if (observer && observer(cell, oracle.max_budget(), val)) break;
  }
  return recorder.result();
}

// The proposal engine at full budget only, no successive halving. The drop
// blocker stays off so that rho = 1 reduces exactly to random search.
inline RunResult run_pure_tpe(const bench::Oracle& oracle, const tpe::SplitSpec& spec,
                              std::uint64_t seed, const RunLimits& limits,
                              const EvalObserver& observer = {}) {
  Rng rng(seed);
  TraceRecorder recorder(oracle);
  const int budget = oracle.max_budget();
  bohb::AlternateSampler sampler(oracle.n_nodes(), oracle.op_domain(), spec,
                                 space::DropBlocker{0.0, 1.0, 0});
  while (recorder.fits(budget, limits)) {
    const auto cell = sampler.sample(rng);
    const double val = recorder.observe(cell, budget);
    sampler.record(cell, budget, val);
    if (observer && observer(cell, budget, val)) break;
  }
  return recorder.result();
}

// Hyperband with uniform sampling: the bracket scheduler run with the
// proposal loop pinned to its random branch.
inline RunResult run_hyperband_random(const bench::Oracle& oracle, std::uint64_t seed,
                                      const RunLimits& limits,
                                      const EvalObserver& observer = {},
                                      space::DropBlocker blocker = {0.0, 1.0, 0}) {
  Rng rng(seed);
  TraceRecorder recorder(oracle);
  tpe::SplitSpec spec;
  spec.random_fraction = 1.0;
  bohb::AlternateSampler sampler(oracle.n_nodes(), oracle.op_domain(), spec, blocker);
  bohb::HyperbandCycle cycle(oracle.budgets(), oracle.eta());
  bool stop = false;
  std::int64_t timestamp = 0;
  while (!stop) {
    bohb::Bracket bracket = cycle.next_bracket();
    while (auto slot = bracket.next()) {
      if (!recorder.fits(slot->budget, limits)) {
        stop = true;
        break;
      }
      const space::CellGraph cell = slot->promoted ? *slot->promoted : sampler.sample(rng);
      const double val = recorder.observe(cell, slot->budget);
      sampler.record(cell, slot->budget, val);
      bracket.report(*slot, cell, val, timestamp++);
      if (observer && observer(cell, slot->budget, val)) {
        stop = true;
        break;
      }
    }
  }
  return recorder.result();
}

}  // namespace gpnas::baselines
