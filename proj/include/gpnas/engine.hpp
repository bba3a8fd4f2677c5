#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpnas/baselines.hpp"
#include "gpnas/benchmark.hpp"
#include "gpnas/bohb.hpp"
#include "gpnas/predictor.hpp"
#include "gpnas/rng.hpp"
#include "gpnas/search_space.hpp"
#include "gpnas/trace.hpp"

namespace gpnas::engine {

struct EngineConfig {
  tpe::SplitSpec split;
  space::DropBlocker blocker{0.9, 0.98, 0};
  predictor::TrainConfig train;
  int warmup_evals = 100;         // evaluations before the predictor activates
  int filter_pool = 16;           // candidates scored per filtering round
  double filter_quantile = 0.25;  // fraction of the scored pool kept
  int retrain_every = 50;
  // caps one retrain at this many sample passes, shrinking the epoch count
  // once the dataset outgrows it
  long long max_train_passes = 50000;

  void validate() const {
    split.validate();
    train.validate();
    if (warmup_evals < 0) throw std::invalid_argument("EngineConfig: warmup_evals >= 0");
    if (filter_pool < 1) throw std::invalid_argument("EngineConfig: filter_pool >= 1");
    if (filter_quantile <= 0.0 || filter_quantile > 1.0)
      throw std::invalid_argument("EngineConfig: filter_quantile in (0,1]");
    if (retrain_every < 1) throw std::invalid_argument("EngineConfig: retrain_every >= 1");
    if (max_train_passes < 1)
      throw std::invalid_argument("EngineConfig: max_train_passes >= 1");
  }
};

struct SearchResult : RunResult {
  predictor::PredictorParams params;
  bool predictor_trained = false;
  std::vector<predictor::GraphSample> dataset;  // one entry per evaluation
  std::size_t skip_pool_size = 0;
  std::size_t op_pool_size = 0;
};

namespace detail {

inline constexpr std::uint64_t kPredictorSalt = 0x9e3779b97f4a7c15ULL;

inline int level_index(const std::vector<int>& levels, int budget) {
  for (std::size_t i = 0; i < levels.size(); ++i)
    if (levels[i] == budget) return static_cast<int>(i);
  throw std::invalid_argument("level_index: budget not on the ladder");
}

}  // namespace detail

// The full search loop: alternating proposals feed a Hyperband bracket
// cycle; after warmup the surrogate scores pools of proposals and only the
// top quantile reaches the oracle (filtered-out candidates cost nothing);
// every real evaluation feeds back into both proposal pools and the
// surrogate's training set.
inline SearchResult run_search(const EngineConfig& config, const bench::Oracle& oracle,
                               std::uint64_t seed, const RunLimits& limits,
                               const EvalObserver& observer = {},
                               const std::optional<space::SkipPattern>& fixed_skip = {}) {
  config.validate();
  Rng rng(seed);
  Rng predictor_rng(mix64(seed ^ detail::kPredictorSalt));
  const std::vector<int>& levels = oracle.budgets();

  bohb::AlternateSampler sampler(oracle.n_nodes(), oracle.op_domain(), config.split,
                                 config.blocker);
  if (fixed_skip) sampler.lock_skip(*fixed_skip);

  baselines::TraceRecorder recorder(oracle);
  bohb::HyperbandCycle cycle(levels, oracle.eta());
  predictor::PredictorParams params =
      predictor::PredictorParams::init(config.train, static_cast<int>(levels.size()),
                                       predictor_rng);
  bool predictor_trained = false;
  std::vector<predictor::GraphSample> dataset;
  std::deque<space::CellGraph> filtered;
  std::int64_t timestamp = 0;

  const auto retrain = [&] {
    predictor::TrainConfig tc = config.train;
    const auto affordable = static_cast<int>(
        config.max_train_passes / static_cast<long long>(dataset.size()));
    tc.epochs = std::max(1, std::min(tc.epochs, affordable));
    params = predictor::PredictorParams::init(tc, static_cast<int>(levels.size()),
                                              predictor_rng);
    predictor::train(params, dataset, tc, predictor_rng);
    predictor_trained = true;
  };

  const int keep = std::max(
      1, static_cast<int>(std::ceil(config.filter_pool * config.filter_quantile - 1e-9)));

  const auto next_candidate = [&](int budget) -> space::CellGraph {
    if (!predictor_trained) return sampler.sample(rng);
    if (filtered.empty()) {
      std::vector<space::CellGraph> pool;
      pool.reserve(config.filter_pool);
      for (int i = 0; i < config.filter_pool; ++i) pool.push_back(sampler.sample(rng));
      const auto ranked =
          predictor::rank_candidates(params, pool, detail::level_index(levels, budget));
      for (int i = 0; i < keep; ++i) filtered.push_back(pool[ranked[i].index]);
    }
    space::CellGraph cell = filtered.front();
    filtered.pop_front();
    return cell;
  };

  bool stop = false;
  while (!stop) {
    bohb::Bracket bracket = cycle.next_bracket();
    while (auto slot = bracket.next()) {
      if (!recorder.fits(slot->budget, limits)) {
        stop = true;
        break;
      }
      const space::CellGraph cell =
          slot->promoted ? *slot->promoted : next_candidate(slot->budget);
      const double val = recorder.observe(cell, slot->budget);
      sampler.record(cell, slot->budget, val);
      dataset.push_back(
          predictor::make_sample(cell, detail::level_index(levels, slot->budget), val));
      bracket.report(*slot, cell, val, timestamp++);

      const long long evals = recorder.n_evals();
      if (evals >= config.warmup_evals &&
          (evals == config.warmup_evals ||
           (evals - config.warmup_evals) % config.retrain_every == 0))
        retrain();

      if (observer && observer(cell, slot->budget, val)) {
        stop = true;
        break;
      }
    }
  }

  SearchResult result;
  static_cast<RunResult&>(result) = recorder.result();
  result.params = std::move(params);
  result.predictor_trained = predictor_trained;
  result.dataset = std::move(dataset);
  result.skip_pool_size = sampler.skip_pool().size();
  result.op_pool_size = sampler.op_pool().size();
  return result;
}

// --- fixed-structure stability study -----------------------------------------

struct StabilityRow {
  std::string graph;        // canonical skip encoding
  double avg_error = 0.0;   // mean predicted error over sampled assignments
  double top_error = 0.0;   // best observed error
  long long n_evals = 0;
};

// For each fixed cell graph, runs an operator-only search (the skip pattern
// is locked, so the blocker never fires) and reports the surrogate's mean
// predicted error across the distinct operator assignments it sampled next
// to the best error actually observed.
inline std::vector<StabilityRow> run_stability_study(
    const std::vector<space::SkipPattern>& fixed_graphs, const EngineConfig& config,
    const bench::Oracle& oracle, std::uint64_t seed, long long evals_per_graph) {
  if (fixed_graphs.empty())
    throw std::invalid_argument("run_stability_study: no graphs given");
  if (evals_per_graph < 1)
    throw std::invalid_argument("run_stability_study: evals_per_graph >= 1");

  std::vector<StabilityRow> rows;
  const int top_index = static_cast<int>(oracle.budgets().size()) - 1;
  for (std::size_t g = 0; g < fixed_graphs.size(); ++g) {
    RunLimits limits;
    limits.max_evals = evals_per_graph;
    SearchResult run = run_search(config, oracle, seed + g, limits, {}, fixed_graphs[g]);

    // a surrogate fit on everything this run saw
    predictor::PredictorParams params = run.params;
    if (!run.predictor_trained) {
      Rng train_rng(mix64(seed + g));
      params = predictor::PredictorParams::init(
          config.train, static_cast<int>(oracle.budgets().size()), train_rng);
      predictor::train(params, run.dataset, config.train, train_rng);
    }

    std::set<std::string> seen;
    double error_sum = 0.0;
    int distinct = 0;
    for (const auto& sample : run.dataset) {
      space::CellGraph cell;
      cell.skip = sample.skip;
      for (int id : sample.op_ids) cell.ops.push_back(space::GeneralizedOp::from_global_id(id));
      if (!seen.insert(space::encode_cell(cell)).second) continue;
      error_sum += 1.0 - predictor::predict(params, cell, top_index);
      ++distinct;
    }

    StabilityRow row;
    row.graph = space::encode_skip(fixed_graphs[g]);
    row.avg_error = error_sum / distinct;
    row.top_error = 1.0 - run.best_val;
    row.n_evals = run.n_evals;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gpnas::engine
