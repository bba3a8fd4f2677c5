#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "gpnas/baselines.hpp"
#include "gpnas/benchmark.hpp"
#include "gpnas/engine.hpp"
#include "gpnas/stats.hpp"
#include "gpnas/trace.hpp"

namespace gpnas::harness {

enum class Algorithm { Gpnas, Rs, Re, Hb, Tpe };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Gpnas: return "gpnas";
    case Algorithm::Rs: return "rs";
    case Algorithm::Re: return "re";
    case Algorithm::Hb: return "hb";
    case Algorithm::Tpe: return "tpe";
  }
  return "?";
}

inline Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::Gpnas, Algorithm::Rs, Algorithm::Re, Algorithm::Hb,
                      Algorithm::Tpe})
    if (name == algorithm_name(a)) return a;
  throw std::invalid_argument("unknown algorithm: " + name +
                              " (expected gpnas, rs, re, hb or tpe)");
}

// Every knob of every module, with the library defaults. The config file is
// line-oriented `key = value`; '#' starts a comment.
struct Config {
  bench::OracleSpec oracle;
  engine::EngineConfig engine_config;
  baselines::EvolutionConfig evolution;
  int trials = 100;
  long long max_cost = 20000;
  long long max_evals = 1000000000;
  std::uint64_t seed = 1;
  int threads = 1;

  void set(const std::string& key, const std::string& value) {
    const auto to_int = [&](const std::string& v) {
      return space::detail::parse_int(v, key.c_str());
    };
    const auto to_double = [&](const std::string& v) {
      std::size_t pos = 0;
      double d = 0.0;
      try {
        d = std::stod(v, &pos);
      } catch (const std::exception&) {
        throw std::invalid_argument(key + ": not a number: " + v);
      }
      if (pos != v.size()) throw std::invalid_argument(key + ": trailing junk: " + v);
      return d;
    };
    const auto to_u64 = [&](const std::string& v) {
      return static_cast<std::uint64_t>(std::stoull(v));
    };

    if (key == "oracle.n_nodes") oracle.n_nodes = to_int(value);
    else if (key == "oracle.n_ops") oracle.n_ops = to_int(value);
    else if (key == "oracle.seed") oracle.seed = to_u64(value);
    else if (key == "oracle.noise_sd") oracle.noise_sd = to_double(value);
    else if (key == "ladder.min_budget") oracle.ladder.min_budget = to_int(value);
    else if (key == "ladder.max_budget") oracle.ladder.max_budget = to_int(value);
    else if (key == "ladder.eta") oracle.ladder.eta = to_int(value);
    else if (key == "tpe.min_fit_observations")
      engine_config.split.min_fit_observations = to_int(value);
    else if (key == "tpe.good_fraction") engine_config.split.good_fraction = to_double(value);
    else if (key == "tpe.alpha_quantile")
      engine_config.split.alpha_quantile = to_double(value);
    else if (key == "tpe.n_samples") engine_config.split.n_samples = to_int(value);
    else if (key == "tpe.bandwidth_factor")
      engine_config.split.bandwidth_factor = to_double(value);
    else if (key == "tpe.random_fraction")
      engine_config.split.random_fraction = to_double(value);
    else if (key == "blocker.rate0") engine_config.blocker.rate0 = to_double(value);
    else if (key == "blocker.decay") engine_config.blocker.decay = to_double(value);
    else if (key == "predictor.learning_rate")
      engine_config.train.learning_rate = to_double(value);
    else if (key == "predictor.momentum") engine_config.train.momentum = to_double(value);
    else if (key == "predictor.epochs") engine_config.train.epochs = to_int(value);
    else if (key == "predictor.batch_size") engine_config.train.batch_size = to_int(value);
    else if (key == "predictor.gcn_layers") engine_config.train.gcn_layers = to_int(value);
    else if (key == "predictor.d_emb") engine_config.train.d_emb = to_int(value);
    else if (key == "predictor.d_ep") engine_config.train.d_ep = to_int(value);
    else if (key == "predictor.hidden") engine_config.train.hidden = to_int(value);
    else if (key == "predictor.mlp_hidden1") engine_config.train.mlp_hidden1 = to_int(value);
    else if (key == "predictor.mlp_hidden2") engine_config.train.mlp_hidden2 = to_int(value);
    else if (key == "engine.warmup_evals") engine_config.warmup_evals = to_int(value);
    else if (key == "engine.filter_pool") engine_config.filter_pool = to_int(value);
    else if (key == "engine.filter_quantile")
      engine_config.filter_quantile = to_double(value);
    else if (key == "engine.retrain_every") engine_config.retrain_every = to_int(value);
    else if (key == "engine.max_train_passes")
      engine_config.max_train_passes = to_int(value);
    else if (key == "evolution.population_size") evolution.population_size = to_int(value);
    else if (key == "evolution.tournament_size") evolution.tournament_size = to_int(value);
    else if (key == "harness.trials") trials = to_int(value);
    else if (key == "harness.max_cost") max_cost = to_int(value);
    else if (key == "harness.max_evals") max_evals = to_int(value);
    else if (key == "harness.seed") seed = to_u64(value);
    else if (key == "harness.threads") threads = to_int(value);
    else throw std::invalid_argument("unknown config key: " + key);
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const auto strip = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return std::string();
        const auto b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
      };
      if (strip(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected key = value");
      try {
        set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
      } catch (const std::exception& e) {
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": " +
                                    e.what());
      }
    }
  }
};

// Oracle specifier grammar: `synth` with optional comma-separated overrides
// (n4 / n=4, ops3, seed7, noise0.01), or `file:<path>` for a record file.
inline std::unique_ptr<bench::Oracle> make_oracle(const std::string& text,
                                                  const Config& config) {
  if (text.rfind("file:", 0) == 0) {
    return std::make_unique<bench::TabularOracle>(bench::load_records(text.substr(5)));
  }
  if (text != "synth" && text.rfind("synth:", 0) != 0)
    throw std::invalid_argument("oracle spec must be synth[:...] or file:<path>, got: " +
                                text);
  bench::OracleSpec spec = config.oracle;
  if (text.rfind("synth:", 0) == 0) {
    for (const auto& token : space::detail::split(text.substr(6), ',')) {
      if (token.empty()) continue;
      std::string key, value;
      const auto eq = token.find('=');
      if (eq != std::string::npos) {
        key = token.substr(0, eq);
        value = token.substr(eq + 1);
      } else {
        const auto digit = token.find_first_of("0123456789.");
        if (digit == std::string::npos || digit == 0)
          throw std::invalid_argument("bad oracle token: " + token);
        key = token.substr(0, digit);
        value = token.substr(digit);
      }
      if (key == "n") spec.n_nodes = space::detail::parse_int(value, "oracle n");
      else if (key == "ops") spec.n_ops = space::detail::parse_int(value, "oracle ops");
      else if (key == "seed") spec.seed = std::stoull(value);
      else if (key == "noise") spec.noise_sd = std::stod(value);
      else throw std::invalid_argument("unknown oracle token: " + token);
    }
  }
  return std::make_unique<bench::SyntheticOracle>(spec);
}

inline RunResult run_trial(Algorithm algorithm, const bench::Oracle& oracle,
                           const Config& config, std::uint64_t seed,
                           const EvalObserver& observer = {}) {
  RunLimits limits;
  limits.max_cost = config.max_cost;
  limits.max_evals = config.max_evals;
  switch (algorithm) {
    case Algorithm::Gpnas:
      return engine::run_search(config.engine_config, oracle, seed, limits, observer);
    case Algorithm::Rs:
      return baselines::run_random_search(oracle, seed, limits, observer);
    case Algorithm::Re:
      return baselines::run_regularized_evolution(oracle, config.evolution, seed, limits,
                                                  observer);
    case Algorithm::Hb:
      return baselines::run_hyperband_random(oracle, seed, limits, observer);
    case Algorithm::Tpe:
      return baselines::run_pure_tpe(oracle, config.engine_config.split, seed, limits,
                                     observer);
  }
  throw std::logic_error("run_trial: bad algorithm");
}

// --- aggregation -------------------------------------------------------------

// Geometric cost checkpoints from the first budget level up to max_cost.
inline std::vector<long long> cost_grid(long long lo, long long max_cost, int points = 64) {
  if (lo < 1 || max_cost < lo) throw std::invalid_argument("cost_grid: bad range");
  std::vector<long long> grid;
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    const auto c = static_cast<long long>(
        std::llround(static_cast<double>(lo) *
                     std::pow(static_cast<double>(max_cost) / lo, t)));
    if (grid.empty() || c > grid.back()) grid.push_back(c);
  }
  if (grid.back() != max_cost) grid.push_back(max_cost);
  return grid;
}

struct TraceBands {
  std::vector<long long> grid;
  std::vector<double> mean, median, q25, q75;
};

// Right-continuous step interpolation of best-so-far values onto the grid
// (checkpoints before a trace's first step carry its first value backward),
// then pointwise mean, median and quartiles.
inline TraceBands aggregate_traces(const std::vector<RegretTrace>& traces,
                                   const std::vector<long long>& grid) {
  if (traces.empty()) throw std::invalid_argument("aggregate_traces: no traces");
  for (const auto& t : traces)
    if (t.empty()) throw std::invalid_argument("aggregate_traces: empty trace");
  TraceBands bands;
  bands.grid = grid;
  for (long long checkpoint : grid) {
    std::vector<double> values;
    values.reserve(traces.size());
    for (const auto& trace : traces) {
      double v = trace.steps.front().best_val;
      for (const auto& step : trace.steps) {
        if (step.cum_epochs > checkpoint) break;
        v = step.best_val;
      }
      values.push_back(v);
    }
    bands.mean.push_back(stats::mean(values));
    bands.median.push_back(stats::median(values));
    bands.q25.push_back(stats::quantile(values, 0.25));
    bands.q75.push_back(stats::quantile(values, 0.75));
  }
  return bands;
}

struct CompareResult {
  std::vector<Algorithm> algorithms;
  std::vector<std::vector<RegretTrace>> traces;  // [algorithm][trial]
  std::vector<long long> grid;
  std::vector<TraceBands> bands;      // accuracy bands per algorithm
  double reference_accuracy = 0.0;    // regret = reference - accuracy
  bool exhaustive_reference = false;  // true when the oracle knows its optimum
};

inline CompareResult run_compare(const std::vector<Algorithm>& algorithms,
                                 const bench::Oracle& oracle, const Config& config) {
  if (algorithms.empty()) throw std::invalid_argument("run_compare: no algorithms");
  if (config.trials < 1) throw std::invalid_argument("run_compare: trials >= 1");
  CompareResult result;
  result.algorithms = algorithms;
  result.traces.assign(algorithms.size(), std::vector<RegretTrace>(config.trials));

  const int threads = std::max(1, config.threads);
  for (std::size_t a = 0; a < algorithms.size(); ++a) {
    const auto worker = [&](int offset) {
      for (int t = offset; t < config.trials; t += threads)
        result.traces[a][t] =
            run_trial(algorithms[a], oracle, config, config.seed + t).trace;
    };
    if (threads == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
      for (auto& th : pool) th.join();
    }
  }

  if (const auto opt = oracle.optimum_accuracy()) {
    result.reference_accuracy = *opt;
    result.exhaustive_reference = true;
  } else {
    double best = 0.0;
    for (const auto& per_algo : result.traces)
      for (const auto& trace : per_algo)
        best = std::max(best, trace.steps.back().best_val);
    result.reference_accuracy = best;
    result.exhaustive_reference = false;
  }

  result.grid = cost_grid(oracle.budgets().front(), config.max_cost);
  for (const auto& per_algo : result.traces)
    result.bands.push_back(aggregate_traces(per_algo, result.grid));
  return result;
}

// --- output ------------------------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

// Columns: trial,step,cum_epochs,best_val_acc,best_test_acc
inline void write_trace_csv(std::ostream& out, const std::vector<RegretTrace>& traces) {
  out << "trial,step,cum_epochs,best_val_acc,best_test_acc\n";
  for (std::size_t trial = 0; trial < traces.size(); ++trial) {
    for (std::size_t s = 0; s < traces[trial].steps.size(); ++s) {
      const auto& step = traces[trial].steps[s];
      out << trial << ',' << s << ',' << step.cum_epochs << ','
          << detail::fmt(step.best_val) << ',' << detail::fmt(step.best_test) << '\n';
    }
  }
}

// Columns: algo,cum_epochs,mean_regret,median_regret,q25,q75. A '#' preamble
// documents what the regret is measured against.
inline void write_summary_csv(std::ostream& out, const CompareResult& result) {
  out << "# regret = reference_accuracy - best_so_far_validation_accuracy\n";
  out << "# reference_accuracy = " << detail::fmt(result.reference_accuracy)
      << (result.exhaustive_reference ? " (exhaustive oracle optimum)"
                                      : " (best accuracy observed across all runs)")
      << '\n';
  out << "algo,cum_epochs,mean_regret,median_regret,q25,q75\n";
  const double ref = result.reference_accuracy;
  for (std::size_t a = 0; a < result.algorithms.size(); ++a) {
    const TraceBands& bands = result.bands[a];
    for (std::size_t i = 0; i < bands.grid.size(); ++i) {
      // quartiles flip under the sign change
      out << algorithm_name(result.algorithms[a]) << ',' << bands.grid[i] << ','
          << detail::fmt(ref - bands.mean[i]) << ',' << detail::fmt(ref - bands.median[i])
          << ',' << detail::fmt(ref - bands.q75[i]) << ',' << detail::fmt(ref - bands.q25[i])
          << '\n';
    }
  }
}

inline void write_stability_csv(std::ostream& out,
                                const std::vector<engine::StabilityRow>& rows) {
  out << "graph,avg_error,top_error,gap,n_evals\n";
  for (const auto& row : rows)
    out << row.graph << ',' << detail::fmt(row.avg_error) << ','
        << detail::fmt(row.top_error) << ',' << detail::fmt(row.avg_error - row.top_error)
        << ',' << row.n_evals << '\n';
}

// Minimal self-contained regret plot: one polyline per algorithm, log-x.
inline void write_regret_svg(std::ostream& out, const CompareResult& result) {
  const int width = 720, height = 480, margin = 60;
  const double ref = result.reference_accuracy;
  double max_regret = 1e-9, min_cost = 1e300, max_cost = 0.0;
  for (const auto& bands : result.bands) {
    for (std::size_t i = 0; i < bands.grid.size(); ++i) {
      max_regret = std::max(max_regret, ref - bands.mean[i]);
      min_cost = std::min(min_cost, static_cast<double>(bands.grid[i]));
      max_cost = std::max(max_cost, static_cast<double>(bands.grid[i]));
    }
  }
  max_regret = std::max(max_regret, 1e-6);
  const auto x_of = [&](double cost) {
    const double t = std::log(cost / min_cost) / std::log(std::max(2.0, max_cost / min_cost));
    return margin + t * (width - 2 * margin);
  };
  const auto y_of = [&](double regret) {
    return height - margin - (regret / max_regret) * (height - 2 * margin);
  };
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                            "#ff7f0e"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 15
      << "\" text-anchor=\"middle\" font-size=\"13\">simulated epochs (log)</text>\n";
  out << "<text x=\"18\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << height / 2 << ")\">mean validation regret</text>\n";
  for (std::size_t a = 0; a < result.algorithms.size(); ++a) {
    const TraceBands& bands = result.bands[a];
    out << "<polyline fill=\"none\" stroke=\"" << kColors[a % 5]
        << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < bands.grid.size(); ++i)
      out << detail::fmt(x_of(static_cast<double>(bands.grid[i]))) << ','
          << detail::fmt(y_of(ref - bands.mean[i])) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << width - margin + 6 << "\" y=\"" << margin + 16 * (a + 1)
        << "\" font-size=\"12\" fill=\"" << kColors[a % 5] << "\">"
        << algorithm_name(result.algorithms[a]) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace gpnas::harness
