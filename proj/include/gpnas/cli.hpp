#pragma once

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gpnas/harness.hpp"

namespace gpnas::cli {

namespace detail {

inline void add_config_option(CLI::App* cmd, std::string& config_path) {
  cmd->add_option("--config", config_path, "key = value config file");
}

inline harness::Config load_config(const std::string& config_path) {
  harness::Config config;
  if (!config_path.empty()) config.load_file(config_path);
  return config;
}

inline std::vector<harness::Algorithm> parse_algorithms(const std::string& csv) {
  std::vector<harness::Algorithm> algorithms;
  for (const auto& name : space::detail::split(csv, ','))
    if (!name.empty()) algorithms.push_back(harness::parse_algorithm(name));
  if (algorithms.empty()) throw std::invalid_argument("no algorithms given");
  return algorithms;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

}  // namespace detail

inline int run(int argc, char** argv) {
  CLI::App app{"architecture-search engine over tabular oracles"};
  app.require_subcommand(1);

  // search ------------------------------------------------------------------
  auto* search = app.add_subcommand("search", "single search run");
  std::string search_algo = "gpnas", search_oracle = "synth", search_config,
              search_trace;
  std::uint64_t search_seed = 1;
  long long search_cost = -1, search_evals = -1;
  search->add_option("--algo", search_algo, "gpnas|rs|re|hb|tpe");
  search->add_option("--oracle", search_oracle, "synth[:n4,ops3,seed1,noise0.01] or file:<path>");
  search->add_option("--seed", search_seed, "trial seed");
  search->add_option("--max-cost", search_cost, "simulated-epoch budget");
  search->add_option("--max-evals", search_evals, "evaluation budget");
  search->add_option("--trace", search_trace, "write the trial trace CSV here");
  detail::add_config_option(search, search_config);

  // compare -----------------------------------------------------------------
  auto* compare = app.add_subcommand("compare", "multi-trial regret study");
  std::string compare_algos = "gpnas,rs", compare_oracle = "synth", compare_config,
              compare_dir = "compare_out", compare_svg;
  std::uint64_t compare_seed = 0;
  int compare_trials = -1, compare_threads = -1;
  long long compare_cost = -1;
  bool compare_seed_set = false;
  compare->add_option("--algos", compare_algos, "comma list of gpnas,rs,re,hb,tpe");
  compare->add_option("--oracle", compare_oracle, "oracle spec");
  compare->add_option("--trials", compare_trials, "independent trials per algorithm");
  compare->add_option("--seed", compare_seed, "base seed; trial t uses seed + t")
      ->each([&](const std::string&) { compare_seed_set = true; });
  compare->add_option("--max-cost", compare_cost, "simulated-epoch budget per trial");
  compare->add_option("--threads", compare_threads, "worker threads across trials");
  compare->add_option("--out-dir", compare_dir, "output directory for CSVs");
  compare->add_option("--svg", compare_svg, "also render a regret plot");
  detail::add_config_option(compare, compare_config);

  // stability ---------------------------------------------------------------
  auto* stability = app.add_subcommand("stability", "fixed-graph operator study");
  std::string stability_graphs, stability_oracle = "synth", stability_config,
              stability_out;
  std::uint64_t stability_seed = 1;
  long long stability_evals = 120;
  stability->add_option("--graphs", stability_graphs, "comma list of skip encodings, e.g. 3|111,3|101")
      ->required();
  stability->add_option("--oracle", stability_oracle, "oracle spec");
  stability->add_option("--evals", stability_evals, "evaluations per graph");
  stability->add_option("--seed", stability_seed, "base seed");
  stability->add_option("--out", stability_out, "write the table as CSV here");
  detail::add_config_option(stability, stability_config);

  // bench gen ---------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "benchmark file tools");
  bench_cmd->require_subcommand(1);
  auto* gen = bench_cmd->add_subcommand("gen", "materialize an exhaustive oracle to a record file");
  std::string gen_oracle = "synth", gen_out, gen_config;
  gen->add_option("--oracle", gen_oracle, "synth oracle spec");
  gen->add_option("--out", gen_out, "output record file")->required();
  detail::add_config_option(gen, gen_config);

  // predictor fit / eval ------------------------------------------------------
  auto* pred = app.add_subcommand("predictor", "surrogate tools");
  pred->require_subcommand(1);
  auto* fit = pred->add_subcommand("fit", "train a surrogate on oracle samples");
  std::string fit_oracle = "synth", fit_out, fit_config;
  int fit_samples = 500, fit_budget = -1;
  std::uint64_t fit_seed = 1;
  fit->add_option("--oracle", fit_oracle, "oracle spec");
  fit->add_option("--samples", fit_samples, "training observations to draw");
  fit->add_option("--budget", fit_budget, "evaluation budget (default: top of the ladder)");
  fit->add_option("--seed", fit_seed, "sampling/training seed");
  fit->add_option("--out", fit_out, "output parameter file")->required();
  detail::add_config_option(fit, fit_config);

  auto* eval = pred->add_subcommand("eval", "rank cells with a trained surrogate");
  std::string eval_params, eval_cells;
  int eval_budget_index = -1;
  eval->add_option("--params", eval_params, "trained parameter file")->required();
  eval->add_option("--cells", eval_cells, "file with one cell encoding per line")->required();
  eval->add_option("--budget-index", eval_budget_index,
                   "budget-ladder position (default: highest)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (search->parsed()) {
      harness::Config config = detail::load_config(search_config);
      config.seed = search_seed;
      if (search_cost > 0) config.max_cost = search_cost;
      if (search_evals > 0) config.max_evals = search_evals;
      const auto oracle = harness::make_oracle(search_oracle, config);
      const RunResult result = harness::run_trial(harness::parse_algorithm(search_algo),
                                                  *oracle, config, config.seed);
      if (result.n_evals == 0)
        throw std::runtime_error("budget too small for a single evaluation");
      std::cout << "best_cell " << space::encode_cell(result.best_cell) << '\n'
                << "best_val_acc " << harness::detail::fmt(result.best_val) << '\n'
                << "best_test_acc " << harness::detail::fmt(result.best_test) << '\n'
                << "evaluations " << result.n_evals << '\n'
                << "simulated_epochs " << result.cum_epochs << '\n';
      if (const auto opt = oracle->optimum_accuracy())
        std::cout << "oracle_optimum " << harness::detail::fmt(*opt) << '\n';
      if (!search_trace.empty()) {
        auto out = detail::open_out(search_trace);
        harness::write_trace_csv(out, {result.trace});
      }
      return 0;
    }

    if (compare->parsed()) {
      harness::Config config = detail::load_config(compare_config);
      if (compare_trials > 0) config.trials = compare_trials;
      if (compare_cost > 0) config.max_cost = compare_cost;
      if (compare_threads > 0) config.threads = compare_threads;
      if (compare_seed_set) config.seed = compare_seed;
      const auto algorithms = detail::parse_algorithms(compare_algos);
      const auto oracle = harness::make_oracle(compare_oracle, config);
      const auto result = harness::run_compare(algorithms, *oracle, config);

      std::filesystem::create_directories(compare_dir);
      for (std::size_t a = 0; a < algorithms.size(); ++a) {
        auto out = detail::open_out(compare_dir + "/trace_" +
                                    harness::algorithm_name(algorithms[a]) + ".csv");
        harness::write_trace_csv(out, result.traces[a]);
      }
      {
        auto out = detail::open_out(compare_dir + "/summary.csv");
        harness::write_summary_csv(out, result);
      }
      if (!compare_svg.empty()) {
        auto out = detail::open_out(compare_svg);
        harness::write_regret_svg(out, result);
      }
      std::cout << "reference_accuracy " << harness::detail::fmt(result.reference_accuracy)
                << (result.exhaustive_reference ? " exhaustive" : " observed") << '\n';
      for (std::size_t a = 0; a < algorithms.size(); ++a)
        std::cout << "final_mean_regret " << harness::algorithm_name(algorithms[a]) << ' '
                  << harness::detail::fmt(result.reference_accuracy -
                                          result.bands[a].mean.back())
                  << '\n';
      return 0;
    }

    if (stability->parsed()) {
      harness::Config config = detail::load_config(stability_config);
      const auto oracle = harness::make_oracle(stability_oracle, config);
      std::vector<space::SkipPattern> graphs;
      for (const auto& enc : space::detail::split(stability_graphs, ','))
        graphs.push_back(space::decode_skip(enc));
      const auto rows = engine::run_stability_study(graphs, config.engine_config, *oracle,
                                                    stability_seed, stability_evals);
      std::ostringstream table;
      harness::write_stability_csv(table, rows);
      std::cout << table.str();
      if (!stability_out.empty()) {
        auto out = detail::open_out(stability_out);
        out << table.str();
      }
      return 0;
    }

    if (gen->parsed()) {
      harness::Config config = detail::load_config(gen_config);
      if (gen_oracle.rfind("file:", 0) == 0)
        throw std::invalid_argument("bench gen needs a synth oracle spec");
      const auto oracle = harness::make_oracle(gen_oracle, config);
      const auto* synth = dynamic_cast<const bench::SyntheticOracle*>(oracle.get());
      const auto records = bench::enumerate_space(synth->spec());
      bench::save_records_file(records, gen_out);
      std::cout << "wrote " << records.size() << " records to " << gen_out << '\n';
      return 0;
    }

    if (fit->parsed()) {
      harness::Config config = detail::load_config(fit_config);
      const auto oracle = harness::make_oracle(fit_oracle, config);
      const int budget = fit_budget > 0 ? fit_budget : oracle->max_budget();
      int budget_index = -1;
      for (std::size_t i = 0; i < oracle->budgets().size(); ++i)
        if (oracle->budgets()[i] == budget) budget_index = static_cast<int>(i);
      if (budget_index < 0)
        throw std::invalid_argument("budget " + std::to_string(budget) +
                                    " is not on the oracle's ladder");
      if (fit_samples < 1) throw std::invalid_argument("--samples must be positive");
      Rng rng(fit_seed);
      std::vector<predictor::GraphSample> dataset;
      for (int i = 0; i < fit_samples; ++i) {
        const auto cell = space::uniform_cell(oracle->n_nodes(), oracle->op_domain(), rng);
        dataset.push_back(predictor::make_sample(
            cell, budget_index, oracle->validation_accuracy(cell, budget)));
      }
      auto params = predictor::PredictorParams::init(
          config.engine_config.train, static_cast<int>(oracle->budgets().size()), rng);
      const auto trained =
          predictor::train(params, dataset, config.engine_config.train, rng);
      predictor::save_params_file(params, fit_out);
      std::cout << "trained on " << dataset.size() << " samples, final mse "
                << harness::detail::fmt(trained.epoch_losses.back()) << ", wrote "
                << fit_out << '\n';
      return 0;
    }

    if (eval->parsed()) {
      const auto params = predictor::load_params_file(eval_params);
      std::ifstream in(eval_cells);
      if (!in) throw std::runtime_error("cannot open " + eval_cells);
      std::vector<space::CellGraph> cells;
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) cells.push_back(space::decode_cell(line));
      }
      if (cells.empty()) throw std::invalid_argument("no cells in " + eval_cells);
      const int index =
          eval_budget_index >= 0 ? eval_budget_index : params.n_budget_levels() - 1;
      const auto ranked = predictor::rank_candidates(params, cells, index);
      for (const auto& r : ranked)
        std::cout << harness::detail::fmt(r.score) << '\t'
                  << space::encode_cell(cells[r.index]) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace gpnas::cli
