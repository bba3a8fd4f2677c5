#pragma once

#include <climits>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "gpnas/search_space.hpp"

namespace gpnas {

// Best-so-far trajectory of one trial. The test column tracks the test
// accuracy of the incumbent chosen by validation accuracy.
struct RegretTrace {
  struct Step {
    long long cum_epochs = 0;
    double best_val = 0.0;
    double best_test = 0.0;
  };

  std::vector<Step> steps;

  void add(long long cum_epochs, double best_val, double best_test) {
    if (!steps.empty()) {
      if (cum_epochs <= steps.back().cum_epochs)
        throw std::logic_error("RegretTrace: cumulative cost must strictly increase");
      if (best_val < steps.back().best_val)
        throw std::logic_error("RegretTrace: best validation accuracy regressed");
    }
    steps.push_back({cum_epochs, best_val, best_test});
  }

  bool empty() const { return steps.empty(); }
  long long total_cost() const { return steps.empty() ? 0 : steps.back().cum_epochs; }
};

struct RunLimits {
  long long max_cost = LLONG_MAX;  // simulated epochs
  long long max_evals = LLONG_MAX;
};

// Per-evaluation hook; returning true stops the run (used by the
// samples-to-optimum studies).
using EvalObserver =
    std::function<bool(const space::CellGraph& cell, int budget, double val_accuracy)>;

struct RunResult {
  RegretTrace trace;
  space::CellGraph best_cell;
  double best_val = -1.0;
  double best_test = 0.0;
  long long cum_epochs = 0;
  long long n_evals = 0;
};

}  // namespace gpnas
