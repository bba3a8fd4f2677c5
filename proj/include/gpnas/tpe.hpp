#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpnas/rng.hpp"

namespace gpnas::tpe {

// A finite product space of categorical dimensions. `valid` (optional)
// encodes structural constraints, e.g. skip patterns must leave no node
// isolated.
struct Subspace {
  std::vector<int> cardinalities;
  std::function<bool(const std::vector<int>&)> valid;

  std::size_t dims() const { return cardinalities.size(); }

  bool accepts(const std::vector<int>& x) const {
    if (x.size() != cardinalities.size()) return false;
    for (std::size_t d = 0; d < x.size(); ++d)
      if (x[d] < 0 || x[d] >= cardinalities[d]) return false;
    return !valid || valid(x);
  }
};

// One evaluated configuration, projected onto a subspace.
struct Observation {
  std::vector<int> config;
  int budget = 1;
  double accuracy = 0.0;     // validation accuracy in [0, 1]
  std::int64_t timestamp = 0;  // monotone trial index
};

inline void check_observation(const Observation& obs) {
  if (obs.accuracy < 0.0 || obs.accuracy > 1.0)
    throw std::invalid_argument("Observation: accuracy must be in [0,1]");
  if (obs.budget < 1) throw std::invalid_argument("Observation: budget must be >= 1");
}

// Knobs of the proposal loop.
struct SplitSpec {
  int min_fit_observations = 5;   // smallest pool a KDE is fit on
  double good_fraction = 0.15;    // share of the pool forming the good set
  double alpha_quantile = 0.15;   // quantile defining the good/bad threshold
  int n_samples = 64;             // candidates drawn per proposal
  double bandwidth_factor = 3.0;  // widening applied when drawing candidates
  double random_fraction = 0.2;   // probability of a purely random proposal

  void validate() const {
    if (min_fit_observations < 1) throw std::invalid_argument("SplitSpec: min_fit_observations >= 1");
    if (good_fraction <= 0.0 || good_fraction >= 1.0)
      throw std::invalid_argument("SplitSpec: good_fraction in (0,1)");
    if (alpha_quantile <= 0.0 || alpha_quantile >= 1.0)
      throw std::invalid_argument("SplitSpec: alpha_quantile in (0,1)");
    if (n_samples < 1) throw std::invalid_argument("SplitSpec: n_samples >= 1");
    if (bandwidth_factor < 1.0) throw std::invalid_argument("SplitSpec: bandwidth_factor >= 1");
    if (random_fraction < 0.0 || random_fraction > 1.0)
      throw std::invalid_argument("SplitSpec: random_fraction in [0,1]");
  }
};

struct PoolTooSmall : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// floor(q * n) with the mathematically intended value restored when the
// product lands a hair under an integer (0.15 * 20 = 2.999...96 in binary).
inline int floor_fraction(double q, int n) {
  return static_cast<int>(std::floor(q * static_cast<double>(n) + 1e-9));
}

// Product of per-dimension Aitchison-Aitken kernels averaged over the
// observation rows. For a k-way dimension with bandwidth h the kernel puts
// (1-h) + h/k on the observed value and h/k elsewhere, so each dimension's
// mass sums to one.
class CategoricalKde {
 public:
  CategoricalKde(std::vector<std::vector<int>> rows, std::vector<int> cardinalities,
                 std::vector<double> bandwidths)
      : rows_(std::move(rows)),
        cards_(std::move(cardinalities)),
        bandwidths_(std::move(bandwidths)) {
    if (rows_.empty()) throw std::invalid_argument("CategoricalKde: empty observation set");
    if (bandwidths_.size() != cards_.size())
      throw std::invalid_argument("CategoricalKde: bandwidth/dimension mismatch");
    for (const auto& r : rows_) {
      if (r.size() != cards_.size())
        throw std::invalid_argument("CategoricalKde: row width mismatch");
      for (std::size_t d = 0; d < r.size(); ++d)
        if (r[d] < 0 || r[d] >= cards_[d])
          throw std::invalid_argument("CategoricalKde: value outside its dimension");
    }
    for (double h : bandwidths_)
      if (h < 0.0 || h > 1.0)
        throw std::invalid_argument("CategoricalKde: bandwidth must be in [0,1]");
  }

  // Bandwidths chosen per dimension by leave-one-out log likelihood over the
  // grid {0.1, ..., 0.9}. A single-row fit uses the grid minimum, which is
  // also what the LOO pick degenerates to for duplicated rows.
  static CategoricalKde fit(std::vector<std::vector<int>> rows,
                            const std::vector<int>& cardinalities) {
    if (rows.empty()) throw std::invalid_argument("CategoricalKde::fit: empty observation set");
    const std::size_t dims = cardinalities.size();
    const int n = static_cast<int>(rows.size());
    std::vector<double> bandwidths(dims, kBandwidthGrid[0]);
    if (n >= 2) {
      for (std::size_t d = 0; d < dims; ++d) {
        std::vector<int> counts(cardinalities[d], 0);
        for (const auto& r : rows) ++counts[r[d]];
        const double k = cardinalities[d];
        double best_ll = -1e300, best_h = kBandwidthGrid[0];
        for (double h : kBandwidthGrid) {
          const double same = (1.0 - h) + h / k;
          const double other = h / k;
          double ll = 0.0;
          for (const auto& r : rows) {
            const int c = counts[r[d]];
            const double loo = ((c - 1) * same + (n - c) * other) / (n - 1);
            ll += std::log(std::max(loo, 1e-300));
          }
          if (ll > best_ll) {
            best_ll = ll;
            best_h = h;
          }
        }
        bandwidths[d] = best_h;
      }
    }
    return CategoricalKde(std::move(rows), cardinalities, std::move(bandwidths));
  }

  double density(const std::vector<int>& x) const {
    double sum = 0.0;
    for (const auto& r : rows_) {
      double p = 1.0;
      for (std::size_t d = 0; d < cards_.size(); ++d) {
        const double h = bandwidths_[d];
        const double k = cards_[d];
        p *= (x[d] == r[d]) ? (1.0 - h) + h / k : h / k;
      }
      sum += p;
    }
    return sum / static_cast<double>(rows_.size());
  }

  // Marginal mass of one dimension at one value; sums to 1 over the domain.
  double dim_marginal(std::size_t dim, int value) const {
    const double h = bandwidths_[dim];
    const double k = cards_[dim];
    double sum = 0.0;
    for (const auto& r : rows_) sum += (value == r[dim]) ? (1.0 - h) + h / k : h / k;
    return sum / static_cast<double>(rows_.size());
  }

  // Draws from the mixture with bandwidths widened by `factor` (clamped to
  // full smoothing).
  std::vector<int> sample_widened(double factor, Rng& rng) const {
    const auto& row = rows_[rng.uniform_index(rows_.size())];
    std::vector<int> x(cards_.size());
    for (std::size_t d = 0; d < cards_.size(); ++d) {
      const double h = std::min(1.0, bandwidths_[d] * factor);
      if (rng.uniform() < 1.0 - h)
        x[d] = row[d];
      else
        x[d] = static_cast<int>(rng.uniform_index(cards_[d]));
    }
    return x;
  }

  const std::vector<double>& bandwidths() const { return bandwidths_; }
  std::size_t n_rows() const { return rows_.size(); }
  const std::vector<int>& cardinalities() const { return cards_; }

 private:
  static constexpr std::array<double, 9> kBandwidthGrid = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                           0.6, 0.7, 0.8, 0.9};
  std::vector<std::vector<int>> rows_;
  std::vector<int> cards_;
  std::vector<double> bandwidths_;
};

struct KdePair {
  CategoricalKde good;
  CategoricalKde bad;
  int n_good = 0;
  int n_bad = 0;
};

// Sorts the pool restricted to `budget` by descending accuracy (earlier
// timestamp wins ties) and splits it into the top-scoring good set and the
// trailing bad set:
//   n_good = max(n_min, floor(q * N_b)),  n_bad = max(n_min, N_b - n_good).
// The sets overlap only when the floors force it.
inline std::pair<std::vector<Observation>, std::vector<Observation>> split_pool(
    const std::vector<Observation>& pool, const SplitSpec& spec, int budget) {
  spec.validate();
  std::vector<Observation> level;
  for (const auto& obs : pool)
    if (obs.budget == budget) level.push_back(obs);
  const int n = static_cast<int>(level.size());
  if (n < spec.min_fit_observations + 2)
    throw PoolTooSmall("split_pool: " + std::to_string(n) + " observations at budget " +
                       std::to_string(budget) + ", need at least " +
                       std::to_string(spec.min_fit_observations + 2));
  std::sort(level.begin(), level.end(), [](const Observation& a, const Observation& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.timestamp < b.timestamp;
  });
  const int n_good = std::max(spec.min_fit_observations,
                              floor_fraction(spec.good_fraction, n));
  const int n_bad = std::max(spec.min_fit_observations, n - n_good);
  std::vector<Observation> good(level.begin(), level.begin() + n_good);
  std::vector<Observation> bad(level.end() - n_bad, level.end());
  return {std::move(good), std::move(bad)};
}

inline CategoricalKde fit_kde(const std::vector<Observation>& observations,
                              const Subspace& space) {
  if (observations.empty()) throw std::invalid_argument("fit_kde: empty observation set");
  std::vector<std::vector<int>> rows;
  rows.reserve(observations.size());
  for (const auto& obs : observations) {
    if (!space.accepts(obs.config))
      throw std::invalid_argument("fit_kde: observation outside the subspace");
    rows.push_back(obs.config);
  }
  return CategoricalKde::fit(std::move(rows), space.cardinalities);
}

inline KdePair fit_kde_pair(const std::vector<Observation>& pool, const SplitSpec& spec,
                            int budget, const Subspace& space) {
  auto [good, bad] = split_pool(pool, spec, budget);
  const int n_good = static_cast<int>(good.size());
  const int n_bad = static_cast<int>(bad.size());
  return KdePair{fit_kde(good, space), fit_kde(bad, space), n_good, n_bad};
}

// The acquisition surrogate: density ratio l(x)/g(x), with g floored at a
// tiny epsilon.
inline double expected_improvement_density(const std::vector<int>& x,
                                           const CategoricalKde& good,
                                           const CategoricalKde& bad) {
  return good.density(x) / std::max(bad.density(x), 1e-12);
}

inline std::vector<int> uniform_config(const Subspace& space, Rng& rng,
                                       int max_retries = 100000) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    std::vector<int> x(space.dims());
    for (std::size_t d = 0; d < space.dims(); ++d)
      x[d] = static_cast<int>(rng.uniform_index(space.cardinalities[d]));
    if (!space.valid || space.valid(x)) return x;
  }
  throw std::runtime_error("uniform_config: retry limit exceeded");
}

// Largest budget whose pool slice is big enough to fit a KDE pair on, or
// nullopt when no level qualifies.
inline std::optional<int> best_fittable_budget(const std::vector<Observation>& pool,
                                               const SplitSpec& spec) {
  std::map<int, int> counts;
  for (const auto& obs : pool) ++counts[obs.budget];
  for (auto it = counts.rbegin(); it != counts.rend(); ++it)
    if (it->second >= spec.min_fit_observations + 2) return it->first;
  return std::nullopt;
}

// One proposal: with probability random_fraction, or when no budget level
// has enough observations, a uniform draw; otherwise draws n_samples
// candidates from the bandwidth-widened good KDE and returns the one with
// the highest l(x)/g(x). `prefer`, when given, breaks the guided selection
// toward candidates it accepts (callers use it to sidestep re-proposing
// configurations a deterministic oracle has already scored); if no drawn
// candidate is acceptable the plain maximizer is returned, and the random
// branches ignore the preference entirely.
inline std::vector<int> propose(const std::vector<Observation>& pool, const SplitSpec& spec,
                                const Subspace& space, Rng& rng,
                                const std::function<bool(const std::vector<int>&)>& prefer = {}) {
  spec.validate();
  if (rng.uniform() < spec.random_fraction) return uniform_config(space, rng);
  const auto budget = best_fittable_budget(pool, spec);
  if (!budget) return uniform_config(space, rng);
  const KdePair pair = fit_kde_pair(pool, spec, *budget, space);

  std::vector<int> best, best_preferred;
  double best_ratio = -1.0, best_preferred_ratio = -1.0;
  for (int s = 0; s < spec.n_samples; ++s) {
    std::vector<int> x;
    bool ok = false;
    for (int attempt = 0; attempt < 32; ++attempt) {
      x = pair.good.sample_widened(spec.bandwidth_factor, rng);
      if (!space.valid || space.valid(x)) {
        ok = true;
        break;
      }
    }
    if (!ok) x = uniform_config(space, rng);
    const double ratio = expected_improvement_density(x, pair.good, pair.bad);
    if (prefer && ratio > best_preferred_ratio && prefer(x)) {
      best_preferred_ratio = ratio;
      best_preferred = x;
    }
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = std::move(x);
    }
  }
  return best_preferred.empty() ? best : best_preferred;
}

}  // namespace gpnas::tpe
