#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpnas/linalg.hpp"
#include "gpnas/rng.hpp"
#include "gpnas/search_space.hpp"

namespace gpnas::predictor {

using linalg::Matrix;

inline constexpr double kBnEpsilon = 1e-5;
inline constexpr double kBnMomentum = 0.9;

struct TrainConfig {
  double learning_rate = 1e-2;
  double momentum = 0.9;
  int epochs = 100;
  int batch_size = 32;
  int gcn_layers = 3;
  int d_emb = 32;
  int d_ep = 8;
  int hidden = 64;
  int mlp_hidden1 = 64;
  int mlp_hidden2 = 32;
  std::uint64_t seed = 1;

  void validate() const {
    if (learning_rate < 0.0) throw std::invalid_argument("TrainConfig: learning_rate >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
      throw std::invalid_argument("TrainConfig: momentum in [0,1)");
    if (epochs < 1 || batch_size < 1 || gcn_layers < 1 || d_emb < 1 || d_ep < 1 ||
        hidden < 1 || mlp_hidden1 < 1 || mlp_hidden2 < 1)
      throw std::invalid_argument("TrainConfig: sizes must be positive");
  }
};

// A prepared training/inference element: adjacency, per-node generalized-op
// ids into the full 156-entry table, the budget-ladder position, and the
// observed accuracy label.
struct GraphSample {
  space::SkipPattern skip;
  std::vector<int> op_ids;
  int epoch_index = 0;
  double label = 0.0;
};

inline GraphSample make_sample(const space::CellGraph& cell, int epoch_index, double label) {
  GraphSample s;
  s.skip = cell.skip;
  s.op_ids.reserve(cell.ops.size());
  for (const auto& g : cell.ops) s.op_ids.push_back(g.global_id());
  s.epoch_index = epoch_index;
  s.label = label;
  return s;
}

struct MlpLayer {
  Matrix weight;             // [in x out]
  std::vector<double> bias;  // [out]
  bool batch_norm = true;
  std::vector<double> bn_scale;
  std::vector<double> bn_shift;
  std::vector<double> bn_run_mean;  // inference statistics, not trained
  std::vector<double> bn_run_var;
};

// Every trainable tensor of the surrogate. Batch-norm running statistics
// ride along as state but receive no gradient.
struct PredictorParams {
  Matrix op_embedding;     // [156 x d_emb]
  Matrix epoch_embedding;  // [budget levels x d_ep]
  std::vector<Matrix> gcn_weights;
  std::vector<MlpLayer> mlp;  // three layers; the last is plain linear

  static PredictorParams init(const TrainConfig& config, int n_budget_levels, Rng& rng) {
    config.validate();
    if (n_budget_levels < 1)
      throw std::invalid_argument("PredictorParams: need at least one budget level");
    PredictorParams p;
    auto fill_normal = [&rng](Matrix& m, double sd) {
      for (auto& v : m.data) v = sd * rng.normal();
    };
    p.op_embedding = Matrix(space::kNumGeneralizedOps, config.d_emb);
    fill_normal(p.op_embedding, 0.5);
    p.epoch_embedding = Matrix(n_budget_levels, config.d_ep);
    fill_normal(p.epoch_embedding, 0.5);
    int in = config.d_emb;
    for (int l = 0; l < config.gcn_layers; ++l) {
      Matrix w(in, config.hidden);
      fill_normal(w, 1.0 / std::sqrt(static_cast<double>(in)));
      p.gcn_weights.push_back(std::move(w));
      in = config.hidden;
    }
    const std::vector<std::pair<int, int>> mlp_shapes = {
        {config.hidden + config.d_ep, config.mlp_hidden1},
        {config.mlp_hidden1, config.mlp_hidden2},
        {config.mlp_hidden2, 1}};
    for (std::size_t l = 0; l < mlp_shapes.size(); ++l) {
      MlpLayer layer;
      layer.weight = Matrix(mlp_shapes[l].first, mlp_shapes[l].second);
      fill_normal(layer.weight, 1.0 / std::sqrt(static_cast<double>(mlp_shapes[l].first)));
      layer.bias.assign(mlp_shapes[l].second, 0.0);
      layer.batch_norm = l + 1 < mlp_shapes.size();
      if (layer.batch_norm) {
        layer.bn_scale.assign(mlp_shapes[l].second, 1.0);
        layer.bn_shift.assign(mlp_shapes[l].second, 0.0);
        layer.bn_run_mean.assign(mlp_shapes[l].second, 0.0);
        layer.bn_run_var.assign(mlp_shapes[l].second, 1.0);
      }
      p.mlp.push_back(std::move(layer));
    }
    return p;
  }

  int n_budget_levels() const { return epoch_embedding.rows; }
};

inline PredictorParams zeros_like(const PredictorParams& p) {
  PredictorParams z = p;
  for (auto& v : z.op_embedding.data) v = 0.0;
  for (auto& v : z.epoch_embedding.data) v = 0.0;
  for (auto& w : z.gcn_weights)
    for (auto& v : w.data) v = 0.0;
  for (auto& layer : z.mlp) {
    for (auto& v : layer.weight.data) v = 0.0;
    for (auto& v : layer.bias) v = 0.0;
    for (auto& v : layer.bn_scale) v = 0.0;
    for (auto& v : layer.bn_shift) v = 0.0;
    for (auto& v : layer.bn_run_mean) v = 0.0;
    for (auto& v : layer.bn_run_var) v = 0.0;
  }
  return z;
}

// Pointers to every trainable scalar, in a fixed order shared by params and
// gradient structures. Running statistics are deliberately absent.
inline std::vector<double*> trainable_values(PredictorParams& p) {
  std::vector<double*> out;
  auto push_matrix = [&out](Matrix& m) {
    for (auto& v : m.data) out.push_back(&v);
  };
  auto push_vec = [&out](std::vector<double>& v) {
    for (auto& x : v) out.push_back(&x);
  };
  push_matrix(p.op_embedding);
  push_matrix(p.epoch_embedding);
  for (auto& w : p.gcn_weights) push_matrix(w);
  for (auto& layer : p.mlp) {
    push_matrix(layer.weight);
    push_vec(layer.bias);
    push_vec(layer.bn_scale);
    push_vec(layer.bn_shift);
  }
  return out;
}

// --- graph convolution -------------------------------------------------------

inline Matrix adjacency_matrix(const space::SkipPattern& skip) {
  Matrix a(skip.n_nodes, skip.n_nodes);
  for (int i = 0; i < skip.n_nodes; ++i)
    for (int j = 0; j < skip.n_nodes; ++j) a(i, j) = skip.edge(i, j) ? 1.0 : 0.0;
  return a;
}

// S = D^-1/2 (A + I) D^-1/2 with D the degree matrix of A + I. Self loops
// keep every row sum strictly positive; anything else is a logic error, not
// something to patch over.
inline Matrix normalized_adjacency(const Matrix& a) {
  if (a.rows != a.cols) throw std::invalid_argument("normalized_adjacency: square matrix required");
  const int n = a.rows;
  Matrix tilde = a;
  for (int i = 0; i < n; ++i) tilde(i, i) += 1.0;
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    double deg = 0.0;
    for (int j = 0; j < n; ++j) deg += tilde(i, j);
    if (deg < 1.0) throw std::logic_error("normalized_adjacency: degree below one");
    inv_sqrt[i] = 1.0 / std::sqrt(deg);
  }
  Matrix s(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) = inv_sqrt[i] * tilde(i, j) * inv_sqrt[j];
  return s;
}

inline Matrix normalized_adjacency(const space::SkipPattern& skip) {
  return normalized_adjacency(adjacency_matrix(skip));
}

// One propagation step: relu(S H W).
inline Matrix gcn_layer(const Matrix& h_prev, const Matrix& adjacency, const Matrix& w) {
  const Matrix s = normalized_adjacency(adjacency);
  return linalg::relu(linalg::matmul(linalg::matmul(s, h_prev), w));
}

// --- forward / backward ------------------------------------------------------

enum class BnMode { Training, Inference };

namespace detail {

struct ElementCache {
  Matrix s;
  std::vector<Matrix> smoothed;  // S * H_{k-1}
  std::vector<Matrix> pre;       // pre-activation Z_k
  std::vector<Matrix> h;         // H_0 .. H_L
  std::vector<int> argmax;       // readout row per feature
};

struct BatchCache {
  std::vector<ElementCache> elems;
  Matrix u0;                          // [B x (hidden + d_ep)]
  std::vector<Matrix> layer_in;       // input of each mlp layer
  std::vector<Matrix> lin_out;        // linear output per layer
  std::vector<Matrix> xhat;           // normalized activations (bn layers)
  std::vector<std::vector<double>> mean, var;
  std::vector<double> logits, preds;
};

inline void check_sample(const PredictorParams& params, const GraphSample& sample) {
  if (sample.skip.n_nodes < 2 ||
      sample.op_ids.size() != static_cast<std::size_t>(sample.skip.n_nodes))
    throw std::invalid_argument("GraphSample: op count must match node count");
  for (int id : sample.op_ids)
    if (id < 0 || id >= params.op_embedding.rows)
      throw std::invalid_argument("GraphSample: op id out of range");
  if (sample.epoch_index < 0 || sample.epoch_index >= params.n_budget_levels())
    throw std::invalid_argument("GraphSample: epoch index out of range");
}

// Runs the whole model over a batch, filling the cache. BN uses batch
// statistics in Training mode and the stored running statistics otherwise.
inline void forward_batch(const PredictorParams& params,
                          const std::vector<GraphSample>& batch, BnMode mode,
                          BatchCache& cache) {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  const int b_size = static_cast<int>(batch.size());
  const int hidden = params.gcn_weights.back().cols;
  const int d_ep = params.epoch_embedding.cols;
  cache.elems.clear();
  cache.elems.reserve(batch.size());
  cache.u0 = Matrix(b_size, hidden + d_ep);

  for (int b = 0; b < b_size; ++b) {
    const GraphSample& sample = batch[b];
    check_sample(params, sample);
    ElementCache ec;
    ec.s = normalized_adjacency(sample.skip);
    const int n = sample.skip.n_nodes;
    Matrix h(n, params.op_embedding.cols);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < params.op_embedding.cols; ++j)
        h(i, j) = params.op_embedding(sample.op_ids[i], j);
    ec.h.push_back(h);
    for (const auto& w : params.gcn_weights) {
      Matrix m = linalg::matmul(ec.s, ec.h.back());
      Matrix z = linalg::matmul(m, w);
      ec.smoothed.push_back(std::move(m));
      ec.h.push_back(linalg::relu(z));
      ec.pre.push_back(std::move(z));
    }
    // max-pool over nodes; first index wins ties so gradients are stable
    const Matrix& top = ec.h.back();
    ec.argmax.assign(hidden, 0);
    for (int j = 0; j < hidden; ++j) {
      double best = top(0, j);
      for (int i = 1; i < n; ++i) {
        if (top(i, j) > best) {
          best = top(i, j);
          ec.argmax[j] = i;
        }
      }
      cache.u0(b, j) = best;
    }
    for (int j = 0; j < d_ep; ++j)
      cache.u0(b, hidden + j) = params.epoch_embedding(sample.epoch_index, j);
    cache.elems.push_back(std::move(ec));
  }

  cache.layer_in.clear();
  cache.lin_out.clear();
  cache.xhat.clear();
  cache.mean.clear();
  cache.var.clear();
  Matrix u = cache.u0;
  for (std::size_t l = 0; l < params.mlp.size(); ++l) {
    const MlpLayer& layer = params.mlp[l];
    cache.layer_in.push_back(u);
    Matrix a = linalg::matmul(u, layer.weight);
    for (int i = 0; i < a.rows; ++i)
      for (int j = 0; j < a.cols; ++j) a(i, j) += layer.bias[j];
    cache.lin_out.push_back(a);
    if (!layer.batch_norm) {
      u = a;
      continue;
    }
    const int cols = a.cols;
    std::vector<double> mu(cols, 0.0), var(cols, 0.0);
    if (mode == BnMode::Training) {
      for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < a.rows; ++i) mu[j] += a(i, j);
        mu[j] /= a.rows;
        for (int i = 0; i < a.rows; ++i) {
          const double d = a(i, j) - mu[j];
          var[j] += d * d;
        }
        var[j] /= a.rows;
      }
    } else {
      mu = layer.bn_run_mean;
      var = layer.bn_run_var;
    }
    Matrix xhat(a.rows, cols);
    Matrix y(a.rows, cols);
    for (int j = 0; j < cols; ++j) {
      const double inv = 1.0 / std::sqrt(var[j] + kBnEpsilon);
      for (int i = 0; i < a.rows; ++i) {
        xhat(i, j) = (a(i, j) - mu[j]) * inv;
        y(i, j) = layer.bn_scale[j] * xhat(i, j) + layer.bn_shift[j];
      }
    }
    cache.xhat.push_back(std::move(xhat));
    cache.mean.push_back(std::move(mu));
    cache.var.push_back(std::move(var));
    u = linalg::relu(y);
    cache.lin_out.back() = std::move(y);  // cache post-BN pre-relu for masking
  }

  cache.logits.resize(b_size);
  cache.preds.resize(b_size);
  for (int b = 0; b < b_size; ++b) {
    cache.logits[b] = u(b, 0);
    cache.preds[b] = 1.0 / (1.0 + std::exp(-u(b, 0)));
  }
}

}  // namespace detail

// Pre-sigmoid score of a single element (inference-mode batch norm).
inline double forward_logit(const PredictorParams& params, const GraphSample& sample) {
  detail::BatchCache cache;
  detail::forward_batch(params, {sample}, BnMode::Inference, cache);
  return cache.logits[0];
}

// Predicted accuracy in [0, 1] for a single element.
inline double forward(const PredictorParams& params, const GraphSample& sample) {
  detail::BatchCache cache;
  detail::forward_batch(params, {sample}, BnMode::Inference, cache);
  return cache.preds[0];
}

inline double predict(const PredictorParams& params, const space::CellGraph& cell,
                      int epoch_index) {
  return forward(params, make_sample(cell, epoch_index, 0.0));
}

inline std::vector<double> predict_batch(const PredictorParams& params,
                                         const std::vector<GraphSample>& batch,
                                         BnMode mode = BnMode::Inference) {
  detail::BatchCache cache;
  detail::forward_batch(params, batch, mode, cache);
  return cache.preds;
}

// Mean squared error of the batch.
inline double loss(const PredictorParams& params, const std::vector<GraphSample>& batch,
                   BnMode mode = BnMode::Training) {
  detail::BatchCache cache;
  detail::forward_batch(params, batch, mode, cache);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double d = cache.preds[b] - batch[b].label;
    acc += d * d;
  }
  return acc / static_cast<double>(batch.size());
}

struct BackwardResult {
  double loss = 0.0;
  PredictorParams gradients;  // same shapes; running stats stay zero
  // batch statistics observed during the forward pass, for running updates
  std::vector<std::vector<double>> batch_mean, batch_var;
};

// Reverse-mode gradients of the training-mode MSE loss with respect to every
// trainable tensor. The graph normalization is constant per sample; max-pool
// routes to the argmax node (lowest index on ties).
inline BackwardResult backward(const PredictorParams& params,
                               const std::vector<GraphSample>& batch) {
  detail::BatchCache cache;
  detail::forward_batch(params, batch, BnMode::Training, cache);
  const int b_size = static_cast<int>(batch.size());
  const int hidden = params.gcn_weights.back().cols;
  const int d_ep = params.epoch_embedding.cols;

  BackwardResult result;
  result.gradients = zeros_like(params);
  PredictorParams& g = result.gradients;

  double total = 0.0;
  Matrix d_u(b_size, 1);
  for (int b = 0; b < b_size; ++b) {
    const double diff = cache.preds[b] - batch[b].label;
    total += diff * diff;
    const double d_pred = 2.0 * diff / b_size;
    d_u(b, 0) = d_pred * cache.preds[b] * (1.0 - cache.preds[b]);
  }
  result.loss = total / b_size;

  // MLP backward, last layer first
  int bn_index = static_cast<int>(cache.xhat.size());
  for (int l = static_cast<int>(params.mlp.size()) - 1; l >= 0; --l) {
    const MlpLayer& layer = params.mlp[l];
    Matrix d_lin;  // gradient at the raw linear output
    if (layer.batch_norm) {
      --bn_index;
      const Matrix d_y = linalg::relu_backward(d_u, cache.lin_out[l]);
      const Matrix& xhat = cache.xhat[bn_index];
      const int cols = d_y.cols;
      d_lin = Matrix(d_y.rows, cols);
      for (int j = 0; j < cols; ++j) {
        double d_scale = 0.0, d_shift = 0.0, sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int i = 0; i < d_y.rows; ++i) {
          d_scale += d_y(i, j) * xhat(i, j);
          d_shift += d_y(i, j);
        }
        g.mlp[l].bn_scale[j] += d_scale;
        g.mlp[l].bn_shift[j] += d_shift;
        for (int i = 0; i < d_y.rows; ++i) {
          const double dxh = d_y(i, j) * layer.bn_scale[j];
          sum_dxhat += dxh;
          sum_dxhat_xhat += dxh * xhat(i, j);
        }
        const double inv = 1.0 / std::sqrt(cache.var[bn_index][j] + kBnEpsilon);
        const double n = static_cast<double>(d_y.rows);
        for (int i = 0; i < d_y.rows; ++i) {
          const double dxh = d_y(i, j) * layer.bn_scale[j];
          d_lin(i, j) = inv / n * (n * dxh - sum_dxhat - xhat(i, j) * sum_dxhat_xhat);
        }
      }
    } else {
      d_lin = d_u;
    }
    linalg::add_scaled(g.mlp[l].weight, linalg::matmul_tn(cache.layer_in[l], d_lin), 1.0);
    for (int j = 0; j < d_lin.cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < d_lin.rows; ++i) s += d_lin(i, j);
      g.mlp[l].bias[j] += s;
    }
    d_u = linalg::matmul_nt(d_lin, params.mlp[l].weight);
  }

  // split the concatenation; scatter through readout and GCN stack
  for (int b = 0; b < b_size; ++b) {
    const GraphSample& sample = batch[b];
    const detail::ElementCache& ec = cache.elems[b];
    for (int j = 0; j < d_ep; ++j)
      g.epoch_embedding(sample.epoch_index, j) += d_u(b, hidden + j);

    const int n = sample.skip.n_nodes;
    Matrix d_h(n, hidden);
    for (int j = 0; j < hidden; ++j) d_h(ec.argmax[j], j) = d_u(b, j);

    for (int l = static_cast<int>(params.gcn_weights.size()) - 1; l >= 0; --l) {
      const Matrix d_z = linalg::relu_backward(d_h, ec.pre[l]);
      linalg::add_scaled(g.gcn_weights[l], linalg::matmul_tn(ec.smoothed[l], d_z), 1.0);
      const Matrix d_m = linalg::matmul_nt(d_z, params.gcn_weights[l]);
      d_h = linalg::matmul(ec.s, d_m);  // S is symmetric
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < params.op_embedding.cols; ++j)
        g.op_embedding(sample.op_ids[i], j) += d_h(i, j);
  }

  result.batch_mean = cache.mean;
  result.batch_var = cache.var;
  return result;
}

struct TrainResult {
  std::vector<double> epoch_losses;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mini-batch SGD with momentum. Deterministic for a fixed rng seed; running
// BN statistics are refreshed from each processed batch.
inline TrainResult train(PredictorParams& params, const std::vector<GraphSample>& dataset,
                         const TrainConfig& config, Rng& rng) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  PredictorParams velocity = zeros_like(params);
  auto param_ptrs = trainable_values(params);
  auto velocity_ptrs = trainable_values(velocity);

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates from our own stream
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      std::vector<GraphSample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);

      BackwardResult back = backward(params, batch);
      if (!std::isfinite(back.loss))
        throw DivergenceError("train: loss diverged at epoch " + std::to_string(epoch));
      epoch_loss += back.loss * static_cast<double>(batch.size());
      seen += batch.size();

      auto grad_ptrs = trainable_values(back.gradients);
      for (std::size_t i = 0; i < param_ptrs.size(); ++i) {
        *velocity_ptrs[i] =
            config.momentum * *velocity_ptrs[i] - config.learning_rate * *grad_ptrs[i];
        *param_ptrs[i] += *velocity_ptrs[i];
      }
      std::size_t bn = 0;
      for (auto& layer : params.mlp) {
        if (!layer.batch_norm) continue;
        for (std::size_t j = 0; j < layer.bn_run_mean.size(); ++j) {
          layer.bn_run_mean[j] = kBnMomentum * layer.bn_run_mean[j] +
                                 (1.0 - kBnMomentum) * back.batch_mean[bn][j];
          layer.bn_run_var[j] = kBnMomentum * layer.bn_run_var[j] +
                                (1.0 - kBnMomentum) * back.batch_var[bn][j];
        }
        ++bn;
      }
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(seen));
  }
  return result;
}

struct RankedCandidate {
  std::size_t index = 0;
  double score = 0.0;
};

// Candidates ordered by descending predicted accuracy; stable under ties.
inline std::vector<RankedCandidate> rank_candidates(
    const PredictorParams& params, const std::vector<space::CellGraph>& candidates,
    int epoch_index) {
  std::vector<RankedCandidate> ranked;
  ranked.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    ranked.push_back({i, predict(params, candidates[i], epoch_index)});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCandidate& a, const RankedCandidate& b) {
                     return a.score > b.score;
                   });
  return ranked;
}

// --- serialization -----------------------------------------------------------
//
// Versioned line-oriented text format. Values are written with %.17g, which
// reproduces every double bit-for-bit on load; byte order is therefore not a
// concern. Layout:
//   gpnas-predictor-v1
//   tensor <name> <rows> <cols>
//   ... one row of values per line ...

namespace detail {

inline void write_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "tensor " << name << ' ' << m.rows << ' ' << m.cols << '\n';
  char buf[32];
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      out << buf << (j + 1 == m.cols ? "" : " ");
    }
    out << '\n';
  }
}

inline void write_tensor(std::ostream& out, const std::string& name,
                         const std::vector<double>& v) {
  Matrix m(1, static_cast<int>(v.size()));
  m.data = v;
  write_tensor(out, name, m);
}

inline Matrix read_tensor(std::istream& in, const std::string& expected_name) {
  std::string tag, name;
  int rows = 0, cols = 0;
  if (!(in >> tag >> name >> rows >> cols) || tag != "tensor" || name != expected_name)
    throw std::runtime_error("predictor load: expected tensor " + expected_name);
  if (rows < 1 || cols < 1) throw std::runtime_error("predictor load: bad shape for " + name);
  Matrix m(rows, cols);
  for (auto& v : m.data)
    if (!(in >> v)) throw std::runtime_error("predictor load: short data for " + name);
  return m;
}

inline std::vector<double> read_vector(std::istream& in, const std::string& name) {
  const Matrix m = read_tensor(in, name);
  if (m.rows != 1) throw std::runtime_error("predictor load: " + name + " must be a row");
  return m.data;
}

}  // namespace detail

inline void save_params(const PredictorParams& params, std::ostream& out) {
  out << "gpnas-predictor-v1\n";
  out << "gcn_layers " << params.gcn_weights.size() << '\n';
  detail::write_tensor(out, "op_embedding", params.op_embedding);
  detail::write_tensor(out, "epoch_embedding", params.epoch_embedding);
  for (std::size_t l = 0; l < params.gcn_weights.size(); ++l)
    detail::write_tensor(out, "gcn_weight_" + std::to_string(l), params.gcn_weights[l]);
  for (std::size_t l = 0; l < params.mlp.size(); ++l) {
    const auto& layer = params.mlp[l];
    const std::string p = "mlp" + std::to_string(l) + "_";
    out << "mlp_layer " << l << " bn " << (layer.batch_norm ? 1 : 0) << '\n';
    detail::write_tensor(out, p + "weight", layer.weight);
    detail::write_tensor(out, p + "bias", layer.bias);
    if (layer.batch_norm) {
      detail::write_tensor(out, p + "bn_scale", layer.bn_scale);
      detail::write_tensor(out, p + "bn_shift", layer.bn_shift);
      detail::write_tensor(out, p + "bn_run_mean", layer.bn_run_mean);
      detail::write_tensor(out, p + "bn_run_var", layer.bn_run_var);
    }
  }
}

inline void save_params_file(const PredictorParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_params: cannot open " + path);
  save_params(params, out);
}

inline PredictorParams load_params(std::istream& in) {
  std::string magic;
  if (!(in >> magic) || magic != "gpnas-predictor-v1")
    throw std::runtime_error("predictor load: bad magic");
  std::string tag;
  std::size_t gcn_layers = 0;
  if (!(in >> tag >> gcn_layers) || tag != "gcn_layers" || gcn_layers < 1)
    throw std::runtime_error("predictor load: bad gcn_layers header");
  PredictorParams p;
  p.op_embedding = detail::read_tensor(in, "op_embedding");
  if (p.op_embedding.rows != space::kNumGeneralizedOps)
    throw std::runtime_error("predictor load: op_embedding must have 156 rows");
  p.epoch_embedding = detail::read_tensor(in, "epoch_embedding");
  for (std::size_t l = 0; l < gcn_layers; ++l)
    p.gcn_weights.push_back(detail::read_tensor(in, "gcn_weight_" + std::to_string(l)));
  for (std::size_t l = 0; l < 3; ++l) {
    std::size_t index = 0;
    int bn = 0;
    if (!(in >> tag >> index >> magic >> bn) || tag != "mlp_layer" || index != l ||
        magic != "bn")
      throw std::runtime_error("predictor load: bad mlp layer header");
    MlpLayer layer;
    const std::string prefix = "mlp" + std::to_string(l) + "_";
    layer.weight = detail::read_tensor(in, prefix + "weight");
    layer.bias = detail::read_vector(in, prefix + "bias");
    layer.batch_norm = bn != 0;
    if (layer.batch_norm) {
      layer.bn_scale = detail::read_vector(in, prefix + "bn_scale");
      layer.bn_shift = detail::read_vector(in, prefix + "bn_shift");
      layer.bn_run_mean = detail::read_vector(in, prefix + "bn_run_mean");
      layer.bn_run_var = detail::read_vector(in, prefix + "bn_run_var");
    }
    p.mlp.push_back(std::move(layer));
  }
  return p;
}

inline PredictorParams load_params_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_params: cannot open " + path);
  return load_params(in);
}

}  // namespace gpnas::predictor
