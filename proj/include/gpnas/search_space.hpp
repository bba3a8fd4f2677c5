#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpnas/rng.hpp"

namespace gpnas::space {

inline constexpr int kNumOperators = 13;
inline constexpr int kNumActivations = 4;
inline constexpr int kNumInitMethods = 3;
inline constexpr int kNumGeneralizedOps =
    kNumOperators * kNumActivations * kNumInitMethods;  // 156

// Candidate operators are symbolic identities; only the evaluation oracle
// assigns them meaning.
inline constexpr std::array<const char*, kNumOperators> kOperatorNames = {
    "identity",     "sep_conv_3x3", "sep_conv_5x5", "sep_conv_7x7",
    "dil_conv_3x3", "dil_conv_5x5", "dil_conv_7x7", "max_pool_3x3",
    "max_pool_5x5", "avg_pool_3x3", "avg_pool_5x5", "conv_1x7_7x1",
    "conv_3x3"};

inline constexpr std::array<const char*, kNumActivations> kActivationNames = {
    "selu", "relu", "elu", "tanh"};

inline constexpr std::array<const char*, kNumInitMethods> kInitMethodNames = {
    "uniform", "gauss", "gauss_sq"};

// One generalized operator: (operator, activation, initialization).
struct GeneralizedOp {
  int op = 0;
  int act = 0;
  int init = 0;

  bool operator==(const GeneralizedOp&) const = default;

  bool valid() const {
    return op >= 0 && op < kNumOperators && act >= 0 && act < kNumActivations &&
           init >= 0 && init < kNumInitMethods;
  }

  // Dense index into the full 156-element product space.
  int global_id() const { return (op * kNumActivations + act) * kNumInitMethods + init; }

  static GeneralizedOp from_global_id(int id) {
    if (id < 0 || id >= kNumGeneralizedOps)
      throw std::invalid_argument("GeneralizedOp: id out of range");
    return {id / (kNumActivations * kNumInitMethods),
            (id / kNumInitMethods) % kNumActivations, id % kNumInitMethods};
  }
};

// All 156 triples in lexicographic (op, act, init) order.
inline std::vector<GeneralizedOp> enumerate_generalized_ops() {
  std::vector<GeneralizedOp> all;
  all.reserve(kNumGeneralizedOps);
  for (int op = 0; op < kNumOperators; ++op)
    for (int act = 0; act < kNumActivations; ++act)
      for (int init = 0; init < kNumInitMethods; ++init)
        all.push_back({op, act, init});
  return all;
}

// The set of generalized operators a search runs over. Reduced domains keep
// exhaustive oracles tractable.
struct OpDomain {
  std::vector<GeneralizedOp> ops;

  static OpDomain full() { return {enumerate_generalized_ops()}; }

  // k triples (i mod 13, i mod 4, i mod 3); injective for k <= 156 and hits
  // every coordinate axis even for small k.
  static OpDomain reduced(int k) {
    if (k < 1 || k > kNumGeneralizedOps)
      throw std::invalid_argument("OpDomain::reduced: k out of range");
    OpDomain d;
    d.ops.reserve(k);
    for (int i = 0; i < k; ++i)
      d.ops.push_back({i % kNumOperators, i % kNumActivations, i % kNumInitMethods});
    return d;
  }

  int size() const { return static_cast<int>(ops.size()); }

  int index_of(const GeneralizedOp& g) const {
    for (int i = 0; i < size(); ++i)
      if (ops[i] == g) return i;
    throw std::invalid_argument("OpDomain: operator not in domain");
  }

  bool contains(const GeneralizedOp& g) const {
    for (const auto& o : ops)
      if (o == g) return true;
    return false;
  }
};

// Undirected skip-connection pattern over n_nodes >= 2, stored as the upper
// triangle in row-major (i < j) order. Symmetry and a zero diagonal hold by
// construction; validity additionally demands no isolated node.
struct SkipPattern {
  int n_nodes = 0;
  std::vector<std::uint8_t> bits;

  SkipPattern() = default;
  explicit SkipPattern(int n) : n_nodes(n) {
    if (n < 2) throw std::invalid_argument("SkipPattern: n_nodes must be >= 2");
    bits.assign(static_cast<std::size_t>(n) * (n - 1) / 2, 0);
  }

  bool operator==(const SkipPattern&) const = default;

  static std::size_t pair_index(int i, int j, int n) {
    if (i > j) std::swap(i, j);
    // row-major position of (i, j), i < j, within the upper triangle
    return static_cast<std::size_t>(i) * n - static_cast<std::size_t>(i) * (i + 1) / 2 +
           (j - i - 1);
  }

  bool edge(int i, int j) const {
    if (i == j) return false;
    return bits[pair_index(i, j, n_nodes)] != 0;
  }

  void set_edge(int i, int j, bool present) {
    if (i == j) throw std::invalid_argument("SkipPattern: no self loops");
    bits[pair_index(i, j, n_nodes)] = present ? 1 : 0;
  }

  int degree(int i) const {
    int d = 0;
    for (int j = 0; j < n_nodes; ++j)
      if (j != i && edge(i, j)) ++d;
    return d;
  }

  int edge_count() const {
    int c = 0;
    for (auto b : bits) c += b != 0;
    return c;
  }

  bool has_isolated_node() const {
    for (int i = 0; i < n_nodes; ++i)
      if (degree(i) == 0) return true;
    return false;
  }

  bool valid() const {
    return n_nodes >= 2 &&
           bits.size() == static_cast<std::size_t>(n_nodes) * (n_nodes - 1) / 2 &&
           !has_isolated_node();
  }
};

// A child-model configuration: skip pattern plus one generalized operator
// per node.
struct CellGraph {
  SkipPattern skip;
  std::vector<GeneralizedOp> ops;

  bool operator==(const CellGraph&) const = default;

  bool valid() const {
    if (!skip.valid() || ops.size() != static_cast<std::size_t>(skip.n_nodes))
      return false;
    for (const auto& g : ops)
      if (!g.valid()) return false;
    return true;
  }
};

// Decaying per-edge dropout applied to sampled skip patterns; counters the
// searcher's bias toward dense skip connectivity.
struct DropBlocker {
  double rate0 = 0.9;
  double decay = 0.98;
  int step = 0;

  double current_rate() const {
    double r = rate0;
    for (int i = 0; i < step; ++i) r *= decay;
    return r;
  }

  void advance() { ++step; }
};

// Uniform over valid patterns: independent fair coin per pair, rejected
// until no node is isolated.
inline SkipPattern sample_skip_pattern(int n_nodes, Rng& rng, int max_retries = 1000) {
  if (n_nodes < 2)
    throw std::invalid_argument("sample_skip_pattern: n_nodes must be >= 2");
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    SkipPattern p(n_nodes);
    for (auto& b : p.bits) b = rng.bernoulli(0.5) ? 1 : 0;
    if (!p.has_isolated_node()) return p;
  }
  throw std::runtime_error("sample_skip_pattern: retry limit exceeded");
}

// Removes each edge independently with the blocker's current rate. If a node
// loses all incident edges, its last-removed incident edge is put back, so
// the output is always valid when the input is.
inline SkipPattern apply_drop_blocker(const SkipPattern& pattern,
                                      const DropBlocker& blocker, Rng& rng) {
  const double rate = blocker.current_rate();
  SkipPattern out = pattern;
  std::vector<std::pair<int, int>> removed;  // in removal order
  for (int i = 0; i < pattern.n_nodes; ++i) {
    for (int j = i + 1; j < pattern.n_nodes; ++j) {
      if (out.edge(i, j) && rng.bernoulli(rate)) {
        out.set_edge(i, j, false);
        removed.emplace_back(i, j);
      }
    }
  }
  for (int node = 0; node < out.n_nodes; ++node) {
    if (out.degree(node) > 0 || pattern.degree(node) == 0) continue;
    for (auto it = removed.rbegin(); it != removed.rend(); ++it) {
      if (it->first == node || it->second == node) {
        out.set_edge(it->first, it->second, true);
        break;
      }
    }
  }
  return out;
}

// --- canonical text encodings -------------------------------------------
//
// Skip pattern:  n_nodes|upper-triangular-bits      e.g.  4|101100
// Cell:          <skip>|op:act:init,op:act:init,...  one triple per node
// Bit order is row-major over pairs (i, j) with i < j.

inline std::string encode_skip(const SkipPattern& p) {
  std::string s = std::to_string(p.n_nodes);
  s += '|';
  for (auto b : p.bits) s += b ? '1' : '0';
  return s;
}

inline std::string encode_cell(const CellGraph& cell) {
  std::string s = encode_skip(cell.skip);
  s += '|';
  for (std::size_t i = 0; i < cell.ops.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(cell.ops[i].op);
    s += ':';
    s += std::to_string(cell.ops[i].act);
    s += ':';
    s += std::to_string(cell.ops[i].init);
  }
  return s;
}

namespace detail {

inline int parse_int(const std::string& s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string(what) + ": empty field");
  std::size_t pos = 0;
  int v;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument(std::string(what) + ": not an integer: " + s);
  }
  if (pos != s.size())
    throw std::invalid_argument(std::string(what) + ": trailing junk: " + s);
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      parts.push_back(s.substr(start));
      return parts;
    }
    parts.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

}  // namespace detail

inline SkipPattern decode_skip(const std::string& text) {
  const auto parts = detail::split(text, '|');
  if (parts.size() != 2)
    throw std::invalid_argument("decode_skip: expected n|bits, got: " + text);
  const int n = detail::parse_int(parts[0], "decode_skip n_nodes");
  if (n < 2) throw std::invalid_argument("decode_skip: n_nodes must be >= 2");
  SkipPattern p(n);
  if (parts[1].size() != p.bits.size())
    throw std::invalid_argument("decode_skip: wrong bit-string length");
  for (std::size_t i = 0; i < p.bits.size(); ++i) {
    if (parts[1][i] != '0' && parts[1][i] != '1')
      throw std::invalid_argument("decode_skip: bits must be 0/1");
    p.bits[i] = parts[1][i] == '1';
  }
  if (p.has_isolated_node())
    throw std::invalid_argument("decode_skip: pattern has an isolated node");
  return p;
}

inline CellGraph decode_cell(const std::string& text) {
  const auto parts = detail::split(text, '|');
  if (parts.size() != 3)
    throw std::invalid_argument("decode_cell: expected n|bits|ops, got: " + text);
  CellGraph cell;
  cell.skip = decode_skip(parts[0] + "|" + parts[1]);
  const auto triples = detail::split(parts[2], ',');
  if (triples.size() != static_cast<std::size_t>(cell.skip.n_nodes))
    throw std::invalid_argument("decode_cell: op count must equal n_nodes");
  for (const auto& t : triples) {
    const auto f = detail::split(t, ':');
    if (f.size() != 3)
      throw std::invalid_argument("decode_cell: expected op:act:init, got: " + t);
    GeneralizedOp g{detail::parse_int(f[0], "decode_cell op"),
                    detail::parse_int(f[1], "decode_cell act"),
                    detail::parse_int(f[2], "decode_cell init")};
    if (!g.valid()) throw std::invalid_argument("decode_cell: op triple out of range: " + t);
    cell.ops.push_back(g);
  }
  return cell;
}

// Uniform over valid cells in the given domain.
inline CellGraph uniform_cell(int n_nodes, const OpDomain& domain, Rng& rng) {
  CellGraph cell;
  cell.skip = sample_skip_pattern(n_nodes, rng);
  cell.ops.reserve(n_nodes);
  for (int i = 0; i < n_nodes; ++i)
    cell.ops.push_back(domain.ops[rng.uniform_index(domain.ops.size())]);
  return cell;
}

// All valid skip patterns at n_nodes, by ascending bitmask.
inline std::vector<SkipPattern> enumerate_skip_patterns(int n_nodes) {
  if (n_nodes < 2 || n_nodes > 7)
    throw std::invalid_argument("enumerate_skip_patterns: n_nodes must be in [2,7]");
  const int nbits = n_nodes * (n_nodes - 1) / 2;
  std::vector<SkipPattern> out;
  for (std::uint32_t mask = 0; mask < (1u << nbits); ++mask) {
    SkipPattern p(n_nodes);
    for (int b = 0; b < nbits; ++b) p.bits[b] = (mask >> b) & 1u;
    if (!p.has_isolated_node()) out.push_back(std::move(p));
  }
  return out;
}

}  // namespace gpnas::space
