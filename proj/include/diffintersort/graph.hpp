#pragma once

#include "diffintersort/common.hpp"

#include <algorithm>
#include <optional>
#include <queue>
#include <string>
#include <vector>

namespace diffintersort {

/// Directed acyclic graph over nodes 0..d-1. adj(i, j) == 1 means edge i -> j.
class Dag {
 public:
  Dag() = default;

  explicit Dag(int d) : adj_(BoolMatrix::Zero(d, d)) { require(d >= 0, "Dag: negative node count"); }

  /// Validates that the matrix is square, has a zero diagonal and is acyclic.
  explicit Dag(BoolMatrix adj) : adj_(std::move(adj)) {
    if (adj_.rows() != adj_.cols()) throw DimensionError("Dag: adjacency must be square");
    for (Eigen::Index i = 0; i < adj_.rows(); ++i)
      require(adj_(i, i) == 0, "Dag: self loop at node " + std::to_string(i));
    require(topological_sort(adj_).has_value(), "Dag: adjacency contains a cycle");
  }

  int size() const { return static_cast<int>(adj_.rows()); }
  const BoolMatrix& adjacency() const { return adj_; }
  bool has_edge(int i, int j) const { return adj_(i, j) != 0; }

  int edge_count() const {
    int n = 0;
    for (Eigen::Index k = 0; k < adj_.size(); ++k) n += adj_.data()[k] != 0;
    return n;
  }

  std::vector<int> parents(int j) const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (adj_(i, j)) out.push_back(i);
    return out;
  }

  /// Kahn's algorithm; smallest available index first, so the result is deterministic.
  static std::optional<std::vector<int>> topological_sort(const BoolMatrix& adj) {
    const auto d = static_cast<int>(adj.rows());
    std::vector<int> indeg(static_cast<std::size_t>(d), 0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) indeg[static_cast<std::size_t>(j)] += adj(i, j) != 0;
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (int j = 0; j < d; ++j)
      if (indeg[static_cast<std::size_t>(j)] == 0) ready.push(j);
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(d));
    while (!ready.empty()) {
      const int i = ready.top();
      ready.pop();
      out.push_back(i);
      for (int j = 0; j < d; ++j)
        if (adj(i, j) && --indeg[static_cast<std::size_t>(j)] == 0) ready.push(j);
    }
    if (static_cast<int>(out.size()) != d) return std::nullopt;
    return out;
  }

  std::vector<int> topological_order() const { return *topological_sort(adj_); }

 private:
  BoolMatrix adj_;
};

inline bool is_acyclic(const BoolMatrix& adj) {
  return adj.rows() == adj.cols() && Dag::topological_sort(adj).has_value();
}

/// A causal order stored as the position of each node (0-based internally,
/// printed 1-based).
class CausalOrder {
 public:
  CausalOrder() = default;

  static CausalOrder from_positions(std::vector<int> positions) {
    validate(positions);
    CausalOrder o;
    o.pos_ = std::move(positions);
    return o;
  }

  /// `sequence[k]` is the node placed at position k.
  static CausalOrder from_sequence(const std::vector<int>& sequence) {
    std::vector<int> pos(sequence.size(), -1);
    for (std::size_t k = 0; k < sequence.size(); ++k) {
      const int node = sequence[k];
      require(node >= 0 && static_cast<std::size_t>(node) < sequence.size() &&
                  pos[static_cast<std::size_t>(node)] == -1,
              "CausalOrder: sequence is not a permutation");
      pos[static_cast<std::size_t>(node)] = static_cast<int>(k);
    }
    CausalOrder o;
    o.pos_ = std::move(pos);
    return o;
  }

  static CausalOrder identity(int d) {
    std::vector<int> pos(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) pos[static_cast<std::size_t>(i)] = i;
    return from_positions(std::move(pos));
  }

  static CausalOrder random(int d, Rng& rng) { return from_sequence(rng.permutation(d)); }

  int size() const { return static_cast<int>(pos_.size()); }
  int position(int node) const { return pos_[static_cast<std::size_t>(node)]; }
  const std::vector<int>& positions() const { return pos_; }

  bool precedes(int i, int j) const { return position(i) < position(j); }

  std::vector<int> sequence() const {
    std::vector<int> seq(pos_.size());
    for (std::size_t i = 0; i < pos_.size(); ++i) seq[static_cast<std::size_t>(pos_[i])] = static_cast<int>(i);
    return seq;
  }

  /// Space-separated 1-based node sequence.
  std::string to_string() const {
    std::string s;
    for (int node : sequence()) {
      if (!s.empty()) s += ' ';
      s += std::to_string(node + 1);
    }
    return s;
  }

  friend bool operator==(const CausalOrder&, const CausalOrder&) = default;

 private:
  static void validate(const std::vector<int>& pos) {
    std::vector<char> seen(pos.size(), 0);
    for (int p : pos) {
      require(p >= 0 && static_cast<std::size_t>(p) < pos.size() && !seen[static_cast<std::size_t>(p)],
              "CausalOrder: positions are not a permutation");
      seen[static_cast<std::size_t>(p)] = 1;
    }
  }

  std::vector<int> pos_;
};

/// Erdos-Renyi DAG: edges go forward along a hidden uniformly random node order.
inline Dag sample_er_dag(int d, double edge_prob, std::uint64_t seed) {
  require(d >= 1, "sample_er_dag: d must be >= 1");
  require(edge_prob >= 0.0 && edge_prob <= 1.0, "sample_er_dag: edge probability must lie in [0, 1]");
  Rng rng(seed);
  const auto hidden = rng.permutation(d);
  BoolMatrix adj = BoolMatrix::Zero(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b)
      if (rng.bernoulli(edge_prob)) adj(hidden[static_cast<std::size_t>(a)], hidden[static_cast<std::size_t>(b)]) = 1;
  return Dag(std::move(adj));
}

/// Edge probability giving `edges_per_node` expected edges per node in an ER DAG.
inline double er_edge_prob(int d, double edges_per_node) {
  return d > 1 ? std::min(1.0, 2.0 * edges_per_node / (d - 1)) : 0.0;
}

/// Barabasi-Albert scale-free DAG.
///
/// Starts from a seed core of `m` isolated nodes; every later node attaches
/// to `m` distinct earlier nodes chosen proportionally to degree (the first
/// newcomer links to the whole core). Edges point from the earlier node to
/// the newcomer, and node labels are shuffled afterwards.
inline Dag sample_sf_dag(int d, int m, std::uint64_t seed) {
  require(m >= 1, "sample_sf_dag: m must be >= 1");
  require(m < d, "sample_sf_dag: m must be smaller than d");
  Rng rng(seed);
  BoolMatrix adj = BoolMatrix::Zero(d, d);
  std::vector<int> targets(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) targets[static_cast<std::size_t>(k)] = k;
  std::vector<int> repeated;  // node appears once per incident edge
  for (int node = m; node < d; ++node) {
    for (int t : targets) {
      adj(t, node) = 1;
      repeated.push_back(t);
      repeated.push_back(node);
    }
    if (node + 1 == d) break;
    std::vector<int> next;
    while (static_cast<int>(next.size()) < m) {
      const int cand = repeated[rng.index(repeated.size())];
      if (std::find(next.begin(), next.end(), cand) == next.end()) next.push_back(cand);
    }
    targets = std::move(next);
  }
  const auto relabel = rng.permutation(d);
  BoolMatrix out = BoolMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (adj(i, j)) out(relabel[static_cast<std::size_t>(i)], relabel[static_cast<std::size_t>(j)]) = 1;
  return Dag(std::move(out));
}

/// Number of edges whose cause is placed after its effect.
inline int d_top(const Dag& g, const CausalOrder& order) {
  if (order.size() != g.size()) throw DimensionError("d_top: order length differs from node count");
  int n = 0;
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j)
      if (g.has_edge(i, j) && order.position(i) > order.position(j)) ++n;
  return n;
}

/// Mean d_top of `draws` uniformly random orders.
inline double random_order_d_top(const Dag& g, int draws, Rng& rng) {
  double total = 0.0;
  for (int k = 0; k < draws; ++k) total += d_top(g, CausalOrder::random(g.size(), rng));
  return total / draws;
}

inline void check_same_shape(const BoolMatrix& a, const BoolMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw DimensionError(std::string(what) + ": matrices must be square with equal shape");
}

/// Structural Hamming distance. Each unordered pair whose edge state differs
/// counts once, so a reversed edge costs 1.
inline int shd(const BoolMatrix& pred, const BoolMatrix& truth) {
  check_same_shape(pred, truth, "shd");
  int n = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    for (Eigen::Index j = i + 1; j < pred.cols(); ++j)
      if ((pred(i, j) != 0) != (truth(i, j) != 0) || (pred(j, i) != 0) != (truth(j, i) != 0)) ++n;
  return n;
}

struct EdgeScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Directed-edge precision/recall/F1 over off-diagonal ordered pairs.
/// Both graphs empty counts as a perfect prediction.
inline EdgeScores edge_scores(const BoolMatrix& pred, const BoolMatrix& truth) {
  check_same_shape(pred, truth, "edge_scores");
  int tp = 0, npred = 0, ntrue = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    for (Eigen::Index j = 0; j < pred.cols(); ++j) {
      if (i == j) continue;
      const bool p = pred(i, j) != 0, t = truth(i, j) != 0;
      tp += p && t;
      npred += p;
      ntrue += t;
    }
  if (npred == 0 && ntrue == 0) return {1.0, 1.0, 1.0};
  EdgeScores s;
  s.precision = npred ? static_cast<double>(tp) / npred : 0.0;
  s.recall = ntrue ? static_cast<double>(tp) / ntrue : 0.0;
  s.f1 = tp ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

inline double f1_edges(const BoolMatrix& pred, const BoolMatrix& truth) { return edge_scores(pred, truth).f1; }

/// Transitive closure: (i, j) == 1 iff a directed path i -> ... -> j exists.
inline BoolMatrix reachability(const Dag& g) {
  const int d = g.size();
  BoolMatrix reach = BoolMatrix::Zero(d, d);
  std::vector<int> stack;
  for (int s = 0; s < d; ++s) {
    stack.assign(1, s);
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < d; ++v)
        if (g.has_edge(u, v) && !reach(s, v)) {
          reach(s, v) = 1;
          stack.push_back(v);
        }
    }
  }
  return reach;
}

}  // namespace diffintersort
