#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/distance.hpp"
#include "diffintersort/graph.hpp"

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

namespace diffintersort {

/// Real vector whose descending sort orders the variables: p_i > p_j means
/// i comes before j.
struct Potential {
  Vector values;

  Potential() = default;
  explicit Potential(Vector v) : values(std::move(v)) {}

  int size() const { return static_cast<int>(values.size()); }

  bool has_ties() const {
    std::vector<double> v(values.data(), values.data() + values.size());
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) != v.end();
  }
};

/// Potential realizing `order`: p_i = -position(i).
inline Potential potential_from_order(const CausalOrder& order) {
  Vector p(order.size());
  for (int i = 0; i < order.size(); ++i) p(i) = -static_cast<double>(order.position(i));
  return Potential(std::move(p));
}

/// Argsort descending: the largest potential gets the first position.
inline CausalOrder extract_order(const Potential& p) {
  require(!p.has_ties(), "extract_order: potential has tied entries");
  std::vector<int> seq(static_cast<std::size_t>(p.size()));
  std::iota(seq.begin(), seq.end(), 0);
  std::sort(seq.begin(), seq.end(), [&](int a, int b) { return p.values(a) > p.values(b); });
  return CausalOrder::from_sequence(seq);
}

/// Intersort score of an order: sum of D_ij over pairs with i placed before j.
inline double score_of_order(const Matrix& D, const CausalOrder& order) {
  if (D.rows() != D.cols() || D.rows() != order.size()) throw DimensionError("score_of_order: size mismatch");
  double s = 0.0;
  const auto seq = order.sequence();
  for (std::size_t a = 0; a < seq.size(); ++a)
    for (std::size_t b = a + 1; b < seq.size(); ++b) s += D(seq[a], seq[b]);
  return s;
}

inline double score_of_order(const DistanceMatrix& D, const CausalOrder& order) {
  return score_of_order(D.values, order);
}

/// Binary matrix with (i, j) == 1 iff p_i > p_j.
inline Matrix step_of_differences(const Vector& p) {
  const auto d = p.size();
  Matrix m(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) = p(i) - p(j) > 0.0 ? 1.0 : 0.0;
  return m;
}

/// Potential form of the score: sum_ij D_ij * [p_i > p_j].
inline double score_of_potential_hard(const Matrix& D, const Potential& p) {
  if (D.rows() != D.cols() || D.rows() != p.size()) throw DimensionError("score_of_potential_hard: size mismatch");
  require(!p.has_ties(), "score_of_potential_hard: potential has tied entries");
  return (D.array() * step_of_differences(p.values).array()).sum();
}

inline double score_of_potential_hard(const DistanceMatrix& D, const Potential& p) {
  return score_of_potential_hard(D.values, p);
}

constexpr int kBruteForceMaxSize = 9;

/// Exhaustive maximization of the order score over all d! orders.
inline std::pair<CausalOrder, double> brute_force_best_order(const Matrix& D) {
  if (D.rows() != D.cols()) throw DimensionError("brute_force_best_order: D must be square");
  const auto d = static_cast<int>(D.rows());
  if (d > kBruteForceMaxSize)
    throw ParameterError("brute_force_best_order: d = " + std::to_string(d) +
                         " is too large for enumeration; use optimize_potential");
  std::vector<int> seq(static_cast<std::size_t>(d));
  std::iota(seq.begin(), seq.end(), 0);
  std::vector<int> best = seq;
  double best_score = -std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) s += D(seq[static_cast<std::size_t>(a)], seq[static_cast<std::size_t>(b)]);
    if (s > best_score) {
      best_score = s;
      best = seq;
    }
  } while (std::next_permutation(seq.begin(), seq.end()));
  if (d == 0) best_score = 0.0;
  return {CausalOrder::from_sequence(best), best_score};
}

inline std::pair<CausalOrder, double> brute_force_best_order(const DistanceMatrix& D) {
  return brute_force_best_order(D.values);
}

// Approximate SORTRANKING baseline: rank variables by the row sums of the
// thresholded matrix. Intervened variables with positive row sums come first
// (descending), then the rest by descending row sum; ties by index.
inline CausalOrder sortranking(const RawDistances& raw, double eps, double c) {
  const auto D = threshold_matrix(raw, eps, c);
  const int d = D.size();
  const Vector rows = D.values.rowwise().sum();
  std::vector<int> seq(static_cast<std::size_t>(d));
  std::iota(seq.begin(), seq.end(), 0);
  const auto leading = [&](int i) { return raw.present[static_cast<std::size_t>(i)] && rows(i) > 0.0; };
  std::stable_sort(seq.begin(), seq.end(), [&](int a, int b) {
    if (leading(a) != leading(b)) return leading(a);
    return rows(a) > rows(b);
  });
  return CausalOrder::from_sequence(seq);
}

}  // namespace diffintersort
