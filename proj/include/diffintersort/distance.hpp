#pragma once

#include "diffintersort/common.hpp"
#include "diffintersort/scm.hpp"

#include <algorithm>
#include <span>
#include <vector>

namespace diffintersort {

namespace detail {

// Quantile of a sorted sample at level u, linear between order statistics
// placed at levels (i + 0.5) / n.
inline double sorted_quantile(const std::vector<double>& sorted, double u) {
  const auto n = sorted.size();
  const double x = u * static_cast<double>(n) - 0.5;
  if (x <= 0.0) return sorted.front();
  if (x >= static_cast<double>(n - 1)) return sorted.back();
  const auto lo = static_cast<std::size_t>(x);
  const double frac = x - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

/// W1 between two samples that are already sorted ascending.
inline double wasserstein1d_sorted(const std::vector<double>& sa, const std::vector<double>& sb) {
  require(!sa.empty() && !sb.empty(), "wasserstein1d: samples must be nonempty");
  if (sa.size() == sb.size()) {
    double total = 0.0;
    for (std::size_t k = 0; k < sa.size(); ++k) total += std::abs(sa[k] - sb[k]);
    return total / static_cast<double>(sa.size());
  }
  const auto n = std::max(sa.size(), sb.size());
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + 0.5) / static_cast<double>(n);
    total += std::abs(detail::sorted_quantile(sa, u) - detail::sorted_quantile(sb, u));
  }
  return total / static_cast<double>(n);
}

/// Empirical 1-Wasserstein distance between two samples.
///
/// Both quantile functions are evaluated on the grid (k + 0.5) / N with
/// N = max(|a|, |b|); for equal sizes this is the exact sorted matching.
inline double wasserstein1d(std::span<const double> a, std::span<const double> b) {
  require(!a.empty() && !b.empty(), "wasserstein1d: samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  return wasserstein1d_sorted(sa, sb);
}

inline double wasserstein1d(const Vector& a, const Vector& b) {
  return wasserstein1d(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                       std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

/// Per-marginal distances between observational and interventional data.
/// Row i is present iff variable i was intervened on.
struct RawDistances {
  Matrix values;
  std::vector<bool> present;

  int size() const { return static_cast<int>(values.rows()); }

  std::vector<int> targets() const {
    std::vector<int> t;
    for (std::size_t i = 0; i < present.size(); ++i)
      if (present[i]) t.push_back(static_cast<int>(i));
    return t;
  }
};

inline RawDistances build_raw_distances(const InterventionalDataset& ds) {
  require(!ds.envs.empty(), "build_raw_distances: dataset has no environments");
  ds.validate();
  const int d = ds.size();
  RawDistances raw{Matrix::Zero(d, d), std::vector<bool>(static_cast<std::size_t>(d), false)};
  const auto sorted_column = [](const Matrix& x, int j) {
    std::vector<double> v(x.col(j).data(), x.col(j).data() + x.rows());
    std::sort(v.begin(), v.end());
    return v;
  };
  std::vector<std::vector<double>> obs_sorted;
  for (int j = 0; j < d; ++j) obs_sorted.push_back(sorted_column(ds.obs, j));
  for (const auto& env : ds.envs) {
    const int i = env.target;
    raw.present[static_cast<std::size_t>(i)] = true;
    for (int j = 0; j < d; ++j)
      raw.values(i, j) = wasserstein1d_sorted(obs_sorted[static_cast<std::size_t>(j)], sorted_column(env.data, j));
  }
  return raw;
}

/// Thresholded distance matrix:
///   D_ij = (raw_ij - eps) + c * d * [raw_ij > eps]   for intervened i, j != i
///   D_ij = 0                                           otherwise.
struct DistanceMatrix {
  Matrix values;
  double eps = 0.3;
  double c = 0.5;
  std::vector<int> targets;

  int size() const { return static_cast<int>(values.rows()); }
};

inline DistanceMatrix threshold_matrix(const RawDistances& raw, double eps, double c, int d) {
  require(eps > 0.0, "threshold_matrix: eps must be positive");
  require(c >= 0.0, "threshold_matrix: c must be nonnegative");
  if (raw.values.rows() != raw.values.cols() || raw.size() != d ||
      raw.present.size() != static_cast<std::size_t>(d))
    throw DimensionError("threshold_matrix: raw distances do not match d");
  DistanceMatrix out{Matrix::Zero(d, d), eps, c, raw.targets()};
  const double bonus = c * d;
  for (int i = 0; i < d; ++i) {
    if (!raw.present[static_cast<std::size_t>(i)]) continue;
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      const double r = raw.values(i, j);
      out.values(i, j) = (r - eps) + (r > eps ? bonus : 0.0);
    }
  }
  return out;
}

inline DistanceMatrix threshold_matrix(const RawDistances& raw, double eps, double c) {
  return threshold_matrix(raw, eps, c, raw.size());
}

/// Distance matrix implied by exact interventional faithfulness on a known
/// graph: D_ij = c * d when a directed path i -> j exists, else 0.
inline DistanceMatrix reachability_distance_matrix(const BoolMatrix& reach, double c) {
  const auto d = static_cast<int>(reach.rows());
  DistanceMatrix out{Matrix::Zero(d, d), 0.0, c, {}};
  for (int i = 0; i < d; ++i) {
    out.targets.push_back(i);
    for (int j = 0; j < d; ++j)
      if (i != j && reach(i, j)) out.values(i, j) = c * d;
  }
  return out;
}

}  // namespace diffintersort
