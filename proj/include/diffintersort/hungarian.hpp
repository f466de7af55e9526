#pragma once

#include "diffintersort/common.hpp"

#include <limits>
#include <vector>

namespace diffintersort {

/// Permutation matrix stored as the column assigned to each row.
struct HardPermutation {
  std::vector<int> col_of_row;

  int size() const { return static_cast<int>(col_of_row.size()); }

  Matrix to_matrix() const {
    Matrix m = Matrix::Zero(size(), size());
    for (int i = 0; i < size(); ++i) m(i, col_of_row[static_cast<std::size_t>(i)]) = 1.0;
    return m;
  }

  std::vector<int> row_of_col() const {
    std::vector<int> inv(col_of_row.size());
    for (std::size_t i = 0; i < col_of_row.size(); ++i) inv[static_cast<std::size_t>(col_of_row[i])] = static_cast<int>(i);
    return inv;
  }

  /// Frobenius inner product <P, M>.
  double dot(const Matrix& m) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += m(i, col_of_row[static_cast<std::size_t>(i)]);
    return s;
  }
};

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Shortest augmenting path with row/column potentials, O(d^3). Rows are
/// inserted one at a time; each insertion runs a Dijkstra-like sweep over
/// reduced costs and flips the augmenting path.
inline HardPermutation min_cost_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw DimensionError("assignment: cost matrix must be square");
  require(cost.allFinite(), "assignment: cost matrix has non-finite entries");
  const auto n = static_cast<int>(cost.rows());
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> row_of(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  std::vector<double> minv(static_cast<std::size_t>(n) + 1);
  std::vector<char> used(static_cast<std::size_t>(n) + 1);

  for (int i = 1; i <= n; ++i) {
    row_of[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = row_of[static_cast<std::size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[uj];
        if (cur < minv[uj]) {
          minv[uj] = cur;
          way[uj] = j0;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(row_of[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      row_of[static_cast<std::size_t>(j0)] = row_of[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  HardPermutation out;
  out.col_of_row.assign(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) out.col_of_row[static_cast<std::size_t>(row_of[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return out;
}

/// Permutation matrix maximizing <P, M>_F.
inline HardPermutation hungarian(const Matrix& m) { return min_cost_assignment(-m); }

}  // namespace diffintersort
