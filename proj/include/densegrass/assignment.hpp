#pragma once

// Minimum-cost perfect matching on a square cost matrix (Hungarian method
// with potentials, O(n^3)).

#include <densegrass/types.hpp>

#include <limits>
#include <vector>

namespace densegrass {

/// Returns assign[row] = column minimizing sum cost(row, assign[row]).
/// Rectangular inputs are padded with zero-cost dummy rows/columns; rows
/// matched to a dummy column get -1.
inline std::vector<Index> hungarian(const Matrix& cost) {
  const Index rows = cost.rows();
  const Index cols = cost.cols();
  const Index n = std::max(rows, cols);
  Matrix c = Matrix::Zero(n, n);
  c.topLeftCorner(rows, cols) = cost;

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays as in the classical formulation; index 0 is a sentinel.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(static_cast<std::size_t>(n + 1), 0.0);
  std::vector<Index> match(static_cast<std::size_t>(n + 1), 0), way(static_cast<std::size_t>(n + 1), 0);
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = c(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> assign(static_cast<std::size_t>(rows), -1);
  for (Index j = 1; j <= n; ++j) {
    const Index i = match[static_cast<std::size_t>(j)];
    if (i >= 1 && i <= rows && j <= cols) assign[static_cast<std::size_t>(i - 1)] = j - 1;
  }
  return assign;
}

/// Contingency table: counts(a, b) = #{k : first[k] == a and second[k] == b}.
inline Matrix contingency(const std::vector<int>& first, int first_groups, const std::vector<int>& second,
                          int second_groups) {
  require_dims(first.size() == second.size(), "contingency: label vectors differ in length");
  Matrix counts = Matrix::Zero(first_groups, second_groups);
  for (std::size_t k = 0; k < first.size(); ++k) counts(first[k], second[k]) += 1.0;
  return counts;
}

}  // namespace densegrass
