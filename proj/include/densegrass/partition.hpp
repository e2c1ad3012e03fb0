#pragma once

// Trajectory-level refinement of a grouping in measurement space.
//
// Every group of 2D trajectories produced by a rank-p local subspace spans at
// most p dimensions of R^{2F}, so the quality of a partition is the energy
// the groups leave outside their top-p subspaces. Refinement alternates
// nearest-subspace reassignment with a merge/split move that fuses the two
// groups whose union is cheapest to explain and splits the worst-fitting
// group in two. Moves are accepted only when the residual energy drops.

#include <densegrass/core.hpp>
#include <densegrass/kmeans.hpp>
#include <densegrass/types.hpp>

#include <algorithm>
#include <numeric>
#include <vector>

namespace densegrass {

struct RefineOptions {
  int reassign_iterations = 10;
  int merge_candidates = 3;  // cheapest pairs to try merging
  int split_candidates = 2;  // worst groups to try splitting
  double min_relative_gain = 1e-2;
};

namespace detail {

inline Matrix gather_columns(const Matrix& X, const std::vector<int>& labels, int group) {
  Index n = 0;
  for (int l : labels) n += (l == group);
  Matrix out(X.rows(), n);
  Index k = 0;
  for (std::size_t j = 0; j < labels.size(); ++j)
    if (labels[j] == group) out.col(k++) = X.col(static_cast<Index>(j));
  return out;
}

/// Energy outside the top-p left singular subspace.
inline double tail_energy(const Matrix& block, Index p) {
  if (block.cols() <= p || block.rows() <= p) return 0.0;
  const Vector s = Eigen::BDCSVD<Matrix>(block).singularValues();
  return s.tail(s.size() - std::min<Index>(p, s.size())).squaredNorm();
}

inline Matrix top_basis(const Matrix& block, Index p) {
  if (block.cols() == 0) return Matrix::Zero(block.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(block, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(std::min<Index>(p, svd.matrixU().cols()));
}

}  // namespace detail

inline double partition_energy(const Matrix& X, const std::vector<int>& labels, int groups, Index p) {
  double e = 0.0;
  for (int g = 0; g < groups; ++g) e += detail::tail_energy(detail::gather_columns(X, labels, g), p);
  return e;
}

/// Nearest-subspace reassignment (K-subspaces) until labels stop changing.
/// A step that would leave a group with fewer than `min_size` members is
/// rejected and ends the loop.
inline std::vector<int> reassign_to_subspaces(const Matrix& X, std::vector<int> labels, int groups, Index p,
                                              int iterations, Index min_size = 1) {
  const Vector energy = X.colwise().squaredNorm().transpose();
  for (int it = 0; it < iterations; ++it) {
    Matrix residual(groups, X.cols());
    for (int g = 0; g < groups; ++g) {
      const Matrix B = detail::top_basis(detail::gather_columns(X, labels, g), p);
      residual.row(g) = energy.transpose() - (B.transpose() * X).colwise().squaredNorm();
    }
    std::vector<int> next(labels.size());
    for (Index j = 0; j < X.cols(); ++j) {
      Index arg = labels[static_cast<std::size_t>(j)];
      double best = residual(arg, j);
      for (int g = 0; g < groups; ++g)
        if (residual(g, j) < best - 1e-12 * energy(j)) {
          best = residual(g, j);
          arg = g;
        }
      next[static_cast<std::size_t>(j)] = static_cast<int>(arg);
    }
    if (next == labels) break;
    std::vector<Index> sizes(static_cast<std::size_t>(groups), 0);
    for (int l : next) ++sizes[static_cast<std::size_t>(l)];
    if (*std::min_element(sizes.begin(), sizes.end()) < min_size) break;
    labels = std::move(next);
  }
  return labels;
}

/// One merge/split round. Returns true if a move was accepted.
inline bool merge_split_step(const Matrix& X, std::vector<int>& labels, int groups, Index p, std::uint64_t seed,
                             const RefineOptions& opt = {}) {
  if (groups < 3) return false;
  const double scale = X.squaredNorm();
  const double current = partition_energy(X, labels, groups, p);
  if (!(current > 1e-12 * scale)) return false;

  std::vector<Matrix> blocks;
  std::vector<double> tails;
  for (int g = 0; g < groups; ++g) {
    blocks.push_back(detail::gather_columns(X, labels, g));
    tails.push_back(detail::tail_energy(blocks.back(), p));
  }
  struct Pair {
    double cost;
    int a, b;
  };
  std::vector<Pair> pairs;
  for (int a = 0; a < groups; ++a)
    for (int b = a + 1; b < groups; ++b) {
      Matrix u(X.rows(), blocks[static_cast<std::size_t>(a)].cols() + blocks[static_cast<std::size_t>(b)].cols());
      u << blocks[static_cast<std::size_t>(a)], blocks[static_cast<std::size_t>(b)];
      pairs.push_back({detail::tail_energy(u, p) - tails[static_cast<std::size_t>(a)] -
                           tails[static_cast<std::size_t>(b)],
                       a, b});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.cost < y.cost; });
  std::vector<int> worst(static_cast<std::size_t>(groups));
  std::iota(worst.begin(), worst.end(), 0);
  std::stable_sort(worst.begin(), worst.end(), [&](int x, int y) {
    return tails[static_cast<std::size_t>(x)] > tails[static_cast<std::size_t>(y)];
  });

  double best_energy = current;
  std::vector<int> best_labels;
  const int npairs = std::min<int>(opt.merge_candidates, static_cast<int>(pairs.size()));
  const int nsplit = std::min<int>(opt.split_candidates, groups);
  for (int pi = 0; pi < npairs; ++pi) {
    const auto [cost, a, b] = pairs[static_cast<std::size_t>(pi)];
    for (int si = 0; si < nsplit; ++si) {
      const int w = worst[static_cast<std::size_t>(si)];
      if (w == a || w == b) continue;
      std::vector<int> cand = labels;
      for (auto& l : cand)
        if (l == b) l = a;
      std::vector<Index> members;
      for (std::size_t j = 0; j < cand.size(); ++j)
        if (cand[j] == w) members.push_back(static_cast<Index>(j));
      if (members.size() < 2) continue;
      Matrix sub(X.rows(), static_cast<Index>(members.size()));
      for (std::size_t m = 0; m < members.size(); ++m) sub.col(static_cast<Index>(m)) = X.col(members[m]);
      const auto halves = kmeans(sub, 2, seed + static_cast<std::uint64_t>(pi * 31 + si)).labels;
      for (std::size_t m = 0; m < members.size(); ++m)
        if (halves[m] == 1) cand[static_cast<std::size_t>(members[m])] = b;
      cand = reassign_to_subspaces(X, std::move(cand), groups, p, opt.reassign_iterations);
      const double e = partition_energy(X, cand, groups, p);
      if (e < best_energy) {
        best_energy = e;
        best_labels = std::move(cand);
      }
    }
  }
  if (best_labels.empty() || best_energy > (1.0 - opt.min_relative_gain) * current) return false;
  labels = std::move(best_labels);
  return true;
}

/// Reassignment followed by one merge/split round, in place on `order`.
inline bool refine_partition(const Matrix& X, OrderingVector& order, Index p, std::uint64_t seed,
                             const RefineOptions& opt = {}) {
  require_dims(X.cols() == order.size(), "refine_partition: one column per label");
  const auto before = order.labels;
  order.labels = reassign_to_subspaces(X, order.labels, order.groups, p, opt.reassign_iterations);
  merge_split_step(X, order.labels, order.groups, p, seed, opt);
  return order.labels != before;
}

}  // namespace densegrass
