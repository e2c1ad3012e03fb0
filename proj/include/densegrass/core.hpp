#pragma once

// Dataset container, matrix layout conventions, the trajectory/shape reshuffle
// and column-permutation bookkeeping.
//
// Layouts:
//   W   2F x P   rows 2f, 2f+1 hold the x and y image coordinates of frame f.
//   R   2F x 3   the orthographic 2x3 rotation blocks stacked frame by frame.
//   S   3F x P   rows 3f..3f+2 hold X, Y, Z of frame f (trajectory space).
//   S#  3P x F   column f is [X_f(0..P-1); Y_f(0..P-1); Z_f(0..P-1)].

#include <densegrass/types.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace densegrass {

struct Dataset {
  Matrix W;                    // 2F x P
  Matrix R;                    // 2F x 3
  std::optional<Matrix> S_gt;  // 3F x P
  Index F = 0;
  Index P = 0;
  std::vector<long long> column_ids;

  Eigen::Block<const Matrix, 2, 3> rotation(Index f) const {
    return R.block<2, 3>(2 * f, 0);
  }
};

/// Checks every Dataset invariant; throws DataError/DimensionError on failure.
inline void validate(const Dataset& ds, double orth_tol = 1e-8) {
  if (ds.F <= 0 || ds.P <= 0) throw DimensionError("dataset must have F > 0 and P > 0");
  if (ds.W.rows() != 2 * ds.F || ds.W.cols() != ds.P)
    throw DimensionError("W must be 2F x P (" + std::to_string(2 * ds.F) + " x " +
                         std::to_string(ds.P) + "), got " + std::to_string(ds.W.rows()) +
                         " x " + std::to_string(ds.W.cols()));
  if (ds.R.rows() != 2 * ds.F || ds.R.cols() != 3)
    throw DimensionError("R must be 2F x 3, got " + std::to_string(ds.R.rows()) + " x " +
                         std::to_string(ds.R.cols()));
  if (ds.S_gt && (ds.S_gt->rows() != 3 * ds.F || ds.S_gt->cols() != ds.P))
    throw DimensionError("S_gt must be 3F x P");
  if (!ds.W.allFinite()) throw DataError("W contains NaN or Inf");
  if (!ds.R.allFinite()) throw DataError("R contains NaN or Inf");
  if (ds.S_gt && !ds.S_gt->allFinite()) throw DataError("S_gt contains NaN or Inf");
  if (static_cast<Index>(ds.column_ids.size()) != ds.P)
    throw DimensionError("column_ids must have P entries");
  for (Index f = 0; f < ds.F; ++f) {
    const Eigen::Matrix2d gram = ds.rotation(f) * ds.rotation(f).transpose();
    if ((gram - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() > orth_tol)
      throw DataError("rotation block of frame " + std::to_string(f) +
                      " does not have orthonormal rows");
  }
}

inline std::vector<long long> default_column_ids(Index P) {
  std::vector<long long> ids(static_cast<std::size_t>(P));
  std::iota(ids.begin(), ids.end(), 0LL);
  return ids;
}

/// Block-diagonal 2F x 3F camera matrix built from the stacked rotation blocks.
inline Matrix block_diagonal_rotation(const Matrix& R) {
  require_dims(R.cols() == 3 && R.rows() % 2 == 0, "R must be 2F x 3");
  const Index F = R.rows() / 2;
  Matrix out = Matrix::Zero(2 * F, 3 * F);
  for (Index f = 0; f < F; ++f) out.block<2, 3>(2 * f, 3 * f) = R.block<2, 3>(2 * f, 0);
  return out;
}

/// R * S evaluated frame by frame (S is 3F x n).
inline Matrix project(const Matrix& R, const Matrix& S) {
  require_dims(R.cols() == 3 && S.rows() == 3 * (R.rows() / 2) && R.rows() % 2 == 0,
               "project: R must be 2F x 3 and S must be 3F x n");
  const Index F = R.rows() / 2;
  Matrix out(2 * F, S.cols());
  for (Index f = 0; f < F; ++f)
    out.middleRows(2 * f, 2).noalias() = R.block<2, 3>(2 * f, 0) * S.middleRows(3 * f, 3);
  return out;
}

// ---------------------------------------------------------------------------
// reshuffle f : 3F x P  <->  3P x F

inline Matrix reshuffle(const Matrix& S) {
  if (S.rows() % 3 != 0) throw DimensionError("reshuffle: row count must be divisible by 3");
  const Index F = S.rows() / 3;
  const Index P = S.cols();
  Matrix out(3 * P, F);
  for (Index f = 0; f < F; ++f)
    for (Index c = 0; c < 3; ++c) out.col(f).segment(c * P, P) = S.row(3 * f + c).transpose();
  return out;
}

inline Matrix reshuffle_inverse(const Matrix& S_sharp) {
  if (S_sharp.rows() % 3 != 0)
    throw DimensionError("reshuffle_inverse: row count must be divisible by 3");
  const Index P = S_sharp.rows() / 3;
  const Index F = S_sharp.cols();
  Matrix out(3 * F, P);
  for (Index f = 0; f < F; ++f)
    for (Index c = 0; c < 3; ++c) out.row(3 * f + c) = S_sharp.col(f).segment(c * P, P).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Column permutations

/// perm[k] is the index of the source column that lands at position k.
using Permutation = std::vector<Index>;

inline bool is_permutation(const Permutation& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (Index v : perm) {
    if (v < 0 || v >= static_cast<Index>(perm.size()) || seen[static_cast<std::size_t>(v)])
      return false;
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return true;
}

inline Permutation identity_permutation(Index n) {
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  return p;
}

inline Permutation invert(const Permutation& perm) {
  Permutation inv(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) inv[static_cast<std::size_t>(perm[k])] = static_cast<Index>(k);
  return inv;
}

inline Matrix permute_columns(const Matrix& M, const Permutation& perm) {
  require_dims(M.cols() == static_cast<Index>(perm.size()), "permute_columns: size mismatch");
  Matrix out(M.rows(), M.cols());
  for (std::size_t k = 0; k < perm.size(); ++k) out.col(static_cast<Index>(k)) = M.col(perm[k]);
  return out;
}

/// Applies a point permutation to a 3P x F matrix in the S# layout.
inline Matrix permute_points(const Matrix& S_sharp, const Permutation& perm) {
  const Index P = static_cast<Index>(perm.size());
  require_dims(S_sharp.rows() == 3 * P, "permute_points: S# must have 3P rows");
  Matrix out(S_sharp.rows(), S_sharp.cols());
  for (Index c = 0; c < 3; ++c)
    for (Index k = 0; k < P; ++k) out.row(c * P + k) = S_sharp.row(c * P + perm[static_cast<std::size_t>(k)]);
  return out;
}

template <typename T>
std::vector<T> permute_entries(const std::vector<T>& v, const Permutation& perm) {
  require_dims(v.size() == perm.size(), "permute_entries: size mismatch");
  std::vector<T> out(v.size());
  for (std::size_t k = 0; k < perm.size(); ++k) out[k] = v[static_cast<std::size_t>(perm[k])];
  return out;
}

/// Maps each current column position to its original column index.
inline Permutation compose(const std::vector<Permutation>& history, Index n) {
  Permutation order = identity_permutation(n);
  for (const auto& perm : history) order = permute_entries(order, perm);
  return order;
}

/// Puts the columns of a matrix produced under `history` back into original order.
inline Matrix restore_columns(const Matrix& M, const std::vector<Permutation>& history) {
  return permute_columns(M, invert(compose(history, M.cols())));
}

// ---------------------------------------------------------------------------
// Ordering vector

/// Per-column group labels (0-based internally, 1-based on disk) plus the
/// sequence of column permutations applied so far.
struct OrderingVector {
  std::vector<int> labels;
  int groups = 0;
  std::vector<Permutation> history;

  Index size() const { return static_cast<Index>(labels.size()); }

  std::vector<Index> group_sizes() const {
    std::vector<Index> n(static_cast<std::size_t>(groups), 0);
    for (int l : labels) ++n[static_cast<std::size_t>(l)];
    return n;
  }

  bool all_groups_nonempty() const {
    const auto n = group_sizes();
    return std::all_of(n.begin(), n.end(), [](Index v) { return v > 0; });
  }

  /// Labels listed in original column order.
  std::vector<int> original_order_labels() const {
    const Permutation order = compose(history, size());
    std::vector<int> out(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) out[static_cast<std::size_t>(order[k])] = labels[k];
    return out;
  }
};

inline void check_labels(const OrderingVector& order) {
  for (int l : order.labels)
    if (l < 0 || l >= order.groups)
      throw DimensionError("label " + std::to_string(l + 1) + " outside 1.." +
                           std::to_string(order.groups));
}

/// Stable permutation that brings group 0 first, then group 1, and so on.
inline Permutation grouping_permutation(const OrderingVector& order) {
  check_labels(order);
  Permutation perm = identity_permutation(order.size());
  std::stable_sort(perm.begin(), perm.end(), [&](Index a, Index b) {
    return order.labels[static_cast<std::size_t>(a)] < order.labels[static_cast<std::size_t>(b)];
  });
  return perm;
}

/// Regroups the columns of M by label and records the permutation in `order`.
inline Matrix arrange_columns(OrderingVector& order, const Matrix& M) {
  require_dims(M.cols() == order.size(), "arrange_columns: M must have one column per label");
  const Permutation perm = grouping_permutation(order);
  order.labels = permute_entries(order.labels, perm);
  order.history.push_back(perm);
  return permute_columns(M, perm);
}

}  // namespace densegrass
