#pragma once

// Grassmann-manifold primitives: subspace extraction from trajectory blocks,
// the symmetric projector embedding, the projection metric and the
// similarity graph between subspaces.

#include <densegrass/types.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace densegrass {

/// A point of G(p, d) stored as a d x p matrix with orthonormal columns.
struct GrassmannPoint {
  Matrix basis;

  Index ambient() const { return basis.rows(); }
  Index rank() const { return basis.cols(); }
};

/// Truncated SVD of one group of trajectories: basis (left factor),
/// singular values and right factor.
struct BlockSubspace {
  GrassmannPoint point;
  Vector sigma;  // length p, nonincreasing, zero padded past point.rank()
  Matrix right;  // n_i x point.rank()
};

namespace detail {

/// Flips columns of U (and V) so that the largest-magnitude entry of each
/// column of U is positive.
inline void fix_signs(Matrix& U, Matrix& V) {
  for (Index k = 0; k < U.cols(); ++k) {
    Index arg = 0;
    U.col(k).cwiseAbs().maxCoeff(&arg);
    if (U(arg, k) < 0) {
      U.col(k) = -U.col(k);
      if (V.cols() > k) V.col(k) = -V.col(k);
    }
  }
}

inline Index numerical_rank(const Vector& sigma, Index rows, Index cols) {
  if (sigma.size() == 0 || sigma(0) <= 0) return 0;
  const double tol =
      static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon() * sigma(0);
  Index r = 0;
  while (r < sigma.size() && sigma(r) > tol) ++r;
  return r;
}

}  // namespace detail

/// Top-p truncated SVD of a 3F x n_i block. Groups too small or too
/// degenerate to support p directions get a reduced basis
/// (max(1, min(p, n_i, rank)) columns) and zero-padded singular values.
inline BlockSubspace grassmann_from_block(const Matrix& block, Index p) {
  if (block.cols() < 1) throw DimensionError("grassmann_from_block: empty group");
  if (p < 1 || p > block.rows())
    throw DimensionError("grassmann_from_block: p=" + std::to_string(p) +
                         " must lie in 1.." + std::to_string(block.rows()));
  Eigen::BDCSVD<Matrix> svd(block, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const Index rank = detail::numerical_rank(s, block.rows(), block.cols());
  const Index keep = std::max<Index>(1, std::min({p, block.cols(), rank}));

  Matrix U = svd.matrixU().leftCols(keep);
  Matrix V = svd.matrixV().leftCols(keep);
  detail::fix_signs(U, V);

  BlockSubspace out;
  out.point.basis = std::move(U);
  out.right = std::move(V);
  out.sigma = Vector::Zero(p);
  for (Index k = 0; k < keep && k < s.size(); ++k) out.sigma(k) = s(k) > 0 ? s(k) : 0.0;
  if (rank == 0) out.sigma.setZero();
  return out;
}

/// Pi(Phi) = Phi Phi^T.
inline Matrix embed(const GrassmannPoint& point) { return point.basis * point.basis.transpose(); }

/// Squared projection metric 0.5 ||Pi(A) - Pi(B)||_F^2, evaluated through the
/// equivalent 0.5 (p_a + p_b) - ||A^T B||_F^2 (exact for orthonormal bases).
inline double proj_distance_sq(const GrassmannPoint& a, const GrassmannPoint& b) {
  if (a.ambient() != b.ambient())
    throw DimensionError("proj_distance_sq: ambient dimensions differ (" +
                         std::to_string(a.ambient()) + " vs " + std::to_string(b.ambient()) + ")");
  const double overlap = (a.basis.transpose() * b.basis).squaredNorm();
  const double d2 = 0.5 * static_cast<double>(a.rank() + b.rank()) - overlap;
  return d2 > 0 ? d2 : 0.0;
}

struct SimilarityGraph {
  Matrix weights;  // K x K, w_ij = exp(-d_g^2)
  Vector degrees;  // lambda_ii = sum_j w_ij
};

inline SimilarityGraph similarity_graph(const std::vector<GrassmannPoint>& points) {
  const Index K = static_cast<Index>(points.size());
  SimilarityGraph g;
  g.weights = Matrix::Identity(K, K);
  for (Index i = 0; i < K; ++i)
    for (Index j = i + 1; j < K; ++j) {
      const double w = std::exp(-proj_distance_sq(points[static_cast<std::size_t>(i)],
                                                   points[static_cast<std::size_t>(j)]));
      g.weights(i, j) = w;
      g.weights(j, i) = w;
    }
  g.degrees = g.weights.rowwise().sum();
  return g;
}

}  // namespace densegrass
