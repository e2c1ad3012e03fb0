#pragma once

// Self-expressive coupling between low-dimensional Grassmann points: the
// kernel matrix Gamma, the closed-form coefficient update, singular value
// thresholding, spectral regrouping and the k-means++ initial grouping.

#include <densegrass/assignment.hpp>
#include <densegrass/core.hpp>
#include <densegrass/grassmann.hpp>
#include <densegrass/kmeans.hpp>
#include <densegrass/lowdim.hpp>
#include <densegrass/types.hpp>

#include <algorithm>
#include <vector>

namespace densegrass {

struct KernelMatrix {
  Matrix gamma;        // Gamma_ij = ||Theta_i^T Theta_j||_F^2
  Matrix chol_factor;  // lower triangular, L L^T = Gamma + jitter I
  double jitter = 0.0;
};

struct CouplingState {
  Matrix C;   // coefficient matrix C~
  Matrix Z;   // auxiliary copy of C~ carrying the nuclear norm
  Matrix L2;  // multiplier of C~ = Z
  double rho = 1e-2;

  static CouplingState zeros(Index K, double rho) {
    return {Matrix::Zero(K, K), Matrix::Zero(K, K), Matrix::Zero(K, K), rho};
  }
};

inline Matrix gram_kernel(const std::vector<GrassmannPoint>& thetas) {
  const Index K = static_cast<Index>(thetas.size());
  Matrix gamma(K, K);
  for (Index i = 0; i < K; ++i)
    for (Index j = i; j < K; ++j) {
      const auto& a = thetas[static_cast<std::size_t>(i)].basis;
      const auto& b = thetas[static_cast<std::size_t>(j)].basis;
      require_dims(a.rows() == b.rows(), "kernel_matrix: ambient dimensions differ");
      const double v = (a.transpose() * b).squaredNorm();
      gamma(i, j) = v;
      gamma(j, i) = v;
    }
  return gamma;
}

/// Gamma and its Cholesky factor. Jitter starts at 1e-10 * trace(Gamma) / K
/// and grows tenfold until the factorization succeeds.
inline KernelMatrix kernel_matrix(const LowDimSet& set) {
  require_dims(set.size() >= 1, "kernel_matrix: need at least one point");
  KernelMatrix km;
  km.gamma = gram_kernel(set.thetas);
  const Index K = km.gamma.rows();
  double jitter = 1e-10 * km.gamma.trace() / static_cast<double>(K);
  if (!(jitter > 0)) jitter = 1e-12;
  for (int attempt = 0; attempt < 12; ++attempt, jitter *= 10.0) {
    Matrix g = km.gamma;
    g.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() == Eigen::Success) {
      km.chol_factor = llt.matrixL();
      km.jitter = jitter;
      return km;
    }
  }
  throw NumericalError("kernel_matrix: Cholesky of Gamma failed after maximum jitter");
}

/// C~ = (2 beta1 L L^T + rho (Z - L2 / rho)) (2 beta1 L L^T + rho I)^{-1},
/// solved as a symmetric positive-definite system from the right.
inline Matrix update_coefficients(const Matrix& L, const CouplingState& state, double beta1) {
  const Index K = L.rows();
  require_dims(L.cols() == K && state.Z.rows() == K && state.Z.cols() == K && state.L2.rows() == K &&
                   state.L2.cols() == K,
               "update_coefficients: shapes must all be K x K");
  if (!(state.rho > 0)) throw NumericalError("update_coefficients: rho must be positive");
  const Matrix G = 2.0 * beta1 * (L * L.transpose());
  Matrix M = G;
  M.diagonal().array() += state.rho;
  const Matrix N = G + state.rho * state.Z - state.L2;
  Eigen::LLT<Matrix> llt(0.5 * (M + M.transpose()));
  if (llt.info() != Eigen::Success) throw NumericalError("update_coefficients: singular system");
  // C M = N  <=>  M C^T = N^T  (M symmetric).
  return llt.solve(N.transpose()).transpose();
}

/// Proximal operator of tau ||.||_*: U max(Sigma - tau, 0) V^T.
inline Matrix svt(const Matrix& M, double tau) {
  if (tau < 0) throw DimensionError("svt: tau must be nonnegative");
  if (M.size() == 0) return M;
  if (tau == 0) return M;
  Eigen::BDCSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector s = (svd.singularValues().array() - tau).cwiseMax(0.0).matrix();
  Index r = 0;
  while (r < s.size() && s(r) > 0) ++r;
  if (r == 0) return Matrix::Zero(M.rows(), M.cols());
  return svd.matrixU().leftCols(r) * s.head(r).asDiagonal() * svd.matrixV().leftCols(r).transpose();
}

inline double nuclear_norm(const Matrix& M) {
  if (M.size() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(M);
  return svd.singularValues().sum();
}

/// Initial grouping: k-means++ seeding plus Lloyd iterations on the columns of S.
inline OrderingVector kmeans_pp_init(const Matrix& S, int K, std::uint64_t seed) {
  if (K < 1 || K > S.cols())
    throw DimensionError("kmeans_pp_init: K=" + std::to_string(K) + " exceeds the number of points " +
                         std::to_string(S.cols()));
  OrderingVector order;
  order.groups = K;
  order.labels = kmeans(S, K, seed).labels;
  return order;
}

/// Splits the largest group into two with k-means++ on `features` until no
/// group is empty.
inline void repair_empty_groups(OrderingVector& order, const Matrix& features, std::uint64_t seed) {
  require_dims(features.cols() == order.size(), "repair_empty_groups: one feature column per label");
  if (order.size() < order.groups)
    throw DimensionError("repair_empty_groups: fewer points than groups");
  for (int guard = 0; guard < order.groups; ++guard) {
    const auto sizes = order.group_sizes();
    const auto empty = std::find(sizes.begin(), sizes.end(), Index{0});
    if (empty == sizes.end()) return;
    const int target = static_cast<int>(empty - sizes.begin());
    const int largest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    std::vector<Index> members;
    for (Index j = 0; j < order.size(); ++j)
      if (order.labels[static_cast<std::size_t>(j)] == largest) members.push_back(j);
    Matrix sub(features.rows(), static_cast<Index>(members.size()));
    for (std::size_t m = 0; m < members.size(); ++m) sub.col(static_cast<Index>(m)) = features.col(members[m]);
    const auto halves = kmeans(sub, 2, seed + static_cast<std::uint64_t>(guard)).labels;
    bool moved = false;
    for (std::size_t m = 0; m < members.size(); ++m)
      if (halves[m] == 1) {
        order.labels[static_cast<std::size_t>(members[m])] = target;
        moved = true;
      }
    if (!moved) order.labels[static_cast<std::size_t>(members.back())] = target;
  }
}

/// Spectral regrouping. `current` assigns every trajectory to one of the
/// C~.rows() Grassmann points; the points are clustered into `clusters` groups
/// from the affinity (|C~| + |C~^T|) / 2 (normalized Laplacian, smallest
/// eigenvectors, row normalization, seeded k-means) and each trajectory takes
/// its point's cluster. Cluster ids are matched to the previous group ids by
/// maximum overlap, and empty groups are repaired by splitting the largest one
/// on `features`. The permutation history of `current` is kept.
inline OrderingVector spectral_cluster(const Matrix& C, const OrderingVector& current, int clusters,
                                       const Matrix& features, std::uint64_t seed) {
  const Index M = C.rows();
  require_dims(C.cols() == M && M >= 1, "spectral_cluster: C~ must be square");
  require_dims(current.groups == M, "spectral_cluster: labels must index the rows of C~");
  require_dims(clusters >= 1, "spectral_cluster: need at least one cluster");
  check_labels(current);

  std::vector<int> point_cluster(static_cast<std::size_t>(M), 0);
  if (clusters >= M) {
    for (Index i = 0; i < M; ++i) point_cluster[static_cast<std::size_t>(i)] = static_cast<int>(i);
  } else if (clusters > 1) {
    const Matrix A = 0.5 * (C.cwiseAbs() + C.transpose().cwiseAbs());
    Vector dinv = A.rowwise().sum();
    for (Index i = 0; i < M; ++i) dinv(i) = dinv(i) > 0 ? 1.0 / std::sqrt(dinv(i)) : 0.0;
    Matrix lap = -(dinv.asDiagonal() * A * dinv.asDiagonal());
    lap.diagonal().array() += 1.0;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (lap + lap.transpose()));
    Matrix emb = eig.eigenvectors().leftCols(clusters);
    for (Index i = 0; i < M; ++i) {
      const double n = emb.row(i).norm();
      if (n > 0) emb.row(i) /= n;
    }
    point_cluster = kmeans(emb.transpose(), clusters, seed).labels;
  }

  const int K = clusters;
  OrderingVector out;
  out.groups = K;
  out.history = current.history;
  std::vector<int> raw(current.labels.size());
  for (std::size_t j = 0; j < raw.size(); ++j)
    raw[j] = point_cluster[static_cast<std::size_t>(current.labels[j])];

  // Relabel clusters to maximize agreement with the previous labels.
  if (K <= M) {
    std::vector<int> prev(current.labels.begin(), current.labels.end());
    const Matrix overlap = contingency(raw, K, prev, static_cast<int>(M));
    const auto assign = hungarian(-overlap);
    std::vector<int> relabel(static_cast<std::size_t>(K), -1);
    std::vector<char> used(static_cast<std::size_t>(K), 0);
    for (int c = 0; c < K; ++c) {
      const Index target = assign[static_cast<std::size_t>(c)];
      if (target >= 0 && target < K) {
        relabel[static_cast<std::size_t>(c)] = static_cast<int>(target);
        used[static_cast<std::size_t>(target)] = 1;
      }
    }
    int next = 0;
    for (int c = 0; c < K; ++c) {
      if (relabel[static_cast<std::size_t>(c)] >= 0) continue;
      while (used[static_cast<std::size_t>(next)]) ++next;
      relabel[static_cast<std::size_t>(c)] = next;
      used[static_cast<std::size_t>(next)] = 1;
    }
    for (auto& l : raw) l = relabel[static_cast<std::size_t>(l)];
  }
  out.labels = std::move(raw);
  repair_empty_groups(out, features, seed);
  return out;
}

}  // namespace densegrass
