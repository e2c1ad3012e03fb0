#pragma once

// Neighbour-preserving projection of high-dimensional Grassmann points onto a
// lower-dimensional Grassmann manifold.
//
// The projection Delta (d x d~) minimizes sum_{i<j} w_ij ||Delta^T M_ij Delta||^2
// with M_ij = Omega_i Omega_i^T - Omega_j Omega_j^T. The quartic objective is
// relaxed to trace(Delta^T A Delta), A = sum_{i<j} w_ij M_ij M_ij^T, under the
// normalization Delta^T B Delta = I with B = sum_i lambda_ii Omega_i Omega_i^T + eps I,
// which is a symmetric-definite generalized eigenproblem. Directions outside
// span{Omega_i} have zero cost and project every point to zero, so the
// problem is solved on range(B - eps I); null directions are only used to pad
// Delta when d~ exceeds that range.

#include <densegrass/grassmann.hpp>
#include <densegrass/types.hpp>

#include <optional>
#include <random>
#include <vector>

namespace densegrass {

struct ProjectionMap {
  Matrix delta;  // d x d~

  Index ambient() const { return delta.rows(); }
  Index d_tilde() const { return delta.cols(); }
};

/// Low-dimensional representatives Theta_i = Delta^T Omega_i with
/// Theta_i U_i = qr(Delta^T Phi_i) and Omega_i = Phi_i U_i^{-1}.
struct LowDimSet {
  std::vector<GrassmannPoint> thetas;
  std::vector<Matrix> u_mats;
  std::vector<Matrix> omegas;
  std::vector<Index> collapsed;  // indices whose Theta lost rank

  Index size() const { return static_cast<Index>(thetas.size()); }
};

struct ProjectedPoint {
  GrassmannPoint theta;
  Matrix u;
  Matrix omega;
  bool collapsed = false;
};

namespace detail {

inline double relative_rank_tol() { return 1e-10; }

// Economy QR with a nonnegative diagonal in R. Returns false when R has a
// (relatively) vanishing diagonal entry.
inline bool positive_qr(const Matrix& a, Matrix& q, Matrix& r) {
  const Index p = a.cols();
  Eigen::HouseholderQR<Matrix> qr(a);
  q = qr.householderQ() * Matrix::Identity(a.rows(), p);
  r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Index k = 0; k < p; ++k)
    if (r(k, k) < 0) {
      r.row(k) = -r.row(k);
      q.col(k) = -q.col(k);
    }
  const double scale = r.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0)) return false;
  for (Index k = 0; k < p; ++k)
    if (std::abs(r(k, k)) <= relative_rank_tol() * scale) return false;
  return true;
}

inline void fix_column_signs(Matrix& m) {
  for (Index k = 0; k < m.cols(); ++k) {
    Index arg = 0;
    m.col(k).cwiseAbs().maxCoeff(&arg);
    if (m(arg, k) < 0) m.col(k) = -m.col(k);
  }
}

}  // namespace detail

/// Theta, U, Omega for one point. Throws NumericalError if Delta^T Phi is
/// rank deficient.
inline ProjectedPoint project_point(const GrassmannPoint& phi, const ProjectionMap& map) {
  require_dims(phi.ambient() == map.ambient(), "project_point: Delta and Phi ambient dimensions differ");
  require_dims(phi.rank() <= map.d_tilde(), "project_point: p exceeds d~");
  ProjectedPoint out;
  Matrix q, r;
  if (!detail::positive_qr(map.delta.transpose() * phi.basis, q, r))
    throw NumericalError("projection collapses subspace");
  out.theta.basis = std::move(q);
  out.omega = r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(phi.basis);
  out.u = std::move(r);
  return out;
}

/// Like project_point, but a collapsed projection keeps only the r
/// independent directions of Delta^T Phi (column-pivoted QR) and falls back
/// to Omega = Phi, U = I.
inline ProjectedPoint project_point_reduced(const GrassmannPoint& phi, const ProjectionMap& map) {
  try {
    return project_point(phi, map);
  } catch (const NumericalError&) {
  }
  const Matrix a = map.delta.transpose() * phi.basis;
  Eigen::ColPivHouseholderQR<Matrix> qr(a);
  qr.setThreshold(detail::relative_rank_tol());
  const Index r = std::max<Index>(1, qr.rank());
  ProjectedPoint out;
  out.theta.basis = (qr.householderQ() * Matrix::Identity(a.rows(), a.cols())).leftCols(r);
  out.u = Matrix::Identity(phi.rank(), phi.rank());
  out.omega = phi.basis;
  out.collapsed = true;
  return out;
}

/// Delta = [I_{d~}; 0.01 * N(0, 1)], used before the first fitted projection.
inline ProjectionMap initial_projection(Index ambient, Index d_tilde, std::uint64_t seed) {
  require_dims(d_tilde >= 1 && d_tilde <= ambient, "initial_projection: need 1 <= d~ <= d");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  ProjectionMap map;
  map.delta = Matrix::Zero(ambient, d_tilde);
  map.delta.topRows(d_tilde).setIdentity();
  for (Index i = d_tilde; i < ambient; ++i)
    for (Index j = 0; j < d_tilde; ++j) map.delta(i, j) = 1e-2 * normal(rng);
  return map;
}

/// The matrices of the relaxed projection problem.
struct ProjectionProblem {
  Matrix A;       // sum_{i<j} w_ij M_ij M_ij^T
  Matrix B0;      // sum_i lambda_ii Omega_i Omega_i^T
  double jitter;  // eps added to B0
  std::vector<Matrix> omegas;

  Matrix B() const { return B0 + jitter * Matrix::Identity(B0.rows(), B0.cols()); }
};

/// Omega_i from the previous projection (Omega_i = Phi_i U_i^{-1}), or
/// Omega_i = Phi_i when there is none or the previous projection collapses Phi_i.
inline std::vector<Matrix> omegas_for(const std::vector<GrassmannPoint>& points,
                                      const std::optional<ProjectionMap>& previous) {
  std::vector<Matrix> omegas;
  omegas.reserve(points.size());
  for (const auto& phi : points) {
    if (previous) {
      Matrix q, r;
      if (phi.rank() <= previous->d_tilde() &&
          detail::positive_qr(previous->delta.transpose() * phi.basis, q, r)) {
        omegas.push_back(r.triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(phi.basis));
        continue;
      }
    }
    omegas.push_back(phi.basis);
  }
  return omegas;
}

inline ProjectionProblem projection_problem(const std::vector<Matrix>& omegas,
                                            const SimilarityGraph& graph,
                                            double jitter_scale = 1.0) {
  const Index K = static_cast<Index>(omegas.size());
  require_dims(K >= 1, "projection_problem: need at least one point");
  require_dims(graph.weights.rows() == K && graph.weights.cols() == K,
               "projection_problem: graph size differs from point count");
  const Index d = omegas.front().rows();
  std::vector<Matrix> proj;
  proj.reserve(omegas.size());
  for (const auto& om : omegas) require_dims(om.rows() == d, "projection_problem: ambient dimensions differ");
  // Omegas rescaled by one common factor (RMS column norm); spans of the fit are unchanged.
  double peak = 0.0, energy = 0.0, cols = 0.0;
  for (const auto& om : omegas) peak = std::max(peak, om.cwiseAbs().maxCoeff());
  for (const auto& om : omegas) energy += (om / peak).squaredNorm(), cols += static_cast<double>(om.cols());
  const double scale = peak * std::sqrt(energy / cols);
  const bool rescale = std::isfinite(scale) && scale > 0.0 && std::abs(scale - 1.0) > 1e-12;
  ProjectionProblem prob;
  prob.omegas = omegas;
  if (rescale)
    for (auto& om : prob.omegas) om /= scale;
  for (const auto& om : prob.omegas) proj.push_back(om * om.transpose());
  prob.A = Matrix::Zero(d, d);
  prob.B0 = Matrix::Zero(d, d);
  for (Index i = 0; i < K; ++i) {
    prob.B0.noalias() += graph.degrees(i) * proj[static_cast<std::size_t>(i)];
    for (Index j = i + 1; j < K; ++j) {
      const Matrix m = proj[static_cast<std::size_t>(i)] - proj[static_cast<std::size_t>(j)];
      prob.A.noalias() += graph.weights(i, j) * (m * m.transpose());
    }
  }
  prob.A = 0.5 * (prob.A + prob.A.transpose()).eval();
  prob.B0 = 0.5 * (prob.B0 + prob.B0.transpose()).eval();
  prob.jitter = jitter_scale * 1e-8 * prob.B0.trace() / static_cast<double>(d);
  if (!(prob.jitter > 0)) prob.jitter = jitter_scale * 1e-8;
  return prob;
}

struct ProjectionFit {
  ProjectionMap map;
  Vector eigenvalues;  // generalized eigenvalues of the retained directions (range part)
  Index range_rank = 0;
};

namespace detail {

inline std::optional<ProjectionFit> solve_projection(const ProjectionProblem& prob, Index d_tilde) {
  const Index d = prob.A.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> beig(prob.B0);
  if (beig.info() != Eigen::Success) return std::nullopt;
  const Vector& bvals = beig.eigenvalues();  // ascending
  const double bmax = bvals.cwiseAbs().maxCoeff();
  Index first = 0;
  while (first < d && bvals(first) <= 1e-10 * bmax) ++first;
  const Index r = d - first;
  if (r == 0) return std::nullopt;
  const Matrix V = beig.eigenvectors().rightCols(r);
  const Matrix Ar = V.transpose() * prob.A * V;
  Matrix Br = V.transpose() * prob.B0 * V;
  Br.diagonal().array() += prob.jitter;
  Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> geig(
      0.5 * (Ar + Ar.transpose()), 0.5 * (Br + Br.transpose()), Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (geig.info() != Eigen::Success) return std::nullopt;

  const Index m = std::min(d_tilde, r);
  ProjectionFit fit;
  fit.range_rank = r;
  fit.eigenvalues = geig.eigenvalues().head(m);
  fit.map.delta = Matrix::Zero(d, d_tilde);
  fit.map.delta.leftCols(m) = V * geig.eigenvectors().leftCols(m);
  // Pad with B-normalized null directions of B0.
  for (Index k = m; k < d_tilde; ++k) {
    const Vector v = beig.eigenvectors().col(k - m);
    const double bnorm = std::sqrt(std::max(bvals(k - m), 0.0) + prob.jitter);
    fit.map.delta.col(k) = v / bnorm;
  }
  fix_column_signs(fit.map.delta);
  if (!fit.map.delta.allFinite()) return std::nullopt;
  return fit;
}

}  // namespace detail

/// Fits Delta for the given points. `previous` supplies the Omega bootstrap
/// (Omega_i = Phi_i when absent).
inline ProjectionFit fit_projection(const std::vector<GrassmannPoint>& points, const SimilarityGraph& graph,
                                    Index d_tilde, const std::optional<ProjectionMap>& previous = std::nullopt,
                                    double jitter_scale = 1.0) {
  require_dims(!points.empty(), "fit_projection: no points");
  const Index d = points.front().ambient();
  require_dims(d_tilde >= 1 && d_tilde <= d,
               "fit_projection: d~=" + std::to_string(d_tilde) + " must lie in 1.." + std::to_string(d));
  for (const auto& pt : points) require_dims(pt.ambient() == d, "fit_projection: ambient dimensions differ");
  const auto omegas = omegas_for(points, previous);
  auto prob = projection_problem(omegas, graph, jitter_scale);
  if (auto fit = detail::solve_projection(prob, d_tilde)) return *fit;
  prob.jitter *= 10.0;
  if (auto fit = detail::solve_projection(prob, d_tilde)) return *fit;
  throw NumericalError("fit_projection: generalized eigenproblem failed even with jitter");
}

/// Fits Delta and maps every point to its low-dimensional representative.
/// A collapsed projection triggers one refit with ten times the jitter;
/// points that still collapse keep a reduced Theta.
inline std::pair<ProjectionMap, LowDimSet> project_all(const std::vector<GrassmannPoint>& points,
                                                       const SimilarityGraph& graph, Index d_tilde,
                                                       const std::optional<ProjectionMap>& previous = std::nullopt) {
  LowDimSet set;
  ProjectionMap map;
  for (int attempt = 0; attempt < 2; ++attempt) {
    map = fit_projection(points, graph, d_tilde, previous, attempt == 0 ? 1.0 : 10.0).map;
    set = LowDimSet{};
    for (std::size_t i = 0; i < points.size(); ++i) {
      ProjectedPoint pp = project_point_reduced(points[i], map);
      if (pp.collapsed) set.collapsed.push_back(static_cast<Index>(i));
      set.thetas.push_back(std::move(pp.theta));
      set.u_mats.push_back(std::move(pp.u));
      set.omegas.push_back(std::move(pp.omega));
    }
    if (set.collapsed.empty()) break;
  }
  return {map, set};
}

}  // namespace densegrass
