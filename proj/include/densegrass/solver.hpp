#pragma once

// ADMM outer loop: alternates the least-squares shape update, regrouping of
// trajectories into local subspaces, the low-dimensional projection of those
// subspaces, the self-expressive coupling update, spectral regrouping, local
// rank-p reconstruction and the two nuclear-norm proximal steps, followed by
// multiplier and penalty updates.

#include <densegrass/clustering.hpp>
#include <densegrass/core.hpp>
#include <densegrass/grassmann.hpp>
#include <densegrass/lowdim.hpp>
#include <densegrass/partition.hpp>
#include <densegrass/types.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace densegrass {

struct SolverConfig {
  double beta1 = 1.0;
  double beta2 = -1.0;  // negative: beta2_auto_scale * rms(W)
  double beta3 = 0.1;
  double rho0 = 1e-2;
  double rho_max = 1e8;
  double eps = 1e-10;
  double c = 1.1;
  int K = 6;
  Index p = 3;
  Index d_tilde = 0;  // 0: max(2p, 12), kept below 3F
  int max_iter = 300;
  std::uint64_t seed = 0;
  int projection_stride = 1;  // refit Delta every this many iterations
  bool refine = true;         // measurement-space refinement after spectral regrouping

  static constexpr double beta2_auto_scale = 0.35;

  void validate() const {
    if (!(rho0 > 0) || !(rho0 < rho_max)) throw DimensionError("config: need 0 < rho0 < rho_max");
    if (!(c > 1)) throw DimensionError("config: c must exceed 1");
    if (beta1 < 0 || beta3 < 0) throw DimensionError("config: beta1 and beta3 must be nonnegative");
    if (!(eps > 0)) throw DimensionError("config: eps must be positive");
    if (K < 1) throw DimensionError("config: K must be at least 1");
    if (p < 1) throw DimensionError("config: p must be at least 1");
    if (d_tilde < 0) throw DimensionError("config: d_tilde must be nonnegative");
    if (max_iter < 1) throw DimensionError("config: max_iter must be at least 1");
    if (projection_stride < 1) throw DimensionError("config: projection_stride must be at least 1");
  }

  double beta2_for(const Matrix& W) const {
    if (beta2 >= 0) return beta2;
    const double rms = W.size() > 0 ? W.norm() / std::sqrt(static_cast<double>(W.size())) : 0.0;
    return beta2_auto_scale * rms;
  }

  Index d_tilde_for(Index frames) const {
    const Index v = d_tilde > 0 ? d_tilde : std::max<Index>(2 * p, 12);
    return std::min(v, std::max<Index>(p, 3 * frames - 1));
  }
};

struct ShapeState {
  Matrix S;        // 3F x P
  Matrix S_sharp;  // 3P x F
  Matrix L1;       // 3P x F
};

struct GroupDecomposition {
  std::vector<BlockSubspace> blocks;
  std::vector<Index> offsets;  // first column of each group in the arranged order
  std::vector<Index> sizes;
  OrderingVector order;        // labels after arrangement, history extended
  Permutation applied;         // permutation appended to the history

  std::vector<GrassmannPoint> points() const {
    std::vector<GrassmannPoint> out;
    out.reserve(blocks.size());
    for (const auto& b : blocks) out.push_back(b.point);
    return out;
  }
};

struct IterationRecord {
  int iter = 0;
  double gap = 0.0;
  double rho = 0.0;
  double reproj = 0.0;
  double nn_Ssharp = 0.0;
  double nn_Z = 0.0;
  double objective = 0.0;
  double seconds = 0.0;
  Index label_changes = 0;
};

struct SolveResult {
  Matrix S_est;  // 3F x P, original column order
  OrderingVector labels;
  std::vector<std::vector<int>> label_store;  // labels per iteration, original column order
  std::vector<IterationRecord> diagnostics;
  OrderingVector initial_labels;
  bool converged = false;
  std::string stop_reason;
  double beta2 = 0.0;
};

struct InitialState {
  ShapeState shape;
  OrderingVector order;
  CouplingState coupling;
  ProjectionMap delta;
};

/// S = pinv(R) W frame by frame, S# = f(S), zero multipliers, k-means++ grouping.
inline InitialState init_state(const Dataset& ds, const SolverConfig& cfg) {
  validate(ds);
  cfg.validate();
  if (cfg.K > ds.P) throw DimensionError("K exceeds the number of points");
  if (cfg.p > 3 * ds.F) throw DimensionError("p exceeds 3F");
  InitialState st;
  st.shape.S.resize(3 * ds.F, ds.P);
  for (Index f = 0; f < ds.F; ++f) {
    const Matrix Rf = ds.rotation(f);
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Rf);
    st.shape.S.middleRows(3 * f, 3).noalias() = cod.pseudoInverse() * ds.W.middleRows(2 * f, 2);
  }
  st.shape.S_sharp = reshuffle(st.shape.S);
  st.shape.L1 = Matrix::Zero(3 * ds.P, ds.F);
  st.order = kmeans_pp_init(st.shape.S, cfg.K, cfg.seed);
  repair_empty_groups(st.order, st.shape.S, cfg.seed);
  st.coupling = CouplingState::zeros(cfg.K, cfg.rho0);
  st.delta = initial_projection(3 * ds.F, cfg.d_tilde_for(ds.F), cfg.seed);
  return st;
}

/// S = (R^T R + rho I)^{-1} (rho f^{-1}(S#) + f^{-1}(L1) + R^T W), one 3x3
/// SPD solve per frame.
inline Matrix update_shape(const Matrix& W, const Matrix& R, const Matrix& S_sharp, const Matrix& L1, double rho) {
  require_dims(R.cols() == 3 && R.rows() % 2 == 0, "update_shape: R must be 2F x 3");
  const Index F = R.rows() / 2;
  const Index P = W.cols();
  require_dims(W.rows() == 2 * F, "update_shape: W must be 2F x P");
  require_dims(S_sharp.rows() == 3 * P && S_sharp.cols() == F && L1.rows() == 3 * P && L1.cols() == F,
               "update_shape: S# and L1 must be 3P x F");
  if (!(rho > 0)) throw NumericalError("update_shape: rho must be positive");
  const Matrix rhs_shape = rho * reshuffle_inverse(S_sharp) + reshuffle_inverse(L1);
  Matrix S(3 * F, P);
  for (Index f = 0; f < F; ++f) {
    const Eigen::Matrix<double, 2, 3> Rf = R.block<2, 3>(2 * f, 0);
    Eigen::Matrix3d M = Rf.transpose() * Rf;
    M.diagonal().array() += rho;
    const Eigen::LLT<Eigen::Matrix3d> llt(M);
    S.middleRows(3 * f, 3) = llt.solve(rhs_shape.middleRows(3 * f, 3) + Rf.transpose() * W.middleRows(2 * f, 2));
  }
  return S;
}

/// Arranges the columns of S by label and extracts one Grassmann point per
/// group from its top-p SVD.
inline GroupDecomposition regroup(const OrderingVector& order, const Matrix& S, Index p) {
  require_dims(S.cols() == order.size(), "regroup: one label per column of S");
  GroupDecomposition g;
  g.order = order;
  const Matrix arranged = arrange_columns(g.order, S);
  g.applied = g.order.history.back();
  const auto sizes = g.order.group_sizes();
  Index offset = 0;
  for (int k = 0; k < g.order.groups; ++k) {
    const Index n = sizes[static_cast<std::size_t>(k)];
    if (n == 0) throw DimensionError("regroup: group " + std::to_string(k + 1) + " is empty");
    g.offsets.push_back(offset);
    g.sizes.push_back(n);
    g.blocks.push_back(grassmann_from_block(arranged.middleCols(offset, n), p));
    offset += n;
  }
  return g;
}

/// Replaces each group's columns by Phi_i Sigma_i V_i^T, in arranged order.
inline Matrix reconstruct_shape(const GroupDecomposition& g) {
  require_dims(!g.blocks.empty(), "reconstruct_shape: empty decomposition");
  const Index rows = g.blocks.front().point.ambient();
  Index total = 0;
  for (Index n : g.sizes) total += n;
  Matrix S(rows, total);
  for (std::size_t k = 0; k < g.blocks.size(); ++k) {
    const auto& b = g.blocks[k];
    const Index r = b.point.rank();
    S.middleCols(g.offsets[k], g.sizes[k]).noalias() =
        b.point.basis * b.sigma.head(r).asDiagonal() * b.right.transpose();
  }
  return S;
}

/// Augmented Lagrangian value. The self-expression residual
/// ||chi - chi C~||_F^2 is evaluated through the kernel as
/// trace((I - C~)^T Gamma (I - C~)).
struct ObjectiveInputs {
  const Matrix& W;
  const Matrix& R;
  const Matrix& S;
  const Matrix& S_sharp;
  const Matrix& L1;
  const Matrix& gamma;
  const CouplingState& coupling;
  double beta1, beta2, beta3;
};

inline double self_expression_residual(const Matrix& gamma, const Matrix& C) {
  const Matrix E = Matrix::Identity(C.rows(), C.cols()) - C;
  return (E.transpose() * gamma * E).trace();
}

inline double objective_value(const ObjectiveInputs& in) {
  const double rho = in.coupling.rho;
  const Matrix fS = reshuffle(in.S);
  const Matrix d1 = in.S_sharp - fS;
  const Matrix d2 = in.coupling.C - in.coupling.Z;
  double v = 0.5 * (in.W - project(in.R, in.S)).squaredNorm();
  v += in.beta1 * self_expression_residual(in.gamma, in.coupling.C);
  v += in.beta2 * nuclear_norm(in.S_sharp);
  v += 0.5 * rho * d1.squaredNorm() + (in.L1.array() * d1.array()).sum();
  v += in.beta3 * nuclear_norm(in.coupling.Z);
  v += 0.5 * rho * d2.squaredNorm() + (in.coupling.L2.array() * d2.array()).sum();
  return v;
}

/// Loop state, kept in the current column arrangement.
struct AdmmState {
  Matrix W;
  Matrix S;
  Matrix S_sharp;
  Matrix L1;
  OrderingVector order;
  CouplingState coupling;
  std::optional<ProjectionMap> delta;  // fitted projection, absent before the first fit
  double rho = 0.0;
  double next_rho = 0.0;  // c * rho before clamping, from the latest iteration
  int iter = 0;
  double beta2 = 0.0;
  Index d_tilde = 0;
};

inline AdmmState admm_start(const Dataset& ds, const SolverConfig& cfg) {
  InitialState init = init_state(ds, cfg);
  AdmmState st;
  st.W = ds.W;
  st.S = std::move(init.shape.S);
  st.S_sharp = std::move(init.shape.S_sharp);
  st.L1 = std::move(init.shape.L1);
  st.order = std::move(init.order);
  st.coupling = std::move(init.coupling);
  st.rho = cfg.rho0;
  st.beta2 = cfg.beta2_for(ds.W);
  st.d_tilde = cfg.d_tilde_for(ds.F);
  return st;
}

/// One pass through the loop body, steps 1 to 15.
inline IterationRecord admm_iteration(AdmmState& st, const Dataset& ds, const SolverConfig& cfg) {
  const double rho = st.rho;
  ++st.iter;
  // 1. least-squares shape
  st.S = update_shape(st.W, ds.R, st.S_sharp, st.L1, rho);
  // 2-3. group trajectories, arrange columns of W, S, S#, L1 consistently
  GroupDecomposition groups = regroup(st.order, st.S, cfg.p);
  st.S = permute_columns(st.S, groups.applied);
  st.W = permute_columns(st.W, groups.applied);
  st.S_sharp = permute_points(st.S_sharp, groups.applied);
  st.L1 = permute_points(st.L1, groups.applied);
  st.order = groups.order;
  const auto points = groups.points();
  // 4. similarity graph
  const SimilarityGraph graph = similarity_graph(points);
  // 5. low-dimensional representatives
  LowDimSet low;
  if (!st.delta || (st.iter - 1) % cfg.projection_stride == 0) {
    auto [map, set] = project_all(points, graph, st.d_tilde, st.delta);
    st.delta = std::move(map);
    low = std::move(set);
  } else {
    for (const auto& pt : points) {
      ProjectedPoint pp = project_point_reduced(pt, *st.delta);
      low.thetas.push_back(std::move(pp.theta));
      low.u_mats.push_back(std::move(pp.u));
      low.omegas.push_back(std::move(pp.omega));
    }
  }
  // 6. kernel and Cholesky factor
  const KernelMatrix kernel = kernel_matrix(low);
  // 7. coefficients
  st.coupling.rho = rho;
  st.coupling.C = update_coefficients(kernel.chol_factor, st.coupling, cfg.beta1);
  // 8. regroup trajectories
  const std::vector<int> before = st.order.labels;
  const std::uint64_t step_seed = cfg.seed + static_cast<std::uint64_t>(st.iter);
  st.order = spectral_cluster(st.coupling.C, st.order, cfg.K, st.W, step_seed);
  if (cfg.refine) refine_partition(st.W, st.order, cfg.p, step_seed);
  repair_empty_groups(st.order, st.W, step_seed);
  // 9. local rank-p reconstruction
  st.S = reconstruct_shape(groups);
  // 10-11. nuclear-norm proximal steps
  const Matrix fS = reshuffle(st.S);
  st.S_sharp = svt(fS - st.L1 / rho, st.beta2 / rho);
  st.coupling.Z = svt(st.coupling.C + st.coupling.L2 / rho, cfg.beta3 / rho);
  // 12. multipliers
  const Matrix r1 = st.S_sharp - fS;
  const Matrix r2 = st.coupling.C - st.coupling.Z;
  st.L1 += rho * r1;
  st.coupling.L2 += rho * r2;

  IterationRecord rec;
  rec.iter = st.iter;
  rec.rho = rho;
  rec.reproj = (st.W - project(ds.R, st.S)).norm();
  rec.nn_Ssharp = nuclear_norm(st.S_sharp);
  rec.nn_Z = nuclear_norm(st.coupling.Z);
  rec.objective = objective_value(
      {st.W, ds.R, st.S, st.S_sharp, st.L1, kernel.gamma, st.coupling, cfg.beta1, st.beta2, cfg.beta3});
  for (std::size_t j = 0; j < before.size(); ++j) rec.label_changes += (before[j] != st.order.labels[j]);
  // 14. penalty
  st.next_rho = cfg.c * rho;
  st.rho = std::min(cfg.rho_max, st.next_rho);
  // 15. constraint gap
  rec.gap = std::max(r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff());
  return rec;
}

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Runs the loop until the gap falls below eps, the penalty would pass
/// rho_max, or max_iter iterations. `observe` sees every record as it is made.
inline SolveResult admm_solve(const Dataset& ds, const SolverConfig& cfg, const IterationObserver& observe = {}) {
  using Clock = std::chrono::steady_clock;
  AdmmState st = admm_start(ds, cfg);
  SolveResult result;
  result.beta2 = st.beta2;
  result.initial_labels = st.order;
  result.label_store.push_back(st.order.original_order_labels());
  const auto start = Clock::now();

  while (st.iter < cfg.max_iter) {
    IterationRecord rec = admm_iteration(st, ds, cfg);
    rec.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    // 13. store labels
    result.label_store.push_back(st.order.original_order_labels());
    result.diagnostics.push_back(rec);
    if (observe) observe(rec);
    if (!std::isfinite(rec.gap) || !std::isfinite(rec.reproj) || !std::isfinite(rec.objective))
      throw NumericalError("admm_solve: iterate diverged at iteration " + std::to_string(rec.iter));
    if (rec.gap < cfg.eps) {
      result.converged = true;
      result.stop_reason = "gap";
      break;
    }
    if (st.next_rho > cfg.rho_max) {
      result.converged = true;
      result.stop_reason = "rho";
      break;
    }
  }
  if (!result.converged) result.stop_reason = "max_iter";
  result.S_est = restore_columns(st.S, st.order.history);
  result.labels = st.order;
  return result;
}

}  // namespace densegrass
