#pragma once

// Synthetic scenes with exact ground truth, measurement noise, and the
// reconstruction / labelling metrics.

#include <densegrass/assignment.hpp>
#include <densegrass/core.hpp>
#include <densegrass/solver.hpp>
#include <densegrass/types.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace densegrass {

struct SceneSpec {
  Index F = 30;
  Index P = 600;
  int K_true = 6;
  Index p_true = 3;
  double deform_amp = 0.8;      // spectral norm of the per-patch deformation operator
  double rot_range = 30.0;      // degrees
  double min_angle = 0.0;       // degrees; largest principal angle required between patch subspaces,
                                // not enforced for rigid scenes
  double deform_freq = 2.3;     // deformation cycles over the sequence
  std::uint64_t seed = 0;

  static constexpr Index max_extra_modes = 25;

  void validate() const {
    if (F < 1 || P < 1) throw DimensionError("scene: F and P must be positive");
    if (K_true < 1 || K_true > P) throw DimensionError("scene: need 1 <= K_true <= P");
    if (p_true < 1 || p_true > 3 * F) throw DimensionError("scene: need 1 <= p_true <= 3F");
    if (p_true > 3 + max_extra_modes) throw DimensionError("scene: p_true too large for the generator");
    if (deform_amp < 0) throw DimensionError("scene: deform_amp must be nonnegative");
    if (rot_range < 0) throw DimensionError("scene: rot_range must be nonnegative");
    if (min_angle < 0 || min_angle > 90) throw DimensionError("scene: min_angle must lie in [0, 90]");
  }
};

/// F=30, P=600, six patches of rank 3, rotations within +-30 degrees, patch
/// subspaces at least 30 degrees apart.
inline SceneSpec standard_scene(std::uint64_t seed = 7) {
  SceneSpec s;
  s.min_angle = 30.0;
  s.seed = seed;
  return s;
}

inline SceneSpec rigid_scene(std::uint64_t seed = 7) {
  SceneSpec s = standard_scene(seed);
  s.deform_amp = 0.0;
  s.min_angle = 0.0;
  return s;
}

struct Scene {
  Dataset data;
  std::vector<int> labels_gt;  // 0-based
  int patch_draws = 0;         // deformation operators drawn before the angle test passed
};

/// Largest principal angle (degrees) between the column spans of A and B.
inline double max_principal_angle(const Matrix& A, const Matrix& B) {
  require_dims(A.rows() == B.rows(), "max_principal_angle: ambient mismatch");
  const Matrix qa = Eigen::HouseholderQR<Matrix>(A).householderQ() * Matrix::Identity(A.rows(), A.cols());
  const Matrix qb = Eigen::HouseholderQR<Matrix>(B).householderQ() * Matrix::Identity(B.rows(), B.cols());
  const Vector s = Eigen::JacobiSVD<Matrix>(qa.transpose() * qb).singularValues();
  const double smallest = s.size() < std::min(A.cols(), B.cols()) ? 0.0 : s.minCoeff();
  return std::acos(std::clamp(smallest, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

namespace detail {

inline Eigen::Matrix3d rotation_xy(double ax, double ay) {
  Eigen::Matrix3d rx, ry;
  rx << 1, 0, 0, 0, std::cos(ax), -std::sin(ax), 0, std::sin(ax), std::cos(ax);
  ry << std::cos(ay), 0, std::sin(ay), 0, 1, 0, -std::sin(ay), 0, std::cos(ay);
  return ry * rx;
}

/// Monomial u^a v^b of total degree >= 2, enumerated by degree.
inline double extra_feature(Index k, double u, double v) {
  Index deg = 2, idx = k;
  while (idx > deg) {
    idx -= deg + 1;
    ++deg;
  }
  return std::pow(u, static_cast<double>(deg - idx)) * std::pow(v, static_cast<double>(idx));
}

}  // namespace detail

/// Smooth surface z = 0.3 sin(1.5u) cos(1.5v) over [-1,1]^2, split into
/// K_true Voronoi patches on a regular grid of centres. Patch i deforms as
/// x(f) = (I + amp a(f) G_i) x with a single temporal mode a(f) and a random
/// operator G_i of unit spectral norm; ranks above three add further
/// monomial modes. Rotations sweep smoothly within +-rot_range about x and y.
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  const Index F = spec.F, P = spec.P;
  const int K = spec.K_true;
  const Index p = spec.p_true;
  const Index base = std::min<Index>(p, 3);
  const Index extra = p - base;
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix X(3, P);
  for (Index j = 0; j < P; ++j) {
    const double u = unit(rng);
    const double v = unit(rng);
    X(0, j) = u;
    X(1, j) = base >= 2 ? v : 0.0;
    X(2, j) = base >= 3 ? 0.3 * std::sin(1.5 * u) * std::cos(1.5 * v) : 0.0;
  }
  // patches
  const Index nx = static_cast<Index>(std::ceil(std::sqrt(static_cast<double>(K))));
  const Index ny = (K + nx - 1) / nx;
  Matrix centres(2, K);
  for (int i = 0; i < K; ++i) {
    centres(0, i) = (static_cast<double>(i % nx) + 0.5) / static_cast<double>(nx) * 2.0 - 1.0;
    centres(1, i) = (static_cast<double>(i / nx) + 0.5) / static_cast<double>(ny) * 2.0 - 1.0;
  }
  const Matrix uv = X.topRows(2);
  Scene scene;
  scene.labels_gt.assign(static_cast<std::size_t>(P), 0);
  auto dist2 = [&](Index j, int i) { return (uv.col(j) - centres.col(i)).squaredNorm(); };
  for (Index j = 0; j < P; ++j) {
    int best = 0;
    for (int i = 1; i < K; ++i)
      if (dist2(j, i) < dist2(j, best)) best = i;
    scene.labels_gt[static_cast<std::size_t>(j)] = best;
  }
  for (int i = 0; i < K; ++i) {
    std::vector<Index> sizes(static_cast<std::size_t>(K), 0);
    for (int l : scene.labels_gt) ++sizes[static_cast<std::size_t>(l)];
    if (sizes[static_cast<std::size_t>(i)] > 0) continue;
    Index pick = -1;
    for (Index j = 0; j < P; ++j)
      if (sizes[static_cast<std::size_t>(scene.labels_gt[static_cast<std::size_t>(j)])] > 1 &&
          (pick < 0 || dist2(j, i) < dist2(pick, i)))
        pick = j;
    scene.labels_gt[static_cast<std::size_t>(pick)] = i;
  }

  // temporal modes
  const double tphase = phase(rng);
  Vector a(F);
  for (Index f = 0; f < F; ++f)
    a(f) = std::sin(2.0 * std::numbers::pi * spec.deform_freq * static_cast<double>(f) / static_cast<double>(F) + tphase);
  Matrix b(extra, F);
  for (Index k = 0; k < extra; ++k) {
    const double ph = phase(rng);
    const double freq = spec.deform_freq + 0.7 * static_cast<double>(k + 1);
    for (Index f = 0; f < F; ++f)
      b(k, f) = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(f) / static_cast<double>(F) + ph);
  }

  // per-patch operators, drawn until every pair of patch subspaces is separated
  std::vector<Eigen::Matrix3d> G;
  std::vector<Matrix> H;  // 3 x extra directions of the extra modes
  std::vector<Matrix> bases;
  while (static_cast<int>(G.size()) < K) {
    if (++scene.patch_draws > 10000)
      throw DataError("generate_scene: could not separate patch subspaces by " + std::to_string(spec.min_angle) + " degrees");
    Eigen::Matrix3d g;
    for (Index r = 0; r < 3; ++r)
      for (Index c = 0; c < 3; ++c) g(r, c) = normal(rng);
    g /= Eigen::JacobiSVD<Eigen::Matrix3d>(g).singularValues()(0);
    Matrix h(3, extra);
    for (Index k = 0; k < extra; ++k) {
      for (Index r = 0; r < 3; ++r) h(r, k) = normal(rng);
      h.col(k).normalize();
    }
    Matrix B(3 * F, p);
    for (Index f = 0; f < F; ++f) {
      const Eigen::Matrix3d op = Eigen::Matrix3d::Identity() + spec.deform_amp * a(f) * g;
      B.block(3 * f, 0, 3, base) = op.leftCols(base);
      for (Index k = 0; k < extra; ++k) B.block(3 * f, base + k, 3, 1) = spec.deform_amp * b(k, f) * h.col(k);
    }
    bool separated = true;
    if (spec.min_angle > 0 && spec.deform_amp > 0)
      for (const auto& other : bases)
        if (max_principal_angle(B, other) < spec.min_angle) {
          separated = false;
          break;
        }
    if (!separated) continue;
    G.push_back(g);
    H.push_back(h);
    bases.push_back(B);
  }

  Matrix S(3 * F, P);
  for (Index j = 0; j < P; ++j) {
    const int i = scene.labels_gt[static_cast<std::size_t>(j)];
    const Eigen::Vector3d x = X.col(j);
    for (Index f = 0; f < F; ++f) {
      Eigen::Vector3d s = (Eigen::Matrix3d::Identity() + spec.deform_amp * a(f) * G[static_cast<std::size_t>(i)]) * x;
      for (Index k = 0; k < extra; ++k)
        s += spec.deform_amp * b(k, f) * detail::extra_feature(k, X(0, j), X(1, j)) * H[static_cast<std::size_t>(i)].col(k);
      S.block<3, 1>(3 * f, j) = s;
    }
  }

  const double rphase = phase(rng);
  const double range = spec.rot_range * std::numbers::pi / 180.0;
  Matrix R(2 * F, 3);
  for (Index f = 0; f < F; ++f) {
    const double t = static_cast<double>(f) / static_cast<double>(F);
    const double ax = range * std::sin(2.0 * std::numbers::pi * t + rphase);
    const double ay = range * std::cos(2.0 * std::numbers::pi * 1.3 * t + rphase);
    R.middleRows(2 * f, 2) = detail::rotation_xy(ax, ay).topRows(2);
  }

  Dataset& ds = scene.data;
  ds.F = F;
  ds.P = P;
  ds.R = R;
  ds.W = project(R, S);
  ds.S_gt = std::move(S);
  ds.column_ids = default_column_ids(P);
  return scene;
}

/// W + N(0, sigma^2) entrywise with sigma = lambda * max|W|.
inline Matrix add_noise(const Matrix& W, double lambda, std::uint64_t seed) {
  if (lambda < 0) throw DimensionError("add_noise: lambda must be nonnegative");
  if (lambda == 0 || W.size() == 0) return W;
  const double sigma = lambda * W.cwiseAbs().maxCoeff();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  Matrix out = W;
  for (Index c = 0; c < out.cols(); ++c)
    for (Index r = 0; r < out.rows(); ++r) out(r, c) += noise(rng);
  return out;
}

struct EvalReport {
  double e3d = 0.0;
  Vector per_frame_errors;
  bool sign_flipped = false;
  std::optional<double> label_accuracy;
};

/// Mean per-frame ||S_est^f - S_gt^f||_F / ||S_gt^f||_F after restoring the
/// original column order; the depth-reflected estimate (Z rows negated) is
/// also scored and the better of the two is reported.
inline EvalReport e3d(const Matrix& S_est, const Matrix& S_gt, const std::vector<Permutation>& history = {}) {
  require_dims(S_est.rows() == S_gt.rows() && S_est.cols() == S_gt.cols(), "e3d: S_est and S_gt differ in shape");
  require_dims(S_gt.rows() % 3 == 0 && S_gt.rows() > 0, "e3d: shape matrices must be 3F x P");
  const Matrix S = history.empty() ? S_est : restore_columns(S_est, history);
  const Index F = S_gt.rows() / 3;
  Vector plain(F), flipped(F);
  for (Index f = 0; f < F; ++f) {
    const auto gt = S_gt.middleRows(3 * f, 3);
    const double n = gt.norm();
    if (!(n > 0)) throw DataError("e3d: ground-truth frame " + std::to_string(f) + " has zero norm");
    Matrix est = S.middleRows(3 * f, 3);
    plain(f) = (est - gt).norm() / n;
    est.row(2) *= -1.0;
    flipped(f) = (est - gt).norm() / n;
  }
  EvalReport rep;
  rep.sign_flipped = flipped.mean() < plain.mean();
  rep.per_frame_errors = rep.sign_flipped ? flipped : plain;
  rep.e3d = rep.per_frame_errors.mean();
  return rep;
}

/// Fraction of points labelled consistently under the best one-to-one
/// matching of estimated to true groups.
inline double label_accuracy(const std::vector<int>& est, const std::vector<int>& gt) {
  require_dims(est.size() == gt.size(), "label_accuracy: label vectors differ in length");
  if (est.empty()) return 1.0;
  const int ge = *std::max_element(est.begin(), est.end()) + 1;
  const int gg = *std::max_element(gt.begin(), gt.end()) + 1;
  if (*std::min_element(est.begin(), est.end()) < 0 || *std::min_element(gt.begin(), gt.end()) < 0)
    throw DimensionError("label_accuracy: labels must be nonnegative");
  const Matrix counts = contingency(est, ge, gt, gg);
  const auto match = hungarian(-counts);
  double agree = 0.0;
  for (int i = 0; i < ge; ++i) {
    const Index j = match[static_cast<std::size_t>(i)];
    if (j >= 0 && j < gg) agree += counts(i, j);
  }
  return agree / static_cast<double>(est.size());
}

inline double label_accuracy(const OrderingVector& est, const std::vector<int>& gt) {
  return label_accuracy(est.original_order_labels(), gt);
}

struct SweepRow {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double e3d = 0.0;
  int iters = 0;
  double seconds = 0.0;
};

/// One solver run per (lambda, noise seed); rows ordered by lambda, then seed.
inline std::vector<SweepRow> noise_sweep(const Dataset& ds, const SolverConfig& cfg, std::vector<double> lambdas,
                                         const std::vector<std::uint64_t>& seeds) {
  if (!ds.S_gt) throw DataError("noise_sweep: dataset has no ground-truth shape");
  std::stable_sort(lambdas.begin(), lambdas.end());
  std::vector<SweepRow> rows;
  for (double lambda : lambdas)
    for (std::uint64_t s : seeds) {
      Dataset noisy = ds;
      noisy.W = add_noise(ds.W, lambda, s);
      const auto start = std::chrono::steady_clock::now();
      const SolveResult res = admm_solve(noisy, cfg);
      SweepRow row;
      row.lambda = lambda;
      row.seed = s;
      row.e3d = e3d(res.S_est, *ds.S_gt).e3d;
      row.iters = static_cast<int>(res.diagnostics.size());
      row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      rows.push_back(row);
    }
  return rows;
}

/// Mean e3d per distinct lambda, in row order.
inline std::vector<std::pair<double, double>> sweep_means(const std::vector<SweepRow>& rows) {
  std::vector<std::pair<double, double>> out;
  std::vector<int> counts;
  for (const auto& r : rows) {
    if (out.empty() || out.back().first != r.lambda) {
      out.emplace_back(r.lambda, 0.0);
      counts.push_back(0);
    }
    out.back().second += r.e3d;
    ++counts.back();
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].second /= counts[i];
  return out;
}

}  // namespace densegrass
