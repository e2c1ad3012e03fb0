#include <densegrass/lowdim.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace densegrass;
using testing_support::random_matrix;
using testing_support::random_orthonormal;

namespace {

GrassmannPoint random_point(Index d, Index p, std::mt19937_64& rng) { return {random_orthonormal(d, p, rng)}; }

std::vector<GrassmannPoint> random_points(Index K, Index d, Index p, std::mt19937_64& rng) {
  std::vector<GrassmannPoint> pts;
  for (Index i = 0; i < K; ++i) pts.push_back(random_point(d, p, rng));
  return pts;
}

/// Orthonormal basis of span(M) from an SVD, independent of the QR path.
Matrix svd_orth(const Matrix& M) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(M.cols());
}

/// Delta_hat = G (G^T B G)^{-1/2}.
Matrix b_orthonormalize(const Matrix& G, const Matrix& B) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(G.transpose() * B * G);
  return G * eig.operatorInverseSqrt();
}

}  // namespace

TEST(ProjectPoint, OrthonormalTopBlockIsKept) {
  std::mt19937_64 rng(1);
  const Index d = 9, dt = 4, p = 2;
  ProjectionMap map{Matrix::Zero(d, dt)};
  map.delta.topRows(dt).setIdentity();
  Matrix phi = Matrix::Zero(d, p);
  phi.topRows(dt) = random_orthonormal(dt, p, rng);
  const ProjectedPoint pp = project_point({phi}, map);
  EXPECT_LE((pp.theta.basis - phi.topRows(dt)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((pp.u - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ProjectPoint, QrPostconditions) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Index p = 1 + trial % 4;
    const GrassmannPoint phi = random_point(15, p, rng);
    const ProjectionMap map{random_matrix(15, 6, rng)};
    const ProjectedPoint pp = project_point(phi, map);
    EXPECT_LE((pp.theta.basis.transpose() * pp.theta.basis - Matrix::Identity(p, p)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((pp.theta.basis * pp.u - map.delta.transpose() * phi.basis).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((pp.theta.basis - map.delta.transpose() * pp.omega).norm(), 1e-10);
    for (Index r = 0; r < p; ++r) {
      EXPECT_GT(pp.u(r, r), 0.0);
      for (Index c = 0; c < r; ++c) EXPECT_EQ(pp.u(r, c), 0.0);
    }
  }
}

TEST(ProjectPoint, SpanMatchesSvdOrthonormalizer) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const GrassmannPoint phi = random_point(12, 3, rng);
    const ProjectionMap map{random_matrix(12, 5, rng)};
    const ProjectedPoint pp = project_point(phi, map);
    const Matrix oracle = svd_orth(map.delta.transpose() * phi.basis);
    EXPECT_LE((embed(pp.theta) - oracle * oracle.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(ProjectPoint, CollapseIsReported) {
  const Index d = 6;
  ProjectionMap map{Matrix::Zero(d, 3)};
  map.delta.topRows(3).setIdentity();
  Matrix phi = Matrix::Zero(d, 2);
  phi(3, 0) = 1.0;
  phi(0, 1) = 1.0;
  EXPECT_THROW(project_point({phi}, map), NumericalError);
  const ProjectedPoint reduced = project_point_reduced({phi}, map);
  EXPECT_TRUE(reduced.collapsed);
  EXPECT_EQ(reduced.theta.rank(), 1);
  EXPECT_LE((reduced.theta.basis.transpose() * reduced.theta.basis - Matrix::Identity(1, 1)).norm(), 1e-12);
}

TEST(InitialProjection, IdentityTopBlockAndSmallTail) {
  const ProjectionMap m = initial_projection(12, 4, 5);
  EXPECT_EQ(m.delta.topRows(4), Matrix::Identity(4, 4));
  EXPECT_LE(m.delta.bottomRows(8).cwiseAbs().maxCoeff(), 0.1);
  EXPECT_GT(m.delta.bottomRows(8).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(initial_projection(12, 4, 5).delta, m.delta);
}

TEST(FitProjection, IdenticalSubspacesGiveZeroObjective) {
  std::mt19937_64 rng(4);
  const GrassmannPoint a = random_point(10, 2, rng);
  const std::vector<GrassmannPoint> pts{a, a};
  const SimilarityGraph g = similarity_graph(pts);
  EXPECT_NEAR(g.weights(0, 1), 1.0, 1e-12);
  const ProjectionFit fit = fit_projection(pts, g, 3);
  const auto prob = projection_problem(omegas_for(pts, std::nullopt), g);
  EXPECT_NEAR(prob.A.norm(), 0.0, 1e-12);
  const Matrix lam = embed(a) - embed(a);
  EXPECT_NEAR(0.5 * (fit.map.delta.transpose() * lam * fit.map.delta).squaredNorm(), 0.0, 1e-20);
}

TEST(FitProjection, ConstraintIsBOrthonormality) {
  std::mt19937_64 rng(5);
  for (Index K : {2, 4, 7}) {
    const auto pts = random_points(K, 18, 3, rng);
    const SimilarityGraph g = similarity_graph(pts);
    const ProjectionFit fit = fit_projection(pts, g, 8);
    const Matrix B = projection_problem(omegas_for(pts, std::nullopt), g).B();
    const Matrix I = fit.map.delta.transpose() * B * fit.map.delta;
    EXPECT_LE((I - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-6) << "K=" << K;
  }
}

TEST(FitProjection, ProblemMatricesArePsd) {
  std::mt19937_64 rng(6);
  const auto pts = random_points(5, 12, 2, rng);
  const auto prob = projection_problem(omegas_for(pts, std::nullopt), similarity_graph(pts));
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(prob.A).eigenvalues().minCoeff(), -1e-8);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(prob.B0).eigenvalues().minCoeff(), -1e-8);
}

TEST(FitProjection, BeatsRandomSearchOnSmallInstance) {
  std::mt19937_64 rng(7);
  const auto pts = random_points(4, 12, 3, rng);
  const SimilarityGraph g = similarity_graph(pts);
  const Index dt = 4;
  const ProjectionFit fit = fit_projection(pts, g, dt);
  const auto prob = projection_problem(omegas_for(pts, std::nullopt), g);
  const Matrix B = prob.B();
  ASSERT_EQ(fit.range_rank, 12);
  const double ours = (fit.map.delta.transpose() * prob.A * fit.map.delta).trace();
  double best_random = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix D = b_orthonormalize(random_matrix(12, dt, rng), B);
    ASSERT_LE((D.transpose() * B * D - Matrix::Identity(dt, dt)).cwiseAbs().maxCoeff(), 1e-6);
    const double v = (D.transpose() * prob.A * D).trace();
    best_random = std::min(best_random, v);
    EXPECT_LE(ours, v * (1 + 1e-9) + 1e-12);
  }
  EXPECT_LT(ours, best_random);
}

TEST(FitProjection, RangeRestrictedOptimumBeatsRandomSearch) {
  std::mt19937_64 rng(8);
  const auto pts = random_points(3, 15, 2, rng);
  const SimilarityGraph g = similarity_graph(pts);
  const Index dt = 4;
  const ProjectionFit fit = fit_projection(pts, g, dt);
  const auto prob = projection_problem(omegas_for(pts, std::nullopt), g);
  ASSERT_EQ(fit.range_rank, 6);
  Eigen::SelfAdjointEigenSolver<Matrix> beig(prob.B0);
  const Matrix range = beig.eigenvectors().rightCols(6);
  const double ours = (fit.map.delta.transpose() * prob.A * fit.map.delta).trace();
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix D = b_orthonormalize(range * random_matrix(6, dt, rng), prob.B());
    EXPECT_LE(ours, (D.transpose() * prob.A * D).trace() * (1 + 1e-9) + 1e-12);
  }
}

TEST(ProjectionProblem, InvariantToCommonOmegaScale) {
  std::mt19937_64 rng(21);
  const auto pts = random_points(5, 12, 3, rng);
  const SimilarityGraph g = similarity_graph(pts);
  const ProjectionMap prev{random_matrix(12, 6, rng)};
  const auto omegas = omegas_for(pts, prev);
  const auto base = projection_problem(omegas, g);
  for (double s : {1e-150, 1e150, 1e250}) {
    std::vector<Matrix> scaled = omegas;
    for (auto& om : scaled) om *= s;
    const auto prob = projection_problem(scaled, g);
    ASSERT_TRUE(prob.A.allFinite() && prob.B0.allFinite()) << s;
    EXPECT_LE((prob.A - base.A).norm(), 1e-10 * base.A.norm()) << s;
    EXPECT_LE((prob.B0 - base.B0).norm(), 1e-10 * base.B0.norm()) << s;
  }
}

TEST(FitProjection, GeneralizedEigenResidual) {
  std::mt19937_64 rng(9);
  for (int K : {3, 6}) {
    const auto pts = random_points(K, 18, 3, rng);
    const SimilarityGraph g = similarity_graph(pts);
    const ProjectionFit fit = fit_projection(pts, g, 6);
    const auto prob = projection_problem(omegas_for(pts, std::nullopt), g);
    const Matrix B = prob.B();
    for (Index k = 0; k < fit.eigenvalues.size(); ++k) {
      const Vector v = fit.map.delta.col(k);
      const Vector Av = prob.A * v;
      EXPECT_LE((Av - fit.eigenvalues(k) * B * v).norm(), 1e-6 * std::max(Av.norm(), 1e-300)) << "K=" << K << " k=" << k;
    }
  }
}

TEST(FitProjection, UsesPreviousProjectionForOmega) {
  std::mt19937_64 rng(10);
  const auto pts = random_points(4, 12, 2, rng);
  const ProjectionMap prev{random_matrix(12, 5, rng)};
  const auto omegas = omegas_for(pts, prev);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const ProjectedPoint pp = project_point(pts[i], prev);
    EXPECT_LE((omegas[i] - pp.omega).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ProjectAll, SinglePoint) {
  std::mt19937_64 rng(11);
  const std::vector<GrassmannPoint> pts{random_point(9, 2, rng)};
  const auto [map, set] = project_all(pts, similarity_graph(pts), 4);
  ASSERT_EQ(set.size(), 1);
  const Matrix oracle = svd_orth(map.delta.transpose() * pts[0].basis);
  EXPECT_LE((embed(set.thetas[0]) - oracle * oracle.transpose()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ProjectAll, OutputsSatisfyLowDimInvariants) {
  std::mt19937_64 rng(12);
  const auto pts = random_points(6, 30, 3, rng);
  const auto [map, set] = project_all(pts, similarity_graph(pts), 12);
  ASSERT_EQ(set.size(), 6);
  EXPECT_TRUE(set.collapsed.empty());
  for (Index i = 0; i < 6; ++i) {
    const auto& th = set.thetas[static_cast<std::size_t>(i)].basis;
    const auto& u = set.u_mats[static_cast<std::size_t>(i)];
    EXPECT_LE((th.transpose() * th - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((th - map.delta.transpose() * set.omegas[static_cast<std::size_t>(i)]).norm(), 1e-10);
    for (Index r = 0; r < 3; ++r) {
      EXPECT_NE(u(r, r), 0.0);
      for (Index c = 0; c < r; ++c) EXPECT_EQ(u(r, c), 0.0);
    }
    Matrix stacked(12, 6);
    stacked << th, map.delta.transpose() * pts[static_cast<std::size_t>(i)].basis;
    EXPECT_EQ(Eigen::FullPivLU<Matrix>(stacked).setThreshold(1e-8).rank(), 3);
  }
}

TEST(ProjectAll, PreservesDistanceOrdering) {
  std::mt19937_64 rng(13);
  const Index d = 30, p = 3, K = 8;
  const Matrix base = random_orthonormal(d, p, rng);
  std::vector<GrassmannPoint> pts;
  for (Index i = 0; i < K; ++i) {
    const double t = 0.1 + 0.35 * static_cast<double>(i);
    pts.push_back({svd_orth(base + t * random_matrix(d, p, rng))});
  }
  const auto [map, set] = project_all(pts, similarity_graph(pts), 12);
  std::vector<std::pair<double, double>> dist;
  for (Index i = 0; i < K; ++i)
    for (Index j = i + 1; j < K; ++j)
      dist.emplace_back(proj_distance_sq(pts[static_cast<std::size_t>(i)], pts[static_cast<std::size_t>(j)]),
                        proj_distance_sq(set.thetas[static_cast<std::size_t>(i)], set.thetas[static_cast<std::size_t>(j)]));
  int agree = 0, total = 0;
  for (std::size_t a = 0; a < dist.size(); ++a)
    for (std::size_t b = a + 1; b < dist.size(); ++b) {
      ++total;
      agree += ((dist[a].first < dist[b].first) == (dist[a].second < dist[b].second));
    }
  EXPECT_GE(static_cast<double>(agree) / total, 0.8);
}
