#pragma once

// k-means++ seeding and Lloyd iterations on the columns of a matrix.

#include <densegrass/types.hpp>

#include <limits>
#include <random>
#include <vector>

namespace densegrass {

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;  // d x k
  double inertia = 0.0;
  int iterations = 0;
};

namespace detail {

inline Vector squared_distances_to(const Matrix& X, const Vector& c) {
  return (X.colwise() - c).colwise().squaredNorm().transpose();
}

}  // namespace detail

/// k-means++ seeding (D^2 sampling) on the columns of X.
inline Matrix kmeanspp_seed(const Matrix& X, int k, std::mt19937_64& rng) {
  const Index n = X.cols();
  require_dims(k >= 1 && k <= n, "kmeans++: need 1 <= k <= number of points");
  Matrix centers(X.rows(), k);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  centers.col(0) = X.col(pick(rng));
  Vector d2 = detail::squared_distances_to(X, centers.col(0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index chosen = 0;
    if (total > 0) {
      const double target = unit(rng) * total;
      double acc = 0.0;
      chosen = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc >= target && d2(i) > 0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = pick(rng);
    }
    centers.col(c) = X.col(chosen);
    d2 = d2.cwiseMin(detail::squared_distances_to(X, centers.col(c)));
  }
  return centers;
}

/// Lloyd iterations from a k-means++ seed. Clusters that empty out are
/// re-seeded with the point farthest from its center.
inline KMeansResult kmeans(const Matrix& X, int k, std::uint64_t seed, int max_iter = 100) {
  std::mt19937_64 rng(seed);
  KMeansResult res;
  res.centers = kmeanspp_seed(X, k, rng);
  const Index n = X.cols();
  res.labels.assign(static_cast<std::size_t>(n), -1);
  Vector best(n);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    Matrix d2(k, n);
    for (int c = 0; c < k; ++c) d2.row(c) = detail::squared_distances_to(X, res.centers.col(c)).transpose();
    for (Index j = 0; j < n; ++j) {
      Index arg = 0;
      best(j) = d2.col(j).minCoeff(&arg);
      if (res.labels[static_cast<std::size_t>(j)] != static_cast<int>(arg)) {
        res.labels[static_cast<std::size_t>(j)] = static_cast<int>(arg);
        changed = true;
      }
    }
    res.iterations = it + 1;
    Matrix sums = Matrix::Zero(X.rows(), k);
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index j = 0; j < n; ++j) {
      sums.col(res.labels[static_cast<std::size_t>(j)]) += X.col(j);
      ++counts[static_cast<std::size_t>(res.labels[static_cast<std::size_t>(j)])];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      } else {
        Index far = 0;
        best.maxCoeff(&far);
        res.centers.col(c) = X.col(far);
        best(far) = 0.0;
        changed = true;
      }
    }
    if (!changed) break;
  }
  res.inertia = 0.0;
  for (Index j = 0; j < n; ++j)
    res.inertia += (X.col(j) - res.centers.col(res.labels[static_cast<std::size_t>(j)])).squaredNorm();
  return res;
}

}  // namespace densegrass
