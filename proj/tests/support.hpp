#pragma once

#include <densegrass/types.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace testing_support {

using densegrass::Index;
using densegrass::Matrix;

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix M(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) M(r, c) = n(rng);
  return M;
}

inline Matrix random_orthonormal(Index rows, Index cols, std::mt19937_64& rng) {
  const Matrix A = random_matrix(rows, cols, rng);
  return Eigen::HouseholderQR<Matrix>(A).householderQ() * Matrix::Identity(rows, cols);
}

/// Orthographic rotation blocks from random 3D rotations.
inline Matrix random_rotations(Index F, std::mt19937_64& rng) {
  Matrix R(2 * F, 3);
  for (Index f = 0; f < F; ++f) {
    Matrix Q = random_orthonormal(3, 3, rng);
    R.middleRows(2 * f, 2) = Q.topRows(2);
  }
  return R;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
