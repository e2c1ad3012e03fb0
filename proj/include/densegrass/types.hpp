#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace densegrass {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or sizes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input data that is missing, malformed or violates a dataset invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A factorization or solve that failed even after regularization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace densegrass
