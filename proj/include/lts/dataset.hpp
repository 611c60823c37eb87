#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace lts {

using Index = std::size_t;
using IndexSet = std::vector<Index>;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class InfeasibleConfig : public Error {
 public:
  using Error::Error;
};

class InvalidSpec : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

/// Regression input: explicative variables as rows of X, responses in y.
class Dataset {
 public:
  Dataset(Matrix X, Vector y) : X_(std::move(X)), y_(std::move(y)) {
    if (X_.rows() < 1 || X_.cols() < 1) throw InvalidSpec("dataset must have n >= 1 and d >= 1");
    if (X_.rows() != y_.size()) throw InvalidSpec("X and y row counts differ");
    if (!X_.allFinite() || !y_.allFinite()) throw InvalidSpec("dataset contains non-finite values");
  }

  const Matrix& X() const { return X_; }
  const Vector& y() const { return y_; }
  Index n() const { return static_cast<Index>(X_.rows()); }
  Index d() const { return static_cast<Index>(X_.cols()); }
  auto row(Index i) const { return X_.row(static_cast<Eigen::Index>(i)); }

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.X_.rows() == b.X_.rows() && a.X_.cols() == b.X_.cols() && a.X_ == b.X_ && a.y_ == b.y_;
  }

 private:
  Matrix X_;
  Vector y_;
};

/// Breakdown-maximizing coverage floor(n/2) + floor((d+1)/2).
inline Index default_coverage(Index n, Index d) { return n / 2 + (d + 1) / 2; }

}  // namespace lts
