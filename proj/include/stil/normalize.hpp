#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace stil {

// l2-normalization used at ingestion. Zero vectors are kept as zero.
// Vectors already within `tol` of unit squared norm pass through
// unchanged, which makes normalization exactly idempotent and the
// save/load round trip bit-exact.
inline Eigen::VectorXf l2_normalize(const Eigen::VectorXf& x, double tol = 1e-3) {
  const double sq = x.cast<double>().squaredNorm();
  if (sq == 0.0) return x;
  if (std::abs(sq - 1.0) <= tol) return x;
  const double inv = 1.0 / std::sqrt(sq);
  return (x.cast<double>() * inv).cast<float>();
}

inline Eigen::VectorXd l2_normalize(const Eigen::VectorXd& x, double tol = 1e-9) {
  const double sq = x.squaredNorm();
  if (sq == 0.0) return x;
  if (std::abs(sq - 1.0) <= tol) return x;
  return x / std::sqrt(sq);
}

}  // namespace stil
