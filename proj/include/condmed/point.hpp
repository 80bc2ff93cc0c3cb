#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace condmed {

/// A point of the ambient space: a finite-dimensional real vector
/// (a curve sampled on a grid, or a plain test vector).
using Point = Eigen::VectorXd;

inline bool is_finite(const Point& p) { return p.allFinite(); }

inline void require_same_dim(const Point& a, const Point& b, const char* where) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
}

/// Unit vector from a toward b. Returns the zero vector when a == b, so a
/// step along the result is a no-op at zero distance.
inline Point direction(const Point& a, const Point& b) {
  require_same_dim(a, b, "direction");
  Point d = b - a;
  const double norm = d.norm();
  if (norm == 0.0) {
    d.setZero();
    return d;
  }
  d /= norm;
  return d;
}

}  // namespace condmed
