#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "condmed/kernel.hpp"
#include "condmed/point.hpp"

namespace condmed {

/// Observations with nonnegative weights, the input of the offline
/// (Weiszfeld) estimator and of the empirical risk.
struct WeightedSample {
  std::vector<Point> points;
  std::vector<double> weights;

  Eigen::Index dim() const { return points.empty() ? 0 : points.front().size(); }

  void validate() const {
    if (points.empty()) throw std::invalid_argument("WeightedSample: empty sample");
    if (points.size() != weights.size())
      throw std::invalid_argument("WeightedSample: points/weights length mismatch");
    const auto d = points.front().size();
    for (const auto& p : points)
      if (p.size() != d) throw std::invalid_argument("WeightedSample: mixed dimensions");
    for (double w : weights)
      if (!(w >= 0.0)) throw std::invalid_argument("WeightedSample: negative weight");
  }
};

/// Normalized localization weights around x: w_i proportional to
/// K((xs[i] - x) / h), summing to one.
inline std::vector<double> kernel_weights(double x, const std::vector<double>& xs, double h,
                                          KernelFamily kernel) {
  if (xs.empty()) throw std::invalid_argument("kernel_weights: empty covariate list");
  if (!(h > 0.0)) throw std::invalid_argument("kernel_weights: bandwidth must be positive");
  std::vector<double> w(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    w[i] = kernel_eval(kernel, (xs[i] - x) / h);
    total += w[i];
  }
  if (total <= 0.0)
    throw std::invalid_argument("kernel_weights: empty effective sample (no covariate within "
                                "kernel support of x)");
  for (double& wi : w) wi /= total;
  return w;
}

inline double empirical_risk(const Point& alpha, const WeightedSample& sample) {
  sample.validate();
  if (alpha.size() != sample.dim())
    throw std::invalid_argument("empirical_risk: dimension mismatch");
  double risk = 0.0;
  for (std::size_t i = 0; i < sample.points.size(); ++i)
    risk += sample.weights[i] * (sample.points[i] - alpha).norm();
  return risk;
}

struct WeiszfeldResult {
  Point median;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Pull of the other points at anchor Y_j: R = sum_{i != j} w_i D(Y_j, Y_i),
// and the local curvature L = sum_{i != j} w_i / ||Y_i - Y_j||.
inline void anchor_pull(const WeightedSample& s, std::size_t j, Point& r, double& l) {
  r.setZero(s.dim());
  l = 0.0;
  for (std::size_t i = 0; i < s.points.size(); ++i) {
    if (i == j) continue;
    const Point diff = s.points[i] - s.points[j];
    const double dist = diff.norm();
    if (dist == 0.0) continue;  // coincident points pull in no direction
    r += (s.weights[i] / dist) * diff;
    l += s.weights[i] / dist;
  }
}

}  // namespace detail

/// Weighted Weiszfeld iteration for the empirical geometric median, with the
/// Vardi-Zhang rule when the iterate lands on a data point: if the residual
/// pull R at Y_j satisfies ||R|| <= w_j, Y_j itself is the median; otherwise
/// step off along R with length (||R|| - w_j) / L.
inline WeiszfeldResult weiszfeld(const WeightedSample& sample, double tol = 1e-8,
                                 int max_iter = 500) {
  sample.validate();
  if (!(tol > 0.0)) throw std::invalid_argument("weiszfeld: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("weiszfeld: max_iter must be >= 1");

  const std::size_t n = sample.points.size();
  const auto d = sample.dim();

  double total_weight = 0.0;
  for (double w : sample.weights) total_weight += w;
  if (!(total_weight > 0.0)) throw std::invalid_argument("weiszfeld: all weights are zero");

  if (n == 1) return {sample.points.front(), 0, true};

  // A point holding at least half the total weight is the median outright.
  for (std::size_t j = 0; j < n; ++j) {
    if (sample.weights[j] * 2.0 >= total_weight) {
      Point r(d);
      double l = 0.0;
      detail::anchor_pull(sample, j, r, l);
      if (r.norm() <= sample.weights[j]) return {sample.points[j], 0, true};
    }
  }

  // Start at the weighted coordinate-wise mean.
  Point alpha = Point::Zero(d);
  for (std::size_t i = 0; i < n; ++i) alpha += sample.weights[i] * sample.points[i];
  alpha /= total_weight;

  constexpr double kAnchorEps = 1e-12;
  Point next(d), pull(d);
  for (int iter = 1; iter <= max_iter; ++iter) {
    // Locate the nearest data point; treat a hit as an anchor case.
    std::size_t nearest = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double dist = (sample.points[i] - alpha).norm();
      if (dist < nearest_dist) {
        nearest_dist = dist;
        nearest = i;
      }
    }

    if (nearest_dist <= kAnchorEps) {
      double l = 0.0;
      detail::anchor_pull(sample, nearest, pull, l);
      const double r_norm = pull.norm();
      const double wj = sample.weights[nearest];
      if (r_norm <= wj || l == 0.0) return {sample.points[nearest], iter, true};
      next = sample.points[nearest] + ((r_norm - wj) / l) * (pull / r_norm);
    } else {
      double denom = 0.0;
      next.setZero();
      for (std::size_t i = 0; i < n; ++i) {
        const double dist = (sample.points[i] - alpha).norm();
        if (dist == 0.0) continue;
        const double c = sample.weights[i] / dist;
        next += c * sample.points[i];
        denom += c;
      }
      next /= denom;
    }

    const double move = (next - alpha).norm();
    alpha = next;
    if (move <= tol * std::max(1.0, alpha.norm())) return {alpha, iter, true};
  }
  return {alpha, max_iter, false};
}

}  // namespace condmed
