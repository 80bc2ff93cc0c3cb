#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "condmed/point.hpp"
#include "condmed/rng.hpp"

namespace condmed {

/// Synthetic functional-regression world used as ground truth by the test
/// bench: the response Y is a Brownian path observed on the grid t_j = j/d,
/// j = 1..d, and the covariate is the path average X = (1/d) Σ_j Y(t_j).
/// The pair (X, Y) is jointly Gaussian, so the conditional law of Y given
/// X = x is Gaussian with known mean and an x-independent covariance, and
/// the conditional geometric median coincides with the conditional mean.
struct BrownianModel {
  int d = 100;           // grid size
  double x_star = 0.39;  // default covariate of interest

  BrownianModel() = default;
  explicit BrownianModel(int dim, double x0 = 0.39) : d(dim), x_star(x0) {
    if (d < 1) throw std::invalid_argument("brownian: grid size must be >= 1");
  }

  /// t_{j+1} for 0-based index j.
  double grid(int j) const { return static_cast<double>(j + 1) / d; }
};

/// Exact conditional median of Y(t) given X = x: m(t) = (3/2) t (2 - t) x.
/// t must lie on the model grid.
inline double true_median(const BrownianModel& model, double t, double x) {
  const double jd = t * model.d;
  const double j = std::round(jd);
  if (j < 1.0 || j > model.d || std::abs(jd - j) > 1e-9 * model.d)
    throw std::invalid_argument("true_median: t is not a grid point");
  return 1.5 * t * (2.0 - t) * x;
}

/// The conditional median curve on the full grid.
inline Point true_median_vec(const BrownianModel& model, double x) {
  Point m(model.d);
  for (int j = 0; j < model.d; ++j) {
    const double t = model.grid(j);
    m[j] = 1.5 * t * (2.0 - t) * x;
  }
  return m;
}

/// Quadratic criterion between a candidate curve and the exact conditional
/// median at x: (1/d) Σ_j (m(t_j) − estimate_j)².
inline double mse(const Point& estimate, const BrownianModel& model, double x) {
  if (estimate.size() != model.d) throw std::invalid_argument("mse: dimension mismatch");
  return (estimate - true_median_vec(model, x)).squaredNorm() / model.d;
}

/// Density of the covariate, X ~ N(0, 1/3), at x.
inline double marginal_density(double x) {
  constexpr double variance = 1.0 / 3.0;
  return std::exp(-x * x / (2.0 * variance)) / std::sqrt(2.0 * M_PI * variance);
}

/// W2 distance between two Gaussians sharing a covariance matrix: the
/// Euclidean distance between their means.
inline double gaussian_wasserstein(const Point& m1, const Point& m2) {
  require_same_dim(m1, m2, "gaussian_wasserstein");
  return (m1 - m2).norm();
}

/// Draws one (X, Y) record: a Brownian path on the grid built from
/// independent Gaussian increments, plus its grid average.
inline std::pair<double, Point> brownian_pair(const BrownianModel& model, Rng& rng) {
  Point y(model.d);
  double w = 0.0;
  double sum = 0.0;
  double t_prev = 0.0;
  for (int j = 0; j < model.d; ++j) {
    const double t = model.grid(j);
    w += std::sqrt(t - t_prev) * rng.normal();
    y[j] = w;
    sum += w;
    t_prev = t;
  }
  return {sum / model.d, y};
}

/// Sampler of the conditional law of the path given X = x: Gaussian with
/// mean (3/2) t (2 − t) x on the grid and covariance C − 3 c cᵀ, where
/// C_{jl} = min(t_j, t_l) and c_j = t_j (1 − t_j/2). The covariance does
/// not depend on x and is factored once at construction.
class ConditionalSampler {
 public:
  ConditionalSampler(const BrownianModel& model, double x)
      : model_(model), x_(x), mean_(true_median_vec(model, x)) {
    Eigen::MatrixXd cov = conditional_covariance(model);

    // The matrix is singular by construction (it is a Gaussian-conditioning
    // Schur complement), so factor through an eigendecomposition and clip
    // the round-off negatives.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
      throw std::runtime_error("conditional sampler: eigendecomposition failed");
    Point evals = es.eigenvalues();
    for (int i = 0; i < evals.size(); ++i) {
      if (evals[i] < 0.0) {
        if (evals[i] < -1e-8)
          throw std::runtime_error(
              "conditional sampler: conditional covariance is numerically indefinite");
        evals[i] = 0.0;
      }
    }
    root_ = es.eigenvectors() * evals.cwiseSqrt().asDiagonal();
  }

  static Eigen::MatrixXd conditional_covariance(const BrownianModel& model) {
    const int d = model.d;
    Point c(d);
    Eigen::MatrixXd cov(d, d);
    for (int j = 0; j < d; ++j) {
      const double t = model.grid(j);
      c[j] = t * (1.0 - t / 2.0);
    }
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) cov(j, l) = std::min(model.grid(j), model.grid(l));
    cov -= 3.0 * (c * c.transpose());
    return cov;
  }

  const Point& mean() const { return mean_; }
  double x() const { return x_; }
  const BrownianModel& model() const { return model_; }

  Point draw(Rng& rng) const {
    Point g(model_.d);
    for (int j = 0; j < model_.d; ++j) g[j] = rng.normal();
    return mean_ + root_ * g;
  }

 private:
  BrownianModel model_;
  double x_;
  Point mean_;
  Eigen::MatrixXd root_;  // symmetric-factorization square root
};

}  // namespace condmed
