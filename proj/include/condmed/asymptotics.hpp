#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "condmed/errors.hpp"
#include "condmed/kernel.hpp"
#include "condmed/point.hpp"
#include "condmed/rng.hpp"

namespace condmed {

/// Outcome of checking a (step, bandwidth) exponent pair against the three
/// tiers of asymptotic guarantees: almost-sure convergence, the explicit
/// rate bound, and the central limit theorem for the averaged iterate.
/// `violated` lists every failed inequality by name; conditions that fail
/// exactly at the boundary of a strict inequality are flagged as such.
struct ScheduleVerdict {
  bool as_convergence = false;
  bool rate_bound = false;
  bool clt = false;
  std::vector<std::string> violated;
};

/// Evaluates the admissibility conditions for step exponent `gamma`,
/// bandwidth exponent `h`, and smoothness exponent `beta`:
///   almost sure:  gamma <= 1,  2*gamma - h > 1,  gamma + beta*h > 1
///   rate bound:   almost sure  and  h*(1 + 2*beta) >= gamma
///   CLT:          gamma < 1,   2*gamma - h > 1,  gamma + beta*h > 1,
///                 h > 1/(2*beta + 1)
inline ScheduleVerdict validate_schedule(double gamma, double h, double beta) {
  if (!(gamma > 0.0) || gamma > 1.0 || !(h > 0.0) || h > 1.0)
    throw std::invalid_argument("validate_schedule: gamma and h must lie in (0, 1]");
  if (!(beta > 0.0)) throw std::invalid_argument("validate_schedule: beta must be positive");

  ScheduleVerdict v;
  // The parameters are order-one, so exact mathematical boundaries such as
  // h*(1+2*beta) = gamma land within round-off of equality; comparisons
  // must not let 1-ulp noise flip a verdict.
  auto nearly = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  // Strict inequality lhs > rhs; equality counts as a boundary failure.
  auto strict = [&](double lhs, double rhs, const char* name) {
    if (nearly(lhs, rhs)) {
      v.violated.push_back(std::string(name) + " (boundary)");
      return false;
    }
    if (lhs > rhs) return true;
    v.violated.push_back(name);
    return false;
  };
  // Non-strict inequality lhs >= rhs; equality passes.
  auto loose = [&](double lhs, double rhs, const char* name) {
    if (lhs >= rhs || nearly(lhs, rhs)) return true;
    v.violated.push_back(name);
    return false;
  };

  const bool c_gamma_le = loose(1.0, gamma, "gamma <= 1");
  const bool c_mix = strict(2.0 * gamma - h, 1.0, "2*gamma - h > 1");
  const bool c_local = strict(gamma + beta * h, 1.0, "gamma + beta*h > 1");
  v.as_convergence = c_gamma_le && c_mix && c_local;

  const bool c_rate = loose(h * (1.0 + 2.0 * beta), gamma, "h*(1 + 2*beta) >= gamma");
  v.rate_bound = v.as_convergence && c_rate;

  const bool c_gamma_lt = strict(1.0, gamma, "gamma < 1");
  const bool c_h = strict(h, 1.0 / (2.0 * beta + 1.0), "h > 1/(2*beta + 1)");
  v.clt = c_gamma_lt && c_mix && c_local && c_h;
  return v;
}

/// Plug-in Monte Carlo estimates of the two operators in the limiting
/// covariance: Σ (direction second moment scaled by the density and the
/// kernel's square integral) and Γ (expected curvature of the objective).
struct CovariancePair {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd gamma_op;
  std::int64_t mc_samples = 0;
  std::int64_t skipped = 0;     // degenerate draws with Y == m
  double gamma_min_eig = 0.0;   // smallest eigenvalue of gamma_op
};

/// Conditional-law sampler abstraction: one draw of Y given X = x.
using PointSampler = std::function<Point(Rng&)>;

/// Estimates
///   Σ = p_x * ∫K² * E[(Y−m)(Y−m)ᵀ / ‖Y−m‖²]
///   Γ = E[(1/‖Y−m‖)(I − (Y−m)(Y−m)ᵀ/‖Y−m‖²)]
/// by Monte Carlo over `mc_samples` draws. Draws that land exactly on m
/// carry no direction information; they are skipped and counted, and more
/// than 1% of them is treated as evidence that the law concentrates at a
/// point, which is an error.
inline CovariancePair estimate_sigma_gamma(const PointSampler& sampler, const Point& m,
                                           double p_x, KernelFamily kernel,
                                           std::int64_t mc_samples, std::uint64_t seed) {
  if (mc_samples < 100)
    throw std::invalid_argument("estimate_sigma_gamma: need at least 100 samples");
  if (m.size() < 2)
    throw std::invalid_argument("estimate_sigma_gamma: dimension must be at least 2");

  const auto d = m.size();
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd gamma_op = Eigen::MatrixXd::Zero(d, d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  Rng rng(seed);
  std::int64_t kept = 0;
  std::int64_t skipped = 0;
  for (std::int64_t i = 0; i < mc_samples; ++i) {
    const Point y = sampler(rng);
    if (y.size() != d)
      throw std::invalid_argument("estimate_sigma_gamma: sampler dimension mismatch");
    const Point u = y - m;
    const double r = u.norm();
    if (r == 0.0) {
      ++skipped;
      continue;
    }
    const Eigen::MatrixXd outer = (u * u.transpose()) / (r * r);
    sigma += outer;
    gamma_op += (eye - outer) / r;
    ++kept;
  }
  if (kept == 0) throw PreconditionError("estimate_sigma_gamma: every draw was degenerate");
  if (skipped * 100 > mc_samples)
    throw PreconditionError(
        "estimate_sigma_gamma: more than 1% of draws coincide with the center");

  sigma *= p_x * kernel_square_integral(kernel) / static_cast<double>(kept);
  gamma_op /= static_cast<double>(kept);
  sigma = ((sigma + sigma.transpose()) / 2.0).eval();
  gamma_op = ((gamma_op + gamma_op.transpose()) / 2.0).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma_op);
  CovariancePair out;
  out.sigma = std::move(sigma);
  out.gamma_op = std::move(gamma_op);
  out.mc_samples = mc_samples;
  out.skipped = skipped;
  out.gamma_min_eig = es.eigenvalues().minCoeff();
  return out;
}

/// Limiting covariance of the averaged iterate: (1/(1+h)) Γ⁻¹ Σ Γ⁻¹,
/// symmetrized. Requires Γ to be well conditioned; a singular curvature
/// operator means the law concentrates near a line and the inverse does
/// not exist.
inline Eigen::MatrixXd sandwich_covariance(const CovariancePair& pair, double h) {
  if (h < 0.0 || h > 1.0)
    throw std::invalid_argument("sandwich_covariance: h must lie in [0, 1]");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pair.gamma_op);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("sandwich_covariance: eigendecomposition failed");
  if (es.eigenvalues().minCoeff() <= 1e-10)
    throw PreconditionError(
        "sandwich_covariance: curvature operator is singular (the conditional law may "
        "concentrate on a line); the inverse is undefined");
  const Eigen::MatrixXd gamma_inv =
      es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
      es.eigenvectors().transpose();
  Eigen::MatrixXd out = gamma_inv * pair.sigma * gamma_inv / (1.0 + h);
  return ((out + out.transpose()) / 2.0).eval();
}

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of log(mse) on log(n). The slope estimates the
/// polynomial decay rate of the error.
inline RateFit rate_slope(const std::vector<std::pair<std::int64_t, double>>& errors) {
  if (errors.size() < 4) throw std::invalid_argument("rate_slope: need at least 4 points");
  std::vector<double> lx, ly;
  lx.reserve(errors.size());
  ly.reserve(errors.size());
  for (const auto& [n, e] : errors) {
    if (n < 1) throw std::invalid_argument("rate_slope: sample sizes must be positive");
    if (!(e > 0.0)) throw std::invalid_argument("rate_slope: mse values must be positive");
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(e));
  }
  for (std::size_t i = 0; i < lx.size(); ++i)
    for (std::size_t j = i + 1; j < lx.size(); ++j)
      if (lx[i] == lx[j]) throw std::invalid_argument("rate_slope: sample sizes must be distinct");

  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (syy <= 1e-300) {
    fit.r2 = 1.0;  // constant response: the flat fit is exact
  } else {
    const double ss_res = syy - sxy * sxy / sxx;
    fit.r2 = 1.0 - ss_res / syy;
  }
  return fit;
}

/// Bandwidth-weighted average of centered iterates:
/// (1/n) Σ_k sqrt(h_k) (Z_k − m). Used as a simulation-side diagnostic of
/// the alternative averaging scheme whose limiting covariance drops the
/// 1/(1+h) factor.
inline Point weighted_average_diag(const std::vector<Point>& iterates, const Point& m,
                                   const std::vector<double>& bandwidths) {
  if (iterates.empty()) throw std::invalid_argument("weighted_average_diag: empty input");
  if (iterates.size() != bandwidths.size())
    throw std::invalid_argument("weighted_average_diag: length mismatch");
  Point acc = Point::Zero(m.size());
  for (std::size_t k = 0; k < iterates.size(); ++k) {
    require_same_dim(iterates[k], m, "weighted_average_diag");
    acc += std::sqrt(bandwidths[k]) * (iterates[k] - m);
  }
  return acc / static_cast<double>(iterates.size());
}

}  // namespace condmed
