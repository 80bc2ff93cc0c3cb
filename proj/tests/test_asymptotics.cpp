// Schedule admissibility checks, plug-in covariance estimation, the
// sandwich covariance, rate fitting, and the weighted-average diagnostic.

#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "condmed/asymptotics.hpp"
#include "condmed/estimator.hpp"
#include "condmed/parallel.hpp"
#include "condmed/rng.hpp"

namespace {

using condmed::CovariancePair;
using condmed::KernelFamily;
using condmed::Point;

bool lists_condition(const std::vector<std::string>& violated, const std::string& name) {
  return std::find(violated.begin(), violated.end(), name) != violated.end();
}

TEST(ValidateSchedule, ReferenceVerdicts) {
  const auto a = condmed::validate_schedule(1.0, 1.0 / 3.0, 1.0);
  EXPECT_TRUE(a.as_convergence);
  EXPECT_TRUE(a.rate_bound);
  EXPECT_FALSE(a.clt);

  const auto b = condmed::validate_schedule(0.9, 0.3, 1.0);
  EXPECT_TRUE(b.as_convergence);
  EXPECT_TRUE(b.rate_bound);
  EXPECT_FALSE(b.clt);
  EXPECT_TRUE(lists_condition(b.violated, "h > 1/(2*beta + 1)"));

  const auto c = condmed::validate_schedule(0.8, 0.4, 1.0);
  EXPECT_TRUE(c.as_convergence);
  EXPECT_TRUE(c.rate_bound);
  EXPECT_TRUE(c.clt);
  EXPECT_TRUE(c.violated.empty());
}

TEST(ValidateSchedule, BoundaryEqualitiesFailStrictConditionsWithANote) {
  // gamma = 1 and h = 1/(2*beta+1) sit exactly on the strict boundaries of
  // the distributional tier.
  const auto v = condmed::validate_schedule(1.0, 1.0 / 3.0, 1.0);
  EXPECT_TRUE(lists_condition(v.violated, "gamma < 1 (boundary)"));
  EXPECT_TRUE(lists_condition(v.violated, "h > 1/(2*beta + 1) (boundary)"));

  // The non-strict rate inequality passes exactly at equality even when
  // h*(1+2*beta) == gamma only up to round-off.
  const auto w = condmed::validate_schedule(0.9, 0.3, 1.0);  // 0.3*3 vs 0.9
  EXPECT_TRUE(w.rate_bound);
}

TEST(ValidateSchedule, RejectsOutOfRangeParameters) {
  EXPECT_THROW(condmed::validate_schedule(0.0, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(condmed::validate_schedule(1.2, 0.5, 1.0), std::invalid_argument);
  EXPECT_THROW(condmed::validate_schedule(0.8, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(condmed::validate_schedule(0.8, 1.3, 1.0), std::invalid_argument);
  EXPECT_THROW(condmed::validate_schedule(0.8, 0.5, 0.0), std::invalid_argument);
  EXPECT_THROW(condmed::validate_schedule(0.8, 0.5, -1.0), std::invalid_argument);
}

TEST(ValidateSchedule, DistributionalTierImpliesConvergenceTier) {
  for (int bi = 0; bi < 3; ++bi) {
    const double beta = (bi == 0) ? 0.5 : (bi == 1) ? 1.0 : 2.0;
    for (int i = 1; i <= 50; ++i) {
      for (int j = 1; j <= 50; ++j) {
        const auto v = condmed::validate_schedule(i / 50.0, j / 50.0, beta);
        EXPECT_TRUE(!v.clt || v.as_convergence)
            << "gamma=" << i / 50.0 << " h=" << j / 50.0 << " beta=" << beta;
      }
    }
  }
}

condmed::PointSampler unit_circle_sampler(const Point& m) {
  return [m](condmed::Rng& rng) {
    const double theta = 2.0 * M_PI * rng.uniform();
    Point y = m;
    y[0] += std::cos(theta);
    y[1] += std::sin(theta);
    return y;
  };
}

TEST(SigmaGamma, UnitCircleLawGivesHalfIdentity) {
  Point m(2);
  m << 0.3, -0.2;
  const std::int64_t mc = 40000;
  const auto pair =
      condmed::estimate_sigma_gamma(unit_circle_sampler(m), m, 1.0, KernelFamily::Uniform, mc, 12);
  const double tol = 3.0 / std::sqrt(static_cast<double>(mc));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double target = (i == j) ? 0.5 : 0.0;
      EXPECT_NEAR(pair.sigma(i, j), target, tol);
      EXPECT_NEAR(pair.gamma_op(i, j), target, tol);
    }
  EXPECT_EQ(pair.mc_samples, mc);
  EXPECT_EQ(pair.skipped, 0);
  EXPECT_GT(pair.gamma_min_eig, 0.4);
}

TEST(SigmaGamma, OutputsAreSymmetricPsdWithExactTrace) {
  Point m(3);
  m << 1.0, 2.0, 3.0;
  const auto sampler = [m](condmed::Rng& rng) {
    Point y(3);
    for (int j = 0; j < 3; ++j) y[j] = m[j] + rng.normal();
    return y;
  };
  const double p_x = 0.55;
  const auto pair =
      condmed::estimate_sigma_gamma(sampler, m, p_x, KernelFamily::Gaussian, 5000, 3);

  EXPECT_NEAR((pair.sigma - pair.sigma.transpose()).norm(), 0.0, 1e-10);
  EXPECT_NEAR((pair.gamma_op - pair.gamma_op.transpose()).norm(), 0.0, 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pair.sigma);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
  EXPECT_GT(pair.gamma_min_eig, 0.0);

  // Each direction outer product has unit trace, so the normalized trace
  // identity holds for every sample set, not just in the limit.
  const double k2 = condmed::kernel_square_integral(KernelFamily::Gaussian);
  EXPECT_NEAR(pair.sigma.trace() / (p_x * k2), 1.0, 1e-12);
}

TEST(SigmaGamma, DegenerateLawIsRefused) {
  Point m(2);
  m << 0.0, 0.0;
  const auto stuck = [m](condmed::Rng&) { return m; };
  EXPECT_THROW(condmed::estimate_sigma_gamma(stuck, m, 1.0, KernelFamily::Uniform, 200, 1),
               condmed::PreconditionError);
}

TEST(SigmaGamma, InputValidation) {
  Point m2(2), m1(1);
  m2 << 0.0, 0.0;
  m1 << 0.0;
  const auto sampler = unit_circle_sampler(m2);
  EXPECT_THROW(condmed::estimate_sigma_gamma(sampler, m2, 1.0, KernelFamily::Uniform, 50, 1),
               std::invalid_argument);
  EXPECT_THROW(condmed::estimate_sigma_gamma(sampler, m1, 1.0, KernelFamily::Uniform, 200, 1),
               std::invalid_argument);
}

TEST(SigmaGamma, MonteCarloErrorShrinksLikeRootSamples) {
  Point m(2);
  m << 0.0, 0.0;
  const auto sampler = unit_circle_sampler(m);
  const Eigen::MatrixXd target = 0.5 * Eigen::MatrixXd::Identity(2, 2);
  double err_small = 0.0, err_large = 0.0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto small =
        condmed::estimate_sigma_gamma(sampler, m, 1.0, KernelFamily::Uniform, 400, 100 + s);
    const auto large =
        condmed::estimate_sigma_gamma(sampler, m, 1.0, KernelFamily::Uniform, 6400, 200 + s);
    err_small += (small.sigma - target).norm();
    err_large += (large.sigma - target).norm();
  }
  // Sixteen times the samples should cut the mean error by about four;
  // allow a factor-1.5 slack on either side.
  const double ratio = err_small / err_large;
  EXPECT_GT(ratio, 4.0 / 1.5);
  EXPECT_LT(ratio, 4.0 * 1.5);
}

CovariancePair make_pair(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& gamma_op) {
  CovariancePair p;
  p.sigma = sigma;
  p.gamma_op = gamma_op;
  p.mc_samples = 1000;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma_op);
  p.gamma_min_eig = es.eigenvalues().minCoeff();
  return p;
}

TEST(Sandwich, ScalarAnchors) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  const auto half = condmed::sandwich_covariance(make_pair(eye, eye), 1.0);
  EXPECT_NEAR((half - 0.5 * eye).norm(), 0.0, 1e-12);

  const auto doubled = condmed::sandwich_covariance(make_pair(0.5 * eye, 0.5 * eye), 0.0);
  EXPECT_NEAR((doubled - 2.0 * eye).norm(), 0.0, 1e-12);
}

TEST(Sandwich, SingularCurvatureIsRefused) {
  Eigen::MatrixXd gamma_op = Eigen::MatrixXd::Zero(2, 2);
  gamma_op(0, 0) = 1.0;  // rank one
  EXPECT_THROW(
      condmed::sandwich_covariance(make_pair(Eigen::MatrixXd::Identity(2, 2), gamma_op), 0.5),
      condmed::PreconditionError);
}

TEST(Sandwich, BandwidthExponentRange) {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  EXPECT_THROW(condmed::sandwich_covariance(make_pair(eye, eye), -0.1), std::invalid_argument);
  EXPECT_THROW(condmed::sandwich_covariance(make_pair(eye, eye), 1.5), std::invalid_argument);
  EXPECT_NO_THROW(condmed::sandwich_covariance(make_pair(eye, eye), 0.0));
  EXPECT_NO_THROW(condmed::sandwich_covariance(make_pair(eye, eye), 1.0));
}

TEST(Sandwich, PreservesSymmetryAndPositivity) {
  condmed::Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd a(4, 4), b(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        a(i, j) = rng.normal();
        b(i, j) = rng.normal();
      }
    const Eigen::MatrixXd sigma = a * a.transpose();
    const Eigen::MatrixXd gamma_op =
        b * b.transpose() + 0.1 * Eigen::MatrixXd::Identity(4, 4);
    const auto out = condmed::sandwich_covariance(make_pair(sigma, gamma_op), 0.4);
    EXPECT_NEAR((out - out.transpose()).norm(), 0.0, 1e-10);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(out);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
  }
}

TEST(RateSlope, ExactPowerLawAndConstants) {
  std::vector<std::pair<std::int64_t, double>> errors;
  for (std::int64_t n : {100, 200, 400, 800, 1600})
    errors.push_back({n, std::pow(static_cast<double>(n), -0.6)});
  const auto fit = condmed::rate_slope(errors);
  EXPECT_NEAR(fit.slope, -0.6, 1e-12);
  EXPECT_NEAR(fit.r2, 1.0, 1e-12);

  std::vector<std::pair<std::int64_t, double>> flat;
  for (std::int64_t n : {10, 20, 40, 80}) flat.push_back({n, 3.5});
  const auto flat_fit = condmed::rate_slope(flat);
  EXPECT_NEAR(flat_fit.slope, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(flat_fit.r2, 1.0);
}

TEST(RateSlope, InputValidation) {
  std::vector<std::pair<std::int64_t, double>> three = {{10, 1.0}, {20, 0.5}, {40, 0.25}};
  EXPECT_THROW(condmed::rate_slope(three), std::invalid_argument);

  std::vector<std::pair<std::int64_t, double>> zero_mse = {
      {10, 1.0}, {20, 0.5}, {40, 0.0}, {80, 0.1}};
  EXPECT_THROW(condmed::rate_slope(zero_mse), std::invalid_argument);

  std::vector<std::pair<std::int64_t, double>> dup = {
      {10, 1.0}, {20, 0.5}, {20, 0.4}, {80, 0.1}};
  EXPECT_THROW(condmed::rate_slope(dup), std::invalid_argument);

  std::vector<std::pair<std::int64_t, double>> bad_n = {
      {0, 1.0}, {20, 0.5}, {40, 0.2}, {80, 0.1}};
  EXPECT_THROW(condmed::rate_slope(bad_n), std::invalid_argument);
}

TEST(WeightedAverage, ClosedFormCases) {
  Point m(2);
  m << 1.0, -1.0;
  std::vector<Point> at_truth(5, m);
  std::vector<double> hs(5, 0.25);
  EXPECT_EQ(condmed::weighted_average_diag(at_truth, m, hs).norm(), 0.0);

  Point v(2);
  v << 0.4, 0.8;
  std::vector<Point> offset(5, m + v);
  const Point out = condmed::weighted_average_diag(offset, m, hs);
  EXPECT_NEAR((out - 0.5 * v).norm(), 0.0, 1e-12);  // sqrt(0.25) * v

  std::vector<double> short_hs(4, 0.25);
  EXPECT_THROW(condmed::weighted_average_diag(offset, m, short_hs), std::invalid_argument);
  EXPECT_THROW(condmed::weighted_average_diag({}, m, {}), std::invalid_argument);
}

// Monte Carlo check of the companion limit law: the covariance of
// sqrt(n) * (1/n) sum_k sqrt(h_k) (Z_k - m) matches the plug-in sandwich
// with the 1/(1+h) factor removed. The covariate is scaled so its density
// at the target is exactly 1.
TEST(WeightedAverage, CovarianceMatchesUndampedSandwich) {
  const int reps = 300;
  const int horizon = 20000;
  Point m(2);
  m << 0.4, -0.2;
  Eigen::MatrixXd chol(2, 2);
  chol << 1.0, 0.0, 0.3, 0.8;
  const double sigma_x = 1.0 / std::sqrt(2.0 * M_PI);  // density 1 at x = 0

  std::vector<Point> stats(reps);
  condmed::parallel_for(reps, 0, [&](std::size_t r) {
    condmed::Rng rng(condmed::mix_seed({0x3e3au, r}));
    condmed::EstimatorConfig cfg;
    cfg.x = 0.0;
    cfg.step = condmed::Schedule::decaying(1.0, 0.8);
    cfg.bandwidth = condmed::Schedule::decaying(1.0, 0.4);
    condmed::RecursiveMedianEstimator est(cfg);
    est.initialize(m);  // start at the target to isolate the fluctuation law

    std::vector<Point> iterates;
    std::vector<double> hs;
    iterates.reserve(horizon);
    hs.reserve(horizon);
    iterates.push_back(est.z());
    hs.push_back(cfg.bandwidth.at(1));
    Point g(2);
    while (est.n() < horizon) {
      const double x = sigma_x * rng.normal();
      g[0] = rng.normal();
      g[1] = rng.normal();
      est.rm_update(x, m + chol * g);
      iterates.push_back(est.z());
      hs.push_back(cfg.bandwidth.at(est.n()));
    }
    stats[r] = std::sqrt(static_cast<double>(horizon)) *
               condmed::weighted_average_diag(iterates, m, hs);
  });

  Point mean = Point::Zero(2);
  for (const Point& s : stats) mean += s;
  mean /= reps;
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(2, 2);
  for (const Point& s : stats) emp += (s - mean) * (s - mean).transpose();
  emp /= (reps - 1);

  const auto law = [&](condmed::Rng& rng) {
    Point g(2);
    g[0] = rng.normal();
    g[1] = rng.normal();
    return (m + chol * g).eval();
  };
  const auto pair =
      condmed::estimate_sigma_gamma(law, m, 1.0, KernelFamily::Gaussian, 200000, 7);
  const Eigen::MatrixXd theory = condmed::sandwich_covariance(pair, 0.0);

  const double ratio = emp.trace() / theory.trace();
  EXPECT_GT(ratio, 0.7);
  EXPECT_LT(ratio, 1.3);
}

// The running sum of inverse bandwidths concentrates on (n / h_n) / (1 + h)
// for a polynomially decaying bandwidth; checked at the scale the
// distributional analysis uses.
TEST(StepSums, InverseBandwidthSumApproximation) {
  const auto bw = condmed::Schedule::decaying(1.0, 0.3);
  const std::int64_t n = 10000;
  double sum = 0.0;
  for (std::int64_t k = 1; k <= n; ++k) sum += 1.0 / bw.at(k);
  const double predicted = (static_cast<double>(n) / bw.at(n)) / 1.3;
  EXPECT_LE(std::abs(sum - predicted) / (static_cast<double>(n) / bw.at(n)), 0.01);
}

}  // namespace
