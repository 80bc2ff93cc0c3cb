// Replication grid, rate experiment, and the distributional comparison.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "condmed/bench.hpp"

namespace {

using condmed::Schedule;
using condmed::TableEstimator;
using condmed::TableExperimentConfig;

TableExperimentConfig small_config() {
  TableExperimentConfig cfg;
  cfg.n = 60;
  cfg.d = 5;
  cfg.replications = 3;
  cfg.restarts = 2;
  cfg.bandwidth_values = {Schedule::fixed(0.5), Schedule::decaying(1.0, 0.3)};
  cfg.c_gamma_values = {1.0, 2.0};
  cfg.estimators = {TableEstimator::Static, TableEstimator::RobbinsMonro,
                    TableEstimator::Averaged};
  cfg.master_seed = 5;
  return cfg;
}

TEST(EstimatorNames, RoundTrip) {
  EXPECT_STREQ(condmed::estimator_name(TableEstimator::Static), "static");
  EXPECT_STREQ(condmed::estimator_name(TableEstimator::RobbinsMonro), "robbins_monro");
  EXPECT_STREQ(condmed::estimator_name(TableEstimator::Averaged), "averaged");
  EXPECT_EQ(condmed::estimator_from_name("averaged"), TableEstimator::Averaged);
  EXPECT_THROW(condmed::estimator_from_name("oracle"), std::invalid_argument);
}

TEST(TableConfig, ValidationCatchesEveryField) {
  const auto expect_bad = [](TableExperimentConfig cfg) {
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
  };
  TableExperimentConfig good = small_config();
  EXPECT_NO_THROW(good.validate());

  TableExperimentConfig c = good;
  c.n = 0;
  expect_bad(c);
  c = good;
  c.d = 0;
  expect_bad(c);
  c = good;
  c.replications = 0;
  expect_bad(c);
  c = good;
  c.bandwidth_values.clear();
  expect_bad(c);
  c = good;
  c.c_gamma_values.clear();
  expect_bad(c);
  c = good;
  c.c_gamma_values = {1.0, -0.5};
  expect_bad(c);
  c = good;
  c.estimators.clear();
  expect_bad(c);
  c = good;
  c.gamma_exponent = 0.0;
  expect_bad(c);
  c = good;
  c.gamma_exponent = 1.2;
  expect_bad(c);
  c = good;
  c.restarts = 0;
  expect_bad(c);
}

TEST(TableExperiment, StaticWithDecayingBandwidthIsAbsent) {
  const auto report = condmed::run_table_experiment(small_config(), 2);
  ASSERT_EQ(report.cells.size(), 3u * 2u * 2u);
  int absent = 0;
  for (const auto& cell : report.cells) {
    const bool should_be_absent =
        cell.estimator == TableEstimator::Static && !cell.bandwidth.is_fixed();
    EXPECT_EQ(cell.absent, should_be_absent);
    if (cell.absent) {
      ++absent;
      EXPECT_EQ(cell.replications, 0);
    } else {
      EXPECT_EQ(cell.replications, 3);
      EXPECT_TRUE(std::isfinite(cell.mean_error_x100));
      EXPECT_GE(cell.mean_error_x100, 0.0);
      EXPECT_GE(cell.mc_stderr, 0.0);
    }
  }
  EXPECT_EQ(absent, 2);  // one per c_gamma row of the static block
}

TEST(TableExperiment, ThreadCountDoesNotChangeResults) {
  const auto cfg = small_config();
  const auto serial = condmed::run_table_experiment(cfg, 1);
  const auto parallel = condmed::run_table_experiment(cfg, 4);
  ASSERT_EQ(serial.cells.size(), parallel.cells.size());
  for (std::size_t i = 0; i < serial.cells.size(); ++i) {
    EXPECT_EQ(serial.cells[i].absent, parallel.cells[i].absent);
    if (serial.cells[i].absent) continue;
    EXPECT_EQ(serial.cells[i].mean_error_x100, parallel.cells[i].mean_error_x100);
    EXPECT_EQ(serial.cells[i].mc_stderr, parallel.cells[i].mc_stderr);
  }
  std::ostringstream a, b;
  condmed::report_csv(serial, a);
  condmed::report_csv(parallel, b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(TableExperiment, CellValueIndependentOfConfigComposition) {
  // The same (averaged, c_gamma=1, fixed 0.5) cell computed from two
  // different grids must agree exactly: its seed depends only on its own
  // parameters.
  TableExperimentConfig wide = small_config();
  TableExperimentConfig narrow = small_config();
  narrow.c_gamma_values = {1.0};
  narrow.bandwidth_values = {Schedule::fixed(0.5)};
  narrow.estimators = {TableEstimator::Averaged};

  const auto rw = condmed::run_table_experiment(wide, 2);
  const auto rn = condmed::run_table_experiment(narrow, 2);

  double wide_value = -1.0;
  for (const auto& cell : rw.cells)
    if (cell.estimator == TableEstimator::Averaged && cell.c_gamma == 1.0 &&
        cell.bandwidth.is_fixed() && cell.bandwidth.fixed_value() == 0.5)
      wide_value = cell.mean_error_x100;
  ASSERT_EQ(rn.cells.size(), 1u);
  EXPECT_EQ(rn.cells[0].mean_error_x100, wide_value);
}

TEST(TableExperiment, StaticRowsShareOneSolvePerBandwidth) {
  const auto report = condmed::run_table_experiment(small_config(), 2);
  double first = -1.0;
  for (const auto& cell : report.cells) {
    if (cell.estimator != TableEstimator::Static || cell.absent) continue;
    if (first < 0.0)
      first = cell.mean_error_x100;
    else
      EXPECT_EQ(cell.mean_error_x100, first);  // same bandwidth, c_gamma is moot
  }
}

// White-box oracle for one static cell: replay the per-replicate dataset
// stream and aggregate the baseline error by hand.
TEST(TableExperiment, StaticCellMatchesHandComputedBaseline) {
  TableExperimentConfig cfg = small_config();
  cfg.estimators = {TableEstimator::Static};
  cfg.bandwidth_values = {Schedule::fixed(0.5)};
  cfg.c_gamma_values = {1.0};
  const auto report = condmed::run_table_experiment(cfg, 1);
  ASSERT_EQ(report.cells.size(), 1u);

  const condmed::BrownianModel model(cfg.d);
  double sum = 0.0;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    condmed::Rng rng(condmed::mix_seed(
        {0xda7a5e7u, cfg.master_seed, static_cast<std::uint64_t>(rep)}));
    std::vector<double> xs;
    condmed::WeightedSample sample;
    for (std::int64_t i = 0; i < cfg.n; ++i) {
      auto [x, y] = condmed::brownian_pair(model, rng);
      xs.push_back(x);
      sample.points.push_back(y);
    }
    sample.weights = condmed::kernel_weights(model.x_star, xs, 0.5, cfg.kernel);
    const auto res = condmed::weiszfeld(sample);
    sum += 100.0 * condmed::mse(res.median, model, model.x_star);
  }
  EXPECT_DOUBLE_EQ(report.cells[0].mean_error_x100, sum / cfg.replications);
}

TEST(Report, CsvShapeAndAbsentRows) {
  const auto report = condmed::run_table_experiment(small_config(), 2);
  std::ostringstream out;
  condmed::report_csv(report, out);
  std::istringstream in(out.str());
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  EXPECT_EQ(line, "estimator,c_gamma,bandwidth,mean_error_x100,stderr,replications");
  int rows = 0, blank_rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",,,") != std::string::npos || line.substr(line.size() - 2) == ",,")
      ++blank_rows;
  }
  EXPECT_EQ(rows, 12);
  EXPECT_EQ(blank_rows, 2);
}

TEST(Report, TableMentionsDimensionsAndWallTime) {
  const auto report = condmed::run_table_experiment(small_config(), 2);
  std::ostringstream out;
  condmed::report_table(report, out);
  const std::string text = out.str();
  EXPECT_NE(text.find("n=60 d=5"), std::string::npos);
  EXPECT_NE(text.find("estimator"), std::string::npos);
  EXPECT_NE(text.find("wall time:"), std::string::npos);
  EXPECT_NE(text.find("robbins_monro"), std::string::npos);
}

TEST(RateExperiment, ValidatesArguments) {
  EXPECT_THROW(condmed::rate_experiment(5, {}, 3, 1.0, 0.9, 0.3, 1),
               std::invalid_argument);
  EXPECT_THROW(condmed::rate_experiment(5, {100, 100}, 3, 1.0, 0.9, 0.3, 1),
               std::invalid_argument);
  EXPECT_THROW(condmed::rate_experiment(5, {200, 100}, 3, 1.0, 0.9, 0.3, 1),
               std::invalid_argument);
  EXPECT_THROW(condmed::rate_experiment(5, {0, 100}, 3, 1.0, 0.9, 0.3, 1),
               std::invalid_argument);
  EXPECT_THROW(condmed::rate_experiment(5, {100, 200}, 0, 1.0, 0.9, 0.3, 1),
               std::invalid_argument);
}

TEST(RateExperiment, ReportsMedianErrorsAtCheckpoints) {
  const std::vector<std::int64_t> cps = {100, 400, 1600};
  const auto serial = condmed::rate_experiment(5, cps, 5, 1.0, 0.9, 0.3, 11, 1);
  ASSERT_EQ(serial.size(), 3u);
  for (std::size_t i = 0; i < cps.size(); ++i) {
    EXPECT_EQ(serial[i].first, cps[i]);
    EXPECT_GT(serial[i].second, 0.0);
  }
  // Error should broadly decrease along the horizon on this scale.
  EXPECT_LT(serial.back().second, serial.front().second);

  const auto parallel = condmed::rate_experiment(5, cps, 5, 1.0, 0.9, 0.3, 11, 4);
  for (std::size_t i = 0; i < cps.size(); ++i)
    EXPECT_EQ(serial[i].second, parallel[i].second);
}

TEST(CltExperiment, ValidatesArgumentsAndSchedule) {
  EXPECT_THROW(condmed::clt_experiment(2, 100, 0, 0.8, 0.4, 1), std::invalid_argument);
  EXPECT_THROW(condmed::clt_experiment(1, 100, 5, 0.8, 0.4, 1), std::invalid_argument);
  EXPECT_THROW(condmed::clt_experiment(7, 100, 5, 0.8, 0.4, 1), std::invalid_argument);
  EXPECT_THROW(condmed::clt_experiment(2, 0, 5, 0.8, 0.4, 1), std::invalid_argument);
  try {
    condmed::clt_experiment(2, 100, 5, 0.9, 0.3, 1);
    FAIL() << "expected a refusal for an inadmissible schedule";
  } catch (const condmed::PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("h > 1/(2*beta + 1)"), std::string::npos);
  }
}

TEST(CltExperiment, SmallRunProducesFiniteSymmetricCovariances) {
  const auto res = condmed::clt_experiment(2, 2000, 30, 0.8, 0.4, 3);
  ASSERT_EQ(res.empirical_cov.rows(), 2);
  ASSERT_EQ(res.theoretical_cov.rows(), 2);
  EXPECT_NEAR((res.empirical_cov - res.empirical_cov.transpose()).norm(), 0.0, 1e-12);
  EXPECT_NEAR((res.theoretical_cov - res.theoretical_cov.transpose()).norm(), 0.0, 1e-10);
  EXPECT_TRUE(std::isfinite(res.trace_ratio));
  EXPECT_GT(res.trace_ratio, 0.0);
  EXPECT_GT(res.theoretical_cov.trace(), 0.0);
}

}  // namespace
