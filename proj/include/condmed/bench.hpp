#pragma once

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "condmed/asymptotics.hpp"
#include "condmed/brownian.hpp"
#include "condmed/csv.hpp"
#include "condmed/errors.hpp"
#include "condmed/estimator.hpp"
#include "condmed/parallel.hpp"
#include "condmed/weiszfeld.hpp"

namespace condmed {

enum class TableEstimator { Static, RobbinsMonro, Averaged };

inline const char* estimator_name(TableEstimator e) {
  switch (e) {
    case TableEstimator::Static: return "static";
    case TableEstimator::RobbinsMonro: return "robbins_monro";
    case TableEstimator::Averaged: return "averaged";
  }
  return "?";
}

inline TableEstimator estimator_from_name(const std::string& s) {
  if (s == "static") return TableEstimator::Static;
  if (s == "robbins_monro") return TableEstimator::RobbinsMonro;
  if (s == "averaged") return TableEstimator::Averaged;
  throw std::invalid_argument("unknown estimator: " + s);
}

/// Grid of Monte Carlo cells: every requested estimator is evaluated at
/// every (step constant, bandwidth) combination on freshly simulated
/// Brownian-model data, with the same replicate datasets shared across
/// cells so that columns are comparable.
struct TableExperimentConfig {
  std::int64_t n = 500;
  int d = 100;
  int replications = 100;
  std::vector<Schedule> bandwidth_values;
  std::vector<double> c_gamma_values;
  std::vector<TableEstimator> estimators;
  double gamma_exponent = 2.0 / 3.0;
  int restarts = 10;
  std::uint64_t master_seed = 1;
  KernelFamily kernel = KernelFamily::Gaussian;

  void validate() const {
    if (n < 1) throw std::invalid_argument("table config: n must be >= 1");
    if (d < 1) throw std::invalid_argument("table config: d must be >= 1");
    if (replications < 1) throw std::invalid_argument("table config: replications must be >= 1");
    if (bandwidth_values.empty())
      throw std::invalid_argument("table config: no bandwidth values");
    if (c_gamma_values.empty()) throw std::invalid_argument("table config: no c_gamma values");
    if (estimators.empty()) throw std::invalid_argument("table config: no estimators");
    for (double c : c_gamma_values)
      if (!(c > 0.0)) throw std::invalid_argument("table config: c_gamma must be positive");
    if (!(gamma_exponent > 0.0) || gamma_exponent > 1.0)
      throw std::invalid_argument("table config: gamma_exponent must lie in (0, 1]");
    if (restarts < 1) throw std::invalid_argument("table config: restarts must be >= 1");
  }
};

/// One (estimator, c_gamma, bandwidth) cell of the report. Cells the
/// design cannot fill (static estimator with a decaying bandwidth) are
/// kept in place but marked absent, mirroring a blank table entry.
struct TableCell {
  TableEstimator estimator = TableEstimator::Static;
  double c_gamma = 0.0;
  Schedule bandwidth = Schedule::fixed(0.1);
  bool absent = false;
  double mean_error_x100 = 0.0;
  double mc_stderr = 0.0;
  int replications = 0;
  double mean_ms = 0.0;  // informational mean wall time per replicate
};

struct ExperimentReport {
  TableExperimentConfig config;
  std::vector<TableCell> cells;
  double wall_seconds = 0.0;  // informational
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

// Seed for one cell-replicate multi-start run. Depends only on the cell's
// own parameters, never on which other cells share the config, so a cell's
// numbers are reproducible from any config that contains it.
inline std::uint64_t cell_seed(std::uint64_t master_seed, std::int64_t rep, double c_gamma,
                               const Schedule& bandwidth, double gamma_exponent) {
  return mix_seed({0x3a17u, master_seed, static_cast<std::uint64_t>(rep), bits(c_gamma),
                   fnv1a(bandwidth.label()), bits(gamma_exponent)});
}

}  // namespace detail

/// Runs the full replication grid. Deterministic for a fixed master seed
/// regardless of thread count: every replicate draws its dataset from a
/// (master_seed, replicate) stream, cells within a replicate are computed
/// in a fixed order, and aggregation runs in replicate order.
inline ExperimentReport run_table_experiment(const TableExperimentConfig& cfg, int threads = 0) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }

  // Canonical cell order: estimator-major, then c_gamma, then bandwidth.
  ExperimentReport report;
  report.config = cfg;
  for (TableEstimator est : cfg.estimators)
    for (double cg : cfg.c_gamma_values)
      for (const Schedule& bw : cfg.bandwidth_values) {
        TableCell cell;
        cell.estimator = est;
        cell.c_gamma = cg;
        cell.bandwidth = bw;
        cell.absent = (est == TableEstimator::Static && !bw.is_fixed());
        report.cells.push_back(cell);
      }
  const std::size_t n_cells = report.cells.size();

  const BrownianModel model(cfg.d);
  const double x_star = model.x_star;

  // errors[rep * n_cells + cell]; NaN marks absent cells.
  std::vector<double> errors(static_cast<std::size_t>(cfg.replications) * n_cells,
                             std::numeric_limits<double>::quiet_NaN());
  std::vector<double> millis(errors.size(), 0.0);

  const bool want_static =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), TableEstimator::Static) !=
      cfg.estimators.end();
  const bool want_rm =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), TableEstimator::RobbinsMonro) !=
      cfg.estimators.end();
  const bool want_avg =
      std::find(cfg.estimators.begin(), cfg.estimators.end(), TableEstimator::Averaged) !=
      cfg.estimators.end();

  auto cell_index = [&](TableEstimator est, std::size_t cg_i, std::size_t bw_i) {
    std::size_t est_i = 0;
    while (cfg.estimators[est_i] != est) ++est_i;
    return (est_i * cfg.c_gamma_values.size() + cg_i) * cfg.bandwidth_values.size() + bw_i;
  };

  parallel_for(cfg.replications, threads, [&](std::int64_t rep) {
    // Fresh dataset for this replicate, shared by every cell.
    Rng data_rng(mix_seed({0xda7a5e7u, cfg.master_seed, static_cast<std::uint64_t>(rep)}));
    std::vector<double> xs(static_cast<std::size_t>(cfg.n));
    std::vector<Point> ys(static_cast<std::size_t>(cfg.n));
    for (std::int64_t i = 0; i < cfg.n; ++i) {
      auto [x, y] = brownian_pair(model, data_rng);
      xs[static_cast<std::size_t>(i)] = x;
      ys[static_cast<std::size_t>(i)] = std::move(y);
    }
    const RecordSource source = [&xs, &ys](const RecordFn& sink) {
      for (std::size_t i = 0; i < xs.size(); ++i) sink(xs[i], ys[i]);
    };
    double* err_row = errors.data() + static_cast<std::size_t>(rep) * n_cells;
    double* ms_row = millis.data() + static_cast<std::size_t>(rep) * n_cells;

    for (std::size_t bw_i = 0; bw_i < cfg.bandwidth_values.size(); ++bw_i) {
      const Schedule& bw = cfg.bandwidth_values[bw_i];

      if (want_static && bw.is_fixed()) {
        const auto c0 = std::chrono::steady_clock::now();
        WeightedSample sample;
        sample.points = ys;
        sample.weights = kernel_weights(x_star, xs, bw.at(1), cfg.kernel);
        const Point med = weiszfeld(sample).median;
        const double err = 100.0 * mse(med, model, x_star);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - c0)
                              .count();
        // The static estimate does not depend on the step constant; every
        // c_gamma row of the static block carries the same value.
        for (std::size_t cg_i = 0; cg_i < cfg.c_gamma_values.size(); ++cg_i) {
          const std::size_t ci = cell_index(TableEstimator::Static, cg_i, bw_i);
          err_row[ci] = err;
          ms_row[ci] = ms;
        }
      }

      if (!want_rm && !want_avg) continue;
      for (std::size_t cg_i = 0; cg_i < cfg.c_gamma_values.size(); ++cg_i) {
        const double cg = cfg.c_gamma_values[cg_i];
        const auto c0 = std::chrono::steady_clock::now();
        EstimatorConfig ec;
        ec.x = x_star;
        ec.step = Schedule::decaying(cg, cfg.gamma_exponent);
        ec.bandwidth = bw;
        ec.kernel = cfg.kernel;
        const std::uint64_t seed =
            detail::cell_seed(cfg.master_seed, rep, cg, bw, cfg.gamma_exponent);
        const MultiStartResult runs = multi_start_run(source, ec, cfg.restarts, seed);
        const double ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - c0)
                              .count();
        if (want_rm) {
          const std::size_t ci = cell_index(TableEstimator::RobbinsMonro, cg_i, bw_i);
          err_row[ci] = 100.0 * mse(runs.runs[static_cast<std::size_t>(runs.best_z)].z, model,
                                    x_star);
          ms_row[ci] = ms;
        }
        if (want_avg) {
          const std::size_t ci = cell_index(TableEstimator::Averaged, cg_i, bw_i);
          err_row[ci] = 100.0 * mse(
                                    runs.runs[static_cast<std::size_t>(runs.best_z_bar)].z_bar,
                                    model, x_star);
          ms_row[ci] = ms;
        }
      }
    }
  });

  // Aggregate in fixed replicate order.
  for (std::size_t ci = 0; ci < n_cells; ++ci) {
    TableCell& cell = report.cells[ci];
    if (cell.absent) continue;
    double sum = 0.0, sum_ms = 0.0;
    for (int rep = 0; rep < cfg.replications; ++rep) {
      sum += errors[static_cast<std::size_t>(rep) * n_cells + ci];
      sum_ms += millis[static_cast<std::size_t>(rep) * n_cells + ci];
    }
    const double mean = sum / cfg.replications;
    double ss = 0.0;
    for (int rep = 0; rep < cfg.replications; ++rep) {
      const double dlt = errors[static_cast<std::size_t>(rep) * n_cells + ci] - mean;
      ss += dlt * dlt;
    }
    cell.mean_error_x100 = mean;
    cell.mc_stderr = cfg.replications > 1
                         ? std::sqrt(ss / (cfg.replications - 1.0) / cfg.replications)
                         : 0.0;
    cell.replications = cfg.replications;
    cell.mean_ms = sum_ms / cfg.replications;
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

/// Cell rows as CSV. Absent cells keep their key columns and leave the
/// value columns empty. Deterministic for a fixed config and seed.
inline void report_csv(const ExperimentReport& report, std::ostream& out) {
  out << "estimator,c_gamma,bandwidth,mean_error_x100,stderr,replications\n";
  for (const TableCell& c : report.cells) {
    out << estimator_name(c.estimator) << ',' << format_g9(c.c_gamma) << ','
        << c.bandwidth.label() << ',';
    if (!c.absent)
      out << format_g9(c.mean_error_x100) << ',' << format_g9(c.mc_stderr) << ','
          << c.replications;
    else
      out << ",,";
    out << '\n';
  }
}

/// Human-readable aligned table with an informational timing column.
inline void report_table(const ExperimentReport& report, std::ostream& out) {
  out << "n=" << report.config.n << " d=" << report.config.d
      << " replications=" << report.config.replications
      << " restarts=" << report.config.restarts << " gamma=" << report.config.gamma_exponent
      << " seed=" << report.config.master_seed << '\n';
  out << std::left << std::setw(15) << "estimator" << std::right << std::setw(9) << "c_gamma"
      << std::setw(12) << "bandwidth" << std::setw(14) << "err_x100" << std::setw(11) << "stderr"
      << std::setw(10) << "ms/rep" << '\n';
  for (const TableCell& c : report.cells) {
    out << std::left << std::setw(15) << estimator_name(c.estimator) << std::right
        << std::setw(9) << format_g9(c.c_gamma) << std::setw(12) << c.bandwidth.label();
    if (c.absent) {
      out << std::setw(14) << "-" << std::setw(11) << "-" << std::setw(10) << "-" << '\n';
    } else {
      out << std::setw(14) << format_g9(c.mean_error_x100) << std::setw(11)
          << format_g9(c.mc_stderr) << std::setw(10) << std::fixed << std::setprecision(1)
          << c.mean_ms << std::defaultfloat << '\n';
    }
  }
  out << "wall time: " << std::fixed << std::setprecision(1) << report.wall_seconds << " s"
      << std::defaultfloat << '\n';
}

/// Error decay of the plain recursive iterate along one long run: streams
/// Brownian-model records with step c_gamma * n^{-gamma} and bandwidth
/// n^{-h}, recording the quadratic error at each checkpoint, and reports
/// the median over replicates. Feed the result to rate_slope.
inline std::vector<std::pair<std::int64_t, double>> rate_experiment(
    int d, const std::vector<std::int64_t>& checkpoints, int replications, double c_gamma,
    double gamma, double h, std::uint64_t seed, int threads = 0) {
  if (checkpoints.empty()) throw std::invalid_argument("rate experiment: no checkpoints");
  if (replications < 1) throw std::invalid_argument("rate experiment: replications must be >= 1");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] < 1) throw std::invalid_argument("rate experiment: checkpoints must be >= 1");
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1])
      throw std::invalid_argument("rate experiment: checkpoints must increase");
  }
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }

  const BrownianModel model(d);
  const std::int64_t n_max = checkpoints.back();
  std::vector<double> mses(static_cast<std::size_t>(replications) * checkpoints.size());

  parallel_for(replications, threads, [&](std::int64_t rep) {
    Rng rng(mix_seed({0x4a7eu, seed, static_cast<std::uint64_t>(rep)}));
    EstimatorConfig ec;
    ec.x = model.x_star;
    ec.step = Schedule::decaying(c_gamma, gamma);
    ec.bandwidth = Schedule::decaying(1.0, h);
    RecursiveMedianEstimator est(ec);
    std::size_t next_cp = 0;
    for (std::int64_t i = 0; i < n_max; ++i) {
      auto [x, y] = brownian_pair(model, rng);
      if (!est.initialized())
        est.initialize(y);
      else
        est.update(x, y);
      while (next_cp < checkpoints.size() && est.n() == checkpoints[next_cp]) {
        mses[static_cast<std::size_t>(rep) * checkpoints.size() + next_cp] =
            mse(est.z(), model, model.x_star);
        ++next_cp;
      }
    }
  });

  std::vector<std::pair<std::int64_t, double>> out;
  out.reserve(checkpoints.size());
  std::vector<double> column(static_cast<std::size_t>(replications));
  for (std::size_t cp = 0; cp < checkpoints.size(); ++cp) {
    for (int rep = 0; rep < replications; ++rep)
      column[static_cast<std::size_t>(rep)] =
          mses[static_cast<std::size_t>(rep) * checkpoints.size() + cp];
    std::sort(column.begin(), column.end());
    const std::size_t m = column.size();
    const double med = m % 2 == 1 ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
    out.emplace_back(checkpoints[cp], med);
  }
  return out;
}

struct CltResult {
  Eigen::MatrixXd empirical_cov;
  Eigen::MatrixXd theoretical_cov;
  double trace_ratio = 0.0;
};

/// Compares the Monte Carlo covariance of the scaled averaged estimator,
/// sqrt(n h_n) (Z_bar_n - m), against the plug-in limiting covariance
/// (1/(1+h)) Gamma^{-1} Sigma Gamma^{-1}. The recursion's drift is the
/// kernel-smoothed gradient, whose curvature at m carries a factor of the
/// covariate density p(x); `density_scaled_curvature` applies that factor
/// to the plug-in curvature so both sides estimate the same operator.
inline CltResult clt_experiment(int d, std::int64_t n, int replications, double gamma, double h,
                                std::uint64_t seed, int threads = 0,
                                bool density_scaled_curvature = true) {
  if (replications < 1) throw std::invalid_argument("clt experiment: replications must be >= 1");
  if (d < 2 || d > 5)
    throw std::invalid_argument("clt experiment: d must lie in [2, 5]");
  if (n < 1) throw std::invalid_argument("clt experiment: n must be >= 1");
  const ScheduleVerdict verdict = validate_schedule(gamma, h, 1.0);
  if (!verdict.clt) {
    std::string msg = "clt experiment: schedule fails the CLT conditions:";
    for (const std::string& v : verdict.violated) msg += " [" + v + "]";
    throw PreconditionError(msg);
  }
  if (threads <= 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    threads = hw == 0 ? 1 : static_cast<int>(hw);
  }

  const BrownianModel model(d);
  const double x_star = model.x_star;
  const Point m = true_median_vec(model, x_star);
  const double scale = std::sqrt(static_cast<double>(n) * std::pow(static_cast<double>(n), -h));

  std::vector<Point> scaled(static_cast<std::size_t>(replications));
  parallel_for(replications, threads, [&](std::int64_t rep) {
    Rng rng(mix_seed({0xc17e5u, seed, static_cast<std::uint64_t>(rep)}));
    EstimatorConfig ec;
    ec.x = x_star;
    ec.step = Schedule::decaying(1.0, gamma);
    ec.bandwidth = Schedule::decaying(1.0, h);
    RecursiveMedianEstimator est(ec);
    for (std::int64_t i = 0; i < n; ++i) {
      auto [x, y] = brownian_pair(model, rng);
      if (!est.initialized())
        est.initialize(y);
      else
        est.update(x, y);
    }
    scaled[static_cast<std::size_t>(rep)] = scale * (est.z_bar() - m);
  });

  Point mean = Point::Zero(d);
  for (const Point& v : scaled) mean += v;
  mean /= static_cast<double>(replications);
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(d, d);
  for (const Point& v : scaled) {
    const Point c = v - mean;
    emp += c * c.transpose();
  }
  emp /= std::max(1.0, static_cast<double>(replications) - 1.0);

  const double p_x = marginal_density(x_star);
  const ConditionalSampler sampler(model, x_star);
  const PointSampler draw = [&sampler](Rng& r) { return sampler.draw(r); };
  CovariancePair pair = estimate_sigma_gamma(draw, m, p_x, KernelFamily::Gaussian, 200000,
                                             mix_seed({0x516a9u, seed}));
  if (density_scaled_curvature) pair.gamma_op *= p_x;
  const Eigen::MatrixXd theo = sandwich_covariance(pair, h);

  CltResult out;
  out.empirical_cov = std::move(emp);
  out.theoretical_cov = theo;
  out.trace_ratio = out.empirical_cov.trace() / theo.trace();
  return out;
}

}  // namespace condmed
