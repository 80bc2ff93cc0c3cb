#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "condmed/kernel.hpp"
#include "condmed/point.hpp"
#include "condmed/rng.hpp"
#include "condmed/schedule.hpp"
#include "condmed/weiszfeld.hpp"

namespace condmed {

enum class EstimatorMode { Conditional, Unconditional };
enum class InitPolicy { FirstRecord, GivenPoint, RandomRecord };

/// Tuning of one online median recursion: target covariate, step and
/// bandwidth sequences, kernel, and how the first iterate is chosen.
/// In unconditional mode the bandwidth and kernel are ignored.
struct EstimatorConfig {
  double x = 0.0;
  Schedule step = Schedule::decaying(1.0, 2.0 / 3.0);
  Schedule bandwidth = Schedule::fixed(0.15);
  KernelFamily kernel = KernelFamily::Gaussian;
  EstimatorMode mode = EstimatorMode::Conditional;
  std::int64_t burn_in = 0;  // iterates with index <= burn_in stay out of the average
  InitPolicy init = InitPolicy::FirstRecord;
  Point init_point;  // used when init == GivenPoint
};

/// One-pass estimator of the (conditional) geometric median. Holds the
/// current iterate, its running average, and the iteration counter; each
/// accepted record costs O(dim) work and no record is retained.
///
/// Update rule for a record (x_new, y) at counter n:
///   z <- z + step(n) * w * direction(z, y),
/// with w = K((x_new - x) / h_n) / h_n in conditional mode (h_n the
/// bandwidth at n) and w = 1 in unconditional mode. A record equal to the
/// current iterate leaves it unchanged. Records with non-finite entries are
/// rejected and counted, not fatal.
class RecursiveMedianEstimator {
 public:
  explicit RecursiveMedianEstimator(EstimatorConfig config) : config_(std::move(config)) {
    if (config_.burn_in < 0) throw std::invalid_argument("estimator: burn_in must be >= 0");
  }

  bool initialized() const { return n_ > 0; }

  /// Installs the first iterate Z_1 and, when past burn-in, seeds the average.
  void initialize(const Point& y0) {
    if (initialized()) throw std::invalid_argument("estimator: already initialized");
    if (!is_finite(y0)) throw std::invalid_argument("estimator: non-finite initial point");
    z_ = y0;
    z_bar_ = Point::Zero(y0.size());
    n_ = 1;
    averaged_update();
  }

  /// One recursion step. Returns false when the record was rejected
  /// (non-finite values); throws on dimension mismatch.
  bool rm_update(double x_new, const Point& y) {
    if (!initialized()) throw std::invalid_argument("estimator: update before initialization");
    require_same_dim(z_, y, "rm_update");
    if (!std::isfinite(x_new) || !is_finite(y)) {
      ++skipped_;
      return false;
    }
    double w = 1.0;
    if (config_.mode == EstimatorMode::Conditional) {
      const double h = config_.bandwidth.at(n_);
      w = kernel_eval(config_.kernel, (x_new - config_.x) / h) / h;
    }
    if (w != 0.0) {
      const double gamma = config_.step.at(n_);
      const Point dir = direction(z_, y);  // zero vector when y == z
      z_ += (gamma * w) * dir;
    }
    ++n_;
    return true;
  }

  /// Folds the current iterate into the running average. A call before the
  /// burn-in has elapsed is a no-op.
  void averaged_update() {
    if (n_ <= config_.burn_in) return;
    ++n_avg_;
    z_bar_ += (z_ - z_bar_) / static_cast<double>(n_avg_);
  }

  /// rm_update followed by averaged_update for an accepted record.
  bool update(double x_new, const Point& y) {
    if (!rm_update(x_new, y)) return false;
    averaged_update();
    return true;
  }

  const Point& z() const { return z_; }
  /// Running average of the post-burn-in iterates; falls back to the current
  /// iterate while the average is still empty.
  const Point& z_bar() const { return n_avg_ > 0 ? z_bar_ : z_; }
  std::int64_t n() const { return n_; }
  std::int64_t n_avg() const { return n_avg_; }
  std::int64_t skipped() const { return skipped_; }
  const EstimatorConfig& config() const { return config_; }

 private:
  EstimatorConfig config_;
  Point z_;
  Point z_bar_;
  std::int64_t n_ = 0;
  std::int64_t n_avg_ = 0;
  std::int64_t skipped_ = 0;
};

/// Per-record sink. The Point reference is only valid during the call.
using RecordFn = std::function<void(double x, const Point& y)>;

/// A stream of (covariate, response) records. Calling it replays the stream
/// from the beginning into the sink, so a plain generator lambda works for
/// single-pass use and a file-backed lambda supports multi-start replays.
using RecordSource = std::function<void(const RecordFn&)>;

struct StreamResult {
  Point z;
  Point z_bar;
  std::int64_t n = 0;
  std::int64_t skipped = 0;
};

namespace detail {

// Starting index for RandomRecord init, shared by run_stream and the
// multi-start driver so that one restart reproduces run_stream exactly.
inline std::int64_t random_start_index(std::uint64_t seed, std::uint64_t restart) {
  Rng rng(mix_seed({0x5eedu, seed, restart}));
  return rng.uniform_int(0, 99);
}

template <typename PerRecord>
StreamResult drive_stream(const RecordSource& source, const EstimatorConfig& config,
                          std::int64_t start_index, PerRecord&& per_record) {
  RecursiveMedianEstimator est(config);
  std::int64_t seen = 0;       // records offered by the source
  std::int64_t discarded = 0;  // records before a random start point
  bool have_last = false;
  double last_x = 0.0;
  Point last_y;

  source([&](double x, const Point& y) {
    per_record(x, y);
    if (!est.initialized()) {
      if (!std::isfinite(x) || !is_finite(y)) return;  // rejected, cannot initialize
      if (seen < start_index) {
        ++seen;
        ++discarded;
        last_x = x;
        last_y = y;
        have_last = true;
        return;
      }
      Point y0 = y;
      if (config.init == InitPolicy::GivenPoint) {
        if (config.init_point.size() == 0)
          throw std::invalid_argument("run_stream: GivenPoint init without a point");
        require_same_dim(config.init_point, y, "run_stream init");
        y0 = config.init_point;
      }
      est.initialize(y0);
      ++seen;
      return;
    }
    ++seen;
    est.update(x, y);
  });

  if (!est.initialized()) {
    // Stream shorter than the requested start index: fall back to the last
    // record seen, if any.
    if (!have_last) throw std::invalid_argument("run_stream: no usable record in the stream");
    est.initialize(config.init == InitPolicy::GivenPoint ? config.init_point : last_y);
    --discarded;
  }
  (void)discarded;
  return {est.z(), est.z_bar(), est.n(), est.skipped()};
}

}  // namespace detail

/// Consumes the stream once, O(dim) memory. The first usable record (or a
/// seeded random one among the first hundred) becomes Z_1; every later
/// record drives one recursion step plus one averaging step.
inline StreamResult run_stream(const RecordSource& source, const EstimatorConfig& config,
                               std::uint64_t seed = 0) {
  const std::int64_t start =
      config.init == InitPolicy::RandomRecord ? detail::random_start_index(seed, 0) : 0;
  return detail::drive_stream(source, config, start, [](double, const Point&) {});
}

struct RestartRun {
  Point z;
  Point z_bar;
  std::int64_t n = 0;
  double risk_z = 0.0;
  double risk_z_bar = 0.0;
};

struct MultiStartResult {
  std::vector<RestartRun> runs;
  int best_z = 0;      // restart whose final iterate has the smallest risk
  int best_z_bar = 0;  // restart whose average has the smallest risk
};

/// Runs the recursion from `restarts` seeded random starting points over a
/// replayable source and scores every run by the kernel-weighted empirical
/// risk over a bounded reservoir of records (at most `reservoir_cap`,
/// seeded reservoir sampling on the first pass). Risk weights use the
/// bandwidth at the final iteration counter.
inline MultiStartResult multi_start_run(const RecordSource& source, const EstimatorConfig& config,
                                        int restarts, std::uint64_t seed,
                                        std::size_t reservoir_cap = 1000) {
  if (restarts < 1) throw std::invalid_argument("multi_start: restarts must be >= 1");

  EstimatorConfig run_config = config;
  run_config.init = InitPolicy::RandomRecord;

  MultiStartResult out;
  out.runs.reserve(restarts);

  std::vector<double> res_x;
  std::vector<Point> res_y;
  Rng res_rng(mix_seed({0x7e5e70u, seed}));

  for (int s = 0; s < restarts; ++s) {
    const std::int64_t start = detail::random_start_index(seed, static_cast<std::uint64_t>(s));
    StreamResult r;
    if (s == 0) {
      std::int64_t count = 0;
      r = detail::drive_stream(source, run_config, start, [&](double x, const Point& y) {
        if (!std::isfinite(x) || !is_finite(y)) return;
        if (res_x.size() < reservoir_cap) {
          res_x.push_back(x);
          res_y.push_back(y);
        } else {
          const auto j = res_rng.uniform_int(0, count);
          if (static_cast<std::size_t>(j) < reservoir_cap) {
            res_x[static_cast<std::size_t>(j)] = x;
            res_y[static_cast<std::size_t>(j)] = y;
          }
        }
        ++count;
      });
    } else {
      r = detail::drive_stream(source, run_config, start, [](double, const Point&) {});
    }
    out.runs.push_back({std::move(r.z), std::move(r.z_bar), r.n, 0.0, 0.0});
  }

  // Score against the reservoir.
  WeightedSample sample;
  sample.points = std::move(res_y);
  const std::int64_t n_final = out.runs.front().n;
  if (config.mode == EstimatorMode::Conditional) {
    const double h_final = config.bandwidth.at(std::max<std::int64_t>(1, n_final));
    sample.weights = kernel_weights(config.x, res_x, h_final, config.kernel);
  } else {
    sample.weights.assign(res_x.size(), 1.0 / static_cast<double>(res_x.size()));
  }

  for (auto& run : out.runs) {
    run.risk_z = empirical_risk(run.z, sample);
    run.risk_z_bar = empirical_risk(run.z_bar, sample);
  }
  for (int s = 1; s < restarts; ++s) {
    if (out.runs[s].risk_z < out.runs[out.best_z].risk_z) out.best_z = s;
    if (out.runs[s].risk_z_bar < out.runs[out.best_z_bar].risk_z_bar) out.best_z_bar = s;
  }
  return out;
}

/// Averaged estimate from the restart with the smallest empirical risk.
inline Point multi_start_select(const RecordSource& source, const EstimatorConfig& config,
                                int restarts, std::uint64_t seed) {
  const auto result = multi_start_run(source, config, restarts, seed);
  return result.runs[result.best_z_bar].z_bar;
}

struct TargetEstimate {
  double x = 0.0;
  Point z;
  Point z_bar;
  std::int64_t n = 0;
  std::int64_t skipped = 0;
};

/// Advances one estimator per target covariate from a single pass over the
/// stream; memory is O(targets * dim).
inline std::vector<TargetEstimate> multi_target_run(const RecordSource& source,
                                                    const EstimatorConfig& base,
                                                    const std::vector<double>& targets) {
  if (targets.empty()) throw std::invalid_argument("multi_target_run: no targets");
  std::vector<RecursiveMedianEstimator> states;
  states.reserve(targets.size());
  for (double x : targets) {
    EstimatorConfig c = base;
    c.x = x;
    states.emplace_back(std::move(c));
  }

  source([&](double x, const Point& y) {
    if (!states.front().initialized()) {
      if (!std::isfinite(x) || !is_finite(y)) return;
      for (auto& st : states) st.initialize(y);
      return;
    }
    for (auto& st : states) st.update(x, y);
  });

  if (!states.front().initialized())
    throw std::invalid_argument("multi_target_run: no usable record in the stream");

  std::vector<TargetEstimate> out;
  out.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i)
    out.push_back({targets[i], states[i].z(), states[i].z_bar(), states[i].n(),
                   states[i].skipped()});
  return out;
}

}  // namespace condmed
