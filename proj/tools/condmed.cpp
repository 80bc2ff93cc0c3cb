// condmed: command-line front end for the online conditional-median library.
//
// Subcommands:
//   simulate          emit a synthetic Brownian-model CSV dataset
//   estimate          one-pass recursive estimate from CSV records
//   baseline          batch kernel-weighted Weiszfeld estimate
//   profile           estimates at several covariate quantiles
//   benchmark         Monte Carlo table experiment from a config file
//   clt-check         empirical vs plug-in covariance of the averaged iterate
//   validate-schedule check step/bandwidth exponent admissibility
//
// Exit codes: 0 success, 1 invalid input, 2 refused precondition.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "condmed/condmed.hpp"

namespace {

using namespace condmed;

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(csv);
  while (std::getline(ss, item, ',')) {
    const auto sv = detail::trim(item);
    if (!sv.empty()) out.emplace_back(sv);
  }
  return out;
}

double parse_number(const std::string& tok, const std::string& what) {
  // Accepts plain decimals and simple fractions such as 2/3.
  const auto slash = tok.find('/');
  if (slash != std::string::npos) {
    double num = 0.0, den = 0.0;
    if (!detail::parse_double(tok.substr(0, slash), num) ||
        !detail::parse_double(tok.substr(slash + 1), den) || den == 0.0)
      throw std::invalid_argument(what + ": cannot parse number '" + tok + "'");
    return num / den;
  }
  double v = 0.0;
  if (!detail::parse_double(tok, v))
    throw std::invalid_argument(what + ": cannot parse number '" + tok + "'");
  return v;
}

// Bandwidth tokens: "0.15" (fixed), "n^-0.3" (decaying, unit constant),
// "0.5*n^-0.3" (decaying with constant).
Schedule parse_bandwidth(const std::string& tok) {
  const auto caret = tok.find("n^-");
  if (caret == std::string::npos) return Schedule::fixed(parse_number(tok, "bandwidth"));
  double c = 1.0;
  if (caret > 0) {
    if (tok[caret - 1] != '*')
      throw std::invalid_argument("bandwidth: cannot parse token '" + tok + "'");
    c = parse_number(tok.substr(0, caret - 1), "bandwidth");
  }
  const double e = parse_number(tok.substr(caret + 3), "bandwidth");
  return Schedule::decaying(c, e);
}

// Opens the output stream: "-" or empty means standard output.
class OutputFile {
 public:
  explicit OutputFile(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw std::invalid_argument("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }
  bool to_stdout() const { return !file_.is_open(); }

 private:
  std::ofstream file_;
};

// Replayable source over a CSV path ("-" = standard input, single pass
// only). Fills `stats` on every pass.
RecordSource make_source(const std::string& path, IngestStats& stats, bool need_replay) {
  if (path == "-") {
    if (need_replay)
      throw std::invalid_argument(
          "standard input cannot be replayed; use a file for multi-pass runs");
    return [&stats](const RecordFn& sink) { stats = ingest_stream(std::cin, sink); };
  }
  return [&stats, path](const RecordFn& sink) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    stats = ingest_stream(in, sink);
  };
}

void write_meta(const std::string& out_path, const std::vector<std::pair<std::string, std::string>>& kv) {
  if (!out_path.empty() && out_path != "-") {
    std::ofstream meta(out_path + ".meta");
    if (!meta) throw std::invalid_argument("cannot open metadata file: " + out_path + ".meta");
    for (const auto& [k, v] : kv) meta << k << '=' << v << '\n';
  } else {
    for (const auto& [k, v] : kv) std::cerr << k << '=' << v << '\n';
  }
}

struct EstimatorFlags {
  double gamma = 2.0 / 3.0;
  double c_gamma = 1.0;
  std::optional<double> h_exponent;
  double c_h = 1.0;
  std::optional<double> fixed_h;
  std::string kernel = "gaussian";
  std::int64_t burn_in = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--gamma", gamma, "step exponent (step = c_gamma * n^-gamma)");
    cmd->add_option("--c-gamma", c_gamma, "step constant");
    cmd->add_option("--h", h_exponent, "bandwidth exponent (bandwidth = c_h * n^-h)");
    cmd->add_option("--c-h", c_h, "bandwidth constant for the decaying form");
    cmd->add_option("--fixed-h", fixed_h, "fixed bandwidth value (overrides --h)");
    cmd->add_option("--kernel", kernel, "kernel family: gaussian|epanechnikov|uniform");
    cmd->add_option("--burn-in", burn_in, "iterations excluded from the running average");
  }

  EstimatorConfig to_config(double x, EstimatorMode mode) const {
    EstimatorConfig cfg;
    cfg.x = x;
    cfg.step = Schedule::decaying(c_gamma, gamma);
    if (fixed_h)
      cfg.bandwidth = Schedule::fixed(*fixed_h);
    else if (h_exponent)
      cfg.bandwidth = Schedule::decaying(c_h, *h_exponent);
    else
      cfg.bandwidth = Schedule::fixed(0.15);
    cfg.kernel = kernel_from_name(kernel);
    cfg.mode = mode;
    cfg.burn_in = burn_in;
    return cfg;
  }
};

int cmd_simulate(std::int64_t n, int d, std::uint64_t seed, const std::string& out_path) {
  if (n < 1) throw std::invalid_argument("simulate: --n must be >= 1");
  const BrownianModel model(d);
  Rng rng(mix_seed({0x51au, seed}));
  OutputFile out(out_path);
  write_csv_header(out.stream(), "y", d, "x");
  for (std::int64_t i = 0; i < n; ++i) {
    const auto [x, y] = brownian_pair(model, rng);
    write_csv_row(out.stream(), y, &x);
  }
  return 0;
}

int cmd_estimate(const std::string& input, const EstimatorFlags& flags, std::optional<double> x,
                 bool unconditional, int restarts, std::uint64_t seed,
                 const std::string& out_path) {
  const EstimatorMode mode =
      unconditional ? EstimatorMode::Unconditional : EstimatorMode::Conditional;
  if (mode == EstimatorMode::Conditional && !x)
    throw std::invalid_argument("estimate: --x is required in conditional mode");
  if (restarts < 1) throw std::invalid_argument("estimate: --restarts must be >= 1");

  const EstimatorConfig cfg = flags.to_config(x.value_or(0.0), mode);
  IngestStats stats;
  const RecordSource source = make_source(input, stats, restarts > 1);

  Point estimate;
  std::int64_t n_used = 0;
  if (restarts > 1) {
    const MultiStartResult runs = multi_start_run(source, cfg, restarts, seed);
    estimate = runs.runs[static_cast<std::size_t>(runs.best_z_bar)].z_bar;
    n_used = runs.runs.front().n;
  } else {
    const StreamResult r = run_stream(source, cfg, seed);
    estimate = r.z_bar;
    n_used = r.n;
  }

  OutputFile out(out_path);
  write_csv_header(out.stream(), "t", static_cast<int>(estimate.size()));
  write_csv_row(out.stream(), estimate);

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("n", std::to_string(n_used));
  meta.emplace_back("mode", unconditional ? "unconditional" : "conditional");
  if (x) meta.emplace_back("x", format_g9(*x));
  meta.emplace_back("gamma", cfg.step.label());
  meta.emplace_back("h", cfg.bandwidth.label());
  meta.emplace_back("kernel", kernel_name(cfg.kernel));
  meta.emplace_back("restarts", std::to_string(restarts));
  meta.emplace_back("seed", std::to_string(seed));
  meta.emplace_back("skipped_records", std::to_string(stats.skipped));
  write_meta(out_path, meta);
  return 0;
}

int cmd_baseline(const std::string& input, double x, double h, const std::string& kernel,
                 double tol, int max_iter, const std::string& out_path) {
  IngestStats stats;
  const RecordSource source = make_source(input, stats, false);
  WeightedSample sample;
  std::vector<double> xs;
  source([&](double xi, const Point& y) {
    xs.push_back(xi);
    sample.points.push_back(y);
  });
  if (sample.points.empty()) throw std::invalid_argument("baseline: no usable records");
  sample.weights = kernel_weights(x, xs, h, kernel_from_name(kernel));
  const WeiszfeldResult res = weiszfeld(sample, tol, max_iter);

  OutputFile out(out_path);
  write_csv_header(out.stream(), "t", static_cast<int>(res.median.size()));
  write_csv_row(out.stream(), res.median);

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("n", std::to_string(sample.points.size()));
  meta.emplace_back("x", format_g9(x));
  meta.emplace_back("h", format_g9(h));
  meta.emplace_back("kernel", kernel);
  meta.emplace_back("iterations", std::to_string(res.iterations));
  meta.emplace_back("converged", res.converged ? "true" : "false");
  meta.emplace_back("skipped_records", std::to_string(stats.skipped));
  write_meta(out_path, meta);
  return 0;
}

// Type-7 quantile of a sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile: q must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

int cmd_profile(const std::string& input, const EstimatorFlags& flags,
                const std::string& quantiles_csv, const std::string& xvalues_csv,
                std::uint64_t seed, const std::string& out_path) {
  (void)seed;
  if (input == "-")
    throw std::invalid_argument("profile: needs a file path (two passes over the data)");

  std::vector<double> targets;
  IngestStats stats;
  if (!xvalues_csv.empty()) {
    for (const auto& tok : split_list(xvalues_csv))
      targets.push_back(parse_number(tok, "--x-values"));
  } else {
    // First pass: covariate values only.
    std::vector<double> xs;
    const RecordSource scan = make_source(input, stats, false);
    scan([&](double xi, const Point&) { xs.push_back(xi); });
    if (xs.empty()) throw std::invalid_argument("profile: no usable records");
    std::sort(xs.begin(), xs.end());
    for (const auto& tok : split_list(quantiles_csv))
      targets.push_back(quantile_sorted(xs, parse_number(tok, "--quantiles")));
  }
  if (targets.empty()) throw std::invalid_argument("profile: no target covariates");

  const EstimatorConfig cfg = flags.to_config(0.0, EstimatorMode::Conditional);
  const RecordSource source = make_source(input, stats, false);
  const std::vector<TargetEstimate> rows = multi_target_run(source, cfg, targets);

  OutputFile out(out_path);
  write_csv_header(out.stream(), "t", stats.dim, "x");
  for (const TargetEstimate& row : rows) write_csv_row(out.stream(), row.z_bar, &row.x);

  std::vector<std::pair<std::string, std::string>> meta;
  meta.emplace_back("n", std::to_string(rows.front().n));
  meta.emplace_back("targets", std::to_string(targets.size()));
  meta.emplace_back("gamma", cfg.step.label());
  meta.emplace_back("h", cfg.bandwidth.label());
  meta.emplace_back("kernel", kernel_name(cfg.kernel));
  meta.emplace_back("skipped_records", std::to_string(stats.skipped));
  write_meta(out_path, meta);
  return 0;
}

TableExperimentConfig parse_benchmark_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("benchmark: cannot open config file: " + path);
  TableExperimentConfig cfg;
  cfg.bandwidth_values.clear();
  cfg.c_gamma_values.clear();
  cfg.estimators.clear();

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto sv = detail::trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto eq = sv.find('=');
    if (eq == std::string_view::npos)
      throw std::invalid_argument("benchmark config line " + std::to_string(line_no) +
                                  ": expected key=value");
    const std::string key{detail::trim(sv.substr(0, eq))};
    const std::string value{detail::trim(sv.substr(eq + 1))};
    if (key == "n") {
      cfg.n = static_cast<std::int64_t>(parse_number(value, key));
    } else if (key == "d") {
      cfg.d = static_cast<int>(parse_number(value, key));
    } else if (key == "replications") {
      cfg.replications = static_cast<int>(parse_number(value, key));
    } else if (key == "bandwidths") {
      for (const auto& tok : split_list(value)) cfg.bandwidth_values.push_back(parse_bandwidth(tok));
    } else if (key == "c_gammas") {
      for (const auto& tok : split_list(value)) cfg.c_gamma_values.push_back(parse_number(tok, key));
    } else if (key == "estimators") {
      for (const auto& tok : split_list(value)) cfg.estimators.push_back(estimator_from_name(tok));
    } else if (key == "gamma_exponent") {
      cfg.gamma_exponent = parse_number(value, key);
    } else if (key == "restarts") {
      cfg.restarts = static_cast<int>(parse_number(value, key));
    } else if (key == "seed") {
      cfg.master_seed = static_cast<std::uint64_t>(parse_number(value, key));
    } else if (key == "kernel") {
      cfg.kernel = kernel_from_name(value);
    } else {
      throw std::invalid_argument("benchmark config line " + std::to_string(line_no) +
                                  ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

int cmd_benchmark(const std::string& config_path, const std::string& out_path, int threads) {
  const TableExperimentConfig cfg = parse_benchmark_config(config_path);
  const ExperimentReport report = run_table_experiment(cfg, threads);
  if (!out_path.empty() && out_path != "-") {
    OutputFile out(out_path);
    report_csv(report, out.stream());
    report_table(report, std::cout);
  } else {
    report_csv(report, std::cout);
    report_table(report, std::cerr);
  }
  return 0;
}

int cmd_clt_check(int d, std::int64_t n, int replications, double gamma, double h,
                  std::uint64_t seed, int threads, bool unscaled) {
  const CltResult res =
      clt_experiment(d, n, replications, gamma, h, seed, threads, !unscaled);
  std::cout << "empirical_trace=" << format_g9(res.empirical_cov.trace()) << '\n'
            << "theoretical_trace=" << format_g9(res.theoretical_cov.trace()) << '\n'
            << "trace_ratio=" << format_g9(res.trace_ratio) << '\n';
  return 0;
}

int cmd_validate_schedule(double gamma, double h, double beta) {
  const ScheduleVerdict v = validate_schedule(gamma, h, beta);
  std::cout << "as:" << (v.as_convergence ? "true" : "false")
            << " rate:" << (v.rate_bound ? "true" : "false")
            << " clt:" << (v.clt ? "true" : "false") << '\n';
  for (const std::string& name : v.violated) std::cout << "violated: " << name << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online conditional geometric median toolkit"};
  app.require_subcommand(1);
  // Several subcommands take a --h option (bandwidth exponent), so the help
  // flag must not claim the short name -h.
  app.set_help_flag("--help", "print help and exit");
  app.set_help_all_flag("--help-all", "print help for every subcommand");
  auto add_subcommand = [&app](const char* name, const char* desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->set_help_flag("--help", "print help and exit");
    return sub;
  };

  // simulate
  auto* sim = add_subcommand("simulate", "emit a synthetic Brownian-model CSV dataset");
  std::int64_t sim_n = 0;
  int sim_d = 100;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  sim->add_option("--n", sim_n, "number of records")->required();
  sim->add_option("--d", sim_d, "response dimension (grid size)");
  sim->add_option("--seed", sim_seed, "rng seed");
  sim->add_option("--out", sim_out, "output CSV path (default stdout)");

  // estimate
  auto* est = add_subcommand("estimate", "one-pass recursive estimate from CSV records");
  std::string est_input = "-";
  EstimatorFlags est_flags;
  std::optional<double> est_x;
  bool est_uncond = false;
  int est_restarts = 1;
  std::uint64_t est_seed = 1;
  std::string est_out;
  est->add_option("input", est_input, "input CSV path, or - for stdin");
  est->add_option("--x", est_x, "target covariate (required unless --unconditional)");
  est->add_flag("--unconditional", est_uncond, "estimate the plain geometric median");
  est_flags.attach(est);
  est->add_option("--restarts", est_restarts, "random restarts (file input only when > 1)");
  est->add_option("--seed", est_seed, "rng seed for restarts");
  est->add_option("--out", est_out, "output CSV path (default stdout)");

  // baseline
  auto* base = add_subcommand("baseline", "batch kernel-weighted Weiszfeld estimate");
  std::string base_input = "-";
  double base_x = 0.0;
  double base_h = 0.15;
  std::string base_kernel = "gaussian";
  double base_tol = 1e-8;
  int base_max_iter = 500;
  std::string base_out;
  base->add_option("input", base_input, "input CSV path, or - for stdin");
  base->add_option("--x", base_x, "target covariate")->required();
  base->add_option("--h", base_h, "kernel bandwidth");
  base->add_option("--kernel", base_kernel, "kernel family");
  base->add_option("--tol", base_tol, "relative convergence tolerance");
  base->add_option("--max-iter", base_max_iter, "iteration cap");
  base->add_option("--out", base_out, "output CSV path (default stdout)");

  // profile
  auto* prof = add_subcommand("profile", "estimates at several covariate quantiles");
  std::string prof_input;
  EstimatorFlags prof_flags;
  std::string prof_quantiles = "0.25,0.5,0.75,0.9";
  std::string prof_xvalues;
  std::uint64_t prof_seed = 1;
  std::string prof_out;
  prof->add_option("input", prof_input, "input CSV path (a file; two passes)")->required();
  prof->add_option("--quantiles", prof_quantiles, "comma-separated covariate quantiles");
  prof->add_option("--x-values", prof_xvalues, "explicit comma-separated covariates");
  prof_flags.attach(prof);
  prof->add_option("--seed", prof_seed, "rng seed");
  prof->add_option("--out", prof_out, "output CSV path (default stdout)");

  // benchmark
  auto* bench = add_subcommand("benchmark", "Monte Carlo table experiment from a config file");
  std::string bench_config;
  std::string bench_out;
  int bench_threads = 0;
  bench->add_option("--config", bench_config, "key=value config file")->required();
  bench->add_option("--out", bench_out, "report CSV path (default stdout)");
  bench->add_option("--threads", bench_threads, "worker threads (0 = auto)");

  // clt-check
  auto* clt = add_subcommand("clt-check",
                                 "empirical vs plug-in covariance of the averaged iterate");
  int clt_d = 2;
  std::int64_t clt_n = 20000;
  int clt_reps = 200;
  double clt_gamma = 0.8;
  double clt_h = 0.4;
  std::uint64_t clt_seed = 1;
  int clt_threads = 0;
  bool clt_unscaled = false;
  clt->add_option("--d", clt_d, "response dimension (2..5)");
  clt->add_option("--n", clt_n, "iterations per replicate");
  clt->add_option("--replications", clt_reps, "Monte Carlo replicates");
  clt->add_option("--gamma", clt_gamma, "step exponent");
  clt->add_option("--h", clt_h, "bandwidth exponent");
  clt->add_option("--seed", clt_seed, "rng seed");
  clt->add_option("--threads", clt_threads, "worker threads (0 = auto)");
  clt->add_flag("--unscaled-curvature", clt_unscaled,
                "use the curvature operator without the covariate-density factor");

  // validate-schedule
  auto* val = add_subcommand("validate-schedule",
                                 "check step/bandwidth exponent admissibility");
  double val_gamma = 0.0, val_h = 0.0, val_beta = 1.0;
  val->add_option("--gamma", val_gamma, "step exponent")->required();
  val->add_option("--h", val_h, "bandwidth exponent")->required();
  val->add_option("--beta", val_beta, "smoothness exponent");

  try {
    app.parse(argc, argv);
    if (sim->parsed()) return cmd_simulate(sim_n, sim_d, sim_seed, sim_out);
    if (est->parsed())
      return cmd_estimate(est_input, est_flags, est_x, est_uncond, est_restarts, est_seed,
                          est_out);
    if (base->parsed())
      return cmd_baseline(base_input, base_x, base_h, base_kernel, base_tol, base_max_iter,
                          base_out);
    if (prof->parsed())
      return cmd_profile(prof_input, prof_flags, prof_quantiles, prof_xvalues, prof_seed,
                         prof_out);
    if (bench->parsed()) return cmd_benchmark(bench_config, bench_out, bench_threads);
    if (clt->parsed())
      return cmd_clt_check(clt_d, clt_n, clt_reps, clt_gamma, clt_h, clt_seed, clt_threads,
                           clt_unscaled);
    if (val->parsed()) return cmd_validate_schedule(val_gamma, val_h, val_beta);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const condmed::PreconditionError& e) {
    std::cerr << "refused: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
