#pragma once

#include <cstdint>
#include <string>

#include "sdeqml/qml.hpp"
#include "sdeqml/simulate.hpp"

namespace sdeqml {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Estimator variant as written in a config file. Uniform step sizes may be
// given either absolutely (h) or as a divisor of the sampling period
// (h = delta / h_divisor), so one entry covers a (delta, T) sweep.
struct VariantSpec {
  EstimatorVariant::Kind kind = EstimatorVariant::Kind::conventional;
  double h = 0.0;
  double h_divisor = 0.0;
  double rtol_y = 5e-6, rtol_P = 5e-6, atol_y = 5e-9, atol_P = 5e-12;

  EstimatorVariant resolve(double delta) const;
  std::string label() const;
  std::string h_or_tol() const;
  int beta() const { return kind == EstimatorVariant::Kind::order2_uniform ? 2 : 1; }
};

struct ExperimentConfig {
  std::string example;
  int replicates = 20;
  uint64_t seed = 1;
  std::vector<double> deltas = {1.0};
  std::vector<double> horizons = {10.0};  // the T values
  std::vector<VariantSpec> variants;
  double grid_dt = 1e-3;
  MinimizeOptions optimizer;
  std::string out_dir = "out";
  int threads = 1;

  void validate() const;  // throws ConfigError with the offending fields
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// One fitted variant on one subsampled series of one replicate.
struct EstimateRecord {
  int replicate = 0;
  int variant = 0;  // index into Report::variants
  double delta = 0.0;
  double horizon = 0.0;
  Vector estimate;
  std::vector<double> error_vs_exact;  // empty when no exact variant ran
  double objective = 0.0;
  bool converged = false;
  std::vector<StepStats> interval_stats;
};

struct SummaryRow {
  int variant = 0;
  double delta = 0.0, horizon = 0.0;
  std::string parameter;
  int n = 0;
  double mean = 0.0, sd = 0.0, q05 = 0.0, q95 = 0.0, bias = 0.0;
  double err_mean = 0.0, err_sd = 0.0;  // NaN when no exact reference
};

struct StepsRow {
  int variant = 0;
  double delta = 0.0, horizon = 0.0;
  double t_k = 0.0;
  double mean_accepted = 0.0, accepted_q05 = 0.0, accepted_q95 = 0.0, mean_failed = 0.0;
};

struct HistogramRow {
  int variant = 0;
  double delta = 0.0, horizon = 0.0;
  std::string parameter;
  double bin_lo = 0.0, bin_hi = 0.0;
  int count = 0;
};

struct Report {
  std::string example;
  uint64_t seed = 0;
  std::vector<std::string> param_names;
  Vector theta_true;
  std::vector<VariantSpec> variants;
  std::vector<EstimateRecord> records;  // sorted by (replicate, variant, delta, horizon)
  std::vector<int> aborted_replicates;
  std::vector<SummaryRow> summary;
  std::vector<StepsRow> steps;
  std::vector<HistogramRow> histograms;
};

// Simulate, subsample, fit every variant on every (delta, T) cell for each
// replicate (replicates run in a worker pool), then aggregate. Deterministic
// for a given config at any thread count.
Report run_experiment(const ExperimentConfig& config);

// Writes estimates.csv / summary.csv / steps.csv / histograms.csv, or the
// same content as one report.json document.
void emit_report(const Report& report, const std::string& format, const std::string& dir);

std::string report_to_json(const Report& report);
Report report_from_json(const std::string& text);
bool reports_equal(const Report& a, const Report& b);

}  // namespace sdeqml
