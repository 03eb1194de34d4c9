#include "sdeqml/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

namespace sdeqml {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

EstimatorVariant VariantSpec::resolve(double delta) const {
  switch (kind) {
    case EstimatorVariant::Kind::exact: return EstimatorVariant::exact();
    case EstimatorVariant::Kind::conventional: return EstimatorVariant::conventional();
    case EstimatorVariant::Kind::order1_uniform:
    case EstimatorVariant::Kind::order2_uniform: {
      const double step = h_divisor > 0.0 ? delta / h_divisor : h;
      return kind == EstimatorVariant::Kind::order2_uniform
                 ? EstimatorVariant::order2_uniform(step)
                 : EstimatorVariant::order1_uniform(step);
    }
    case EstimatorVariant::Kind::order1_adaptive:
      return EstimatorVariant::order1_adaptive(rtol_y, rtol_P, atol_y, atol_P);
  }
  throw ConfigError("unknown variant kind");
}

std::string VariantSpec::h_or_tol() const {
  switch (kind) {
    case EstimatorVariant::Kind::exact:
    case EstimatorVariant::Kind::conventional: return "";
    case EstimatorVariant::Kind::order1_uniform:
    case EstimatorVariant::Kind::order2_uniform:
      if (h_divisor > 0.0) return "delta/" + fmt_short(h_divisor);
      return "h=" + fmt_short(h);
    case EstimatorVariant::Kind::order1_adaptive:
      return "rtol=" + fmt_short(rtol_y) + "," + fmt_short(rtol_P) + ";atol=" + fmt_short(atol_y) +
             "," + fmt_short(atol_P);
  }
  return "";
}

std::string VariantSpec::label() const {
  EstimatorVariant base;
  base.kind = kind;
  const std::string suffix = h_or_tol();
  return suffix.empty() ? base.kind_name() : base.kind_name() + "(" + suffix + ")";
}

void ExperimentConfig::validate() const {
  std::vector<std::string> problems;
  if (example.empty()) problems.push_back("example: missing");
  if (replicates < 1) problems.push_back("replicates: must be >= 1");
  if (!(grid_dt > 0.0)) problems.push_back("grid_dt: must be positive");
  if (threads < 1) problems.push_back("threads: must be >= 1");
  if (deltas.empty()) problems.push_back("delta: empty");
  if (horizons.empty()) problems.push_back("T: empty");
  if (variants.empty()) problems.push_back("variants: empty");
  for (double d : deltas) {
    if (!(d > 0.0)) {
      problems.push_back("delta: must be positive");
      continue;
    }
    const double stride = d / grid_dt;
    if (std::fabs(stride - std::lround(stride)) > 1e-6 * stride)
      problems.push_back("delta: " + fmt_short(d) + " is not a multiple of grid_dt");
    for (double t : horizons) {
      if (!(t > 0.0)) {
        problems.push_back("T: must be positive");
        continue;
      }
      const double count = t / d;
      if (std::fabs(count - std::lround(count)) > 1e-9 * count)
        problems.push_back("T: " + fmt_short(t) + " is not a multiple of delta " + fmt_short(d));
    }
  }
  for (size_t v = 0; v < variants.size(); ++v) {
    const VariantSpec& spec = variants[v];
    const bool uniform = spec.kind == EstimatorVariant::Kind::order1_uniform ||
                         spec.kind == EstimatorVariant::Kind::order2_uniform;
    if (uniform && !(spec.h > 0.0) && !(spec.h_divisor > 0.0))
      problems.push_back("variants[" + std::to_string(v) + "]: uniform variant needs h or h_divisor");
    if (spec.kind == EstimatorVariant::Kind::order1_adaptive &&
        (!(spec.rtol_y > 0.0) || !(spec.rtol_P > 0.0) || !(spec.atol_y > 0.0) || !(spec.atol_P > 0.0)))
      problems.push_back("variants[" + std::to_string(v) + "]: tolerances must be positive");
  }
  if (!problems.empty()) {
    std::string msg = "invalid experiment config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  std::vector<std::string> bad;
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
      bad.push_back(item.key());
  }
  if (!bad.empty()) {
    std::string msg = "unknown key(s) in " + where + ":";
    for (const auto& k : bad) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
}

std::vector<double> as_double_list(const json& j, const std::string& where) {
  std::vector<double> out;
  if (j.is_number()) {
    out.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& x : j) {
      if (!x.is_number()) throw ConfigError(where + ": expected numbers");
      out.push_back(x.get<double>());
    }
  } else {
    throw ConfigError(where + ": expected a number or an array of numbers");
  }
  return out;
}

EstimatorVariant::Kind kind_from_string(const std::string& s) {
  if (s == "exact") return EstimatorVariant::Kind::exact;
  if (s == "conventional") return EstimatorVariant::Kind::conventional;
  if (s == "order1_uniform") return EstimatorVariant::Kind::order1_uniform;
  if (s == "order1_adaptive") return EstimatorVariant::Kind::order1_adaptive;
  if (s == "order2_uniform") return EstimatorVariant::Kind::order2_uniform;
  throw ConfigError("unknown variant type '" + s + "'");
}

std::string kind_to_string(EstimatorVariant::Kind k) {
  EstimatorVariant v;
  v.kind = k;
  return v.kind_name();
}

VariantSpec parse_variant(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  check_keys(j, {"type", "h", "h_divisor", "rtol_y", "rtol_P", "atol_y", "atol_P"}, where);
  if (!j.contains("type")) throw ConfigError(where + ": missing 'type'");
  VariantSpec spec;
  spec.kind = kind_from_string(j.at("type").get<std::string>());
  if (j.contains("h")) spec.h = j.at("h").get<double>();
  if (j.contains("h_divisor")) spec.h_divisor = j.at("h_divisor").get<double>();
  if (j.contains("rtol_y")) spec.rtol_y = j.at("rtol_y").get<double>();
  if (j.contains("rtol_P")) spec.rtol_P = j.at("rtol_P").get<double>();
  if (j.contains("atol_y")) spec.atol_y = j.at("atol_y").get<double>();
  if (j.contains("atol_P")) spec.atol_P = j.at("atol_P").get<double>();
  return spec;
}

json variant_to_json(const VariantSpec& spec) {
  json j;
  j["type"] = kind_to_string(spec.kind);
  if (spec.h > 0.0) j["h"] = spec.h;
  if (spec.h_divisor > 0.0) j["h_divisor"] = spec.h_divisor;
  if (spec.kind == EstimatorVariant::Kind::order1_adaptive) {
    j["rtol_y"] = spec.rtol_y;
    j["rtol_P"] = spec.rtol_P;
    j["atol_y"] = spec.atol_y;
    j["atol_P"] = spec.atol_P;
  }
  return j;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");
  check_keys(j,
             {"example", "replicates", "seed", "delta", "T", "variants", "grid_dt", "optimizer",
              "output_dir", "threads"},
             "config");

  ExperimentConfig cfg;
  try {
    if (j.contains("example")) cfg.example = j.at("example").get<std::string>();
    if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    if (j.contains("delta")) cfg.deltas = as_double_list(j.at("delta"), "delta");
    if (j.contains("T")) cfg.horizons = as_double_list(j.at("T"), "T");
    if (j.contains("grid_dt")) cfg.grid_dt = j.at("grid_dt").get<double>();
    if (j.contains("output_dir")) cfg.out_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
    if (j.contains("optimizer")) {
      const json& opt = j.at("optimizer");
      check_keys(opt, {"max_iters", "xtol", "ftol"}, "optimizer");
      if (opt.contains("max_iters")) cfg.optimizer.max_iters = opt.at("max_iters").get<int>();
      if (opt.contains("xtol")) cfg.optimizer.xtol = opt.at("xtol").get<double>();
      if (opt.contains("ftol")) cfg.optimizer.ftol = opt.at("ftol").get<double>();
    }
    if (j.contains("variants")) {
      if (!j.at("variants").is_array()) throw ConfigError("variants: expected an array");
      int idx = 0;
      for (const auto& vj : j.at("variants"))
        cfg.variants.push_back(parse_variant(vj, "variants[" + std::to_string(idx++) + "]"));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field has the wrong type: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

bool uses_ll_integrator(const std::string& example) {
  // Fixed example-to-integrator mapping: the local-linearization sampler for
  // the additive-noise equations, Euler-Maruyama otherwise.
  return example == "example2" || example == "example3" || example == "ou";
}

struct ReplicateOutcome {
  bool aborted = false;
  std::vector<EstimateRecord> records;
};

ReplicateOutcome run_replicate(const ExperimentConfig& cfg, const SdeModel& model,
                               const PathGrid& grid, bool use_ll, int rep) {
  ReplicateOutcome out;
  try {
    RngStream path_rng(cfg.seed, 2 * static_cast<uint64_t>(rep));
    RngStream init_rng(cfg.seed, 2 * static_cast<uint64_t>(rep) + 1);
    const ParameterVector truth = model.true_parameters();
    const Path path = use_ll ? ll_path(model, truth, grid, path_rng)
                             : euler_path(model, truth, grid, path_rng);

    // Shared starting point for every variant of this replicate: the true
    // parameters scaled coordinatewise by a uniform factor in (0.5, 1.5].
    Vector init_values(model.p);
    for (int jx = 0; jx < model.p; ++jx)
      init_values[jx] = model.theta_true[jx] * (0.5 + init_rng.next_uniform());
    const ParameterVector init(init_values, model.box);

    for (double delta : cfg.deltas) {
      for (double horizon : cfg.horizons) {
        const ObservationSeries series = subsample(path, delta, horizon);
        std::vector<EstimateRecord> cell;
        int exact_pos = -1;
        for (size_t v = 0; v < cfg.variants.size(); ++v) {
          const EstimatorVariant variant = cfg.variants[v].resolve(delta);
          EstimateResult res = estimate(model, series, variant, init, cfg.optimizer);
          EstimateRecord rec;
          rec.replicate = rep;
          rec.variant = static_cast<int>(v);
          rec.delta = delta;
          rec.horizon = horizon;
          rec.estimate = res.theta_hat.values();
          rec.objective = res.objective;
          rec.converged = res.converged;
          rec.interval_stats = std::move(res.step_stats);
          if (cfg.variants[v].kind == EstimatorVariant::Kind::exact)
            exact_pos = static_cast<int>(cell.size());
          cell.push_back(std::move(rec));
        }
        if (exact_pos >= 0) {
          const Vector& ref = cell[exact_pos].estimate;
          for (auto& rec : cell) {
            rec.error_vs_exact.resize(model.p);
            for (int jx = 0; jx < model.p; ++jx)
              rec.error_vs_exact[jx] = std::fabs(rec.estimate[jx] - ref[jx]);
          }
        }
        for (auto& rec : cell) out.records.push_back(std::move(rec));
      }
    }
  } catch (const SimulationBlowup&) {
    out = {true, {}};
  } catch (const NonFiniteStart&) {
    out = {true, {}};
  } catch (const StepUnderflow&) {
    out = {true, {}};
  }
  return out;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = p * (static_cast<double>(v.size()) - 1.0);
  const size_t lo = static_cast<size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[lo + 1] - v[lo]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? kNaN : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

void aggregate(Report& report, const ExperimentConfig& cfg, double t0) {
  const int p = static_cast<int>(report.param_names.size());

  for (size_t v = 0; v < cfg.variants.size(); ++v) {
    for (double delta : cfg.deltas) {
      for (double horizon : cfg.horizons) {
        std::vector<const EstimateRecord*> cell;
        for (const auto& rec : report.records)
          if (rec.variant == static_cast<int>(v) && rec.delta == delta && rec.horizon == horizon)
            cell.push_back(&rec);
        if (cell.empty()) continue;

        const auto add_summary = [&](const std::string& pname, const std::vector<double>& values,
                                     double target, const std::vector<double>& errors) {
          SummaryRow row;
          row.variant = static_cast<int>(v);
          row.delta = delta;
          row.horizon = horizon;
          row.parameter = pname;
          row.n = static_cast<int>(values.size());
          row.mean = mean_of(values);
          row.sd = sd_of(values, row.mean);
          row.q05 = quantile(values, 0.05);
          row.q95 = quantile(values, 0.95);
          row.bias = target - row.mean;
          row.err_mean = errors.empty() ? kNaN : mean_of(errors);
          row.err_sd = errors.empty() ? kNaN : sd_of(errors, row.err_mean);
          report.summary.push_back(std::move(row));
        };

        for (int jx = 0; jx < p; ++jx) {
          std::vector<double> values, errors;
          for (const auto* rec : cell) {
            values.push_back(rec->estimate[jx]);
            if (!rec->error_vs_exact.empty()) errors.push_back(rec->error_vs_exact[jx]);
          }
          add_summary(report.param_names[jx], values, report.theta_true[jx], errors);
          // Noise amplitudes are fitted on their natural scale; tabulate the
          // variance convention alongside.
          if (report.param_names[jx] == "sigma") {
            std::vector<double> squared;
            for (double x : values) squared.push_back(x * x);
            add_summary("sigma2", squared, report.theta_true[jx] * report.theta_true[jx], {});
          }

          // Histogram of the estimates.
          std::vector<double> sorted = values;
          std::sort(sorted.begin(), sorted.end());
          const double lo = sorted.front(), hi = sorted.back();
          const int nbins =
              hi > lo ? std::max(1, static_cast<int>(std::lround(std::sqrt(sorted.size())))) : 1;
          std::vector<int> counts(nbins, 0);
          const double width = hi > lo ? (hi - lo) / nbins : 1.0;
          const double base = hi > lo ? lo : lo - 0.5;
          for (double x : values) {
            int b = hi > lo ? static_cast<int>((x - base) / width) : 0;
            b = std::clamp(b, 0, nbins - 1);
            ++counts[b];
          }
          for (int b = 0; b < nbins; ++b) {
            HistogramRow hr;
            hr.variant = static_cast<int>(v);
            hr.delta = delta;
            hr.horizon = horizon;
            hr.parameter = report.param_names[jx];
            hr.bin_lo = base + b * width;
            hr.bin_hi = base + (b + 1) * width;
            hr.count = counts[b];
            report.histograms.push_back(std::move(hr));
          }
        }

        // Per-interval step statistics for the adaptive estimators.
        if (cfg.variants[v].kind == EstimatorVariant::Kind::order1_adaptive) {
          const size_t intervals = cell.front()->interval_stats.size();
          for (size_t k = 0; k < intervals; ++k) {
            std::vector<double> accepted, failed;
            for (const auto* rec : cell) {
              accepted.push_back(rec->interval_stats[k].accepted);
              failed.push_back(rec->interval_stats[k].failed);
            }
            StepsRow sr;
            sr.variant = static_cast<int>(v);
            sr.delta = delta;
            sr.horizon = horizon;
            sr.t_k = t0 + (static_cast<double>(k) + 1.0) * delta;
            sr.mean_accepted = mean_of(accepted);
            sr.accepted_q05 = quantile(accepted, 0.05);
            sr.accepted_q95 = quantile(accepted, 0.95);
            sr.mean_failed = mean_of(failed);
            report.steps.push_back(std::move(sr));
          }
        }
      }
    }
  }
}

}  // namespace

Report run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SdeModel model = builtin(cfg.example);

  const double t_max = *std::max_element(cfg.horizons.begin(), cfg.horizons.end());
  PathGrid grid;
  grid.t0 = model.t0;
  grid.dt = cfg.grid_dt;
  grid.n_steps = static_cast<int>(std::lround(t_max / cfg.grid_dt));
  const bool use_ll = uses_ll_integrator(cfg.example);

  std::vector<ReplicateOutcome> outcomes(cfg.replicates);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  const auto worker = [&] {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= cfg.replicates) return;
      try {
        outcomes[rep] = run_replicate(cfg, model, grid, use_ll, rep);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const int n_workers = std::min(cfg.threads, cfg.replicates);
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Report report;
  report.example = cfg.example;
  report.seed = cfg.seed;
  report.param_names = model.param_names;
  report.theta_true = model.theta_true;
  report.variants = cfg.variants;
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    if (outcomes[rep].aborted) {
      report.aborted_replicates.push_back(rep);
      continue;
    }
    for (auto& rec : outcomes[rep].records) report.records.push_back(std::move(rec));
  }
  std::sort(report.records.begin(), report.records.end(),
            [](const EstimateRecord& a, const EstimateRecord& b) {
              return std::tie(a.replicate, a.variant, a.delta, a.horizon) <
                     std::tie(b.replicate, b.variant, b.delta, b.horizon);
            });
  aggregate(report, cfg, model.t0);
  return report;
}

namespace {

std::string csv_double(double v) { return std::isnan(v) ? "" : fmt(v); }

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
}

json stats_to_json(const std::vector<StepStats>& stats) {
  json arr = json::array();
  for (const auto& s : stats) arr.push_back({s.accepted, s.failed});
  return arr;
}

std::vector<StepStats> stats_from_json(const json& arr) {
  std::vector<StepStats> out;
  for (const auto& s : arr) out.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  return out;
}

json nan_safe(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double nan_restore(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

}  // namespace

void emit_report(const Report& report, const std::string& format, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  if (format == "json") {
    write_file(fs::path(dir) / "report.json", report_to_json(report));
    return;
  }
  if (format != "csv") throw ConfigError("unknown report format '" + format + "'");

  const auto label = [&](int v) { return report.variants[v].label(); };
  const auto h_or_tol = [&](int v) { return report.variants[v].h_or_tol(); };

  std::ostringstream est;
  est << "example,variant,beta,h_or_tol,delta,T,replicate,parameter,estimate,error_vs_exact,seed,"
         "converged\n";
  for (const auto& rec : report.records) {
    for (size_t jx = 0; jx < report.param_names.size(); ++jx) {
      est << report.example << ',' << label(rec.variant) << ',' << report.variants[rec.variant].beta()
          << ',' << h_or_tol(rec.variant) << ',' << fmt(rec.delta) << ',' << fmt(rec.horizon) << ','
          << rec.replicate << ',' << report.param_names[jx] << ',' << fmt(rec.estimate[jx]) << ','
          << (rec.error_vs_exact.empty() ? "" : csv_double(rec.error_vs_exact[jx])) << ','
          << report.seed << ',' << (rec.converged ? 1 : 0) << '\n';
    }
  }
  write_file(fs::path(dir) / "estimates.csv", est.str());

  std::ostringstream sum;
  sum << "example,variant,delta,T,parameter,n,mean,sd,q05,q95,bias,err_mean,err_sd\n";
  for (const auto& row : report.summary) {
    sum << report.example << ',' << label(row.variant) << ',' << fmt(row.delta) << ','
        << fmt(row.horizon) << ',' << row.parameter << ',' << row.n << ',' << fmt(row.mean) << ','
        << fmt(row.sd) << ',' << fmt(row.q05) << ',' << fmt(row.q95) << ',' << fmt(row.bias) << ','
        << csv_double(row.err_mean) << ',' << csv_double(row.err_sd) << '\n';
  }
  write_file(fs::path(dir) / "summary.csv", sum.str());

  std::ostringstream steps;
  steps << "example,variant,delta,T,t_k,mean_accepted,accepted_q05,accepted_q95,mean_failed\n";
  for (const auto& row : report.steps) {
    steps << report.example << ',' << label(row.variant) << ',' << fmt(row.delta) << ','
          << fmt(row.horizon) << ',' << fmt(row.t_k) << ',' << fmt(row.mean_accepted) << ','
          << fmt(row.accepted_q05) << ',' << fmt(row.accepted_q95) << ',' << fmt(row.mean_failed)
          << '\n';
  }
  write_file(fs::path(dir) / "steps.csv", steps.str());

  std::ostringstream hist;
  hist << "example,variant,delta,T,parameter,bin_lo,bin_hi,count\n";
  for (const auto& row : report.histograms) {
    hist << report.example << ',' << label(row.variant) << ',' << fmt(row.delta) << ','
         << fmt(row.horizon) << ',' << row.parameter << ',' << fmt(row.bin_lo) << ','
         << fmt(row.bin_hi) << ',' << row.count << '\n';
  }
  write_file(fs::path(dir) / "histograms.csv", hist.str());
}

std::string report_to_json(const Report& report) {
  json j;
  j["example"] = report.example;
  j["seed"] = report.seed;
  j["param_names"] = report.param_names;
  j["theta_true"] = report.theta_true;
  j["aborted_replicates"] = report.aborted_replicates;

  json variants = json::array();
  for (const auto& v : report.variants) variants.push_back(variant_to_json(v));
  j["variants"] = variants;

  json records = json::array();
  for (const auto& rec : report.records) {
    json r;
    r["replicate"] = rec.replicate;
    r["variant"] = rec.variant;
    r["delta"] = rec.delta;
    r["T"] = rec.horizon;
    r["estimate"] = rec.estimate;
    r["error_vs_exact"] = rec.error_vs_exact;
    r["objective"] = rec.objective;
    r["converged"] = rec.converged;
    r["interval_stats"] = stats_to_json(rec.interval_stats);
    records.push_back(std::move(r));
  }
  j["estimates"] = records;

  json summary = json::array();
  for (const auto& row : report.summary) {
    summary.push_back({{"variant", row.variant},
                       {"delta", row.delta},
                       {"T", row.horizon},
                       {"parameter", row.parameter},
                       {"n", row.n},
                       {"mean", row.mean},
                       {"sd", row.sd},
                       {"q05", row.q05},
                       {"q95", row.q95},
                       {"bias", row.bias},
                       {"err_mean", nan_safe(row.err_mean)},
                       {"err_sd", nan_safe(row.err_sd)}});
  }
  j["summary"] = summary;

  json steps = json::array();
  for (const auto& row : report.steps) {
    steps.push_back({{"variant", row.variant},
                     {"delta", row.delta},
                     {"T", row.horizon},
                     {"t_k", row.t_k},
                     {"mean_accepted", row.mean_accepted},
                     {"accepted_q05", row.accepted_q05},
                     {"accepted_q95", row.accepted_q95},
                     {"mean_failed", row.mean_failed}});
  }
  j["steps"] = steps;

  json hist = json::array();
  for (const auto& row : report.histograms) {
    hist.push_back({{"variant", row.variant},
                    {"delta", row.delta},
                    {"T", row.horizon},
                    {"parameter", row.parameter},
                    {"bin_lo", row.bin_lo},
                    {"bin_hi", row.bin_hi},
                    {"count", row.count}});
  }
  j["histograms"] = hist;
  return j.dump(2);
}

Report report_from_json(const std::string& text) {
  const json j = json::parse(text);
  Report report;
  report.example = j.at("example").get<std::string>();
  report.seed = j.at("seed").get<uint64_t>();
  report.param_names = j.at("param_names").get<std::vector<std::string>>();
  report.theta_true = j.at("theta_true").get<Vector>();
  report.aborted_replicates = j.at("aborted_replicates").get<std::vector<int>>();
  for (const auto& vj : j.at("variants"))
    report.variants.push_back(parse_variant(vj, "report variants"));
  for (const auto& r : j.at("estimates")) {
    EstimateRecord rec;
    rec.replicate = r.at("replicate").get<int>();
    rec.variant = r.at("variant").get<int>();
    rec.delta = r.at("delta").get<double>();
    rec.horizon = r.at("T").get<double>();
    rec.estimate = r.at("estimate").get<Vector>();
    rec.error_vs_exact = r.at("error_vs_exact").get<std::vector<double>>();
    rec.objective = r.at("objective").get<double>();
    rec.converged = r.at("converged").get<bool>();
    rec.interval_stats = stats_from_json(r.at("interval_stats"));
    report.records.push_back(std::move(rec));
  }
  for (const auto& r : j.at("summary")) {
    SummaryRow row;
    row.variant = r.at("variant").get<int>();
    row.delta = r.at("delta").get<double>();
    row.horizon = r.at("T").get<double>();
    row.parameter = r.at("parameter").get<std::string>();
    row.n = r.at("n").get<int>();
    row.mean = r.at("mean").get<double>();
    row.sd = r.at("sd").get<double>();
    row.q05 = r.at("q05").get<double>();
    row.q95 = r.at("q95").get<double>();
    row.bias = r.at("bias").get<double>();
    row.err_mean = nan_restore(r.at("err_mean"));
    row.err_sd = nan_restore(r.at("err_sd"));
    report.summary.push_back(std::move(row));
  }
  for (const auto& r : j.at("steps")) {
    StepsRow row;
    row.variant = r.at("variant").get<int>();
    row.delta = r.at("delta").get<double>();
    row.horizon = r.at("T").get<double>();
    row.t_k = r.at("t_k").get<double>();
    row.mean_accepted = r.at("mean_accepted").get<double>();
    row.accepted_q05 = r.at("accepted_q05").get<double>();
    row.accepted_q95 = r.at("accepted_q95").get<double>();
    row.mean_failed = r.at("mean_failed").get<double>();
    report.steps.push_back(std::move(row));
  }
  for (const auto& r : j.at("histograms")) {
    HistogramRow row;
    row.variant = r.at("variant").get<int>();
    row.delta = r.at("delta").get<double>();
    row.horizon = r.at("T").get<double>();
    row.parameter = r.at("parameter").get<std::string>();
    row.bin_lo = r.at("bin_lo").get<double>();
    row.bin_hi = r.at("bin_hi").get<double>();
    row.count = r.at("count").get<int>();
    report.histograms.push_back(std::move(row));
  }
  return report;
}

namespace {

bool same(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

bool same(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!same(a[i], b[i])) return false;
  return true;
}

}  // namespace

bool reports_equal(const Report& a, const Report& b) {
  if (a.example != b.example || a.seed != b.seed || a.param_names != b.param_names ||
      !same(a.theta_true, b.theta_true) || a.aborted_replicates != b.aborted_replicates)
    return false;
  if (a.variants.size() != b.variants.size() || a.records.size() != b.records.size() ||
      a.summary.size() != b.summary.size() || a.steps.size() != b.steps.size() ||
      a.histograms.size() != b.histograms.size())
    return false;
  for (size_t i = 0; i < a.variants.size(); ++i) {
    const auto& x = a.variants[i];
    const auto& y = b.variants[i];
    if (x.kind != y.kind || !same(x.h, y.h) || !same(x.h_divisor, y.h_divisor) ||
        !same(x.rtol_y, y.rtol_y) || !same(x.rtol_P, y.rtol_P) || !same(x.atol_y, y.atol_y) ||
        !same(x.atol_P, y.atol_P))
      return false;
  }
  for (size_t i = 0; i < a.records.size(); ++i) {
    const auto& x = a.records[i];
    const auto& y = b.records[i];
    if (x.replicate != y.replicate || x.variant != y.variant || !same(x.delta, y.delta) ||
        !same(x.horizon, y.horizon) || !same(x.estimate, y.estimate) ||
        !same(x.error_vs_exact, y.error_vs_exact) || !same(x.objective, y.objective) ||
        x.converged != y.converged || x.interval_stats.size() != y.interval_stats.size())
      return false;
    for (size_t k = 0; k < x.interval_stats.size(); ++k)
      if (x.interval_stats[k].accepted != y.interval_stats[k].accepted ||
          x.interval_stats[k].failed != y.interval_stats[k].failed)
        return false;
  }
  for (size_t i = 0; i < a.summary.size(); ++i) {
    const auto& x = a.summary[i];
    const auto& y = b.summary[i];
    if (x.variant != y.variant || !same(x.delta, y.delta) || !same(x.horizon, y.horizon) ||
        x.parameter != y.parameter || x.n != y.n || !same(x.mean, y.mean) || !same(x.sd, y.sd) ||
        !same(x.q05, y.q05) || !same(x.q95, y.q95) || !same(x.bias, y.bias) ||
        !same(x.err_mean, y.err_mean) || !same(x.err_sd, y.err_sd))
      return false;
  }
  for (size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.variant != y.variant || !same(x.delta, y.delta) || !same(x.horizon, y.horizon) ||
        !same(x.t_k, y.t_k) || !same(x.mean_accepted, y.mean_accepted) ||
        !same(x.accepted_q05, y.accepted_q05) || !same(x.accepted_q95, y.accepted_q95) ||
        !same(x.mean_failed, y.mean_failed))
      return false;
  }
  for (size_t i = 0; i < a.histograms.size(); ++i) {
    const auto& x = a.histograms[i];
    const auto& y = b.histograms[i];
    if (x.variant != y.variant || !same(x.delta, y.delta) || !same(x.horizon, y.horizon) ||
        x.parameter != y.parameter || !same(x.bin_lo, y.bin_lo) || !same(x.bin_hi, y.bin_hi) ||
        x.count != y.count)
      return false;
  }
  return true;
}

}  // namespace sdeqml
