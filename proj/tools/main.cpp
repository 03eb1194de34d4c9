// Command-line front end: simulate paths, fit a single series, run the
// Monte-Carlo experiment harness, or query the closed-form moment oracles.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdeqml/harness.hpp"

namespace {

using namespace sdeqml;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Vector parse_number_list(const std::string& text) {
  Vector out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

ObservationSeries load_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open data file '" + path + "'");
  Vector times;
  std::vector<Vector> obs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0 || line == "t") continue;  // header
    }
    std::stringstream ss(line);
    std::string cell;
    Vector row;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() < 2) throw ConfigError("data rows need a time and at least one coordinate");
    times.push_back(row.front());
    obs.emplace_back(row.begin() + 1, row.end());
  }
  return ObservationSeries(std::move(times), std::move(obs));
}

void write_path_csv(std::ostream& out, const Path& path) {
  out << "t";
  for (size_t j = 0; j < path.states.front().size(); ++j) out << ",x" << j + 1;
  out << "\n";
  for (size_t n = 0; n < path.states.size(); ++n) {
    out << fmt(path.time(static_cast<int>(n)));
    for (double x : path.states[n]) out << ',' << fmt(x);
    out << "\n";
  }
}

int cmd_simulate(const std::string& example, uint64_t seed, double dt, double horizon,
                 const std::string& out_path) {
  const SdeModel model = builtin(example);
  PathGrid grid;
  grid.t0 = model.t0;
  grid.dt = dt;
  grid.n_steps = static_cast<int>(std::lround(horizon / dt));
  RngStream rng(seed, 0);
  const bool use_ll = example == "example2" || example == "example3" || example == "ou";
  const Path path = use_ll ? ll_path(model, model.true_parameters(), grid, rng)
                           : euler_path(model, model.true_parameters(), grid, rng);
  if (out_path.empty() || out_path == "-") {
    write_path_csv(std::cout, path);
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + out_path + "'");
    write_path_csv(out, path);
  }
  return kExitOk;
}

int cmd_estimate(const std::string& example, const std::string& data_path,
                 const std::string& variant_name, double h, double h_divisor, double rtol_y,
                 double rtol_P, double atol_y, double atol_P, const std::string& init_text) {
  const SdeModel model = builtin(example);
  const ObservationSeries series = load_series_csv(data_path);
  if (series.dimension() != model.d)
    throw ConfigError("data dimension does not match model '" + example + "'");

  VariantSpec spec;
  spec.kind = [&] {
    if (variant_name == "exact") return EstimatorVariant::Kind::exact;
    if (variant_name == "conventional") return EstimatorVariant::Kind::conventional;
    if (variant_name == "order1_uniform") return EstimatorVariant::Kind::order1_uniform;
    if (variant_name == "order1_adaptive") return EstimatorVariant::Kind::order1_adaptive;
    if (variant_name == "order2_uniform") return EstimatorVariant::Kind::order2_uniform;
    throw ConfigError("unknown variant '" + variant_name + "'");
  }();
  spec.h = h;
  spec.h_divisor = h_divisor;
  spec.rtol_y = rtol_y;
  spec.rtol_P = rtol_P;
  spec.atol_y = atol_y;
  spec.atol_P = atol_P;

  double min_gap = series.time(1) - series.time(0);
  for (int k = 2; k < series.size(); ++k)
    min_gap = std::min(min_gap, series.time(k) - series.time(k - 1));
  const EstimatorVariant variant = spec.resolve(min_gap);
  if ((variant.kind == EstimatorVariant::Kind::order1_uniform ||
       variant.kind == EstimatorVariant::Kind::order2_uniform) &&
      !(variant.h > 0.0))
    throw ConfigError("uniform variants need --step or --h-divisor");

  Vector init_values = init_text.empty() ? model.theta_true : parse_number_list(init_text);
  if (static_cast<int>(init_values.size()) != model.p)
    throw ConfigError("--init needs " + std::to_string(model.p) + " comma-separated values");
  const ParameterVector init(init_values, model.box);

  const EstimateResult result = estimate(model, series, variant, init);

  nlohmann::json j;
  j["model"] = example;
  j["variant"] = spec.label();
  j["parameters"] = nlohmann::json::object();
  for (int i = 0; i < model.p; ++i) j["parameters"][model.param_names[i]] = result.theta_hat[i];
  j["objective"] = result.objective;
  j["iterations"] = result.iterations;
  j["converged"] = result.converged;
  j["evaluations"] = result.evaluations;
  nlohmann::json stats = nlohmann::json::array();
  for (const auto& s : result.step_stats) stats.push_back({{"accepted", s.accepted}, {"failed", s.failed}});
  j["interval_steps"] = stats;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_oracle(const std::string& example, const std::string& z_text, double t_from, double t_to,
               const std::string& theta_text) {
  const SdeModel model = builtin(example);
  const Vector z = parse_number_list(z_text);
  if (static_cast<int>(z.size()) != model.d)
    throw ConfigError("--z needs " + std::to_string(model.d) + " comma-separated values");
  Vector theta_values = theta_text.empty() ? model.theta_true : parse_number_list(theta_text);
  const ParameterVector theta(theta_values, model.box);
  const MomentPair pair = exact_conditional_moments(model, theta, z, t_from, t_to);

  nlohmann::json j;
  j["model"] = example;
  j["mu"] = pair.mu;
  nlohmann::json sigma = nlohmann::json::array();
  for (int i = 0; i < pair.sigma.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < pair.sigma.cols(); ++c) row.push_back(pair.sigma(i, c));
    sigma.push_back(row);
  }
  j["sigma"] = sigma;
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_experiment(const std::string& config_path, bool seed_set, uint64_t seed, int threads,
                   const std::string& out_dir, const std::string& format) {
  ExperimentConfig cfg = load_config(config_path);
  if (seed_set) cfg.seed = seed;
  if (threads > 0) cfg.threads = threads;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const Report report = run_experiment(cfg);
  emit_report(report, format, cfg.out_dir);
  std::cerr << "wrote report for " << report.records.size() << " fits ("
            << report.aborted_replicates.size() << " replicates aborted) to " << cfg.out_dir
            << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-maximum likelihood estimation of SDE parameters via local-linearization moments"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "simulate one path and emit it as CSV");
  std::string sim_example = "example1", sim_out;
  uint64_t sim_seed = 1;
  double sim_dt = 1e-3, sim_T = 10.0;
  sim->add_option("--example", sim_example, "builtin model name");
  sim->add_option("--seed", sim_seed, "rng seed");
  sim->add_option("--dt", sim_dt, "grid spacing");
  sim->add_option("--T", sim_T, "horizon length");
  sim->add_option("--out", sim_out, "output file ('-' for stdout)");

  // estimate
  auto* est = app.add_subcommand("estimate", "fit one observation series, print the result as JSON");
  std::string est_example = "example1", est_data, est_variant = "conventional", est_init;
  double est_h = 0.0, est_hdiv = 0.0;
  double est_rtol_y = 5e-6, est_rtol_P = 5e-6, est_atol_y = 5e-9, est_atol_P = 5e-12;
  est->add_option("--example", est_example, "builtin model name");
  est->add_option("--data", est_data, "observation CSV (columns t,x1..xd)")->required();
  est->add_option("--variant", est_variant,
                  "exact | conventional | order1_uniform | order1_adaptive | order2_uniform");
  est->add_option("--step", est_h, "uniform sub-step size");
  est->add_option("--h-divisor", est_hdiv, "uniform sub-step as (min gap)/divisor");
  est->add_option("--rtol-y", est_rtol_y, "adaptive mean relative tolerance");
  est->add_option("--rtol-P", est_rtol_P, "adaptive second-moment relative tolerance");
  est->add_option("--atol-y", est_atol_y, "adaptive mean absolute tolerance");
  est->add_option("--atol-P", est_atol_P, "adaptive second-moment absolute tolerance");
  est->add_option("--init", est_init, "starting parameters (comma list; default: true values)");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a Monte-Carlo experiment from a config file");
  std::string exp_config, exp_out, exp_format = "csv";
  uint64_t exp_seed = 0;
  int exp_threads = 0;
  exp->add_option("--config", exp_config, "experiment config (JSON)")->required();
  auto* seed_opt = exp->add_option("--seed", exp_seed, "override the config seed");
  exp->add_option("--threads", exp_threads, "override the config worker count");
  exp->add_option("--out", exp_out, "override the config output directory");
  exp->add_option("--format", exp_format, "csv | json");

  // oracle
  auto* ora = app.add_subcommand("oracle", "print closed-form conditional moments");
  std::string ora_example = "example1", ora_z = "1", ora_theta;
  double ora_from = 0.5, ora_to = 1.5;
  ora->add_option("--example", ora_example, "builtin model name");
  ora->add_option("--z", ora_z, "conditioning state (comma list)");
  ora->add_option("--from", ora_from, "interval start");
  ora->add_option("--to", ora_to, "interval end");
  ora->add_option("--theta", ora_theta, "parameters (comma list; default: true values)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_example, sim_seed, sim_dt, sim_T, sim_out);
    if (est->parsed())
      return cmd_estimate(est_example, est_data, est_variant, est_h, est_hdiv, est_rtol_y,
                          est_rtol_P, est_atol_y, est_atol_P, est_init);
    if (exp->parsed())
      return cmd_experiment(exp_config, seed_opt->count() > 0, exp_seed, exp_threads, exp_out,
                            exp_format);
    if (ora->parsed()) return cmd_oracle(ora_example, ora_z, ora_from, ora_to, ora_theta);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnknownModel& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoOracle& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SimulationBlowup& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NonFiniteStart& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const StepUnderflow& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
