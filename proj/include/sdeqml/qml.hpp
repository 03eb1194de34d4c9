#pragma once

#include <string>

#include "sdeqml/ll_moments.hpp"

namespace sdeqml {

struct NonFiniteStart : std::runtime_error {
  explicit NonFiniteStart(const std::string& what) : std::runtime_error(what) {}
};

enum class MomentSource { ll, exact_oracle };

// Everything needed to evaluate the quasi-likelihood of one series under one
// moment approximation.
struct ObjectiveSpec {
  const SdeModel* model = nullptr;
  const ObservationSeries* data = nullptr;
  DiscretizationPolicy policy = DiscretizationPolicy::conventional();
  int beta = 1;
  MomentSource source = MomentSource::ll;
};

// Negative twice the Gaussian log-likelihood built from the approximate
// conditional moments:
//   d (M-1) ln(2 pi) + sum_k [ ln det Sigma_k + (z_k - mu_k)^T Sigma_k^{-1} (z_k - mu_k) ].
// Returns +infinity when any predicted variance fails its Cholesky
// factorization, so minimizers steer away from such parameter points.
// When interval_stats is non-null it receives one StepStats per interval
// (empty for the exact-oracle source).
double objective(const ObjectiveSpec& spec, const Vector& theta,
                 std::vector<StepStats>* interval_stats = nullptr);

struct MinimizeOptions {
  int max_iters = 2000;
  double xtol = 1e-8;
  double ftol = 1e-10;
};

struct NelderMeadResult {
  Vector x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;
  long evaluations = 0;
};

// Derivative-free simplex minimization over a box; every trial point is
// projected into the box before evaluation. Throws NonFiniteStart when the
// objective is not finite at the starting point.
NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& fn,
                             const ParameterBox& box, const Vector& init,
                             const MinimizeOptions& opts = {});

struct EstimateResult {
  ParameterVector theta_hat;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  long evaluations = 0;
  std::vector<StepStats> step_stats;  // per interval, evaluated at theta_hat
};

// Nelder-Mead simplex with projection onto the parameter box. Terminates on
// simplex diameter < xtol, relative objective spread < ftol, or max_iters.
EstimateResult minimize(const ObjectiveSpec& spec, const ParameterVector& init,
                        const MinimizeOptions& opts = {});

// The estimator family of the simulation study.
struct EstimatorVariant {
  enum class Kind { exact, conventional, order1_uniform, order1_adaptive, order2_uniform };

  Kind kind = Kind::conventional;
  double h = 0.0;  // uniform variants
  double rtol_y = 5e-6, rtol_P = 5e-6, atol_y = 5e-9, atol_P = 5e-12;

  static EstimatorVariant exact();
  static EstimatorVariant conventional();
  static EstimatorVariant order1_uniform(double h);
  static EstimatorVariant order1_adaptive(double rtol_y, double rtol_P, double atol_y, double atol_P);
  static EstimatorVariant order2_uniform(double h);

  int beta() const { return kind == Kind::order2_uniform ? 2 : 1; }
  std::string kind_name() const;
};

ObjectiveSpec make_objective_spec(const SdeModel& model, const ObservationSeries& data,
                                  const EstimatorVariant& variant);

EstimateResult estimate(const SdeModel& model, const ObservationSeries& data,
                        const EstimatorVariant& variant, const ParameterVector& init,
                        const MinimizeOptions& opts = {});

}  // namespace sdeqml
