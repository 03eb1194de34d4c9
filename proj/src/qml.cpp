#include "sdeqml/qml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace sdeqml {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double objective(const ObjectiveSpec& spec, const Vector& theta,
                 std::vector<StepStats>* interval_stats) {
  const SdeModel& model = *spec.model;
  const ObservationSeries& data = *spec.data;
  if (spec.source == MomentSource::exact_oracle && !model.has_oracle())
    throw NoOracle("exact-oracle objective requested for model without closed-form moments");
  if (interval_stats) interval_stats->clear();

  const int last = data.size() - 1;
  double total = model.d * last * std::log(2.0 * std::numbers::pi);
  for (int k = 1; k <= last; ++k) {
    Vector mu;
    Matrix sigma;
    if (spec.source == MomentSource::exact_oracle) {
      MomentPair pair = model.exact_moments(theta, data.observation(k - 1), data.time(k - 1), data.time(k));
      mu = std::move(pair.mu);
      sigma = std::move(pair.sigma);
    } else {
      // Trial parameters that blow the propagation up (overflowing
      // coefficients, vanishing adaptive steps) are rejected the same way a
      // non-PD variance is.
      Propagated prop;
      try {
        prop = propagate(model, theta, data.observation(k - 1), data.time(k - 1), data.time(k),
                         spec.policy, spec.beta);
      } catch (const NonFiniteEvaluation&) {
        return kInf;
      } catch (const StepUnderflow&) {
        return kInf;
      }
      mu = std::move(prop.mu);
      sigma = std::move(prop.sigma);
      if (interval_stats) interval_stats->push_back(prop.stats);
    }
    Vector resid(model.d);
    for (int i = 0; i < model.d; ++i) resid[i] = data.observation(k)[i] - mu[i];
    const auto lq = chol_logdet_quad(sigma, resid);
    if (!lq) return kInf;
    total += lq->logdet + lq->quad;
  }
  return total;
}

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& fn,
                             const ParameterBox& box, const Vector& init,
                             const MinimizeOptions& opts) {
  const int n = static_cast<int>(init.size());
  long evaluations = 0;
  const auto eval = [&](const Vector& x) {
    ++evaluations;
    return fn(x);
  };

  // Initial simplex around the (projected) start point; vertices that the
  // box projection would collapse get flipped to the other side.
  std::vector<Vector> pts(n + 1, box.project(init));
  for (int i = 0; i < n; ++i) {
    const double scale = std::max(0.1 * std::fabs(pts[0][i]), 0.05);
    Vector v = pts[0];
    v[i] += scale;
    v = box.project(std::move(v));
    if (v[i] == pts[0][i]) {
      v[i] = pts[0][i] - scale;
      v = box.project(std::move(v));
    }
    pts[i + 1] = std::move(v);
  }

  std::vector<double> f(n + 1);
  for (int i = 0; i <= n; ++i) f[i] = eval(pts[i]);
  if (!std::isfinite(f[0]))
    throw NonFiniteStart("nelder_mead: objective is not finite at the starting point");

  std::vector<int> order(n + 1);
  const auto sort_order = [&] {
    for (int i = 0; i <= n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
  };

  const auto centroid_excluding = [&](int worst) {
    Vector c(n, 0.0);
    for (int i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (int j = 0; j < n; ++j) c[j] += pts[i][j];
    }
    for (int j = 0; j < n; ++j) c[j] /= n;
    return c;
  };

  int iterations = 0;
  bool converged = false;
  for (; iterations < opts.max_iters; ++iterations) {
    sort_order();
    const int best = order[0], worst = order[n];

    double diameter = 0.0;
    for (int i = 0; i <= n; ++i)
      for (int j = 0; j < n; ++j)
        diameter = std::max(diameter, std::fabs(pts[i][j] - pts[best][j]));
    const bool spread_small =
        std::isfinite(f[worst]) &&
        2.0 * (f[worst] - f[best]) < opts.ftol * (std::fabs(f[worst]) + std::fabs(f[best]) + 1e-300);
    if (diameter < opts.xtol || spread_small) {
      converged = true;
      break;
    }

    const Vector c = centroid_excluding(worst);
    const auto blend = [&](double coef) {
      Vector x(n);
      for (int j = 0; j < n; ++j) x[j] = c[j] + coef * (c[j] - pts[worst][j]);
      return box.project(std::move(x));
    };

    const Vector xr = blend(1.0);
    const double fr = eval(xr);
    if (fr < f[best]) {
      const Vector xe = blend(2.0);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[worst] = xe;
        f[worst] = fe;
      } else {
        pts[worst] = xr;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[order[n - 1]]) {
      pts[worst] = xr;
      f[worst] = fr;
      continue;
    }
    // Contraction: outside when the reflection improved on the worst vertex,
    // inside otherwise.
    if (fr < f[worst]) {
      const Vector xc = blend(0.5);
      const double fc = eval(xc);
      if (fc <= fr) {
        pts[worst] = xc;
        f[worst] = fc;
        continue;
      }
    } else {
      const Vector xc = blend(-0.5);
      const double fc = eval(xc);
      if (fc < f[worst]) {
        pts[worst] = xc;
        f[worst] = fc;
        continue;
      }
    }
    // Shrink toward the best vertex.
    for (int i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (int j = 0; j < n; ++j) pts[i][j] = pts[best][j] + 0.5 * (pts[i][j] - pts[best][j]);
      pts[i] = box.project(std::move(pts[i]));
      f[i] = eval(pts[i]);
    }
  }

  sort_order();
  const int best = order[0];
  return {pts[best], f[best], iterations, converged, evaluations};
}

EstimateResult minimize(const ObjectiveSpec& spec, const ParameterVector& init,
                        const MinimizeOptions& opts) {
  const NelderMeadResult nm = nelder_mead(
      [&](const Vector& x) { return objective(spec, x); }, init.box(), init.values(), opts);
  EstimateResult result{ParameterVector(nm.x, init.box()), nm.fx, nm.iterations, nm.converged,
                        nm.evaluations, {}};
  if (spec.source == MomentSource::ll) {
    objective(spec, nm.x, &result.step_stats);
    ++result.evaluations;
  }
  return result;
}

EstimatorVariant EstimatorVariant::exact() {
  EstimatorVariant v;
  v.kind = Kind::exact;
  return v;
}

EstimatorVariant EstimatorVariant::conventional() {
  EstimatorVariant v;
  v.kind = Kind::conventional;
  return v;
}

EstimatorVariant EstimatorVariant::order1_uniform(double h) {
  EstimatorVariant v;
  v.kind = Kind::order1_uniform;
  v.h = h;
  return v;
}

EstimatorVariant EstimatorVariant::order1_adaptive(double rtol_y, double rtol_P, double atol_y,
                                                   double atol_P) {
  EstimatorVariant v;
  v.kind = Kind::order1_adaptive;
  v.rtol_y = rtol_y;
  v.rtol_P = rtol_P;
  v.atol_y = atol_y;
  v.atol_P = atol_P;
  return v;
}

EstimatorVariant EstimatorVariant::order2_uniform(double h) {
  EstimatorVariant v;
  v.kind = Kind::order2_uniform;
  v.h = h;
  return v;
}

std::string EstimatorVariant::kind_name() const {
  switch (kind) {
    case Kind::exact: return "exact";
    case Kind::conventional: return "conventional";
    case Kind::order1_uniform: return "order1_uniform";
    case Kind::order1_adaptive: return "order1_adaptive";
    case Kind::order2_uniform: return "order2_uniform";
  }
  return "?";
}

ObjectiveSpec make_objective_spec(const SdeModel& model, const ObservationSeries& data,
                                  const EstimatorVariant& variant) {
  ObjectiveSpec spec;
  spec.model = &model;
  spec.data = &data;
  spec.beta = variant.beta();
  switch (variant.kind) {
    case EstimatorVariant::Kind::exact:
      spec.source = MomentSource::exact_oracle;
      break;
    case EstimatorVariant::Kind::conventional:
      spec.policy = DiscretizationPolicy::conventional();
      break;
    case EstimatorVariant::Kind::order1_uniform:
    case EstimatorVariant::Kind::order2_uniform:
      spec.policy = DiscretizationPolicy::uniform(variant.h);
      break;
    case EstimatorVariant::Kind::order1_adaptive:
      spec.policy = DiscretizationPolicy::adaptive(variant.rtol_y, variant.rtol_P,
                                                   variant.atol_y, variant.atol_P);
      break;
  }
  return spec;
}

EstimateResult estimate(const SdeModel& model, const ObservationSeries& data,
                        const EstimatorVariant& variant, const ParameterVector& init,
                        const MinimizeOptions& opts) {
  if (variant.kind == EstimatorVariant::Kind::exact && !model.has_oracle())
    throw NoOracle("exact estimator requested for model without closed-form moments");
  const ObjectiveSpec spec = make_objective_spec(model, data, variant);
  return minimize(spec, init, opts);
}

}  // namespace sdeqml
