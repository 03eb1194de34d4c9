#include "sdeqml/sde_model.hpp"

#include <cmath>

namespace sdeqml {

ParameterBox::ParameterBox(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw std::invalid_argument("ParameterBox: size mismatch");
  for (size_t i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
      throw std::invalid_argument("ParameterBox: bounds must be finite with lower < upper");
  }
}

Vector ParameterBox::project(Vector v) const {
  if (v.size() != lower_.size()) throw std::invalid_argument("ParameterBox::project: size mismatch");
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::min(std::max(v[i], lower_[i]), upper_[i]);
  return v;
}

bool ParameterBox::contains(const Vector& v) const {
  if (v.size() != lower_.size()) return false;
  for (size_t i = 0; i < v.size(); ++i)
    if (v[i] < lower_[i] || v[i] > upper_[i]) return false;
  return true;
}

ParameterVector::ParameterVector(Vector values, ParameterBox box)
    : values_(box.project(std::move(values))), box_(std::move(box)) {}

Matrix SdeModel::diffusion_matrix(double t, const Vector& x, const Vector& th) const {
  Matrix g(d, m);
  for (int i = 0; i < m; ++i) {
    const Vector gi = diffusion(t, x, th, i);
    for (int r = 0; r < d; ++r) g(r, i) = gi[r];
  }
  return g;
}

ObservationSeries::ObservationSeries(Vector times, std::vector<Vector> observations)
    : times_(std::move(times)), observations_(std::move(observations)) {
  if (times_.size() < 2) throw std::invalid_argument("ObservationSeries: at least two observations required");
  if (times_.size() != observations_.size())
    throw std::invalid_argument("ObservationSeries: times/observations length mismatch");
  const size_t d = observations_.front().size();
  for (size_t k = 0; k < times_.size(); ++k) {
    if (k > 0 && !(times_[k] > times_[k - 1]))
      throw std::invalid_argument("ObservationSeries: times must be strictly increasing");
    if (observations_[k].size() != d)
      throw std::invalid_argument("ObservationSeries: inconsistent observation dimension");
  }
}

MomentPair exact_conditional_moments(const SdeModel& model, const ParameterVector& theta,
                                     const Vector& z, double t_from, double t_to) {
  if (!model.has_oracle())
    throw NoOracle("model '" + model.name + "' has no closed-form conditional moments");
  if (t_to < t_from) throw std::invalid_argument("exact_conditional_moments: t_to < t_from");
  return model.exact_moments(theta.values(), z, t_from, t_to);
}

namespace {

// expm1(u)/u, continuous through u = 0.
double phi1(double u) {
  if (std::fabs(u) < 1e-8) return 1.0 + 0.5 * u + u * u / 6.0;
  return std::expm1(u) / u;
}

// Default box [-10|th0|-1, 10|th0|+1]; coordinates flagged positive get a
// small positive lower bound instead.
ParameterBox default_box(const Vector& theta_true, const std::vector<bool>& positive) {
  Vector lo(theta_true.size()), hi(theta_true.size());
  for (size_t i = 0; i < theta_true.size(); ++i) {
    const double w = 10.0 * std::fabs(theta_true[i]) + 1.0;
    hi[i] = w;
    lo[i] = positive[i] ? 1e-8 : -w;
  }
  return {lo, hi};
}

Matrix zero_matrix(int d) { return Matrix(d, d); }
Vector zero_vector(int d) { return Vector(d, 0.0); }

SdeModel make_example1() {
  SdeModel mdl;
  mdl.name = "example1";
  mdl.d = 1;
  mdl.m = 1;
  mdl.p = 2;
  mdl.t0 = 0.5;
  mdl.x0 = {1.0};
  mdl.theta_true = {-0.1, 0.1};
  mdl.param_names = {"alpha", "sigma"};
  mdl.box = default_box(mdl.theta_true, {false, true});
  mdl.drift = [](double t, const Vector& x, const Vector& th) { return Vector{th[0] * t * x[0]}; };
  mdl.diffusion = [](double t, const Vector& x, const Vector& th, int) {
    return Vector{th[1] * std::sqrt(t) * x[0]};
  };
  mdl.drift_jac = [](double t, const Vector&, const Vector& th) { return Matrix{{th[0] * t}}; };
  mdl.diffusion_jac = [](double t, const Vector&, const Vector& th, int) {
    return Matrix{{th[1] * std::sqrt(t)}};
  };
  mdl.drift_dt = [](double, const Vector& x, const Vector& th) { return Vector{th[0] * x[0]}; };
  mdl.diffusion_dt = [](double t, const Vector& x, const Vector& th, int) {
    return Vector{th[1] * x[0] / (2.0 * std::sqrt(t))};
  };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(1); };
  mdl.exact_moments = [](const Vector& th, const Vector& z, double t_from, double t_to) {
    const double a = th[0], s = th[1];
    const double q = t_to * t_to - t_from * t_from;
    const double mu = z[0] * std::exp(a * q / 2.0);
    // z^2 e^{(a+s^2/2)q} - mu^2 rearranged to avoid cancellation near s = 0
    const double var = z[0] * z[0] * std::exp(a * q) * std::expm1(s * s * q / 2.0);
    return MomentPair{{mu}, Matrix{{var}}};
  };
  return mdl;
}

SdeModel make_example2() {
  SdeModel mdl;
  mdl.name = "example2";
  mdl.d = 1;
  mdl.m = 2;
  mdl.p = 3;
  mdl.t0 = 0.01;
  mdl.x0 = {10.0};
  mdl.theta_true = {-0.25, 5.0, 0.1};
  mdl.param_names = {"alpha", "sigma", "rho"};
  mdl.box = default_box(mdl.theta_true, {false, true, true});
  mdl.drift = [](double t, const Vector& x, const Vector& th) { return Vector{th[0] * t * x[0]}; };
  mdl.diffusion = [](double t, const Vector&, const Vector& th, int i) {
    if (i == 0) return Vector{th[1] * t * t * std::exp(th[0] * t * t / 2.0)};
    return Vector{th[2] * std::sqrt(t)};
  };
  mdl.drift_jac = [](double t, const Vector&, const Vector& th) { return Matrix{{th[0] * t}}; };
  mdl.diffusion_jac = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.drift_dt = [](double, const Vector& x, const Vector& th) { return Vector{th[0] * x[0]}; };
  mdl.diffusion_dt = [](double t, const Vector&, const Vector& th, int i) {
    if (i == 0)
      return Vector{th[1] * (2.0 * t + th[0] * t * t * t) * std::exp(th[0] * t * t / 2.0)};
    return Vector{th[2] / (2.0 * std::sqrt(t))};
  };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(1); };
  mdl.exact_moments = [](const Vector& th, const Vector& z, double t_from, double t_to) {
    const double a = th[0], s = th[1], r = th[2];
    const double q = t_to * t_to - t_from * t_from;
    const double mu = z[0] * std::exp(a * q / 2.0);
    const double from_rho = r * r * q / 2.0 * phi1(a * q);
    const double from_sigma =
        s * s / 5.0 * (std::pow(t_to, 5) - std::pow(t_from, 5)) * std::exp(a * t_to * t_to);
    return MomentPair{{mu}, Matrix{{from_rho + from_sigma}}};
  };
  return mdl;
}

// Van der Pol drift Hessian of the second component, shared by examples 3
// and 4 (their drifts differ only in terms linear in the state).
Matrix vdp_hess_comp2(const Vector& x) {
  return Matrix{{-2.0 * x[1], -2.0 * x[0]}, {-2.0 * x[0], 0.0}};
}

SdeModel make_example3() {
  SdeModel mdl;
  mdl.name = "example3";
  mdl.d = 2;
  mdl.m = 1;
  mdl.p = 2;
  mdl.t0 = 0.0;
  mdl.x0 = {1.0, 1.0};
  mdl.theta_true = {0.5, 0.75};
  mdl.param_names = {"alpha", "sigma"};
  mdl.box = default_box(mdl.theta_true, {false, true});
  mdl.drift = [](double, const Vector& x, const Vector& th) {
    return Vector{x[1], -(x[0] * x[0] - 1.0) * x[1] - x[0] + th[0]};
  };
  mdl.diffusion = [](double, const Vector&, const Vector& th, int) { return Vector{0.0, th[1]}; };
  mdl.drift_jac = [](double, const Vector& x, const Vector&) {
    return Matrix{{0.0, 1.0}, {-2.0 * x[0] * x[1] - 1.0, 1.0 - x[0] * x[0]}};
  };
  mdl.diffusion_jac = [](double, const Vector&, const Vector&, int) { return zero_matrix(2); };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return zero_vector(2); };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return zero_vector(2); };
  mdl.drift_hess = [](double, const Vector& x, const Vector&, int comp) {
    return comp == 1 ? vdp_hess_comp2(x) : zero_matrix(2);
  };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(2); };
  return mdl;
}

SdeModel make_example4() {
  SdeModel mdl;
  mdl.name = "example4";
  mdl.d = 2;
  mdl.m = 1;
  mdl.p = 2;
  mdl.t0 = 0.0;
  mdl.x0 = {1.0, 1.0};
  mdl.theta_true = {1.0, 1.0};
  mdl.param_names = {"alpha", "sigma"};
  mdl.box = default_box(mdl.theta_true, {false, true});
  mdl.drift = [](double, const Vector& x, const Vector& th) {
    return Vector{x[1], -(x[0] * x[0] - 1.0) * x[1] - th[0] * x[0]};
  };
  mdl.diffusion = [](double, const Vector& x, const Vector& th, int) {
    return Vector{0.0, th[1] * x[0]};
  };
  mdl.drift_jac = [](double, const Vector& x, const Vector& th) {
    return Matrix{{0.0, 1.0}, {-2.0 * x[0] * x[1] - th[0], 1.0 - x[0] * x[0]}};
  };
  mdl.diffusion_jac = [](double, const Vector&, const Vector& th, int) {
    return Matrix{{0.0, 0.0}, {th[1], 0.0}};
  };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return zero_vector(2); };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return zero_vector(2); };
  mdl.drift_hess = [](double, const Vector& x, const Vector&, int comp) {
    return comp == 1 ? vdp_hess_comp2(x) : zero_matrix(2);
  };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(2); };
  return mdl;
}

SdeModel make_ou() {
  SdeModel mdl;
  mdl.name = "ou";
  mdl.d = 1;
  mdl.m = 1;
  mdl.p = 2;
  mdl.t0 = 0.0;
  mdl.x0 = {0.0};
  mdl.theta_true = {-1.0, 1.0};
  mdl.param_names = {"alpha", "sigma"};
  mdl.box = default_box(mdl.theta_true, {false, true});
  mdl.drift = [](double, const Vector& x, const Vector& th) { return Vector{th[0] * x[0]}; };
  mdl.diffusion = [](double, const Vector&, const Vector& th, int) { return Vector{th[1]}; };
  mdl.drift_jac = [](double, const Vector&, const Vector& th) { return Matrix{{th[0]}}; };
  mdl.diffusion_jac = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return zero_vector(1); };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return zero_vector(1); };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(1); };
  mdl.exact_moments = [](const Vector& th, const Vector& z, double t_from, double t_to) {
    const double a = th[0], s = th[1];
    const double dt = t_to - t_from;
    const double mu = z[0] * std::exp(a * dt);
    const double var = s * s * dt * phi1(2.0 * a * dt);
    return MomentPair{{mu}, Matrix{{var}}};
  };
  return mdl;
}

SdeModel make_gbm() {
  SdeModel mdl;
  mdl.name = "gbm";
  mdl.d = 1;
  mdl.m = 1;
  mdl.p = 2;
  mdl.t0 = 0.0;
  mdl.x0 = {1.0};
  mdl.theta_true = {0.05, 0.2};
  mdl.param_names = {"alpha", "sigma"};
  mdl.box = default_box(mdl.theta_true, {false, true});
  mdl.drift = [](double, const Vector& x, const Vector& th) { return Vector{th[0] * x[0]}; };
  mdl.diffusion = [](double, const Vector& x, const Vector& th, int) { return Vector{th[1] * x[0]}; };
  mdl.drift_jac = [](double, const Vector&, const Vector& th) { return Matrix{{th[0]}}; };
  mdl.diffusion_jac = [](double, const Vector&, const Vector& th, int) { return Matrix{{th[1]}}; };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return zero_vector(1); };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return zero_vector(1); };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return zero_matrix(1); };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return zero_matrix(1); };
  mdl.exact_moments = [](const Vector& th, const Vector& z, double t_from, double t_to) {
    const double a = th[0], s = th[1];
    const double dt = t_to - t_from;
    const double mu = z[0] * std::exp(a * dt);
    const double var = z[0] * z[0] * std::exp(2.0 * a * dt) * std::expm1(s * s * dt);
    return MomentPair{{mu}, Matrix{{var}}};
  };
  return mdl;
}

}  // namespace

SdeModel builtin(BuiltinModel which) {
  switch (which) {
    case BuiltinModel::example1: return make_example1();
    case BuiltinModel::example2: return make_example2();
    case BuiltinModel::example3: return make_example3();
    case BuiltinModel::example4: return make_example4();
    case BuiltinModel::ou: return make_ou();
    case BuiltinModel::gbm: return make_gbm();
  }
  throw UnknownModel("unknown builtin model");
}

SdeModel builtin(const std::string& name) {
  if (name == "example1") return builtin(BuiltinModel::example1);
  if (name == "example2") return builtin(BuiltinModel::example2);
  if (name == "example3") return builtin(BuiltinModel::example3);
  if (name == "example4") return builtin(BuiltinModel::example4);
  if (name == "ou") return builtin(BuiltinModel::ou);
  if (name == "gbm") return builtin(BuiltinModel::gbm);
  throw UnknownModel("unknown builtin model '" + name + "'");
}

}  // namespace sdeqml
