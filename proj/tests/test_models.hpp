#pragma once

// Extra SDE models used by the tests: an autonomous linear 2-d system with
// non-symmetric multiplicative noise (exercises the Kronecker assembly in a
// case where the vec convention matters) and a mean-reverting square-root
// diffusion whose diffusion Hessian is nonzero and whose first two
// conditional moments are known in closed form.

#include <cmath>

#include "sdeqml/sde_model.hpp"

inline sdeqml::SdeModel make_linear2d() {
  using namespace sdeqml;
  SdeModel mdl;
  mdl.name = "linear2d";
  mdl.d = 2;
  mdl.m = 1;
  mdl.p = 1;
  mdl.t0 = 0.0;
  mdl.x0 = {1.0, 0.5};
  mdl.theta_true = {1.0};
  mdl.param_names = {"scale"};
  mdl.box = ParameterBox({0.5}, {2.0});
  static const Matrix f_mat{{-0.5, 0.2}, {-0.1, -0.4}};
  static const Matrix g_mat{{0.3, 0.6}, {0.0, 0.2}};
  mdl.drift = [](double, const Vector& x, const Vector&) { return f_mat * x; };
  mdl.diffusion = [](double, const Vector& x, const Vector&, int) { return g_mat * x; };
  mdl.drift_jac = [](double, const Vector&, const Vector&) { return f_mat; };
  mdl.diffusion_jac = [](double, const Vector&, const Vector&, int) { return g_mat; };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return Vector{0.0, 0.0}; };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return Vector{0.0, 0.0}; };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return Matrix(2, 2); };
  mdl.diffusion_hess = [](double, const Vector&, const Vector&, int, int) { return Matrix(2, 2); };
  return mdl;
}

// dx = kappa (mu - x) dt + sigma sqrt(x) dw with parameters (kappa, mu,
// sigma). E[x_t | x_0] and Var[x_t | x_0] are classical.
inline sdeqml::SdeModel make_sqrt_diffusion() {
  using namespace sdeqml;
  SdeModel mdl;
  mdl.name = "sqrt_diffusion";
  mdl.d = 1;
  mdl.m = 1;
  mdl.p = 3;
  mdl.t0 = 0.0;
  mdl.x0 = {2.0};
  mdl.theta_true = {1.0, 1.0, 0.5};
  mdl.param_names = {"kappa", "mu", "sigma"};
  mdl.box = ParameterBox({1e-8, 1e-8, 1e-8}, {11.0, 11.0, 6.0});
  mdl.drift = [](double, const Vector& x, const Vector& th) {
    return Vector{th[0] * (th[1] - x[0])};
  };
  mdl.diffusion = [](double, const Vector& x, const Vector& th, int) {
    return Vector{th[2] * std::sqrt(x[0])};
  };
  mdl.drift_jac = [](double, const Vector&, const Vector& th) { return Matrix{{-th[0]}}; };
  mdl.diffusion_jac = [](double, const Vector& x, const Vector& th, int) {
    return Matrix{{th[2] / (2.0 * std::sqrt(x[0]))}};
  };
  mdl.drift_dt = [](double, const Vector&, const Vector&) { return Vector{0.0}; };
  mdl.diffusion_dt = [](double, const Vector&, const Vector&, int) { return Vector{0.0}; };
  mdl.drift_hess = [](double, const Vector&, const Vector&, int) { return Matrix(1, 1); };
  mdl.diffusion_hess = [](double, const Vector& x, const Vector& th, int, int) {
    return Matrix{{-th[2] / (4.0 * std::pow(x[0], 1.5))}};
  };
  mdl.exact_moments = [](const Vector& th, const Vector& z, double t_from, double t_to) {
    const double kappa = th[0], mu = th[1], sigma = th[2];
    const double dt = t_to - t_from;
    const double decay = std::exp(-kappa * dt);
    const double mean = mu + (z[0] - mu) * decay;
    const double var = z[0] * sigma * sigma / kappa * (decay - decay * decay) +
                       mu * sigma * sigma / (2.0 * kappa) * (1.0 - decay) * (1.0 - decay);
    return MomentPair{{mean}, Matrix{{var}}};
  };
  return mdl;
}

inline sdeqml::SdeModel strip_hessians(sdeqml::SdeModel mdl) {
  mdl.drift_hess = nullptr;
  mdl.diffusion_hess = nullptr;
  return mdl;
}
