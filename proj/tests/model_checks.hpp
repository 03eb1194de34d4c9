#pragma once

// Finite-difference validation of a model's analytic derivatives, shared by
// the unit and acceptance suites. Returns the worst scaled deviation between
// the evaluators and central differences of drift/diffusion over random
// (t, x, theta) points.

#include <algorithm>
#include <cmath>

#include "sdeqml/sde_model.hpp"
#include "test_rng.hpp"

inline double max_jacobian_fd_error(const sdeqml::SdeModel& model, TestRng& rng, int n_points) {
  using namespace sdeqml;
  const double h = 1e-6;
  double worst = 0.0;
  const auto scaled = [](double analytic, double fd) {
    return std::fabs(analytic - fd) / std::max(1.0, std::fabs(analytic));
  };

  for (int pt = 0; pt < n_points; ++pt) {
    const double t = model.t0 + 0.1 + 2.9 * rng.uniform01();
    Vector x(model.d);
    for (double& xi : x) xi = rng.uniform(0.3, 2.0);
    Vector th(model.p);
    for (int i = 0; i < model.p; ++i) th[i] = model.theta_true[i] * rng.uniform(0.6, 1.4);

    const Matrix a = model.drift_jac(t, x, th);
    for (int j = 0; j < model.d; ++j) {
      Vector xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vector fp = model.drift(t, xp, th), fm = model.drift(t, xm, th);
      for (int i = 0; i < model.d; ++i)
        worst = std::max(worst, scaled(a(i, j), (fp[i] - fm[i]) / (2 * h)));
    }
    {
      const Vector ft = model.drift_dt(t, x, th);
      const Vector fp = model.drift(t + h, x, th), fm = model.drift(t - h, x, th);
      for (int i = 0; i < model.d; ++i)
        worst = std::max(worst, scaled(ft[i], (fp[i] - fm[i]) / (2 * h)));
    }
    for (int col = 0; col < model.m; ++col) {
      const Matrix b = model.diffusion_jac(t, x, th, col);
      for (int j = 0; j < model.d; ++j) {
        Vector xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        const Vector gp = model.diffusion(t, xp, th, col), gm = model.diffusion(t, xm, th, col);
        for (int i = 0; i < model.d; ++i)
          worst = std::max(worst, scaled(b(i, j), (gp[i] - gm[i]) / (2 * h)));
      }
      const Vector gt = model.diffusion_dt(t, x, th, col);
      const Vector gp = model.diffusion(t + h, x, th, col), gm = model.diffusion(t - h, x, th, col);
      for (int i = 0; i < model.d; ++i)
        worst = std::max(worst, scaled(gt[i], (gp[i] - gm[i]) / (2 * h)));
    }
    if (model.has_hessians()) {
      for (int comp = 0; comp < model.d; ++comp) {
        const Matrix hess = model.drift_hess(t, x, th, comp);
        for (int j = 0; j < model.d; ++j) {
          Vector xp = x, xm = x;
          xp[j] += h;
          xm[j] -= h;
          const Matrix jp = model.drift_jac(t, xp, th), jm = model.drift_jac(t, xm, th);
          for (int l = 0; l < model.d; ++l)
            worst = std::max(worst, scaled(hess(j, l), (jp(comp, l) - jm(comp, l)) / (2 * h)));
        }
      }
    }
  }
  return worst;
}
