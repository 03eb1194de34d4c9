#include "sdeqml/ll_moments.hpp"

#include <algorithm>
#include <cmath>

namespace sdeqml {

DiscretizationPolicy DiscretizationPolicy::conventional() {
  DiscretizationPolicy p;
  p.kind_ = Kind::conventional;
  return p;
}

DiscretizationPolicy DiscretizationPolicy::uniform(double h) {
  if (!(h > 0.0)) throw std::invalid_argument("DiscretizationPolicy::uniform: h must be positive");
  DiscretizationPolicy p;
  p.kind_ = Kind::uniform;
  p.h_ = h;
  return p;
}

DiscretizationPolicy DiscretizationPolicy::adaptive(double rtol_y, double rtol_P, double atol_y,
                                                    double atol_P) {
  if (!(rtol_y > 0.0) || !(rtol_P > 0.0) || !(atol_y > 0.0) || !(atol_P > 0.0))
    throw std::invalid_argument("DiscretizationPolicy::adaptive: tolerances must be positive");
  DiscretizationPolicy p;
  p.kind_ = Kind::adaptive;
  p.rtol_y_ = rtol_y;
  p.rtol_P_ = rtol_P;
  p.atol_y_ = atol_y;
  p.atol_P_ = atol_P;
  return p;
}

LinearizationCoeffs linearize(const SdeModel& model, const Vector& theta, double tau,
                              const Vector& y, int beta) {
  if (beta != 1 && beta != 2) throw std::invalid_argument("linearize: beta must be 1 or 2");
  if (beta == 2 && !model.has_hessians())
    throw MissingHessians("model '" + model.name + "' has no Hessian evaluators; beta=2 unavailable");

  LinearizationCoeffs c;
  c.A = model.drift_jac(tau, y, theta);
  const Vector f = model.drift(tau, y, theta);
  const Vector ay = c.A * y;
  c.a0.resize(model.d);
  for (int i = 0; i < model.d; ++i) c.a0[i] = f[i] - ay[i];
  c.a1 = model.drift_dt(tau, y, theta);

  c.B.reserve(model.m);
  c.b0.reserve(model.m);
  c.b1.reserve(model.m);
  for (int i = 0; i < model.m; ++i) {
    Matrix bi = model.diffusion_jac(tau, y, theta, i);
    const Vector gi = model.diffusion(tau, y, theta, i);
    const Vector biy = bi * y;
    Vector b0(model.d);
    for (int r = 0; r < model.d; ++r) b0[r] = gi[r] - biy[r];
    c.B.push_back(std::move(bi));
    c.b0.push_back(std::move(b0));
    c.b1.push_back(model.diffusion_dt(tau, y, theta, i));
  }

  if (beta == 2) {
    // Second-order Ito-Taylor correction: add (1/2) sum_{j,l} [G G^T]^{jl}
    // d^2/dy_j dy_l of each coefficient to its time slope.
    const Matrix g = model.diffusion_matrix(tau, y, theta);
    const Matrix w = g * g.transpose();
    for (int comp = 0; comp < model.d; ++comp) {
      const Matrix hf = model.drift_hess(tau, y, theta, comp);
      double acc = 0.0;
      for (int j = 0; j < model.d; ++j)
        for (int l = 0; l < model.d; ++l) acc += w(j, l) * hf(j, l);
      c.a1[comp] += 0.5 * acc;
    }
    for (int i = 0; i < model.m; ++i) {
      for (int comp = 0; comp < model.d; ++comp) {
        const Matrix hg = model.diffusion_hess(tau, y, theta, i, comp);
        double acc = 0.0;
        for (int j = 0; j < model.d; ++j)
          for (int l = 0; l < model.d; ++l) acc += w(j, l) * hg(j, l);
        c.b1[i][comp] += 0.5 * acc;
      }
    }
  }
  return c;
}

namespace {

void place_block(Matrix& dst, int row, int col, const Matrix& src) {
  for (int i = 0; i < src.rows(); ++i)
    for (int j = 0; j < src.cols(); ++j) dst(row + i, col + j) = src(i, j);
}

void place_column(Matrix& dst, int row, int col, const Vector& src) {
  for (size_t i = 0; i < src.size(); ++i) dst(row + static_cast<int>(i), col) = src[i];
}

}  // namespace

Generator build_generator(const LinearizationCoeffs& coeffs, const MomentState& state) {
  const int d = static_cast<int>(state.y.size());
  const int m = static_cast<int>(coeffs.B.size());
  const int dim = d * d + 2 * d + 7;

  // Coupling coefficients between the second-moment block and the mean /
  // polynomial blocks.
  Matrix beta1(d, d), beta2(d, d), beta3(d, d);
  Matrix beta4 = kron_sum(coeffs.a0, coeffs.a0);
  Matrix beta5 = kron_sum(coeffs.a1, coeffs.a1);
  for (int i = 0; i < m; ++i) {
    beta1 += outer(coeffs.b0[i], coeffs.b0[i]);
    beta2 += outer(coeffs.b0[i], coeffs.b1[i]) + outer(coeffs.b1[i], coeffs.b0[i]);
    beta3 += outer(coeffs.b1[i], coeffs.b1[i]);
    Matrix col0(d, 1), col1(d, 1);
    for (int r = 0; r < d; ++r) {
      col0(r, 0) = coeffs.b0[i][r];
      col1(r, 0) = coeffs.b1[i][r];
    }
    beta4 += kron(col0, coeffs.B[i]) + kron(coeffs.B[i], col0);
    beta5 += kron(col1, coeffs.B[i]) + kron(coeffs.B[i], col1);
  }

  // Offsets of the six block rows/columns: vec(P), two (d+2) mean blocks,
  // then the 3-dimensional polynomial tail.
  const int o0 = 0;
  const int o1 = d * d;
  const int o2 = o1 + d + 2;
  const int o3 = o2 + d + 2;
  const int o4 = o3 + 1;
  const int o5 = o4 + 1;

  Generator gen;
  gen.M = Matrix(dim, dim);
  Matrix& mtx = gen.M;

  Matrix script_a = kron_sum(coeffs.A, coeffs.A);
  for (int i = 0; i < m; ++i) script_a += kron(coeffs.B[i], coeffs.B[i]);
  place_block(mtx, o0, o0, script_a);

  // B5 = beta5 L and B4 = beta4 L with L = [I_d 0_{d x 2}]: the betas land in
  // the leading d columns of each mean block.
  place_block(mtx, o0, o1, beta5);
  place_block(mtx, o0, o2, beta4);

  const Vector beta5y = beta5 * state.y;
  const Vector beta4y = beta4 * state.y;
  Vector col_b3 = vec(beta3);
  Vector col_b2 = vec(beta2);
  Vector col_b1 = vec(beta1);
  for (int i = 0; i < d * d; ++i) {
    col_b2[i] += beta5y[i];
    col_b1[i] += beta4y[i];
  }
  place_column(mtx, o0, o3, col_b3);
  place_column(mtx, o0, o4, col_b2);
  place_column(mtx, o0, o5, col_b1);

  Matrix c(d + 2, d + 2);
  place_block(c, 0, 0, coeffs.A);
  Vector ay(d);
  {
    const Vector tmp = coeffs.A * state.y;
    for (int i = 0; i < d; ++i) ay[i] = tmp[i] + coeffs.a0[i];
  }
  for (int i = 0; i < d; ++i) {
    c(i, d) = coeffs.a1[i];
    c(i, d + 1) = ay[i];
  }
  c(d, d + 1) = 1.0;

  place_block(mtx, o1, o1, c);
  place_block(mtx, o1, o2, Matrix::identity(d + 2));
  place_block(mtx, o2, o2, c);

  mtx(o3, o4) = 2.0;
  mtx(o4, o5) = 1.0;

  gen.u = Vector(dim, 0.0);
  const Vector vp = vec(state.P);
  for (int i = 0; i < d * d; ++i) gen.u[i] = vp[i];
  gen.u[o2 + d + 1] = 1.0;  // r = [0_{d+1}; 1] in the second mean block
  gen.u[o5] = 1.0;
  return gen;
}

MomentState step(const SdeModel& model, const Vector& theta, const MomentState& state,
                 double dt, int beta) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  const LinearizationCoeffs coeffs = linearize(model, theta, state.t, state.y, beta);
  const Generator gen = build_generator(coeffs, state);
  if (!all_finite(gen.M) || !all_finite(gen.u))
    throw NonFiniteEvaluation("step: non-finite generator entries at t=" + std::to_string(state.t));

  Matrix mdt = gen.M;
  mdt *= dt;
  const Vector w = expm(mdt) * gen.u;
  if (!all_finite(w))
    throw NonFiniteEvaluation("step: moment propagation overflowed at t=" + std::to_string(state.t));

  const int d = model.d;
  MomentState next;
  next.t = state.t + dt;
  next.y.resize(d);
  const int mean_offset = d * d + d + 2;
  for (int i = 0; i < d; ++i) next.y[i] = state.y[i] + w[mean_offset + i];
  Vector vp(static_cast<size_t>(d) * d);
  for (int i = 0; i < d * d; ++i) vp[i] = w[i];
  next.P = symmetrized(unvec(vp, d));
  return next;
}

namespace {

// Normalized step-doubling error: componentwise on the mean with the y
// tolerances and on vec(P) with the P tolerances, measured against the fine
// (two half-step) solution.
double doubling_error(const MomentState& coarse, const MomentState& fine,
                      const DiscretizationPolicy& pol) {
  double e = 0.0;
  for (size_t i = 0; i < fine.y.size(); ++i) {
    const double denom = pol.atol_y() + pol.rtol_y() * std::fabs(fine.y[i]);
    e = std::max(e, std::fabs(coarse.y[i] - fine.y[i]) / denom);
  }
  const int d = fine.P.rows();
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      const double denom = pol.atol_P() + pol.rtol_P() * std::fabs(fine.P(i, j));
      e = std::max(e, std::fabs(coarse.P(i, j) - fine.P(i, j)) / denom);
    }
  }
  return e;
}

}  // namespace

Propagated propagate(const SdeModel& model, const Vector& theta, const Vector& z,
                     double t_from, double t_to, const DiscretizationPolicy& policy, int beta) {
  if (!(t_to > t_from)) throw std::invalid_argument("propagate: t_to must exceed t_from");
  const double gap = t_to - t_from;

  MomentState state{t_from, z, outer(z, z)};
  StepStats stats;

  switch (policy.kind()) {
    case DiscretizationPolicy::Kind::conventional: {
      state = step(model, theta, state, gap, beta);
      stats.accepted = 1;
      break;
    }
    case DiscretizationPolicy::Kind::uniform: {
      const double h = std::min(policy.h(), gap);
      const int n = std::max(1, static_cast<int>(std::ceil(gap / h - 1e-9)));
      const double dt = gap / n;
      for (int k = 0; k < n; ++k) state = step(model, theta, state, dt, beta);
      stats.accepted = n;
      break;
    }
    case DiscretizationPolicy::Kind::adaptive: {
      double h = gap;  // first trial spans the interval
      while (t_to - state.t > 1e-14 * std::max(1.0, std::fabs(t_to))) {
        h = std::min(h, t_to - state.t);
        if (h < 1e-12 * gap)
          throw StepUnderflow("propagate: adaptive step size underflow");
        const MomentState coarse = step(model, theta, state, h, beta);
        const MomentState mid = step(model, theta, state, h / 2.0, beta);
        const MomentState fine = step(model, theta, mid, h / 2.0, beta);
        const double e = doubling_error(coarse, fine, policy);
        const double factor =
            e > 0.0 ? std::clamp(0.9 * std::pow(e, -0.5), 0.2, 5.0) : 5.0;
        if (e <= 1.0) {
          state = fine;
          ++stats.accepted;
        } else {
          ++stats.failed;
        }
        h *= factor;
      }
      break;
    }
  }

  Propagated out;
  out.mu = state.y;
  out.sigma = symmetrized(state.P - outer(state.y, state.y));
  out.stats = stats;
  return out;
}

}  // namespace sdeqml
