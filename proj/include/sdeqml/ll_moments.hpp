#pragma once

#include <stdexcept>

#include "sdeqml/sde_model.hpp"

namespace sdeqml {

struct MissingHessians : std::runtime_error {
  explicit MissingHessians(const std::string& what) : std::runtime_error(what) {}
};

struct StepUnderflow : std::runtime_error {
  explicit StepUnderflow(const std::string& what) : std::runtime_error(what) {}
};

// Raised when model evaluations or the propagated moments overflow to
// non-finite values (typically at extreme trial parameters).
struct NonFiniteEvaluation : std::runtime_error {
  explicit NonFiniteEvaluation(const std::string& what) : std::runtime_error(what) {}
};

// Conditional mean y and second moment P = E[x x^T | z_k] at time t. P is
// kept symmetric; at an observation used as step origin, y = z_k and
// P = z_k z_k^T.
struct MomentState {
  double t = 0.0;
  Vector y;
  Matrix P;
};

// Coefficients of the local linear SDE
//   dx = (A x + a0 + a1 (t - tau)) dt + sum_i (B_i x + b_{i,0} + b_{i,1} (t - tau)) dw^i
// anchored at (tau, y). For beta = 2 the a1 / b_{i,1} terms carry the
// Ito-Taylor Hessian corrections.
struct LinearizationCoeffs {
  Matrix A;
  std::vector<Matrix> B;
  Vector a0, a1;
  std::vector<Vector> b0, b1;
};

// How the sub-discretization between two observations is chosen.
class DiscretizationPolicy {
 public:
  enum class Kind { conventional, uniform, adaptive };

  static DiscretizationPolicy conventional();
  static DiscretizationPolicy uniform(double h);
  static DiscretizationPolicy adaptive(double rtol_y, double rtol_P, double atol_y, double atol_P);

  Kind kind() const { return kind_; }
  double h() const { return h_; }
  double rtol_y() const { return rtol_y_; }
  double rtol_P() const { return rtol_P_; }
  double atol_y() const { return atol_y_; }
  double atol_P() const { return atol_P_; }

 private:
  DiscretizationPolicy() = default;
  Kind kind_ = Kind::conventional;
  double h_ = 0.0;
  double rtol_y_ = 0.0, rtol_P_ = 0.0, atol_y_ = 0.0, atol_P_ = 0.0;
};

LinearizationCoeffs linearize(const SdeModel& model, const Vector& theta, double tau,
                              const Vector& y, int beta);

// The block generator whose exponential advances the moment pair: M is
// (d^2+2d+7) square, u the matching initial vector [vec(P); 0; r; 0; 0; 1].
struct Generator {
  Matrix M;
  Vector u;
};

Generator build_generator(const LinearizationCoeffs& coeffs, const MomentState& state);

// One recursion step of size dt anchored at the current state: the mean
// picks up the L2 row block of e^{M dt} u and vec(P) the L1 block.
MomentState step(const SdeModel& model, const Vector& theta, const MomentState& state,
                 double dt, int beta);

struct StepStats {
  int accepted = 0;
  int failed = 0;
};

struct Propagated {
  Vector mu;
  Matrix sigma;  // P - mu mu^T, symmetrized
  StepStats stats;
};

// Propagate from (t_from, y=z, P=zz^T) to t_to under the given policy and
// return the predicted conditional mean and variance.
Propagated propagate(const SdeModel& model, const Vector& theta, const Vector& z,
                     double t_from, double t_to, const DiscretizationPolicy& policy, int beta);

}  // namespace sdeqml
