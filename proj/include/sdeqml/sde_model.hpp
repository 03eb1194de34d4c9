#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdeqml/linalg.hpp"

namespace sdeqml {

struct NoOracle : std::runtime_error {
  explicit NoOracle(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownModel : std::runtime_error {
  explicit UnknownModel(const std::string& what) : std::runtime_error(what) {}
};

// Closed per-coordinate interval box for the parameter vector.
class ParameterBox {
 public:
  ParameterBox() = default;
  ParameterBox(Vector lower, Vector upper);

  int size() const { return static_cast<int>(lower_.size()); }
  double lower(int i) const { return lower_[i]; }
  double upper(int i) const { return upper_[i]; }

  Vector project(Vector v) const;
  bool contains(const Vector& v) const;

 private:
  Vector lower_, upper_;
};

// Parameter values constrained to a box; values are projected into the box
// on construction.
class ParameterVector {
 public:
  ParameterVector(Vector values, ParameterBox box);

  const Vector& values() const { return values_; }
  const ParameterBox& box() const { return box_; }
  double operator[](int i) const { return values_[i]; }
  int size() const { return static_cast<int>(values_.size()); }

 private:
  Vector values_;
  ParameterBox box_;
};

struct MomentPair {
  Vector mu;
  Matrix sigma;
};

// Specification of dx = f(t,x;th) dt + sum_i g_i(t,x;th) dw^i together with
// the coefficient derivatives the moment recursion needs. All evaluators are
// pure functions of (t, x, th); models are immutable once built.
struct SdeModel {
  std::string name;
  int d = 0;  // state dimension
  int m = 0;  // number of Wiener columns
  int p = 0;  // parameter count

  double t0 = 0.0;
  Vector x0;
  Vector theta_true;
  ParameterBox box;
  std::vector<std::string> param_names;

  std::function<Vector(double t, const Vector& x, const Vector& th)> drift;
  std::function<Vector(double t, const Vector& x, const Vector& th, int i)> diffusion;
  std::function<Matrix(double t, const Vector& x, const Vector& th)> drift_jac;
  std::function<Matrix(double t, const Vector& x, const Vector& th, int i)> diffusion_jac;
  std::function<Vector(double t, const Vector& x, const Vector& th)> drift_dt;
  std::function<Vector(double t, const Vector& x, const Vector& th, int i)> diffusion_dt;

  // Hessian of drift component `comp` w.r.t. the state (d x d). Leave empty
  // for models that do not support the order-2 scheme.
  std::function<Matrix(double t, const Vector& x, const Vector& th, int comp)> drift_hess;
  std::function<Matrix(double t, const Vector& x, const Vector& th, int i, int comp)> diffusion_hess;

  // Closed-form conditional moments of x(t_to) given x(t_from) = z, where
  // available (the two scalar test equations and the linear validation
  // models).
  std::function<MomentPair(const Vector& th, const Vector& z, double t_from, double t_to)> exact_moments;

  bool has_hessians() const { return static_cast<bool>(drift_hess); }
  bool has_oracle() const { return static_cast<bool>(exact_moments); }

  // G(t,x;th) = [g_1, ..., g_m], d x m.
  Matrix diffusion_matrix(double t, const Vector& x, const Vector& th) const;

  ParameterVector true_parameters() const { return {theta_true, box}; }
};

// Time series of complete observations on strictly increasing instants.
class ObservationSeries {
 public:
  ObservationSeries(Vector times, std::vector<Vector> observations);

  int size() const { return static_cast<int>(times_.size()); }
  int dimension() const { return static_cast<int>(observations_.front().size()); }
  double time(int k) const { return times_[k]; }
  const Vector& observation(int k) const { return observations_[k]; }
  const Vector& times() const { return times_; }

 private:
  Vector times_;
  std::vector<Vector> observations_;
};

enum class BuiltinModel { example1, example2, example3, example4, ou, gbm };

SdeModel builtin(BuiltinModel which);
SdeModel builtin(const std::string& name);  // throws UnknownModel

// Closed-form conditional moments; throws NoOracle for models without them.
MomentPair exact_conditional_moments(const SdeModel& model, const ParameterVector& theta,
                                     const Vector& z, double t_from, double t_to);

}  // namespace sdeqml
