#pragma once

#include <cstdint>
#include <stdexcept>

#include "sdeqml/sde_model.hpp"

namespace sdeqml {

struct SimulationBlowup : std::runtime_error {
  explicit SimulationBlowup(const std::string& what) : std::runtime_error(what) {}
};

struct NotAdditiveNoise : std::runtime_error {
  explicit NotAdditiveNoise(const std::string& what) : std::runtime_error(what) {}
};

struct PathGrid {
  double t0 = 0.0;
  double dt = 1e-3;
  int n_steps = 0;

  double time(int n) const { return t0 + dt * n; }
};

// Keyed counter generator: a (seed, stream) pair fully determines the draw
// sequence, so replicate streams are reproducible bit-for-bit independent of
// scheduling. Normal variates come from Box-Muller on the raw 64-bit output.
class RngStream {
 public:
  RngStream(uint64_t seed, uint64_t stream);

  uint64_t next_u64();
  double next_uniform();  // in (0, 1]
  double next_normal();

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

struct Path {
  PathGrid grid;
  std::vector<Vector> states;  // n_steps + 1 rows

  double time(int n) const { return grid.time(n); }
};

// Euler-Maruyama on the grid starting from the model's initial state (or
// x_init when given). Throws SimulationBlowup if the state leaves the finite
// range.
Path euler_path(const SdeModel& model, const ParameterVector& theta, const PathGrid& grid,
                RngStream& rng, const Vector& x_init = {});

// Per-step sampling from the one-step local-linearization transition law.
// Valid for state-independent diffusion only (the transition is Gaussian);
// the diffusion Jacobians are checked at the current state each step.
Path ll_path(const SdeModel& model, const ParameterVector& theta, const PathGrid& grid,
             RngStream& rng, const Vector& x_init = {});

// Observations at t0 + k*delta for k = 0..M-1 with M = T/delta. delta must
// align with the grid spacing and T with delta.
ObservationSeries subsample(const Path& path, double delta, double horizon);

}  // namespace sdeqml
