#include "sdeqml/simulate.hpp"

#include <cmath>
#include <numbers>

#include "sdeqml/ll_moments.hpp"

namespace sdeqml {

namespace {

constexpr uint64_t kGolden = 0x9E3779B97F4A7C15ull;

uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(uint64_t seed, uint64_t stream)
    : state_(mix64(seed + kGolden) ^ mix64(stream * 0xD6E8FEB86659FD93ull + kGolden)) {}

uint64_t RngStream::next_u64() {
  state_ += kGolden;
  return mix64(state_);
}

double RngStream::next_uniform() {
  return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::next_normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(a);
  has_cached_ = true;
  return r * std::cos(a);
}

namespace {

void validate_grid(const PathGrid& grid) {
  if (!(grid.dt > 0.0) || grid.n_steps < 1)
    throw std::invalid_argument("PathGrid: dt must be positive and n_steps >= 1");
}

Vector initial_state(const SdeModel& model, const Vector& x_init) {
  if (x_init.empty()) return model.x0;
  if (static_cast<int>(x_init.size()) != model.d)
    throw std::invalid_argument("initial state dimension mismatch");
  return x_init;
}

// Lower-triangular square root of a near-PSD matrix; tiny negative pivots
// from roundoff are clamped to zero.
Matrix psd_sqrt_lower(Matrix s) {
  const int n = s.rows();
  Matrix l(n, n);
  for (int k = 0; k < n; ++k) {
    double d = s(k, k);
    for (int j = 0; j < k; ++j) d -= l(k, j) * l(k, j);
    if (d <= 0.0) continue;  // column stays zero
    l(k, k) = std::sqrt(d);
    for (int i = k + 1; i < n; ++i) {
      double v = s(i, k);
      for (int j = 0; j < k; ++j) v -= l(i, j) * l(k, j);
      l(i, k) = v / l(k, k);
    }
  }
  return l;
}

}  // namespace

Path euler_path(const SdeModel& model, const ParameterVector& theta, const PathGrid& grid,
                RngStream& rng, const Vector& x_init) {
  validate_grid(grid);
  const Vector& th = theta.values();
  const double sqrt_dt = std::sqrt(grid.dt);

  Path path;
  path.grid = grid;
  path.states.reserve(grid.n_steps + 1);
  path.states.push_back(initial_state(model, x_init));

  Vector x = path.states.front();
  for (int n = 0; n < grid.n_steps; ++n) {
    const double t = grid.time(n);
    const Vector f = model.drift(t, x, th);
    Vector next(x);
    for (int i = 0; i < model.d; ++i) next[i] += f[i] * grid.dt;
    for (int i = 0; i < model.m; ++i) {
      const Vector gi = model.diffusion(t, x, th, i);
      const double xi = rng.next_normal();
      for (int r = 0; r < model.d; ++r) next[r] += gi[r] * sqrt_dt * xi;
    }
    if (!all_finite(next))
      throw SimulationBlowup("euler_path: non-finite state at t=" + std::to_string(grid.time(n + 1)));
    path.states.push_back(next);
    x = std::move(next);
  }
  return path;
}

Path ll_path(const SdeModel& model, const ParameterVector& theta, const PathGrid& grid,
             RngStream& rng, const Vector& x_init) {
  validate_grid(grid);
  const Vector& th = theta.values();

  Path path;
  path.grid = grid;
  path.states.reserve(grid.n_steps + 1);
  path.states.push_back(initial_state(model, x_init));

  Vector x = path.states.front();
  for (int n = 0; n < grid.n_steps; ++n) {
    const double t = grid.time(n);
    for (int i = 0; i < model.m; ++i) {
      const Matrix bi = model.diffusion_jac(t, x, th, i);
      const double scale = 1.0 + max_abs(model.diffusion(t, x, th, i));
      if (max_abs(bi) > 1e-10 * scale)
        throw NotAdditiveNoise("ll_path: diffusion depends on the state");
    }

    const MomentState st{t, x, outer(x, x)};
    const MomentState next_st = step(model, th, st, grid.dt, 1);
    const Matrix sigma = symmetrized(next_st.P - outer(next_st.y, next_st.y));
    const Matrix l = psd_sqrt_lower(sigma);

    Vector xi(model.d);
    for (int i = 0; i < model.d; ++i) xi[i] = rng.next_normal();
    Vector next = next_st.y;
    for (int i = 0; i < model.d; ++i)
      for (int j = 0; j <= i; ++j) next[i] += l(i, j) * xi[j];

    if (!all_finite(next))
      throw SimulationBlowup("ll_path: non-finite state at t=" + std::to_string(grid.time(n + 1)));
    path.states.push_back(next);
    x = std::move(next);
  }
  return path;
}

ObservationSeries subsample(const Path& path, double delta, double horizon) {
  if (!(delta > 0.0) || !(horizon > 0.0))
    throw std::invalid_argument("subsample: delta and horizon must be positive");
  const double stride_real = delta / path.grid.dt;
  const long stride = std::lround(stride_real);
  if (stride < 1 || std::fabs(stride_real - stride) > 1e-6 * stride_real)
    throw std::invalid_argument("subsample: delta is not a multiple of the grid spacing");
  const double count_real = horizon / delta;
  const long count = std::lround(count_real);
  if (count < 2 || std::fabs(count_real - count) > 1e-9 * count_real)
    throw std::invalid_argument("subsample: horizon is not a multiple of delta");
  if ((count - 1) * stride > path.grid.n_steps)
    throw std::invalid_argument("subsample: path too short for requested horizon");

  Vector times(count);
  std::vector<Vector> obs(count);
  for (long k = 0; k < count; ++k) {
    times[k] = path.grid.t0 + static_cast<double>(k) * delta;
    obs[k] = path.states[static_cast<size_t>(k * stride)];
  }
  return ObservationSeries(std::move(times), std::move(obs));
}

}  // namespace sdeqml
