#include "qndsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"

namespace qndsim {

void DynamicsParams::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dynamics.dt", "must be positive");
  if (!(omega_ex >= 0.0)) throw ConfigError("dynamics.omega_ex", "must be non-negative");
  if (!(gamma_c >= 0.0)) throw ConfigError("dynamics.gamma_c", "must be non-negative");
  if (!(loss_rate >= 0.0)) throw ConfigError("dynamics.loss_rate", "must be non-negative");
  if (!(kernel >= 0.0)) throw ConfigError("dynamics.kernel", "must be non-negative");
  if (dt * omega_ex * kernel > 0.05) {
    throw ConfigError("dynamics.dt", "dt * omega_ex = " + std::to_string(dt * omega_ex * kernel) +
                                         " exceeds the resolution guard 0.05");
  }
}

namespace {

// Split views into one flat scratch buffer sized for `n` active atoms.
struct Scratch {
  std::span<double> x0, y0, z0;  // state at step start
  std::span<double> x, y, z;     // stage argument
  std::span<double> ax, ay, az;  // RK4 accumulator
  std::span<double> kx, ky, kz;  // stage derivative
  std::span<double> shift;

  Scratch(std::vector<double>& buf, std::size_t n) {
    buf.resize(13 * n);
    std::span<double> all(buf);
    auto take = [&, k = std::size_t{0}]() mutable { return all.subspan(n * k++, n); };
    x0 = take(); y0 = take(); z0 = take();
    x = take(); y = take(); z = take();
    ax = take(); ay = take(); az = take();
    kx = take(); ky = take(); kz = take();
    shift = take();
  }
};

void fill_dephasing(const EnsembleState& state, std::span<const std::size_t> active,
                    const DynamicsParams& p, const TrapConfig& trap, double motion_offset,
                    std::span<double> out) {
  for (std::size_t j = 0; j < active.size(); ++j) {
    const Eigen::Vector3d r = position_after(state.motion[active[j]], motion_offset, trap);
    out[j] = p.quadratic_coeffs.dot(r.cwiseProduct(r));
  }
}

void derivative(const Scratch& w, std::size_t n, const DynamicsParams& p, double n0,
                bool with_shift) {
  double sx = 0.0, sy = 0.0, sz = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    sx += w.x[j];
    sy += w.y[j];
    sz += w.z[j];
  }
  const double g = n0 > 0.0 ? p.omega_ex * p.kernel * 2.0 / n0 : 0.0;
  const double fx = g * sx, fy = g * sy, fz = g * sz;
  const double inv_n = 1.0 / static_cast<double>(n);
  const double mx = sx * inv_n, my = sy * inv_n, mz = sz * inv_n;
  const double gc = p.gamma_c;
  for (std::size_t j = 0; j < n; ++j) {
    const double wz = with_shift ? fz + w.shift[j] : fz;
    const double x = w.x[j], y = w.y[j], z = w.z[j];
    w.kx[j] = fy * z - wz * y - gc * (x - mx);
    w.ky[j] = wz * x - fx * z - gc * (y - my);
    w.kz[j] = fx * y - fy * x - gc * (z - mz);
  }
}

void rk4_step(EnsembleState& state, std::span<const std::size_t> active, const DynamicsParams& p,
              const TrapConfig& trap, double h, double motion_offset, std::vector<double>& buf) {
  const std::size_t n = active.size();
  if (n == 0) return;
  Scratch w(buf, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = active[j];
    w.x0[j] = w.x[j] = state.sx[i];
    w.y0[j] = w.y[j] = state.sy[i];
    w.z0[j] = w.z[j] = state.sz[i];
  }
  const bool with_shift = p.dephasing == DephasingModel::quadratic_position;
  const double n0 = static_cast<double>(state.initial_count);
  const double stage_dt[4] = {0.0, 0.5 * h, 0.5 * h, h};
  const double weight[4] = {h / 6.0, h / 3.0, h / 3.0, h / 6.0};

  for (int s = 0; s < 4; ++s) {
    if (with_shift && (s == 0 || s == 1 || s == 3)) {
      fill_dephasing(state, active, p, trap, motion_offset + stage_dt[s], w.shift);
    }
    if (s > 0) {
      for (std::size_t j = 0; j < n; ++j) {
        w.x[j] = w.x0[j] + stage_dt[s] * w.kx[j];
        w.y[j] = w.y0[j] + stage_dt[s] * w.ky[j];
        w.z[j] = w.z0[j] + stage_dt[s] * w.kz[j];
      }
    }
    derivative(w, n, p, n0, with_shift);
    for (std::size_t j = 0; j < n; ++j) {
      if (s == 0) {
        w.ax[j] = weight[0] * w.kx[j];
        w.ay[j] = weight[0] * w.ky[j];
        w.az[j] = weight[0] * w.kz[j];
      } else {
        w.ax[j] += weight[s] * w.kx[j];
        w.ay[j] += weight[s] * w.ky[j];
        w.az[j] += weight[s] * w.kz[j];
      }
    }
  }

  double check = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = active[j];
    state.sx[i] = w.x0[j] + w.ax[j];
    state.sy[i] = w.y0[j] + w.ay[j];
    state.sz[i] = w.z0[j] + w.az[j];
    check += state.sx[i] + state.sy[i] + state.sz[i];
  }
  if (!std::isfinite(check)) {
    throw IntegrationError("kinetic step produced a non-finite spin at t = " +
                           std::to_string(state.time) + " s (dt = " + std::to_string(h) + " s)");
  }
}

std::vector<std::size_t> alive_indices(const EnsembleState& state) {
  std::vector<std::size_t> idx;
  idx.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.alive[i]) idx.push_back(i);
  }
  return idx;
}

}  // namespace

KineticIntegrator::KineticIntegrator(EnsembleState& state, const DynamicsParams& params,
                                     const TrapConfig& trap, Engine rng)
    : state_(state), params_(params), trap_(trap) {
  params_.validate();
  death_time_.assign(state_.size(), std::numeric_limits<double>::infinity());
  if (params_.loss_rate > 0.0) {
    std::exponential_distribution<double> life(params_.loss_rate);
    for (std::size_t i = 0; i < state_.size(); ++i) {
      if (state_.alive[i]) death_time_[i] = state_.time + life(rng);
    }
  }
  active_ = alive_indices(state_);
}

void KineticIntegrator::advance(double duration) {
  if (!(duration >= 0.0)) throw ArgumentError("advance: duration must be non-negative");
  if (duration == 0.0) return;
  const auto n_steps =
      static_cast<std::size_t>(std::ceil(duration / params_.dt - 1e-9));
  const double h = duration / static_cast<double>(n_steps);
  const double t0 = state_.time;
  const bool move_each_step = params_.dephasing == DephasingModel::quadratic_position;

  for (std::size_t k = 0; k < n_steps; ++k) {
    const double offset = static_cast<double>(k) * h;
    rk4_step(state_, active_, params_, trap_, h, move_each_step ? offset : 0.0, buf_);
    state_.time = t0 + static_cast<double>(k + 1) * h;
    ++steps_;
    if (params_.loss_rate > 0.0) {
      const double now = state_.time;
      std::erase_if(active_, [&](std::size_t i) {
        if (death_time_[i] > now) return false;
        state_.alive[i] = 0;
        return true;
      });
    }
  }
  for (auto& m : state_.motion) m = propagate(m, duration, trap_);
}

void step_kinetic(EnsembleState& state, const DynamicsParams& params, double dt,
                  const TrapConfig& trap) {
  DynamicsParams p = params;
  p.dt = dt;
  p.validate();
  std::vector<double> buf;
  rk4_step(state, alive_indices(state), p, trap, dt, 0.0, buf);
}

namespace {

TraceSample record(const EnsembleState& state, std::span<const double> couplings, double t) {
  TraceSample s;
  s.t = t;
  s.spin = state.total_spin();
  s.alive = state.alive_count();
  s.contrast = s.alive > 0 ? 2.0 * s.spin.norm() / static_cast<double>(s.alive) : 0.0;
  s.cavity_shift = couplings.empty() ? 0.0 : cavity_shift(state, couplings);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    s.temp_z_up = state_selected_temperature(state, Branch::up);
  } catch (const DegeneratePopulationError&) {
    s.temp_z_up = nan;
  }
  try {
    s.temp_z_down = state_selected_temperature(state, Branch::down);
  } catch (const DegeneratePopulationError&) {
    s.temp_z_down = nan;
  }
  return s;
}

}  // namespace

EvolutionTrace evolve(EnsembleState& state, double duration, const DynamicsParams& params,
                      const TrapConfig& trap, Engine& rng, const EvolveOptions& options) {
  if (!(duration >= 0.0)) throw ArgumentError("evolve: duration must be non-negative");
  if (!options.couplings.empty() && options.couplings.size() != state.size()) {
    throw ArgumentError("evolve: coupling list does not match ensemble size");
  }
  std::vector<double> times = options.sample_times;
  if (times.empty()) {
    times.push_back(0.0);
    if (duration > 0.0) times.push_back(duration);
  }
  std::sort(times.begin(), times.end());
  if (times.front() < 0.0 || times.back() > duration * (1.0 + 1e-12)) {
    throw ArgumentError("evolve: sample times must lie within [0, duration]");
  }

  KineticIntegrator integrator(state, params, trap, rng);
  EvolutionTrace trace;
  double elapsed = 0.0;
  for (double t : times) {
    integrator.advance(std::max(0.0, t - elapsed));
    elapsed = std::max(elapsed, t);
    trace.samples.push_back(record(state, options.couplings, t));
  }
  integrator.advance(std::max(0.0, duration - elapsed));
  return trace;
}

double state_selected_temperature(const EnsembleState& state, Branch branch) {
  const double sign = branch == Branch::up ? -1.0 : 1.0;
  double weight = 0.0;
  double energy = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state.alive[i]) continue;
    const double p = std::clamp(0.5 + sign * state.sz[i], 0.0, 1.0);
    weight += p;
    energy += p * state.motion[i].energy.z();
  }
  if (!(weight > 1e-9)) {
    throw DegeneratePopulationError("state_selected_temperature: branch population is zero");
  }
  return energy / weight / constants::boltzmann;
}

}  // namespace qndsim
