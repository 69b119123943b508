#include "qndsim/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"

namespace qndsim {

void ProbeConfig::validate() const {
  if (!(pulse_duration > 0.0)) throw ConfigError("probe.pulse_duration", "must be positive");
  if (!(mean_transmitted > 0.0)) throw ConfigError("probe.mean_transmitted", "must be positive");
  if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0)) {
    throw ConfigError("probe.detection_efficiency", "must lie in (0, 1]");
  }
  if (!std::isfinite(detuning)) throw ConfigError("probe.detuning", "must be finite");
  if (coupling_quadrature < 1) throw ConfigError("probe.coupling_quadrature", "must be >= 1");
}

std::size_t EnsembleState::alive_count() const {
  return static_cast<std::size_t>(std::count(alive.begin(), alive.end(), std::uint8_t{1}));
}

Eigen::Vector3d EnsembleState::total_spin() const {
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < size(); ++i) {
    if (!alive[i]) continue;
    s += Eigen::Vector3d(sx[i], sy[i], sz[i]);
  }
  return s;
}

double EnsembleState::contrast() const {
  const std::size_t n = alive_count();
  if (n == 0) return 0.0;
  return 2.0 * total_spin().norm() / static_cast<double>(n);
}

EnsembleState make_ensemble(std::vector<MotionalState> motion) {
  EnsembleState st;
  const std::size_t n = motion.size();
  st.motion = std::move(motion);
  st.sx.assign(n, 0.0);
  st.sy.assign(n, 0.0);
  st.sz.assign(n, -0.5);
  st.alive.assign(n, 1);
  st.initial_count = n;
  return st;
}

void prepare_css(EnsembleState& state) {
  apply_rotation(state, Eigen::Vector3d::UnitY(), -0.5 * constants::pi);
}

double draw_sz(std::size_t n, Engine& rng, ProjectionMethod method) {
  if (n == 0) return 0.0;
  const double half = 0.5 * static_cast<double>(n);
  if (method == ProjectionMethod::binomial ||
      (method == ProjectionMethod::automatic && n < 100)) {
    std::binomial_distribution<std::uint64_t> bin(n, 0.5);
    return static_cast<double>(bin(rng)) - half;
  }
  std::normal_distribution<double> g(0.0, std::sqrt(half * 0.5));
  const double k = std::clamp(std::round(g(rng) + half), 0.0, static_cast<double>(n));
  return k - half;
}

void assign_uniform_sz(EnsembleState& state, double sz_per_atom) {
  if (std::abs(sz_per_atom) > 0.5) throw ArgumentError("assign_uniform_sz: |s_z| exceeds 1/2");
  const double perp = std::sqrt(std::max(0.0, 0.25 - sz_per_atom * sz_per_atom));
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state.alive[i]) continue;
    const double rho = std::hypot(state.sx[i], state.sy[i]);
    if (rho > 0.0) {
      state.sx[i] *= perp / rho;
      state.sy[i] *= perp / rho;
    } else {
      state.sx[i] = perp;
      state.sy[i] = 0.0;
    }
    state.sz[i] = sz_per_atom;
  }
}

double project_sz(EnsembleState& state, Engine& rng, ProjectionMethod method) {
  const std::size_t n = state.alive_count();
  const double sz = draw_sz(n, rng, method);
  if (n > 0) assign_uniform_sz(state, sz / static_cast<double>(n));
  return sz;
}

std::vector<double> effective_couplings(const EnsembleState& state, const CavityConfig& cav,
                                        const TrapConfig& trap, const ProbeConfig& probe) {
  if (!(probe.pulse_duration > 0.0)) {
    throw ArgumentError("effective_couplings: pulse duration must be positive");
  }
  std::vector<double> out(state.size());
  if (probe.coupling_mode == CouplingMode::closed_form) {
    for (std::size_t i = 0; i < state.size(); ++i) {
      out[i] = effective_coupling(state.motion[i], cav, trap, probe.pulse_duration,
                                  probe.coupling_mode);
    }
    return out;
  }
  // Same midpoint rule as effective_coupling, with the per-node phase
  // factors shared by all atoms.
  const int nodes = probe.coupling_quadrature;
  if (nodes < 1) throw ArgumentError("effective_couplings: need at least one quadrature node");
  const double h = probe.pulse_duration / nodes;
  std::vector<Eigen::Vector3d> c(nodes), s(nodes);
  for (int k = 0; k < nodes; ++k) {
    for (int a = 0; a < 3; ++a) {
      const double w = trap.omega(a);
      c[k][a] = std::cos(w * (k + 0.5) * h);
      s[k][a] = std::sin(w * (k + 0.5) * h) / w;
    }
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    const MotionalState& m = state.motion[i];
    double sum = 0.0;
    for (int k = 0; k < nodes; ++k) {
      const Eigen::Vector3d r = m.position.cwiseProduct(c[k]) + m.velocity.cwiseProduct(s[k]);
      sum += axial_averaged_coupling_at(r, cav);
    }
    out[i] = sum / nodes;
  }
  return out;
}

double cavity_shift(const EnsembleState& state, std::span<const double> couplings) {
  if (couplings.size() != state.size()) {
    throw ArgumentError("cavity_shift: coupling list does not match ensemble size");
  }
  double shift = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state.alive[i]) shift += couplings[i] * state.sz[i];
  }
  return shift;
}

double transmission_slope(double detuning, double kappa) {
  const double u = 2.0 * detuning / kappa;
  return 8.0 * detuning / (kappa * kappa) / (1.0 + u * u);
}

double expected_transmitted(double shift, const ProbeConfig& probe, const CavityConfig& cav) {
  if (probe.transmission == TransmissionModel::linearized) {
    return probe.mean_transmitted * (1.0 + transmission_slope(probe.detuning, cav.kappa) * shift);
  }
  const double u0 = 2.0 * probe.detuning / cav.kappa;
  const double u = 2.0 * (probe.detuning - shift) / cav.kappa;
  return probe.mean_transmitted * (1.0 + u0 * u0) / (1.0 + u * u);
}

double estimate_shift(double transmitted, const ProbeConfig& probe, const CavityConfig& cav) {
  if (probe.transmission == TransmissionModel::linearized) {
    return (transmitted / probe.mean_transmitted - 1.0) /
           transmission_slope(probe.detuning, cav.kappa);
  }
  const double u0 = 2.0 * probe.detuning / cav.kappa;
  if (!(transmitted > 0.0)) return -std::numeric_limits<double>::infinity();
  const double arg = (1.0 + u0 * u0) * probe.mean_transmitted / transmitted - 1.0;
  return probe.detuning - 0.5 * cav.kappa * std::sqrt(std::max(0.0, arg));
}

namespace {

void rotate_about_z(EnsembleState& state, std::span<const double> angle_per_coupling,
                    double scale) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state.alive[i]) continue;
    const double phi = angle_per_coupling[i] * scale;
    const double c = std::cos(phi);
    const double s = std::sin(phi);
    const double x = state.sx[i];
    state.sx[i] = c * x - s * state.sy[i];
    state.sy[i] = s * x + c * state.sy[i];
  }
}

// Ideal pi pulse about x: (x, y, z) -> (x, -y, -z).
void pi_pulse_x(EnsembleState& state) {
  for (std::size_t i = 0; i < state.size(); ++i) {
    state.sy[i] = -state.sy[i];
    state.sz[i] = -state.sz[i];
  }
}

}  // namespace

PulseResult probe_pulse(EnsembleState& state, std::span<const double> couplings,
                        const ProbeConfig& probe, const CavityConfig& cav, Engine& rng) {
  PulseResult r;
  r.true_shift = cavity_shift(state, couplings);
  r.expected = std::max(0.0, expected_transmitted(r.true_shift, probe, cav));
  r.linearization_warning = std::abs(2.0 * r.true_shift / cav.kappa) > 0.5;
  if (probe.shot_noise) {
    std::poisson_distribution<std::int64_t> poisson(r.expected);
    const auto nt = r.expected > 0.0 ? poisson(rng) : 0;
    std::binomial_distribution<std::int64_t> thin(nt, probe.detection_efficiency);
    r.transmitted = static_cast<double>(nt);
    r.detected = static_cast<double>(thin(rng));
  } else {
    r.transmitted = r.expected;
    r.detected = r.expected * probe.detection_efficiency;
  }
  r.estimated_shift = estimate_shift(r.detected / probe.detection_efficiency, probe, cav);
  rotate_about_z(state, couplings, r.transmitted / cav.transmission_rate());
  return r;
}

MeasurementRecord composite_measurement(EnsembleState& state, std::span<const double> couplings,
                                        const ProbeConfig& probe, const CavityConfig& cav,
                                        Measurement which, Engine& rng) {
  const PulseResult first = probe_pulse(state, couplings, probe, cav, rng);
  pi_pulse_x(state);
  const PulseResult second = probe_pulse(state, couplings, probe, cav, rng);

  const bool m1 = which == Measurement::m1;
  const PulseResult& plus = m1 ? second : first;
  const PulseResult& minus = m1 ? first : second;

  MeasurementRecord rec;
  rec.delta_omega_plus = plus.estimated_shift;
  rec.delta_omega_minus = minus.estimated_shift;
  rec.detected_plus = plus.detected;
  rec.detected_minus = minus.detected;
  rec.m = 0.5 * (rec.delta_omega_plus - rec.delta_omega_minus);
  rec.psn_variance = rec.detected() > 0.0 ? psn_variance(rec.detected(), cav.kappa)
                                          : std::numeric_limits<double>::infinity();
  rec.time = state.time;
  rec.linearization_warning = first.linearization_warning || second.linearization_warning;
  return rec;
}

double psn_variance(double detected, double kappa) {
  if (!(detected > 0.0)) throw ArgumentError("psn_variance: detected photon number must be > 0");
  return kappa * kappa / (4.0 * detected);
}

void apply_rotation(EnsembleState& state, const Eigen::Vector3d& axis, double angle) {
  const double norm = axis.norm();
  if (!(norm > 0.0)) throw ArgumentError("apply_rotation: zero rotation axis");
  const Eigen::Vector3d k = axis / norm;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state.alive[i]) continue;
    const Eigen::Vector3d v(state.sx[i], state.sy[i], state.sz[i]);
    const Eigen::Vector3d r = v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c));
    state.sx[i] = r.x();
    state.sy[i] = r.y();
    state.sz[i] = r.z();
  }
}

void rotate_about_mean_spin(EnsembleState& state, double angle) {
  apply_rotation(state, state.total_spin(), angle);
}

ImagingResult imaging_readout(const EnsembleState& state, double noise_sigma, Engine& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double up = 0.0;
  double down = 0.0;
  double e_up = 0.0;
  double e_down = 0.0;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!state.alive[i]) continue;
    const double p_up = std::clamp(0.5 - state.sz[i], 0.0, 1.0);
    const double ez = state.motion[i].energy.z();
    if (u(rng) < p_up) {
      up += 1.0;
      e_up += ez;
    } else {
      down += 1.0;
      e_down += ez;
    }
  }
  ImagingResult r;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.temp_z_up = up > 0.0 ? e_up / up / constants::boltzmann : nan;
  r.temp_z_down = down > 0.0 ? e_down / down / constants::boltzmann : nan;
  r.temp_z_all = up + down > 0.0 ? (e_up + e_down) / (up + down) / constants::boltzmann : nan;

  double noise = 0.0;
  if (noise_sigma > 0.0) noise = std::normal_distribution<double>(0.0, noise_sigma)(rng);
  r.n_up = up + 0.5 * noise;
  r.n_down = down - 0.5 * noise;
  return r;
}

}  // namespace qndsim
