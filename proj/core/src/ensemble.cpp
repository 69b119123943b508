#include "qndsim/ensemble.hpp"

#include <cmath>
#include <string>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"

namespace qndsim {

namespace {

void require_positive(double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ConfigError(field, "must be strictly positive and finite, got " + std::to_string(value));
  }
}

// e^{-u} I0(u), evaluated without overflow for large u.
double scaled_bessel_i0(double u) {
  if (u < 600.0) return std::exp(-u) * std::cyl_bessel_i(0.0, u);
  const double inv = 1.0 / (8.0 * u);
  return (1.0 + inv * (1.0 + 4.5 * inv)) / std::sqrt(constants::two_pi * u);
}

// Mean of x(t)^2 over [0, tau] for x(t) = x0 cos(wt) + (v0/w) sin(wt).
double mean_square_over_window(double x0, double v0, double omega, double tau) {
  const double amp2 = x0 * x0 + (v0 / omega) * (v0 / omega);
  if (amp2 == 0.0) return 0.0;
  const double phase = std::atan2(-v0 / omega, x0);  // x = A cos(wt + phase)
  const double wt = omega * tau;
  return 0.5 * amp2 +
         amp2 / (4.0 * wt) * (std::sin(2.0 * (wt + phase)) - std::sin(2.0 * phase));
}

}  // namespace

void TrapConfig::validate() const {
  require_positive(omega_x, "trap.omega_x");
  require_positive(omega_y, "trap.omega_y");
  require_positive(omega_z, "trap.omega_z");
  require_positive(temp_longitudinal, "trap.temp_longitudinal");
  require_positive(temp_transverse, "trap.temp_transverse");
  require_positive(mass, "trap.mass");
  require_positive(scattering_length, "trap.scattering_length");
  require_positive(mean_density, "trap.mean_density");
  if (!(loss_rate >= 0.0) || !std::isfinite(loss_rate)) {
    throw ConfigError("trap.loss_rate", "must be non-negative");
  }
}

void CavityConfig::validate() const {
  require_positive(waist, "cavity.waist");
  require_positive(length, "cavity.length");
  require_positive(kappa, "cavity.kappa");
  require_positive(peak_shift, "cavity.peak_shift");
  require_positive(wavevector, "cavity.wavevector");
  require_positive(mirror_transmission, "cavity.mirror_transmission");
  require_positive(finesse, "cavity.finesse");
  if (transmission_rate() > 0.5 * kappa) {
    throw ConfigError("cavity.mirror_transmission",
                      "transmission rate kappa_t exceeds kappa/2");
  }
}

double CavityConfig::transmission_rate() const {
  return mirror_transmission * constants::speed_of_light / (2.0 * length);
}

MotionalState make_motional_state(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity,
                                  const TrapConfig& trap) {
  MotionalState s{position, velocity, Eigen::Vector3d::Zero()};
  for (int a = 0; a < 3; ++a) {
    const double w = trap.omega(a);
    s.energy[a] = 0.5 * trap.mass * (velocity[a] * velocity[a] + w * w * position[a] * position[a]);
  }
  return s;
}

std::vector<MotionalState> sample_thermal_ensemble(const TrapConfig& trap, std::size_t count,
                                                   Engine& rng) {
  trap.validate();
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<MotionalState> atoms;
  atoms.reserve(count);
  double v_sigma[3];
  double r_sigma[3];
  for (int a = 0; a < 3; ++a) {
    v_sigma[a] = std::sqrt(constants::boltzmann * trap.temperature(a) / trap.mass);
    r_sigma[a] = v_sigma[a] / trap.omega(a);
  }
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::Vector3d r;
    Eigen::Vector3d v;
    for (int a = 0; a < 3; ++a) {
      r[a] = r_sigma[a] * unit(rng);
      v[a] = v_sigma[a] * unit(rng);
    }
    atoms.push_back(make_motional_state(r, v, trap));
  }
  return atoms;
}

std::vector<MotionalState> sample_thermal_ensemble(const TrapConfig& trap, Engine& rng) {
  return sample_thermal_ensemble(trap, trap.atom_number, rng);
}

MotionalState propagate(const MotionalState& state, double dt, const TrapConfig& trap) {
  MotionalState out = state;
  if (dt == 0.0) return out;
  for (int a = 0; a < 3; ++a) {
    const double w = trap.omega(a);
    const double c = std::cos(w * dt);
    const double s = std::sin(w * dt);
    out.position[a] = state.position[a] * c + state.velocity[a] / w * s;
    out.velocity[a] = -state.position[a] * w * s + state.velocity[a] * c;
  }
  return out;
}

Eigen::Vector3d position_after(const MotionalState& state, double dt, const TrapConfig& trap) {
  Eigen::Vector3d r;
  for (int a = 0; a < 3; ++a) {
    const double w = trap.omega(a);
    r[a] = state.position[a] * std::cos(w * dt) + state.velocity[a] / w * std::sin(w * dt);
  }
  return r;
}

double cloud_radius(const TrapConfig& trap, int axis) {
  return std::sqrt(2.0 * constants::boltzmann * trap.temperature(axis) / trap.mass) /
         trap.omega(axis);
}

double axial_averaged_coupling_at(const Eigen::Vector3d& r, const CavityConfig& cav) {
  const double lr = cav.rayleigh_length();
  const double w2 = cav.waist * cav.waist * (1.0 + r.x() * r.x() / (lr * lr));
  const double rho2 = r.y() * r.y() + r.z() * r.z();
  return cav.peak_shift * cav.waist / std::sqrt(w2) * std::exp(-2.0 * rho2 / w2);
}

double coupling_at(const Eigen::Vector3d& r, const CavityConfig& cav) {
  const double c = std::cos(cav.wavevector * r.x());
  return 2.0 * c * c * axial_averaged_coupling_at(r, cav);
}

double effective_coupling(const MotionalState& state, const CavityConfig& cav,
                          const TrapConfig& trap, double tau_p, CouplingMode mode, int samples) {
  if (!(tau_p > 0.0)) throw ArgumentError("effective_coupling: tau_p must be positive");
  if (mode == CouplingMode::trajectory_average) {
    if (samples < 1) throw ArgumentError("effective_coupling: need at least one quadrature node");
    double sum = 0.0;
    const double h = tau_p / samples;
    for (int k = 0; k < samples; ++k) {
      sum += axial_averaged_coupling_at(position_after(state, (k + 0.5) * h, trap), cav);
    }
    return sum / samples;
  }

  const double w0sq = cav.waist * cav.waist;
  const double eps_y = 0.5 * trap.mass * trap.omega_y * trap.omega_y * w0sq;
  const double eps_z = 0.5 * trap.mass * trap.omega_z * trap.omega_z * w0sq;
  const double lr = cav.rayleigh_length();
  const double x2 = mean_square_over_window(state.position.x(), state.velocity.x(), trap.omega_x,
                                            tau_p);
  return cav.peak_shift * (1.0 - x2 / (lr * lr)) * scaled_bessel_i0(state.energy.y() / eps_y) *
         scaled_bessel_i0(state.energy.z() / eps_z);
}

CouplingStats ensemble_coupling_stats(std::span<const double> couplings) {
  if (couplings.empty()) throw ArgumentError("ensemble_coupling_stats: empty coupling list");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double c : couplings) {
    sum += c;
    sum_sq += c * c;
  }
  const double n = static_cast<double>(couplings.size());
  CouplingStats st;
  st.count = couplings.size();
  st.mean = sum / n;
  double var = 0.0;
  for (double c : couplings) var += (c - st.mean) * (c - st.mean);
  st.stddev = std::sqrt(var / n);
  st.n_eff = sum * sum / sum_sq;
  st.omega_eff = sum_sq / sum;
  return st;
}

double exchange_rate(const TrapConfig& trap) {
  // 2 hbar |a| n / m is the rate divided by 2 pi.
  return constants::two_pi * 2.0 * constants::hbar * std::abs(trap.scattering_length) *
         trap.mean_density / trap.mass;
}

double lateral_rate(const TrapConfig& trap) {
  const double v_thermal = std::sqrt(constants::boltzmann * trap.temp_transverse / trap.mass);
  const double a = trap.scattering_length;
  return 32.0 * std::sqrt(constants::pi) / 3.0 * a * a * trap.mean_density * v_thermal;
}

double cooperativity(const CavityConfig& cav) {
  const double kw = cav.wavevector * cav.waist;
  return 24.0 * cav.finesse / (constants::pi * kw * kw);
}

bool knudsen_regime(const TrapConfig& trap) {
  const double wex = exchange_rate(trap);
  return trap.omega_y > trap.omega_x && trap.omega_z > trap.omega_x && trap.omega_x > wex &&
         wex > lateral_rate(trap);
}

double calibrate_peak_shift(const TrapConfig& trap, const CavityConfig& cav, double target_mean,
                            double tau_p, CouplingMode mode, std::size_t samples, Engine& rng,
                            int quadrature) {
  if (!(target_mean > 0.0)) throw ArgumentError("calibrate_peak_shift: target must be positive");
  if (samples == 0) throw ArgumentError("calibrate_peak_shift: need at least one sample");
  CavityConfig unit = cav;
  unit.peak_shift = 1.0;
  const auto atoms = sample_thermal_ensemble(trap, samples, rng);
  double sum = 0.0;
  for (const auto& a : atoms) sum += effective_coupling(a, unit, trap, tau_p, mode, quadrature);
  return target_mean / (sum / static_cast<double>(samples));
}

}  // namespace qndsim
