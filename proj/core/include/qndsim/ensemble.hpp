#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qndsim/rng.hpp"

namespace qndsim {

/// Harmonic trap and thermal cloud parameters, SI units throughout.
struct TrapConfig {
  double omega_x = 0.0;  ///< longitudinal (cavity axis) angular frequency, rad/s
  double omega_y = 0.0;  ///< rad/s
  double omega_z = 0.0;  ///< rad/s
  double temp_longitudinal = 0.0;  ///< T_x, kelvin
  double temp_transverse = 0.0;    ///< T along y and z, kelvin
  std::size_t atom_number = 0;
  double mass = 0.0;               ///< kg
  double scattering_length = 0.0;  ///< a_updown, m
  double mean_density = 0.0;       ///< m^-3
  double loss_rate = 0.0;          ///< one-body loss rate gamma, 1/s

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  double omega(int axis) const { return axis == 0 ? omega_x : axis == 1 ? omega_y : omega_z; }
  double temperature(int axis) const { return axis == 0 ? temp_longitudinal : temp_transverse; }
};

/// Fabry-Perot cavity mode and probe-wavelength geometry.
struct CavityConfig {
  double waist = 0.0;                ///< w0, m
  double length = 0.0;               ///< L, m
  double kappa = 0.0;                ///< linewidth FWHM, rad/s
  double peak_shift = 0.0;           ///< Omega_0, rad/s (axially averaged normalization)
  double wavevector = 0.0;           ///< k of the probe, 1/m
  double mirror_transmission = 0.0;  ///< per mirror, dimensionless
  double finesse = 0.0;

  void validate() const;

  /// L_R = k w0^2 / 2.
  double rayleigh_length() const { return 0.5 * wavevector * waist * waist; }
  /// kappa_t = T c / (2L).
  double transmission_rate() const;
};

/// Classical phase-space point of one atom. `energy` holds the per-axis
/// harmonic energies, which are constants of the motion.
struct MotionalState {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  Eigen::Vector3d energy = Eigen::Vector3d::Zero();
};

enum class CouplingMode { trajectory_average, closed_form };

struct CouplingStats {
  std::size_t count = 0;
  double mean = 0.0;      ///< Omega_bar
  double stddev = 0.0;    ///< Delta Omega (population)
  double n_eff = 0.0;     ///< (sum Omega)^2 / sum Omega^2
  double omega_eff = 0.0; ///< sum Omega^2 / sum Omega
};

MotionalState make_motional_state(const Eigen::Vector3d& position, const Eigen::Vector3d& velocity,
                                  const TrapConfig& trap);

/// Draws `count` atoms from the Boltzmann distribution of the anisotropic
/// harmonic trap: per axis, position ~ N(0, kT_a/(m w_a^2)) and velocity ~
/// N(0, kT_a/m).
std::vector<MotionalState> sample_thermal_ensemble(const TrapConfig& trap, std::size_t count,
                                                   Engine& rng);

/// Uses `trap.atom_number` as the sample count.
std::vector<MotionalState> sample_thermal_ensemble(const TrapConfig& trap, Engine& rng);

/// Exact harmonic-oscillator update by `dt` seconds.
MotionalState propagate(const MotionalState& state, double dt, const TrapConfig& trap);

/// Position along every axis after `dt`, without touching velocities.
Eigen::Vector3d position_after(const MotionalState& state, double dt, const TrapConfig& trap);

/// 1/e cloud radius sqrt(2 kT_a / m) / w_a along `axis`.
double cloud_radius(const TrapConfig& trap, int axis);

/// Single-atom dispersive shift at position r, including the standing wave:
/// 2 Omega_0 cos^2(kx) (w0/w) exp(-2 (y^2+z^2)/w^2). Omega_0 is the axially
/// averaged peak, so the standing wave averages back to it.
double coupling_at(const Eigen::Vector3d& r, const CavityConfig& cav);

/// Same as coupling_at with the standing-wave factor averaged out and
/// absorbed into Omega_0, so the value at the waist centre is Omega_0.
double axial_averaged_coupling_at(const Eigen::Vector3d& r, const CavityConfig& cav);

/// Effective coupling of an atom over a probe pulse of duration tau_p that
/// starts now. Trajectory mode time-averages axial_averaged_coupling_at along
/// the analytic orbit (midpoint rule, `samples` nodes); closed-form mode uses
/// the Bessel-function expression in the per-axis energies.
double effective_coupling(const MotionalState& state, const CavityConfig& cav,
                          const TrapConfig& trap, double tau_p, CouplingMode mode,
                          int samples = 64);

CouplingStats ensemble_coupling_stats(std::span<const double> couplings);

/// Exchange rate omega_ex in rad/s: 2 pi times 2 hbar |a| n / m.
double exchange_rate(const TrapConfig& trap);

/// Lateral collision rate gamma_c = (32 sqrt(pi)/3) a^2 n v_T, v_T = sqrt(kT/m).
double lateral_rate(const TrapConfig& trap);

/// Peak single-atom cooperativity 24 F / (pi k^2 w0^2).
double cooperativity(const CavityConfig& cav);

/// True when omega_{y,z} > omega_x > omega_ex > gamma_c.
bool knudsen_regime(const TrapConfig& trap);

/// Back-solves Omega_0 so that the ensemble mean effective coupling of a
/// thermal sample equals `target_mean`. Linear in Omega_0, so one sample pass
/// suffices.
double calibrate_peak_shift(const TrapConfig& trap, const CavityConfig& cav, double target_mean,
                            double tau_p, CouplingMode mode, std::size_t samples, Engine& rng,
                            int quadrature = 64);

}  // namespace qndsim
