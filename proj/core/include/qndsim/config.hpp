#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "qndsim/dynamics.hpp"
#include "qndsim/ensemble.hpp"
#include "qndsim/measurement.hpp"

namespace qndsim {

inline constexpr int config_schema_version = 1;

// Raw values exactly as written in the config file; the unit is part of
// each field name. Physics structs in SI units are derived on demand, so
// emit(load(x)) reproduces x.

struct TrapSection {
  double freq_x_hz = 0.0;
  double freq_y_hz = 0.0;
  double freq_z_hz = 0.0;
  double temp_longitudinal_nk = 0.0;
  double temp_transverse_nk = 0.0;
  std::size_t atom_number = 0;
  double mass_amu = 0.0;
  double scattering_length_bohr = 0.0;
  double mean_density_per_cm3 = 0.0;
  double lifetime_s = 0.0;
};

struct CavitySection {
  double waist_um = 0.0;
  double length_um = 0.0;
  double kappa_fwhm_hz = 0.0;
  double peak_shift_hz = 0.0;
  double mean_coupling_hz = 0.0;  ///< Omega_bar / 2 pi, reference for estimators
  double probe_wavelength_nm = 0.0;
  double mirror_transmission_ppm = 0.0;
  double finesse = 0.0;
};

struct ProbeSection {
  double pulse_duration_ms = 0.0;
  double detuning_linewidths = 0.0;  ///< detuning / kappa
  double detected_photons_m1 = 0.0;  ///< mean detected per composite measurement
  double detected_photons_m2 = 0.0;
  double detection_efficiency = 0.0;
  std::string transmission_model = "linearized";
  bool shot_noise = true;
  std::string coupling_mode = "trajectory_average";
  int coupling_quadrature = 16;
};

struct DynamicsSection {
  bool exchange_enabled = true;
  bool lateral_collisions_enabled = true;
  bool loss_enabled = true;
  double exchange_kernel = 1.0;
  std::string dephasing_model = "probe_ac_stark";
  std::array<double, 3> quadratic_dephasing_hz_per_um2{0.0, 0.0, 0.0};
  double dt_ms = 1.0;
};

struct ReadoutSection {
  double imaging_noise_atoms = 100.0;
};

struct SimulationSection {
  std::size_t desk_atom_number = 2000;
  std::size_t bootstrap_resamples = 400;
  double ci_level = 0.683;
  std::size_t threads = 0;  ///< 0: hardware concurrency
  double post_selection_width = 0.25;  ///< tomography |M1| cut in units of Omega_bar sqrt(N)
};

struct ExperimentConfig {
  TrapSection trap;
  CavitySection cavity;
  ProbeSection probe;
  DynamicsSection dynamics;
  ReadoutSection readout;
  SimulationSection simulation;

  TrapConfig trap_config() const;
  CavityConfig cavity_config() const;
  ProbeConfig probe_config(Measurement which) const;
  /// Rates follow the enabled flags; omega_ex and gamma_c come from the trap.
  DynamicsParams dynamics_params() const;
  /// Omega_bar in rad/s.
  double omega_bar() const;

  /// Throws ConfigError naming the dotted path of the first bad field.
  void validate() const;
};

/// Strict parse: unknown keys, missing keys and type mismatches are errors.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// Canonical text form: sorted keys, two-space indent.
std::string canonical_config_text(const ExperimentConfig& cfg);
/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

TransmissionModel parse_transmission_model(const std::string& name);
CouplingMode parse_coupling_mode(const std::string& name);
DephasingModel parse_dephasing_model(const std::string& name);

}  // namespace qndsim
