#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "qndsim/ensemble.hpp"
#include "qndsim/rng.hpp"

namespace qndsim {

enum class TransmissionModel { linearized, lorentzian };

struct ProbeConfig {
  double detuning = 0.0;              ///< probe minus bare cavity frequency, rad/s
  double pulse_duration = 0.0;        ///< tau_p, s
  double mean_transmitted = 0.0;      ///< n_p per pulse at zero cavity shift
  double detection_efficiency = 1.0;  ///< eta
  TransmissionModel transmission = TransmissionModel::linearized;
  bool shot_noise = true;  ///< false: counts take their expectation values
  CouplingMode coupling_mode = CouplingMode::trajectory_average;
  int coupling_quadrature = 32;

  void validate() const;

  /// n_p for a composite measurement that detects `mean_detected` photons
  /// in total over its two pulses.
  static double transmitted_for_detected(double mean_detected, double eta) {
    return mean_detected / (2.0 * eta);
  }
};

/// Particle representation of the cloud: motion plus one Bloch vector per
/// atom (|s| = 1/2 for a pure state), structure-of-arrays layout.
struct EnsembleState {
  std::vector<MotionalState> motion;
  std::vector<double> sx;
  std::vector<double> sy;
  std::vector<double> sz;
  std::vector<std::uint8_t> alive;
  std::size_t initial_count = 0;
  double time = 0.0;

  std::size_t size() const { return sx.size(); }
  std::size_t alive_count() const;
  Eigen::Vector3d total_spin() const;
  /// 2|S| / N_alive, zero for an empty ensemble.
  double contrast() const;
};

/// All atoms alive and in the lower state, s = (0, 0, -1/2).
EnsembleState make_ensemble(std::vector<MotionalState> motion);

/// Resonant pi/2 pulse taking the lower state to +x.
void prepare_css(EnsembleState& state);

enum class ProjectionMethod { automatic, gaussian, binomial };

/// Semi-classical stand-in for the projection noise of a CSS: mean 0,
/// variance N/4, support {-N/2, ..., N/2}. `automatic` uses the exact
/// binomial below 100 atoms and a rounded Gaussian above.
double draw_sz(std::size_t n, Engine& rng, ProjectionMethod method = ProjectionMethod::automatic);

/// Sets every alive atom to s_z = sz_per_atom while keeping its azimuth,
/// with the transverse length fixed by |s| = 1/2.
void assign_uniform_sz(EnsembleState& state, double sz_per_atom);

/// Draws S_z and spreads it uniformly over the alive atoms; returns S_z.
double project_sz(EnsembleState& state, Engine& rng,
                  ProjectionMethod method = ProjectionMethod::automatic);

/// Effective coupling of every atom for a pulse starting now (dead atoms
/// included, they are ignored downstream).
std::vector<double> effective_couplings(const EnsembleState& state, const CavityConfig& cav,
                                        const TrapConfig& trap, const ProbeConfig& probe);

/// Sum of Omega_i s_z,i over alive atoms, rad/s.
double cavity_shift(const EnsembleState& state, std::span<const double> couplings);

/// Fractional transmission change per unit cavity shift at zero shift,
/// d(ln n)/d(delta omega). Equals 2/kappa at detuning kappa/2.
double transmission_slope(double detuning, double kappa);

/// Expected transmitted photons for a shifted cavity.
double expected_transmitted(double shift, const ProbeConfig& probe, const CavityConfig& cav);

/// Inverse of expected_transmitted applied to an estimated transmitted count.
double estimate_shift(double transmitted, const ProbeConfig& probe, const CavityConfig& cav);

struct PulseResult {
  double true_shift = 0.0;       ///< rad/s
  double expected = 0.0;         ///< expected transmitted photons
  double transmitted = 0.0;
  double detected = 0.0;
  double estimated_shift = 0.0;  ///< from detected / eta, rad/s
  bool linearization_warning = false;
};

/// One probe pulse. Samples the transmitted (Poisson) and detected
/// (binomial) counts and rotates every alive spin about +z by
/// Omega_i * n_t / kappa_t.
PulseResult probe_pulse(EnsembleState& state, std::span<const double> couplings,
                        const ProbeConfig& probe, const CavityConfig& cav, Engine& rng);

enum class Measurement { m1, m2 };

struct MeasurementRecord {
  double delta_omega_plus = 0.0;   ///< rad/s
  double delta_omega_minus = 0.0;  ///< rad/s
  double detected_plus = 0.0;
  double detected_minus = 0.0;
  double m = 0.0;                  ///< (plus - minus) / 2, rad/s
  double psn_variance = 0.0;       ///< (rad/s)^2
  double time = 0.0;               ///< s
  bool linearization_warning = false;

  double detected() const { return detected_plus + detected_minus; }
};

/// Pulse, ideal pi pulse about x, pulse. For M1 the first pulse is labelled
/// minus and for M2 plus, so that both report +Omega_bar S_z with S_z taken
/// in the frame after M1.
MeasurementRecord composite_measurement(EnsembleState& state, std::span<const double> couplings,
                                        const ProbeConfig& probe, const CavityConfig& cav,
                                        Measurement which, Engine& rng);

/// kappa^2 / (4 n).
double psn_variance(double detected, double kappa);

/// Rigid rotation of every alive spin (Rodrigues). `axis` is normalized here
/// and must be non-zero.
void apply_rotation(EnsembleState& state, const Eigen::Vector3d& axis, double angle);

/// Rotation about the current direction of the total spin.
void rotate_about_mean_spin(EnsembleState& state, double angle);

struct ImagingResult {
  double n_up = 0.0;
  double n_down = 0.0;
  double temp_z_up = 0.0;    ///< K, NaN for an empty branch
  double temp_z_down = 0.0;  ///< K
  double temp_z_all = 0.0;   ///< K
};

/// State-selective absorption imaging. Each alive atom is counted as up with
/// probability 1/2 - s_z (frame after the final pi pulse) and the population
/// difference receives Gaussian noise of width `noise_sigma` atoms. Branch
/// temperatures are E_z averaged over the atoms assigned to each branch.
ImagingResult imaging_readout(const EnsembleState& state, double noise_sigma, Engine& rng);

}  // namespace qndsim
