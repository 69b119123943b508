#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "qndsim/ensemble.hpp"
#include "qndsim/measurement.hpp"
#include "qndsim/rng.hpp"

namespace qndsim {

enum class DephasingModel { none, probe_ac_stark, quadratic_position };

struct DynamicsParams {
  double omega_ex = 0.0;  ///< rad/s
  double gamma_c = 0.0;   ///< 1/s
  double loss_rate = 0.0; ///< 1/s
  double dt = 1e-3;       ///< s
  double kernel = 1.0;    ///< constant K(E, E')
  DephasingModel dephasing = DephasingModel::none;
  /// quadratic_position only: delta omega_a = c . (x^2, y^2, z^2), rad/(s m^2).
  Eigen::Vector3d quadratic_coeffs = Eigen::Vector3d::Zero();

  void validate() const;
};

struct TraceSample {
  double t = 0.0;
  Eigen::Vector3d spin = Eigen::Vector3d::Zero();
  double contrast = 0.0;
  double cavity_shift = 0.0;  ///< rad/s, zero when no couplings were supplied
  double temp_z_up = 0.0;     ///< K, NaN for a degenerate branch
  double temp_z_down = 0.0;
  std::size_t alive = 0;
};

struct EvolutionTrace {
  std::vector<TraceSample> samples;
};

/// Fixed-step RK4 integrator of the kinetic equation
///   ds_i/dt = (omega_ex K (2/N0) S + delta omega_a(r_i) e_z) x s_i - gamma_c (s_i - s_mean)
/// with one-body loss. N0 is EnsembleState::initial_count, so the exchange
/// field weakens as atoms are lost.
/// Death times are drawn once at construction, so results do not depend on
/// how the run is split into advance() calls.
class KineticIntegrator {
 public:
  KineticIntegrator(EnsembleState& state, const DynamicsParams& params, const TrapConfig& trap,
                    Engine rng);

  /// Advances by `duration` seconds in ceil(duration / dt) equal steps.
  void advance(double duration);
  double time() const { return state_.time; }
  std::size_t steps_taken() const { return steps_; }

 private:
  EnsembleState& state_;
  DynamicsParams params_;
  TrapConfig trap_;
  std::vector<double> death_time_;
  std::vector<std::size_t> active_;
  std::size_t steps_ = 0;
  std::vector<double> buf_;
};

/// One RK4 step of the spin equation at fixed positions, no loss.
void step_kinetic(EnsembleState& state, const DynamicsParams& params, double dt,
                  const TrapConfig& trap);

struct EvolveOptions {
  /// Times relative to the start at which observables are recorded. Empty
  /// means {0, duration}.
  std::vector<double> sample_times;
  /// Per-atom couplings for the recorded cavity shift.
  std::vector<double> couplings;
};

EvolutionTrace evolve(EnsembleState& state, double duration, const DynamicsParams& params,
                      const TrapConfig& trap, Engine& rng, const EvolveOptions& options = {});

enum class Branch { up, down };

/// Population-weighted transverse (z) temperature of one branch, with
/// P_up,i = 1/2 - s_z,i and P_down,i = 1/2 + s_z,i.
double state_selected_temperature(const EnsembleState& state, Branch branch);

}  // namespace qndsim
