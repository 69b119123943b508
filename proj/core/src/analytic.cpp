#include "qndsim/analytic.hpp"

#include <cmath>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"

namespace qndsim {

void AnalyticParams::validate() const {
  if (!(chi >= 0.0)) throw ArgumentError("AnalyticParams: chi must be non-negative");
  if (!(a_m >= 0.0) || !(a_t >= 0.0)) {
    throw ArgumentError("AnalyticParams: a_m and a_T must be non-negative");
  }
  if (!(contrast >= 0.0 && contrast <= 1.0)) {
    throw ArgumentError("AnalyticParams: contrast must lie in [0, 1]");
  }
}

double AnalyticParams::peak_time() const {
  if (!(contrast * omega_ex > 0.0)) {
    throw ArgumentError("peak_time: contrast and omega_ex must be positive");
  }
  return 0.5 * constants::pi / (contrast * omega_ex);
}

AnalyticParams make_analytic_params(double chi, const CouplingStats& stats, double contrast,
                                    double omega_ex) {
  AnalyticParams p;
  p.chi = chi;
  p.contrast = contrast;
  p.omega_ex = omega_ex;
  p.omega_bar = stats.mean;
  p.delta_omega = stats.stddev;
  p.atom_number = static_cast<double>(stats.count);
  p.a_m = chi * p.atom_number * p.delta_omega * p.delta_omega / (2.0 * p.omega_bar);
  p.a_t = chi * p.delta_omega;
  p.validate();
  return p;
}

double chi_from_config(double omega_bar, double mean_transmitted, double kappa_t, double kappa) {
  return 4.0 * omega_bar * mean_transmitted / (kappa_t * kappa);
}

double chi_from_detected(double omega_bar, double mean_detected, double eta, double kappa) {
  return 4.0 * omega_bar * mean_detected / (eta * kappa * kappa);
}

double delta_i(double sz, double omega_i, double omega_bar, double chi) {
  return chi * sz * (omega_i - omega_bar);
}

double sz_i_of_t(double sz0, double delta, double contrast, double omega_ex, double t) {
  if (std::abs(sz0 + 0.5 * delta) > 0.5) {
    throw ArgumentError("sz_i_of_t: s_z0 + delta/2 leaves the Bloch sphere");
  }
  return sz0 + 0.5 * delta * std::sin(contrast * omega_ex * t);
}

double amplification_factor(double t, const AnalyticParams& params) {
  return 1.0 + params.a_m * std::sin(params.contrast * params.omega_ex * t);
}

BranchTemperatures temperature_of_t(double t, double sz, double temperature,
                                    const AnalyticParams& params) {
  const double d = params.a_t * sz * std::sin(params.contrast * params.omega_ex * t);
  return {temperature * (1.0 + d), temperature * (1.0 - d)};
}

double loss_decay(double xi_n2_0, double gamma, double t) {
  if (!(gamma >= 0.0)) throw ArgumentError("loss_decay: gamma must be non-negative");
  return 1.0 + (xi_n2_0 - 1.0) * std::exp(-gamma * t);
}

double contrast_model(double n, double gamma1, double gamma2) {
  if (!(gamma1 > 0.0) || !(gamma2 > 0.0)) {
    throw ArgumentError("contrast_model: gamma1 and gamma2 must be positive");
  }
  const double r = n / gamma2;
  return std::exp(-n / gamma1 - r * r);
}

}  // namespace qndsim
