#pragma once

#include "qndsim/ensemble.hpp"

namespace qndsim {

/// Parameters of the linear-response amplification model.
struct AnalyticParams {
  double chi = 0.0;           ///< s
  double a_m = 0.0;
  double a_t = 0.0;           ///< fractional temperature change per unit S_z
  double contrast = 1.0;
  double omega_ex = 0.0;      ///< rad/s
  double omega_bar = 0.0;     ///< rad/s
  double delta_omega = 0.0;   ///< rad/s
  double atom_number = 0.0;
  double gamma1 = 0.0;        ///< photons
  double gamma2 = 0.0;        ///< photons

  void validate() const;
  /// Time of maximum conversion, pi / (2 C omega_ex).
  double peak_time() const;
};

/// a_m = chi N dOmega^2 / (2 Omega_bar) and a_T = chi dOmega, from the
/// coupling statistics of an ensemble.
AnalyticParams make_analytic_params(double chi, const CouplingStats& stats, double contrast,
                                    double omega_ex);

/// chi = 4 Omega_bar n_p / (kappa_t kappa).
double chi_from_config(double omega_bar, double mean_transmitted, double kappa_t, double kappa);

/// chi = 4 Omega_bar <n1> / (eta kappa^2), the detected-photon form.
double chi_from_detected(double omega_bar, double mean_detected, double eta, double kappa);

/// delta_i = chi S_z (Omega_i - Omega_bar).
double delta_i(double sz, double omega_i, double omega_bar, double chi);

/// s_z0 + (delta_i / 2) sin(C omega_ex t). Throws ArgumentError when
/// |s_z0 + delta_i / 2| > 1/2.
double sz_i_of_t(double sz0, double delta, double contrast, double omega_ex, double t);

/// 1 + a_m sin(C omega_ex t).
double amplification_factor(double t, const AnalyticParams& params);

struct BranchTemperatures {
  double up = 0.0;
  double down = 0.0;
};

/// T (1 +/- a_T S_z sin(C omega_ex t)).
BranchTemperatures temperature_of_t(double t, double sz, double temperature,
                                    const AnalyticParams& params);

/// 1 + (xi0 - 1) exp(-gamma t).
double loss_decay(double xi_n2_0, double gamma, double t);

/// exp(-n / gamma1 - (n / gamma2)^2).
double contrast_model(double n, double gamma1, double gamma2);

}  // namespace qndsim
