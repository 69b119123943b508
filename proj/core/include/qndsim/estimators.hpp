#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace qndsim {

/// Columns over repetitions. Optional columns are either empty or full length.
struct ShotDataset {
  std::vector<double> m1;         ///< rad/s
  std::vector<double> m2;         ///< rad/s
  std::vector<double> n1;         ///< detected photons in M1
  std::vector<double> n2;
  std::vector<double> atom_number;
  std::vector<double> temp_z_up;    ///< K
  std::vector<double> temp_z_down;  ///< K
  std::vector<double> temp_z_all;   ///< K
  std::vector<double> theta;        ///< rad
  std::vector<double> delay;        ///< T_d, s
  std::vector<double> sz_true;      ///< S_z drawn at projection (simulation only)
  std::vector<double> contrast;     ///< contrast after M1

  std::size_t size() const { return m1.size(); }
  /// Throws ArgumentError on ragged columns.
  void validate() const;
  ShotDataset subset(std::span<const std::size_t> rows) const;
  void push_back(const ShotDataset& row_source, std::size_t row);
};

double mean(std::span<const double> x);
/// Unbiased sample variance.
double variance(std::span<const double> x);
double covariance(std::span<const double> x, std::span<const double> y);
double pearson(std::span<const double> x, std::span<const double> y);

/// Average of kappa^2 / (4 n_k) over shots.
double mean_psn(std::span<const double> detected, double kappa);
/// kappa^2 / (4 <n>).
double psn_of_mean(std::span<const double> detected, double kappa);

/// Var(M1 - M2/alpha) / (psn1 + psn2 / alpha^2).
double normalized_conditional_variance(std::span<const double> m1, std::span<const double> m2,
                                       double alpha, double psn1, double psn2);

/// Bounded scalar minimization of normalized_conditional_variance over
/// |alpha| in [1e-3, 1e3], with the sign of Cov(M1, M2): log-spaced bracket,
/// then Brent in log |alpha|.
double deming_alpha(std::span<const double> m1, std::span<const double> m2, double psn1,
                    double psn2);
double deming_alpha(const ShotDataset& data, double psn1, double psn2);

/// Textbook Deming slope of M2 on M1 with error-variance ratio psn2/psn1.
double deming_alpha_closed_form(std::span<const double> m1, std::span<const double> m2,
                                double psn1, double psn2);

/// [Var(M1 - M2/alpha) - psn2/alpha^2] / Omega_bar^2, atoms^2. Not clamped.
double conditional_spin_noise(std::span<const double> m1, std::span<const double> m2,
                              double alpha, double psn2, double omega_bar);

/// 10 log10(x); empty for x <= 0.
std::optional<double> to_db(double linear);

struct SqueezingMetrics {
  double xi_n2 = 0.0;
  double xi2 = 0.0;
  std::optional<double> xi_n2_db;
  std::optional<double> xi2_db;
};

/// xi_N^2 = 4 V / N, xi^2 = xi_N^2 / C^2.
SqueezingMetrics squeezing_metrics(double cond_spin_variance, double atom_number,
                                   double contrast);

/// [Var(M1 cos(theta) - M2) - psn2] / Omega_bar^2 over the shots that pass
/// |M1| <= threshold (all shots when no threshold is given). Throws
/// InsufficientDataError below 20 shots.
double tomography_variance(std::span<const double> m1, std::span<const double> m2, double theta,
                           double psn2, double omega_bar,
                           std::optional<double> threshold = std::nullopt);

struct ContrastFit {
  double inv_gamma1 = 0.0;       ///< 1/gamma1, 1/photon
  double inv_gamma2_sq = 0.0;    ///< 1/gamma2^2, 1/photon^2
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();  ///< of (1/gamma1, 1/gamma2^2)
  double residual_rms = 0.0;     ///< in -ln C
  double gamma1() const;         ///< +inf when 1/gamma1 <= 0
  double gamma2() const;
};

/// Linear least squares of -ln C = n/gamma1 + n^2/gamma2^2.
ContrastFit fit_contrast(std::span<const double> n, std::span<const double> c);

struct ConfidenceInterval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
  double level = 0.683;
  std::size_t resamples = 0;
};

/// Percentile bootstrap over shots. Resample r draws its rows from its own
/// stream, so the result depends only on (seed, data, resamples).
ConfidenceInterval bootstrap_ci(const std::function<double(const ShotDataset&)>& statistic,
                                const ShotDataset& data, std::size_t resamples,
                                std::uint64_t seed, double level = 0.683);

/// N / 4.
double sql(double atom_number);

/// kappa^2/(4 n1) + kappa^2/(4 n2 alpha^2).
double psn_limit_pair(double n1, double n2, double alpha, double kappa);

/// One row of estimator output for a group of shots.
struct SqueezingReport {
  std::string label;
  std::size_t shots = 0;
  double alpha = 0.0;
  double cond_variance = 0.0;       ///< (rad/s)^2, Var(M1 - M2/alpha)
  double cond_spin_variance = 0.0;  ///< atoms^2
  SqueezingMetrics metrics;
  double contrast = 0.0;
  double atom_number = 0.0;
  double psn1 = 0.0;
  double psn2 = 0.0;
  ConfidenceInterval alpha_ci;
  ConfidenceInterval xi_n2_ci;
};

/// Runs the standard pipeline (Deming alpha, conditional noise, squeezing
/// metrics and their bootstrap intervals) on one group of shots.
SqueezingReport analyze_squeezing(const ShotDataset& data, double kappa, double omega_bar,
                                  std::size_t resamples, std::uint64_t seed,
                                  double level = 0.683);

}  // namespace qndsim
