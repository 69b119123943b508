#include "qndsim/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>

#include "qndsim/errors.hpp"
#include "qndsim/rng.hpp"

namespace qndsim {

namespace {

template <class D, class F>
void for_each_column(D& d, F&& f) {
  for (auto* c : {&d.m1, &d.m2, &d.n1, &d.n2, &d.atom_number, &d.temp_z_up, &d.temp_z_down,
                  &d.temp_z_all, &d.theta, &d.delay, &d.sz_true, &d.contrast}) {
    f(*c);
  }
}

void require_same_size(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.size() != b.size()) throw ArgumentError(std::string(who) + ": column lengths differ");
}

struct Moments {
  double s11 = 0.0, s12 = 0.0, s22 = 0.0;
};

Moments moments(std::span<const double> m1, std::span<const double> m2) {
  return {variance(m1), covariance(m1, m2), variance(m2)};
}

double objective(const Moments& mo, double alpha, double psn1, double psn2) {
  const double u = 1.0 / alpha;
  return (mo.s11 - 2.0 * u * mo.s12 + u * u * mo.s22) / (psn1 + psn2 * u * u);
}

}  // namespace

void ShotDataset::validate() const {
  const std::size_t n = size();
  for_each_column(*this, [n](const std::vector<double>& c) {
    if (!c.empty() && c.size() != n) throw ArgumentError("ShotDataset: ragged columns");
  });
}

ShotDataset ShotDataset::subset(std::span<const std::size_t> rows) const {
  ShotDataset out;
  // Walk source and destination columns in lockstep.
  std::vector<std::vector<double>*> dst;
  for_each_column(out, [&](std::vector<double>& c) { dst.push_back(&c); });
  std::size_t k = 0;
  for_each_column(*this, [&](const std::vector<double>& c) {
    auto& d = *dst[k++];
    if (c.empty()) return;
    d.reserve(rows.size());
    for (std::size_t r : rows) d.push_back(c.at(r));
  });
  return out;
}

void ShotDataset::push_back(const ShotDataset& row_source, std::size_t row) {
  std::vector<std::vector<double>*> dst;
  for_each_column(*this, [&](std::vector<double>& c) { dst.push_back(&c); });
  std::size_t k = 0;
  for_each_column(row_source, [&](const std::vector<double>& c) {
    auto& d = *dst[k++];
    if (!c.empty()) d.push_back(c.at(row));
  });
}

double mean(std::span<const double> x) {
  if (x.empty()) throw ArgumentError("mean: empty input");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double variance(std::span<const double> x) { return covariance(x, x); }

double covariance(std::span<const double> x, std::span<const double> y) {
  require_same_size(x, y, "covariance");
  if (x.size() < 2) throw InsufficientDataError("covariance: need at least two samples");
  const double mx = mean(x);
  const double my = mean(y);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / static_cast<double>(x.size() - 1);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double vx = variance(x);
  const double vy = variance(y);
  if (!(vx > 0.0 && vy > 0.0)) throw EstimationError("pearson: zero variance input");
  return covariance(x, y) / std::sqrt(vx * vy);
}

double mean_psn(std::span<const double> detected, double kappa) {
  if (detected.empty()) throw ArgumentError("mean_psn: empty input");
  double s = 0.0;
  for (double n : detected) {
    if (!(n > 0.0)) throw ArgumentError("mean_psn: detected photon number must be > 0");
    s += kappa * kappa / (4.0 * n);
  }
  return s / static_cast<double>(detected.size());
}

double psn_of_mean(std::span<const double> detected, double kappa) {
  const double n = mean(detected);
  if (!(n > 0.0)) throw ArgumentError("psn_of_mean: mean detected photon number must be > 0");
  return kappa * kappa / (4.0 * n);
}

double normalized_conditional_variance(std::span<const double> m1, std::span<const double> m2,
                                       double alpha, double psn1, double psn2) {
  require_same_size(m1, m2, "normalized_conditional_variance");
  return objective(moments(m1, m2), alpha, psn1, psn2);
}

double deming_alpha(std::span<const double> m1, std::span<const double> m2, double psn1,
                    double psn2) {
  require_same_size(m1, m2, "deming_alpha");
  if (m1.size() < 3) throw InsufficientDataError("deming_alpha: need at least 3 shots");
  if (!(psn1 > 0.0 && psn2 > 0.0)) throw ArgumentError("deming_alpha: PSN values must be > 0");
  const Moments mo = moments(m1, m2);
  if (!(mo.s22 > 0.0)) throw EstimationError("deming_alpha: Var(M2) is zero");

  if (mo.s12 == 0.0) throw EstimationError("deming_alpha: M1 and M2 are uncorrelated");
  // The optimum shares the sign of Cov(M1, M2); |alpha| is searched in log space.
  const double sign = mo.s12 > 0.0 ? 1.0 : -1.0;
  const double lo = std::log(1e-3);
  const double hi = std::log(1e3);
  constexpr int grid = 240;
  auto f = [&](double la) { return objective(mo, sign * std::exp(la), psn1, psn2); };
  int best = 0;
  double best_val = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    const double v = f(lo + (hi - lo) * k / grid);
    if (v < best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best == 0 || best == grid) {
    throw EstimationError("deming_alpha: minimum lies on the search boundary");
  }
  const double a = lo + (hi - lo) * (best - 1) / grid;
  const double b = lo + (hi - lo) * (best + 1) / grid;
  const auto res = boost::math::tools::brent_find_minima(f, a, b, 30);
  return sign * std::exp(res.first);
}

double deming_alpha(const ShotDataset& data, double psn1, double psn2) {
  return deming_alpha(data.m1, data.m2, psn1, psn2);
}

double deming_alpha_closed_form(std::span<const double> m1, std::span<const double> m2,
                                double psn1, double psn2) {
  require_same_size(m1, m2, "deming_alpha_closed_form");
  const Moments mo = moments(m1, m2);
  if (mo.s12 == 0.0) throw EstimationError("deming_alpha_closed_form: zero covariance");
  const double lambda = psn2 / psn1;
  const double d = mo.s22 - lambda * mo.s11;
  return (d + std::sqrt(d * d + 4.0 * lambda * mo.s12 * mo.s12)) / (2.0 * mo.s12);
}

double conditional_spin_noise(std::span<const double> m1, std::span<const double> m2,
                              double alpha, double psn2, double omega_bar) {
  require_same_size(m1, m2, "conditional_spin_noise");
  if (alpha == 0.0) throw ArgumentError("conditional_spin_noise: alpha must be non-zero");
  std::vector<double> diff(m1.size());
  for (std::size_t i = 0; i < m1.size(); ++i) diff[i] = m1[i] - m2[i] / alpha;
  return (variance(diff) - psn2 / (alpha * alpha)) / (omega_bar * omega_bar);
}

std::optional<double> to_db(double linear) {
  if (!(linear > 0.0)) return std::nullopt;
  return 10.0 * std::log10(linear);
}

SqueezingMetrics squeezing_metrics(double cond_spin_variance, double atom_number,
                                   double contrast) {
  if (!(atom_number > 0.0)) throw ArgumentError("squeezing_metrics: N must be positive");
  if (!(contrast > 0.0 && contrast <= 1.0)) {
    throw ArgumentError("squeezing_metrics: contrast must lie in (0, 1]");
  }
  SqueezingMetrics m;
  m.xi_n2 = 4.0 * cond_spin_variance / atom_number;
  m.xi2 = m.xi_n2 / (contrast * contrast);
  m.xi_n2_db = to_db(m.xi_n2);
  m.xi2_db = to_db(m.xi2);
  return m;
}

double tomography_variance(std::span<const double> m1, std::span<const double> m2, double theta,
                           double psn2, double omega_bar, std::optional<double> threshold) {
  require_same_size(m1, m2, "tomography_variance");
  const double c = std::cos(theta);
  std::vector<double> v;
  v.reserve(m1.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    if (threshold && std::abs(m1[i]) > *threshold) continue;
    v.push_back(m1[i] * c - m2[i]);
  }
  if (v.size() < 20) {
    throw InsufficientDataError("tomography_variance: " + std::to_string(v.size()) +
                                " shots after post-selection, need 20");
  }
  return (variance(v) - psn2) / (omega_bar * omega_bar);
}

double ContrastFit::gamma1() const {
  return inv_gamma1 > 0.0 ? 1.0 / inv_gamma1 : std::numeric_limits<double>::infinity();
}

double ContrastFit::gamma2() const { return 1.0 / std::sqrt(inv_gamma2_sq); }

ContrastFit fit_contrast(std::span<const double> n, std::span<const double> c) {
  require_same_size(n, c, "fit_contrast");
  if (n.size() < 4) throw InsufficientDataError("fit_contrast: need at least 4 points");
  const auto rows = static_cast<Eigen::Index>(n.size());
  Eigen::MatrixXd a(rows, 2);
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const double ci = c[static_cast<std::size_t>(i)];
    if (!(ci > 0.0 && ci <= 1.0)) throw ArgumentError("fit_contrast: contrast outside (0, 1]");
    const double ni = n[static_cast<std::size_t>(i)];
    a(i, 0) = ni;
    a(i, 1) = ni * ni;
    y(i) = -std::log(ci);
  }
  // Column scaling keeps the normal matrix well conditioned for n ~ 1e4.
  const Eigen::Vector2d scale(a.col(0).cwiseAbs().maxCoeff(), a.col(1).cwiseAbs().maxCoeff());
  if (!(scale.minCoeff() > 0.0)) throw ArgumentError("fit_contrast: all photon numbers are zero");
  const Eigen::MatrixXd as = a * scale.cwiseInverse().asDiagonal();
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(as);
  if (qr.rank() < 2) throw FitError("fit_contrast: design matrix is rank deficient", 0.0);
  const Eigen::Vector2d beta_s = qr.solve(y);
  const Eigen::Vector2d beta = beta_s.cwiseQuotient(scale);

  const Eigen::VectorXd resid = y - a * beta;
  ContrastFit fit;
  fit.inv_gamma1 = beta(0);
  fit.inv_gamma2_sq = beta(1);
  fit.residual_rms = std::sqrt(resid.squaredNorm() / static_cast<double>(rows));
  const double dof = static_cast<double>(rows - 2);
  const double sigma2 = resid.squaredNorm() / dof;
  const Eigen::Matrix2d normal_s = as.transpose() * as;
  const Eigen::Matrix2d cov_s = sigma2 * normal_s.inverse();
  const Eigen::Matrix2d inv_scale = scale.cwiseInverse().asDiagonal();
  fit.covariance = inv_scale * cov_s * inv_scale;
  if (!(fit.inv_gamma2_sq > 0.0)) {
    throw FitError("fit_contrast: quadratic coefficient is not positive", fit.residual_rms);
  }
  return fit;
}

ConfidenceInterval bootstrap_ci(const std::function<double(const ShotDataset&)>& statistic,
                                const ShotDataset& data, std::size_t resamples,
                                std::uint64_t seed, double level) {
  if (resamples < 100) throw ArgumentError("bootstrap_ci: need at least 100 resamples");
  if (!(level > 0.0 && level < 1.0)) throw ArgumentError("bootstrap_ci: level outside (0, 1)");
  data.validate();
  const std::size_t n = data.size();
  if (n == 0) throw InsufficientDataError("bootstrap_ci: empty dataset");

  ConfidenceInterval ci;
  ci.point = statistic(data);
  ci.level = level;
  std::vector<double> values;
  values.reserve(resamples);
  std::vector<std::size_t> rows(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    Engine rng = make_stream(seed, r, Stage::bootstrap);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& idx : rows) idx = pick(rng);
    try {
      values.push_back(statistic(data.subset(rows)));
    } catch (const NumericalError&) {
      // A resample can be degenerate (e.g. too few post-selected shots).
    }
  }
  if (values.size() * 10 < resamples * 9) {
    throw EstimationError("bootstrap_ci: more than 10% of resamples failed");
  }
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, values.size() - 1);
    const double f = pos - static_cast<double>(i);
    return values[i] * (1.0 - f) + values[j] * f;
  };
  ci.low = quantile(0.5 * (1.0 - level));
  ci.high = quantile(0.5 * (1.0 + level));
  ci.resamples = values.size();
  return ci;
}

double sql(double atom_number) {
  if (!(atom_number > 0.0)) throw ArgumentError("sql: N must be positive");
  return 0.25 * atom_number;
}

double psn_limit_pair(double n1, double n2, double alpha, double kappa) {
  if (!(n1 > 0.0 && n2 > 0.0)) throw ArgumentError("psn_limit_pair: photon numbers must be > 0");
  const double k2 = kappa * kappa;
  return k2 / (4.0 * n1) + k2 / (4.0 * n2 * alpha * alpha);
}

SqueezingReport analyze_squeezing(const ShotDataset& data, double kappa, double omega_bar,
                                  std::size_t resamples, std::uint64_t seed, double level) {
  data.validate();
  SqueezingReport rep;
  rep.shots = data.size();
  rep.psn1 = mean_psn(data.n1, kappa);
  rep.psn2 = mean_psn(data.n2, kappa);
  rep.alpha = deming_alpha(data, rep.psn1, rep.psn2);
  std::vector<double> diff(data.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = data.m1[i] - data.m2[i] / rep.alpha;
  rep.cond_variance = variance(diff);
  rep.cond_spin_variance = conditional_spin_noise(data.m1, data.m2, rep.alpha, rep.psn2, omega_bar);
  rep.atom_number = data.atom_number.empty() ? 0.0 : mean(data.atom_number);
  rep.contrast = data.contrast.empty() ? 1.0 : mean(data.contrast);
  if (rep.atom_number > 0.0 && rep.contrast > 0.0) {
    rep.metrics = squeezing_metrics(rep.cond_spin_variance, rep.atom_number,
                                    std::min(rep.contrast, 1.0));
  }

  auto alpha_stat = [kappa](const ShotDataset& d) {
    return deming_alpha(d, mean_psn(d.n1, kappa), mean_psn(d.n2, kappa));
  };
  auto xi_stat = [kappa, omega_bar](const ShotDataset& d) {
    const double p1 = mean_psn(d.n1, kappa);
    const double p2 = mean_psn(d.n2, kappa);
    const double a = deming_alpha(d, p1, p2);
    const double nat = d.atom_number.empty() ? 1.0 : mean(d.atom_number);
    return 4.0 * conditional_spin_noise(d.m1, d.m2, a, p2, omega_bar) / nat;
  };
  rep.alpha_ci = bootstrap_ci(alpha_stat, data, resamples, seed, level);
  if (rep.atom_number > 0.0) {
    rep.xi_n2_ci = bootstrap_ci(xi_stat, data, resamples, seed ^ 0x5851F42D4C957F2DULL, level);
  }
  return rep;
}

}  // namespace qndsim
