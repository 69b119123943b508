#include "qndsim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "qndsim/analytic.hpp"
#include "qndsim/constants.hpp"
#include "qndsim/dynamics.hpp"
#include "qndsim/errors.hpp"
#include "qndsim/estimators.hpp"
#include "qndsim/measurement.hpp"

namespace qndsim {

using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, ScenarioKind>>& registry() {
  static const std::vector<std::pair<std::string, ScenarioKind>> r{
      {"noise_floor", ScenarioKind::noise_floor},
      {"squeezing_vs_photons", ScenarioKind::squeezing_vs_photons},
      {"tomography", ScenarioKind::tomography},
      {"amplification_vs_time", ScenarioKind::amplification_vs_time},
      {"temperature_correlation", ScenarioKind::temperature_correlation},
      {"squeezing_lifetime", ScenarioKind::squeezing_lifetime},
      {"analytic_vs_sim", ScenarioKind::analytic_vs_sim},
  };
  return r;
}

double nan_value() { return std::numeric_limits<double>::quiet_NaN(); }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(); }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

json ci_json(const ConfidenceInterval& ci) {
  return {{"point", finite_or_null(ci.point)},
          {"low", finite_or_null(ci.low)},
          {"high", finite_or_null(ci.high)},
          {"level", ci.level},
          {"resamples", ci.resamples}};
}

std::uint64_t bootstrap_seed(std::uint64_t seed, std::size_t group, std::size_t item) {
  return stream_seed(seed, group, Stage::bootstrap, item);
}

std::size_t resolve_threads(const ExperimentConfig& cfg, const RunOptions& opt) {
  std::size_t t = opt.threads.value_or(cfg.simulation.threads);
  if (t == 0) t = std::max(1u, std::thread::hardware_concurrency());
  return t;
}

std::size_t resolve_atoms(const ExperimentConfig& cfg, const RunOptions& opt) {
  if (opt.atoms) return *opt.atoms;
  return opt.paper_scale ? cfg.trap.atom_number : cfg.simulation.desk_atom_number;
}

ShotGroup base_group(const ExperimentConfig& cfg, const RunOptions& opt) {
  ShotGroup g;
  g.config = cfg;
  g.atoms = resolve_atoms(cfg, opt);
  g.config.trap.atom_number = g.atoms;
  g.delays = {0.0};
  return g;
}

// Coupling-weighted model parameters averaged over the shots of one group.
AnalyticParams group_analytic_params(const ExperimentConfig& cfg, const Table& shots,
                                     std::size_t group) {
  namespace c = shot_columns;
  const std::size_t gi = shots.column_index(c::group);
  const std::size_t di = shots.column_index(c::delay);
  double first_delay = std::numeric_limits<double>::infinity();
  for (const auto& r : shots.rows) {
    if (r[gi] == static_cast<double>(group)) first_delay = std::min(first_delay, r[di]);
  }
  const ShotDataset d = select_shots(shots, group, first_delay);
  std::vector<double> ob, dw;
  const std::size_t oi = shots.column_index(c::omega_bar);
  const std::size_t wi = shots.column_index(c::delta_omega);
  for (const auto& r : shots.rows) {
    if (r[gi] == static_cast<double>(group) && r[di] == first_delay) {
      ob.push_back(r[oi]);
      dw.push_back(r[wi]);
    }
  }
  CouplingStats st;
  st.mean = mean(ob);
  // a_m is quadratic in the spread, so shots are pooled in variance.
  double dw2 = 0.0;
  for (double v : dw) dw2 += v * v;
  st.stddev = std::sqrt(dw2 / static_cast<double>(dw.size()));
  st.count = static_cast<std::size_t>(std::llround(mean(d.atom_number)));
  const CavityConfig cav = cfg.cavity_config();
  const ProbeConfig p1 = cfg.probe_config(Measurement::m1);
  const double chi = chi_from_config(st.mean, p1.mean_transmitted, cav.transmission_rate(),
                                     cav.kappa);
  const DynamicsParams dyn = cfg.dynamics_params();
  const double contrast = std::clamp(mean(d.contrast), 0.0, 1.0);
  return make_analytic_params(chi, st, contrast, dyn.omega_ex * dyn.kernel);
}

// A group whose alpha cannot be estimated (M1 and M2 uncorrelated near a
// zero crossing of alpha, say) is reported as NaN instead of failing the run.
SqueezingReport squeeze(const ExperimentConfig& cfg, const ShotDataset& d, std::uint64_t seed) {
  try {
    return analyze_squeezing(d, cfg.cavity_config().kappa, cfg.omega_bar(),
                             cfg.simulation.bootstrap_resamples, seed, cfg.simulation.ci_level);
  } catch (const EstimationError&) {
    const double nan = nan_value();
    SqueezingReport r;
    r.shots = d.size();
    r.alpha = r.cond_variance = r.cond_spin_variance = nan;
    r.metrics.xi_n2 = r.metrics.xi2 = nan;
    r.contrast = d.contrast.empty() ? nan : mean(d.contrast);
    r.atom_number = d.atom_number.empty() ? nan : mean(d.atom_number);
    r.alpha_ci = {nan, nan, nan, cfg.simulation.ci_level, 0};
    r.xi_n2_ci = r.alpha_ci;
    return r;
  }
}

json report_json(const SqueezingReport& r) {
  return {{"shots", r.shots},
          {"alpha", r.alpha},
          {"alpha_ci", ci_json(r.alpha_ci)},
          {"cond_variance_rad2_s2", r.cond_variance},
          {"cond_spin_variance_atoms2", r.cond_spin_variance},
          {"xi_n2", r.metrics.xi_n2},
          {"xi_n2_db", optional_number(r.metrics.xi_n2_db)},
          {"xi2", r.metrics.xi2},
          {"xi2_db", optional_number(r.metrics.xi2_db)},
          {"xi_n2_ci", ci_json(r.xi_n2_ci)},
          {"contrast", r.contrast},
          {"atom_number", r.atom_number},
          {"psn1_rad2_s2", r.psn1},
          {"psn2_rad2_s2", r.psn2}};
}

double db_or_nan(double v) { return to_db(v).value_or(nan_value()); }

// ---------------------------------------------------------------------------
// Per-scenario analysis. Each fills result.table and result.summary.

void analyze_noise_floor(const ExperimentConfig& cfg, const std::vector<ShotGroup>&,
                         std::uint64_t seed, ScenarioResult& res) {
  const double kappa = cfg.cavity_config().kappa;
  const ShotDataset d = select_shots(res.shots, 0, 0.0);
  res.table.columns = {"measurement",       "shots",           "mean_detected_photons",
                       "var_m_rad2_s2",     "ci95_low_rad2_s2", "ci95_high_rad2_s2",
                       "psn_rad2_s2",       "ratio",           "within_ci"};
  json rows = json::array();
  for (int which = 1; which <= 2; ++which) {
    auto stat = [which](const ShotDataset& s) { return variance(which == 1 ? s.m1 : s.m2); };
    const auto& n = which == 1 ? d.n1 : d.n2;
    const double psn = psn_of_mean(n, kappa);
    const ConfidenceInterval ci =
        bootstrap_ci(stat, d, cfg.simulation.bootstrap_resamples,
                     bootstrap_seed(seed, 0, static_cast<std::size_t>(which)), 0.95);
    const bool inside = psn >= ci.low && psn <= ci.high;
    res.table.add_row({static_cast<double>(which), static_cast<double>(d.size()), mean(n),
                       ci.point, ci.low, ci.high, psn, ci.point / psn, inside ? 1.0 : 0.0});
    rows.push_back({{"measurement", which == 1 ? "M1" : "M2"},
                    {"var_m_rad2_s2", ci.point},
                    {"ci95", ci_json(ci)},
                    {"psn_rad2_s2", psn},
                    {"within_ci", inside}});
  }
  res.summary["noise_floor"] = rows;
}

void analyze_squeezing_vs_photons(const ExperimentConfig& cfg, const std::vector<ShotGroup>& gs,
                                  std::uint64_t seed, ScenarioResult& res) {
  const double kappa = cfg.cavity_config().kappa;
  res.table.columns = {"n1_photons",    "alpha",         "alpha_ci_low",   "alpha_ci_high",
                       "cond_spin_var_atoms2", "xi_n2",  "xi_n2_db",       "xi_n2_ci_low",
                       "xi_n2_ci_high", "xi2_db",        "contrast",       "psn_floor_xi_n2_db"};
  json groups = json::array();
  std::vector<double> ns, cs;
  for (std::size_t g = 0; g < gs.size(); ++g) {
    const ShotDataset d = select_shots(res.shots, g, gs[g].delays.front());
    const SqueezingReport r = squeeze(cfg, d, bootstrap_seed(seed, g, 0));
    const double n1 = mean(d.n1);
    const double floor = kappa * kappa / (n1 * cfg.omega_bar() * cfg.omega_bar() * r.atom_number);
    res.table.add_row({n1, r.alpha, r.alpha_ci.low, r.alpha_ci.high, r.cond_spin_variance,
                       r.metrics.xi_n2, r.metrics.xi_n2_db.value_or(nan_value()),
                       r.xi_n2_ci.low, r.xi_n2_ci.high, r.metrics.xi2_db.value_or(nan_value()),
                       r.contrast, db_or_nan(floor)});
    json j = report_json(r);
    j["n1_photons"] = n1;
    j["psn_floor_xi_n2"] = floor;
    groups.push_back(j);
    ns.push_back(n1);
    cs.push_back(r.contrast);
  }
  res.summary["groups"] = groups;
  try {
    const ContrastFit fit = fit_contrast(ns, cs);
    res.summary["contrast_fit"] = {{"gamma1_photons", finite_or_null(fit.gamma1())},
                                   {"gamma2_photons", fit.gamma2()},
                                   {"inv_gamma1", fit.inv_gamma1},
                                   {"inv_gamma2_sq", fit.inv_gamma2_sq},
                                   {"residual_rms", fit.residual_rms}};
  } catch (const std::exception& e) {
    res.summary["contrast_fit"] = {{"error", e.what()}};
  }
}

void analyze_tomography(const ExperimentConfig& cfg, const std::vector<ShotGroup>& gs,
                        std::uint64_t seed, ScenarioResult& res) {
  const double kappa = cfg.cavity_config().kappa;
  const double ob = cfg.omega_bar();
  res.table.columns = {"theta_deg",     "shots_kept",     "var_atoms2", "var_ci_low_atoms2",
                       "var_ci_high_atoms2", "rel_sql_db", "var_all_shots_atoms2"};
  json groups = json::array();
  for (std::size_t g = 0; g < gs.size(); ++g) {
    const ShotDataset d = select_shots(res.shots, g, gs[g].delays.front());
    const double psn2 = mean_psn(d.n2, kappa);
    const double n_atoms = mean(d.atom_number);
    const double cut = cfg.simulation.post_selection_width * ob * std::sqrt(n_atoms);
    const double theta = gs[g].theta;
    auto stat = [&](const ShotDataset& s) {
      return tomography_variance(s.m1, s.m2, theta, mean_psn(s.n2, kappa), ob, cut);
    };
    std::size_t kept = 0;
    for (double m : d.m1) kept += std::abs(m) <= cut ? 1 : 0;
    double v = nan_value();
    ConfidenceInterval ci;
    ci.low = ci.high = nan_value();
    try {
      ci = bootstrap_ci(stat, d, cfg.simulation.bootstrap_resamples, bootstrap_seed(seed, g, 0),
                        cfg.simulation.ci_level);
      v = ci.point;
    } catch (const NumericalError&) {
      // Too few shots survive post-selection; reported as NaN.
    }
    const double all = tomography_variance(d.m1, d.m2, theta, psn2, ob);
    res.table.add_row({gs[g].key, static_cast<double>(kept), v, ci.low, ci.high,
                       db_or_nan(4.0 * v / n_atoms), all});
    groups.push_back({{"theta_deg", gs[g].key},
                      {"shots_kept", kept},
                      {"var_atoms2", finite_or_null(v)},
                      {"ci", ci_json(ci)},
                      {"rel_sql_db", finite_or_null(db_or_nan(4.0 * v / n_atoms))}});
  }
  res.summary["groups"] = groups;
}

void analyze_alpha_vs_time(const ExperimentConfig& cfg, const std::vector<ShotGroup>& gs,
                           std::uint64_t seed, ScenarioResult& res, bool with_error_column) {
  const AnalyticParams ap = group_analytic_params(cfg, res.shots, 0);
  const double t_peak = ap.contrast * ap.omega_ex > 0.0 ? ap.peak_time() : nan_value();
  res.table.columns = {"t_s",          "alpha",       "alpha_ci_low", "alpha_ci_high",
                       "alpha_model",    "rel_err",     "contrast_pre_m2", "alive_fraction"};
  json rows = json::array();
  double peak_alpha = -1.0;
  double peak_t = 0.0;
  double max_err_before_peak = 0.0;
  for (std::size_t k = 0; k < gs[0].delays.size(); ++k) {
    const double t = gs[0].delays[k];
    const ShotDataset d = select_shots(res.shots, 0, t);
    const SqueezingReport r = squeeze(cfg, d, bootstrap_seed(seed, 0, k));
    const double pred = amplification_factor(t, ap);
    const double err = r.alpha / pred - 1.0;
    double c2 = 0.0, alive = 0.0;
    {
      namespace c = shot_columns;
      const std::size_t di = res.shots.column_index(c::delay);
      const std::size_t ci2 = res.shots.column_index(c::contrast_m2);
      const std::size_t ai = res.shots.column_index(c::atoms_alive);
      const std::size_t a1 = res.shots.column_index(c::atoms_m1);
      double n = 0.0;
      for (const auto& row : res.shots.rows) {
        if (row[di] != t) continue;
        c2 += row[ci2];
        alive += row[a1] > 0.0 ? row[ai] / row[a1] : 0.0;
        n += 1.0;
      }
      c2 /= n;
      alive /= n;
    }
    res.table.add_row({t, r.alpha, r.alpha_ci.low, r.alpha_ci.high, pred,
                       with_error_column ? err : nan_value(), c2, alive});
    if (r.alpha > peak_alpha) {
      peak_alpha = r.alpha;
      peak_t = t;
    }
    if (t <= t_peak * (1.0 + 1e-9)) max_err_before_peak = std::max(max_err_before_peak, std::abs(err));
    rows.push_back({{"t_s", t}, {"alpha", r.alpha}, {"alpha_ci", ci_json(r.alpha_ci)},
                    {"alpha_model", pred}, {"contrast_pre_m2", c2}, {"alive_fraction", alive}});
  }
  res.summary["points"] = rows;
  res.summary["model"] = {{"chi_s", ap.chi},
                          {"a_m", ap.a_m},
                          {"a_t", ap.a_t},
                          {"contrast_m1", ap.contrast},
                          {"omega_ex_rad_s", ap.omega_ex},
                          {"omega_bar_sampled_rad_s", ap.omega_bar},
                          {"delta_omega_sampled_rad_s", ap.delta_omega},
                          {"atom_number", ap.atom_number},
                          {"peak_time_s", finite_or_null(t_peak)}};
  res.summary["peak"] = {{"alpha", peak_alpha}, {"t_s", peak_t}};
  if (with_error_column) res.summary["max_rel_err_up_to_peak"] = max_err_before_peak;
}

struct Slope {
  double value = 0.0;
  double stderr_ = 0.0;
};

Slope ols_slope(std::span<const double> x, std::span<const double> y) {
  const double vx = variance(x);
  const double b = covariance(x, y) / vx;
  const double mx = mean(x), my = mean(y);
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - my - b * (x[i] - mx);
    rss += e * e;
  }
  const double n = static_cast<double>(x.size());
  return {b, std::sqrt(rss / (n - 2.0) / (vx * (n - 1.0)))};
}

void analyze_temperature(const ExperimentConfig& cfg, const std::vector<ShotGroup>& gs,
                         std::uint64_t, ScenarioResult& res) {
  const AnalyticParams ap = group_analytic_params(cfg, res.shots, 0);
  res.table.columns = {"t_s",
                       "pearson_m1_t_up",
                       "pearson_m1_t_down",
                       "slope_up_k_per_rad_s",
                       "slope_up_se_k_per_rad_s",
                       "slope_down_k_per_rad_s",
                       "slope_down_se_k_per_rad_s",
                       "slope_model_k_per_rad_s",
                       "mean_t_up_k",
                       "mean_t_down_k"};
  json rows = json::array();
  for (double t : gs[0].delays) {
    const ShotDataset d = select_shots(res.shots, 0, t);
    std::vector<double> du(d.size()), dd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      du[i] = d.temp_z_up[i] - d.temp_z_all[i];
      dd[i] = d.temp_z_all[i] - d.temp_z_down[i];
    }
    const double t_mean = mean(d.temp_z_all);
    const double slope_model = t_mean * ap.a_t * std::sin(ap.contrast * ap.omega_ex * t) / cfg.omega_bar();
    const double rho_up = pearson(d.m1, d.temp_z_up);
    const double rho_dn = pearson(d.m1, d.temp_z_down);
    const Slope su = ols_slope(d.m1, du);
    const Slope sd = ols_slope(d.m1, dd);
    res.table.add_row({t, rho_up, rho_dn, su.value, su.stderr_, sd.value, sd.stderr_, slope_model,
                       mean(d.temp_z_up), mean(d.temp_z_down)});
    rows.push_back({{"t_s", t},
                    {"pearson_m1_t_up", rho_up},
                    {"pearson_m1_t_down", rho_dn},
                    {"slope_up_k_per_rad_s", su.value},
                    {"slope_down_k_per_rad_s", sd.value},
                    {"slope_model_k_per_rad_s", slope_model}});
  }
  res.summary["points"] = rows;
  res.summary["model"] = {{"a_t", ap.a_t}, {"contrast_m1", ap.contrast}};
}

void analyze_lifetime(const ExperimentConfig& cfg, const std::vector<ShotGroup>& gs,
                      std::uint64_t seed, ScenarioResult& res) {
  const double gamma = cfg.dynamics_params().loss_rate;
  res.table.columns = {"t_s",          "alpha",           "xi_n2",           "xi_n2_db",
                       "xi_n2_ci_low", "xi_n2_ci_high",   "loss_decay_xi_n2", "alive_fraction"};
  json rows = json::array();
  double xi0 = nan_value();
  const double t0 = gs[0].delays.front();
  for (std::size_t k = 0; k < gs[0].delays.size(); ++k) {
    const double t = gs[0].delays[k];
    const ShotDataset d = select_shots(res.shots, 0, t);
    const SqueezingReport r = squeeze(cfg, d, bootstrap_seed(seed, 0, k));
    if (k == 0) xi0 = r.metrics.xi_n2;
    const double pred = loss_decay(xi0, gamma, t - t0);
    double alive = 0.0;
    {
      namespace c = shot_columns;
      const std::size_t di = res.shots.column_index(c::delay);
      const std::size_t ai = res.shots.column_index(c::atoms_alive);
      const std::size_t a1 = res.shots.column_index(c::atoms_m1);
      double n = 0.0;
      for (const auto& row : res.shots.rows) {
        if (row[di] != t) continue;
        alive += row[ai] / row[a1];
        n += 1.0;
      }
      alive /= n;
    }
    res.table.add_row({t, r.alpha, r.metrics.xi_n2, r.metrics.xi_n2_db.value_or(nan_value()),
                       r.xi_n2_ci.low, r.xi_n2_ci.high, pred, alive});
    json j = report_json(r);
    j["t_s"] = t;
    j["loss_decay_xi_n2"] = pred;
    rows.push_back(j);
  }
  res.summary["points"] = rows;
  res.summary["loss_rate_per_s"] = gamma;
}

}  // namespace

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

std::optional<ScenarioKind> parse_scenario(const std::string& name) {
  for (const auto& [k, v] : registry()) {
    if (k == name) return v;
  }
  return std::nullopt;
}

std::string to_string(ScenarioKind kind) {
  for (const auto& [k, v] : registry()) {
    if (v == kind) return k;
  }
  return "unknown";
}

const std::vector<std::string>& shot_table_columns() {
  namespace c = shot_columns;
  static const std::vector<std::string> cols{
      c::group,     c::shot,       c::delay,       c::theta,       c::m1,        c::m2,
      c::n1,        c::n2,         c::atoms_m1,    c::atoms_alive, c::temp_up,   c::temp_down,
      c::temp_all,  c::n_up,       c::n_down,      c::sz_true,     c::contrast_m1,
      c::contrast_m2, c::omega_bar, c::delta_omega, c::lin_warning};
  return cols;
}

std::vector<std::vector<double>> simulate_shot(const ShotGroup& group, std::size_t group_index,
                                               std::size_t shot, std::uint64_t seed) {
  const ExperimentConfig& cfg = group.config;
  TrapConfig trap = cfg.trap_config();
  trap.atom_number = group.atoms;
  const CavityConfig cav = cfg.cavity_config();
  const ProbeConfig probe1 = cfg.probe_config(Measurement::m1);
  const ProbeConfig probe2 = cfg.probe_config(Measurement::m2);
  const DynamicsParams dyn = cfg.dynamics_params();
  const std::uint64_t base = stream_seed(seed, group_index, Stage::synthetic);

  Engine rs = make_stream(base, shot, Stage::sampling);
  EnsembleState st = make_ensemble(sample_thermal_ensemble(trap, group.atoms, rs));
  prepare_css(st);
  Engine rp = make_stream(base, shot, Stage::projection);
  const double sz = draw_sz(group.atoms, rp);
  // M1's pi pulse flips s_z, so the pre-M1 state carries -S_z.
  if (group.atoms > 0) assign_uniform_sz(st, -sz / static_cast<double>(group.atoms));

  const std::vector<double> c1 = effective_couplings(st, cav, trap, probe1);
  double ob = 0.0, dw = 0.0;
  if (!c1.empty()) {
    const CouplingStats cs = ensemble_coupling_stats(c1);
    ob = cs.mean;
    dw = cs.stddev;
  }
  Engine r1 = make_stream(base, shot, Stage::probe_m1);
  const MeasurementRecord rec1 = composite_measurement(st, c1, probe1, cav, Measurement::m1, r1);
  const double contrast1 = st.contrast();
  const double atoms1 = static_cast<double>(st.alive_count());

  KineticIntegrator integrator(st, dyn, trap, make_stream(base, shot, Stage::evolution));
  std::vector<std::vector<double>> rows;
  double elapsed = 0.0;
  for (std::size_t k = 0; k < group.delays.size(); ++k) {
    const double t = group.delays[k];
    integrator.advance(t - elapsed);
    elapsed = t;
    EnsembleState branch = st;
    if (group.theta != 0.0 && branch.total_spin().norm() > 0.0) {
      rotate_about_mean_spin(branch, group.theta);
    }
    // Imaging reads the pre-M2 frame: P_up = 1/2 - s_z here equals the upper
    // state population after M2's pi pulse.
    Engine ri = make_stream(base, shot, Stage::imaging, k);
    const ImagingResult img = imaging_readout(branch, cfg.readout.imaging_noise_atoms, ri);
    const double contrast2 = branch.contrast();
    const std::vector<double> c2 = effective_couplings(branch, cav, trap, probe2);
    Engine r2 = make_stream(base, shot, Stage::probe_m2, k);
    const MeasurementRecord rec2 =
        composite_measurement(branch, c2, probe2, cav, Measurement::m2, r2);
    rows.push_back({static_cast<double>(group_index), static_cast<double>(shot), t, group.theta,
                    rec1.m, rec2.m, rec1.detected(), rec2.detected(), atoms1,
                    static_cast<double>(branch.alive_count()), img.temp_z_up, img.temp_z_down,
                    img.temp_z_all, img.n_up, img.n_down, sz, contrast1, contrast2, ob, dw,
                    (rec1.linearization_warning || rec2.linearization_warning) ? 1.0 : 0.0});
  }
  return rows;
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

Table simulate_groups(const std::vector<ShotGroup>& groups, std::size_t shots, std::uint64_t seed,
                      std::size_t threads) {
  const std::size_t total = groups.size() * shots;
  std::vector<std::vector<std::vector<double>>> out(total);
  parallel_for(total, threads, [&](std::size_t job) {
    const std::size_t g = job / shots;
    out[job] = simulate_shot(groups[g], g, job % shots, seed);
  });
  Table t;
  t.columns = shot_table_columns();
  for (auto& per_shot : out) {
    for (auto& row : per_shot) t.add_row(std::move(row));
  }
  return t;
}

std::vector<ShotGroup> plan_scenario(ScenarioKind kind, const ExperimentConfig& cfg,
                                     const RunOptions& opt) {
  std::vector<ShotGroup> groups;
  switch (kind) {
    case ScenarioKind::noise_floor: {
      ShotGroup g = base_group(cfg, opt);
      g.label = "empty_cavity";
      g.atoms = 0;
      g.config.trap.atom_number = 0;
      groups.push_back(g);
      break;
    }
    case ScenarioKind::squeezing_vs_photons: {
      for (double n : {2e3, 4e3, 6e3, 9.6e3, 1.5e4, 2e4}) {
        ShotGroup g = base_group(cfg, opt);
        g.label = "n1=" + std::to_string(static_cast<long>(n));
        g.key = n;
        g.config.probe.detected_photons_m1 = n;
        g.config.probe.detected_photons_m2 = n;
        groups.push_back(g);
      }
      break;
    }
    case ScenarioKind::tomography: {
      for (double deg : {0.0, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0}) {
        ShotGroup g = base_group(cfg, opt);
        g.label = "theta=" + std::to_string(static_cast<int>(deg));
        g.key = deg;
        g.theta = deg * constants::pi / 180.0;
        groups.push_back(g);
      }
      break;
    }
    case ScenarioKind::amplification_vs_time: {
      ShotGroup g = base_group(cfg, opt);
      g.label = "amplification";
      g.delays = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5, 0.6, 0.8, 1.0};
      groups.push_back(g);
      break;
    }
    case ScenarioKind::temperature_correlation: {
      ShotGroup g = base_group(cfg, opt);
      g.label = "temperature";
      g.delays = {0.0, 0.1, 0.2, 0.3, 0.5};
      groups.push_back(g);
      break;
    }
    case ScenarioKind::squeezing_lifetime: {
      ShotGroup g = base_group(cfg, opt);
      g.label = "lifetime";
      g.delays = {0.0, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0};
      groups.push_back(g);
      break;
    }
    case ScenarioKind::analytic_vs_sim: {
      ShotGroup g = base_group(cfg, opt);
      g.label = "concordance";
      g.config.dynamics.lateral_collisions_enabled = false;
      g.config.dynamics.loss_enabled = false;
      g.config.dynamics.dephasing_model = "probe_ac_stark";
      g.config.probe.detected_photons_m1 = 2e4;
      g.config.probe.detected_photons_m2 = g.config.probe.detected_photons_m1;
      g.delays.clear();
      for (int k = 0; k <= 12; ++k) g.delays.push_back(0.025 * k);
      groups.push_back(g);
      break;
    }
  }
  for (auto& g : groups) g.config.validate();
  return groups;
}

ScenarioResult run_scenario(ScenarioKind kind, const ExperimentConfig& cfg,
                            const RunOptions& opt) {
  cfg.validate();
  if (opt.shots < 3) throw ConfigError("shots", "at least 3 shots are required");
  const std::vector<ShotGroup> groups = plan_scenario(kind, cfg, opt);
  ScenarioResult res;
  res.name = to_string(kind);
  res.shots = simulate_groups(groups, opt.shots, opt.seed, resolve_threads(cfg, opt));

  // Analysis runs on the group's effective configuration.
  const ExperimentConfig& acfg = groups.front().config;
  res.summary["scenario"] = res.name;
  res.summary["seed"] = opt.seed;
  res.summary["shots_per_group"] = opt.shots;
  res.summary["atom_number"] = groups.front().atoms;
  res.summary["config_hash"] = config_hash(cfg);
  res.summary["derived"] = derived_quantities(acfg);
  json glist = json::array();
  for (const auto& g : groups) glist.push_back({{"label", g.label}, {"key", g.key}});
  res.summary["groups_planned"] = glist;

  switch (kind) {
    case ScenarioKind::noise_floor:
      analyze_noise_floor(acfg, groups, opt.seed, res);
      break;
    case ScenarioKind::squeezing_vs_photons:
      analyze_squeezing_vs_photons(acfg, groups, opt.seed, res);
      break;
    case ScenarioKind::tomography:
      analyze_tomography(acfg, groups, opt.seed, res);
      break;
    case ScenarioKind::amplification_vs_time:
      analyze_alpha_vs_time(acfg, groups, opt.seed, res, false);
      break;
    case ScenarioKind::temperature_correlation:
      analyze_temperature(acfg, groups, opt.seed, res);
      break;
    case ScenarioKind::squeezing_lifetime:
      analyze_lifetime(acfg, groups, opt.seed, res);
      break;
    case ScenarioKind::analytic_vs_sim:
      analyze_alpha_vs_time(acfg, groups, opt.seed, res, true);
      break;
  }
  return res;
}

void write_scenario_outputs(const ScenarioResult& result, const ExperimentConfig& cfg,
                            const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  const fs::path target = fs::absolute(dir);
  fs::path staging = target;
  staging += ".partial";
  fs::remove_all(staging);
  try {
    fs::create_directories(staging);
    write_csv(result.shots, staging / "shots.csv");
    write_records(result.shots, staging / "shots.json");
    write_csv(result.table, staging / "table.csv");
    {
      std::ofstream out(staging / "summary.json");
      out << result.summary.dump(2) << '\n';
      if (!out) throw std::runtime_error("write failed for summary.json");
    }
    save_config(cfg, staging / "config.json");
    fs::create_directories(target);
    for (const char* name : {"shots.csv", "shots.json", "table.csv", "summary.json", "config.json"}) {
      fs::rename(staging / name, target / name);
    }
    fs::remove_all(staging);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
}

ShotDataset select_shots(const Table& shots, std::size_t group, double delay) {
  Table t;
  t.columns = shots.columns;
  const std::size_t gi = shots.column_index(shot_columns::group);
  const std::size_t di = shots.column_index(shot_columns::delay);
  for (const auto& r : shots.rows) {
    if (r[gi] == static_cast<double>(group) && r[di] == delay) t.rows.push_back(r);
  }
  return dataset_from_shots(t);
}

json derived_quantities(const ExperimentConfig& cfg) {
  const TrapConfig trap = cfg.trap_config();
  const CavityConfig cav = cfg.cavity_config();
  const ProbeConfig p1 = cfg.probe_config(Measurement::m1);
  const double ob = cfg.omega_bar();
  const double kt = cav.transmission_rate();
  return {{"omega_ex_rad_s", exchange_rate(trap)},
          {"omega_ex_over_2pi_hz", exchange_rate(trap) / constants::two_pi},
          {"gamma_c_per_s", lateral_rate(trap)},
          {"knudsen_regime", knudsen_regime(trap)},
          {"cooperativity", cooperativity(cav)},
          {"rayleigh_length_m", cav.rayleigh_length()},
          {"kappa_t_per_s", kt},
          {"phase_per_detected_photon_rad", ob / (p1.detection_efficiency * kt)},
          {"chi_m1_s", chi_from_config(ob, p1.mean_transmitted, kt, cav.kappa)},
          {"cloud_radius_x_m", cloud_radius(trap, 0)},
          {"cloud_radius_y_m", cloud_radius(trap, 1)},
          {"psn_m1_rad2_s2", psn_variance(cfg.probe.detected_photons_m1, cav.kappa)}};
}

}  // namespace qndsim
