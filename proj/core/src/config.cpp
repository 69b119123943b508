#include "qndsim/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"

namespace qndsim {

using nlohmann::json;

namespace {

constexpr double two_pi = constants::two_pi;

// Reads keys from one JSON object and remembers which were consumed, so
// leftovers can be reported as unknown.
class SectionReader {
 public:
  SectionReader(const json& parent, const std::string& name, bool required = true)
      : path_(name) {
    if (!parent.contains(name)) {
      if (required) throw ConfigError(name, "missing required section");
      obj_ = &empty_;
      return;
    }
    obj_ = &parent.at(name);
    if (!obj_->is_object()) throw ConfigError(name, "must be an object");
  }

  void number(const char* key, double& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(field(key), "must be a number");
    out = v->get<double>();
    if (!std::isfinite(out)) throw ConfigError(field(key), "must be finite");
  }

  void count(const char* key, std::size_t& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_number_integer() || v->get<long long>() < 0) {
      throw ConfigError(field(key), "must be a non-negative integer");
    }
    out = v->get<std::size_t>();
  }

  void integer(const char* key, int& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError(field(key), "must be an integer");
    out = v->get<int>();
  }

  void boolean(const char* key, bool& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(field(key), "must be true or false");
    out = v->get<bool>();
  }

  void text(const char* key, std::string& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(field(key), "must be a string");
    out = v->get<std::string>();
  }

  void triple(const char* key, std::array<double, 3>& out, bool required = true) {
    const json* v = find(key, required);
    if (!v) return;
    if (!v->is_array() || v->size() != 3) {
      throw ConfigError(field(key), "must be an array of three numbers");
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (!(*v)[i].is_number()) throw ConfigError(field(key), "must be an array of three numbers");
      out[i] = (*v)[i].get<double>();
    }
  }

  void finish() const {
    for (const auto& item : obj_->items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
    }
  }

 private:
  std::string field(const std::string& key) const { return path_ + "." + key; }

  const json* find(const char* key, bool required) {
    seen_.insert(key);
    if (!obj_->contains(key)) {
      if (required) throw ConfigError(field(key), "missing required key");
      return nullptr;
    }
    return &obj_->at(key);
  }

  std::string path_;
  const json* obj_ = nullptr;
  json empty_ = json::object();
  std::set<std::string> seen_;
};

void positive(double v, const char* field) {
  if (!(v > 0.0)) throw ConfigError(field, "must be strictly positive");
}

}  // namespace

TransmissionModel parse_transmission_model(const std::string& name) {
  if (name == "linearized") return TransmissionModel::linearized;
  if (name == "lorentzian") return TransmissionModel::lorentzian;
  throw ConfigError("probe.transmission_model", "expected linearized or lorentzian, got " + name);
}

CouplingMode parse_coupling_mode(const std::string& name) {
  if (name == "trajectory_average") return CouplingMode::trajectory_average;
  if (name == "closed_form") return CouplingMode::closed_form;
  throw ConfigError("probe.coupling_mode", "expected trajectory_average or closed_form, got " + name);
}

DephasingModel parse_dephasing_model(const std::string& name) {
  if (name == "none") return DephasingModel::none;
  if (name == "probe_ac_stark") return DephasingModel::probe_ac_stark;
  if (name == "quadratic_position") return DephasingModel::quadratic_position;
  throw ConfigError("dynamics.dephasing_model",
                    "expected none, probe_ac_stark or quadratic_position, got " + name);
}

TrapConfig ExperimentConfig::trap_config() const {
  TrapConfig t;
  t.omega_x = two_pi * trap.freq_x_hz;
  t.omega_y = two_pi * trap.freq_y_hz;
  t.omega_z = two_pi * trap.freq_z_hz;
  t.temp_longitudinal = trap.temp_longitudinal_nk * 1e-9;
  t.temp_transverse = trap.temp_transverse_nk * 1e-9;
  t.atom_number = trap.atom_number;
  t.mass = trap.mass_amu * constants::atomic_mass_unit;
  t.scattering_length = trap.scattering_length_bohr * constants::bohr_radius;
  t.mean_density = trap.mean_density_per_cm3 * 1e6;
  t.loss_rate = trap.lifetime_s > 0.0 ? 1.0 / trap.lifetime_s : 0.0;
  return t;
}

CavityConfig ExperimentConfig::cavity_config() const {
  CavityConfig c;
  c.waist = cavity.waist_um * 1e-6;
  c.length = cavity.length_um * 1e-6;
  c.kappa = two_pi * cavity.kappa_fwhm_hz;
  c.peak_shift = two_pi * cavity.peak_shift_hz;
  c.wavevector = two_pi / (cavity.probe_wavelength_nm * 1e-9);
  c.mirror_transmission = cavity.mirror_transmission_ppm * 1e-6;
  c.finesse = cavity.finesse;
  return c;
}

ProbeConfig ExperimentConfig::probe_config(Measurement which) const {
  ProbeConfig p;
  p.detuning = probe.detuning_linewidths * two_pi * cavity.kappa_fwhm_hz;
  p.pulse_duration = probe.pulse_duration_ms * 1e-3;
  const double detected =
      which == Measurement::m1 ? probe.detected_photons_m1 : probe.detected_photons_m2;
  p.detection_efficiency = probe.detection_efficiency;
  p.mean_transmitted = ProbeConfig::transmitted_for_detected(detected, probe.detection_efficiency);
  p.transmission = parse_transmission_model(probe.transmission_model);
  p.shot_noise = probe.shot_noise;
  p.coupling_mode = parse_coupling_mode(probe.coupling_mode);
  p.coupling_quadrature = probe.coupling_quadrature;
  return p;
}

DynamicsParams ExperimentConfig::dynamics_params() const {
  const TrapConfig t = trap_config();
  DynamicsParams d;
  d.omega_ex = dynamics.exchange_enabled ? exchange_rate(t) : 0.0;
  d.gamma_c = dynamics.lateral_collisions_enabled ? lateral_rate(t) : 0.0;
  d.loss_rate = dynamics.loss_enabled ? t.loss_rate : 0.0;
  d.dt = dynamics.dt_ms * 1e-3;
  d.kernel = dynamics.exchange_kernel;
  d.dephasing = parse_dephasing_model(dynamics.dephasing_model);
  for (int a = 0; a < 3; ++a) {
    d.quadratic_coeffs[a] = two_pi * dynamics.quadratic_dephasing_hz_per_um2[a] * 1e12;
  }
  return d;
}

double ExperimentConfig::omega_bar() const { return two_pi * cavity.mean_coupling_hz; }

void ExperimentConfig::validate() const {
  positive(trap.freq_x_hz, "trap.freq_x_hz");
  positive(trap.freq_y_hz, "trap.freq_y_hz");
  positive(trap.freq_z_hz, "trap.freq_z_hz");
  positive(trap.temp_longitudinal_nk, "trap.temp_longitudinal_nk");
  positive(trap.temp_transverse_nk, "trap.temp_transverse_nk");
  positive(trap.mass_amu, "trap.mass_amu");
  positive(trap.scattering_length_bohr, "trap.scattering_length_bohr");
  positive(trap.mean_density_per_cm3, "trap.mean_density_per_cm3");
  positive(trap.lifetime_s, "trap.lifetime_s");

  positive(cavity.waist_um, "cavity.waist_um");
  positive(cavity.length_um, "cavity.length_um");
  positive(cavity.kappa_fwhm_hz, "cavity.kappa_fwhm_hz");
  positive(cavity.peak_shift_hz, "cavity.peak_shift_hz");
  positive(cavity.mean_coupling_hz, "cavity.mean_coupling_hz");
  positive(cavity.probe_wavelength_nm, "cavity.probe_wavelength_nm");
  positive(cavity.mirror_transmission_ppm, "cavity.mirror_transmission_ppm");
  positive(cavity.finesse, "cavity.finesse");
  cavity_config().validate();

  positive(probe.pulse_duration_ms, "probe.pulse_duration_ms");
  if (!(probe.detuning_linewidths != 0.0)) {
    throw ConfigError("probe.detuning_linewidths", "must be non-zero");
  }
  positive(probe.detected_photons_m1, "probe.detected_photons_m1");
  positive(probe.detected_photons_m2, "probe.detected_photons_m2");
  if (!(probe.detection_efficiency > 0.0 && probe.detection_efficiency <= 1.0)) {
    throw ConfigError("probe.detection_efficiency", "must lie in (0, 1]");
  }
  parse_transmission_model(probe.transmission_model);
  parse_coupling_mode(probe.coupling_mode);
  if (probe.coupling_quadrature < 1) {
    throw ConfigError("probe.coupling_quadrature", "must be at least 1");
  }

  positive(dynamics.dt_ms, "dynamics.dt_ms");
  if (!(dynamics.exchange_kernel >= 0.0)) {
    throw ConfigError("dynamics.exchange_kernel", "must be non-negative");
  }
  parse_dephasing_model(dynamics.dephasing_model);
  try {
    dynamics_params().validate();
  } catch (const ConfigError& e) {
    throw ConfigError("dynamics.dt_ms", e.what());
  }

  if (!(readout.imaging_noise_atoms >= 0.0)) {
    throw ConfigError("readout.imaging_noise_atoms", "must be non-negative");
  }
  if (simulation.bootstrap_resamples < 100) {
    throw ConfigError("simulation.bootstrap_resamples", "must be at least 100");
  }
  if (!(simulation.ci_level > 0.0 && simulation.ci_level < 1.0)) {
    throw ConfigError("simulation.ci_level", "must lie in (0, 1)");
  }
  positive(simulation.post_selection_width, "simulation.post_selection_width");
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config root must be an object");
  if (!doc.contains("schema_version")) throw ConfigError("schema_version", "missing required key");
  if (!doc.at("schema_version").is_number_integer() ||
      doc.at("schema_version").get<int>() != config_schema_version) {
    throw ConfigError("schema_version",
                      "unsupported schema version, expected " +
                          std::to_string(config_schema_version));
  }
  static const std::set<std::string> sections{"schema_version", "trap",    "cavity",    "probe",
                                              "dynamics",       "readout", "simulation"};
  for (const auto& item : doc.items()) {
    if (!sections.count(item.key())) throw ConfigError(item.key(), "unknown key");
  }

  ExperimentConfig c;
  {
    SectionReader r(doc, "trap");
    r.number("freq_x_hz", c.trap.freq_x_hz);
    r.number("freq_y_hz", c.trap.freq_y_hz);
    r.number("freq_z_hz", c.trap.freq_z_hz);
    r.number("temp_longitudinal_nk", c.trap.temp_longitudinal_nk);
    r.number("temp_transverse_nk", c.trap.temp_transverse_nk);
    r.count("atom_number", c.trap.atom_number);
    r.number("mass_amu", c.trap.mass_amu);
    r.number("scattering_length_bohr", c.trap.scattering_length_bohr);
    r.number("mean_density_per_cm3", c.trap.mean_density_per_cm3);
    r.number("lifetime_s", c.trap.lifetime_s);
    r.finish();
  }
  {
    SectionReader r(doc, "cavity");
    r.number("waist_um", c.cavity.waist_um);
    r.number("length_um", c.cavity.length_um);
    r.number("kappa_fwhm_hz", c.cavity.kappa_fwhm_hz);
    r.number("peak_shift_hz", c.cavity.peak_shift_hz);
    r.number("mean_coupling_hz", c.cavity.mean_coupling_hz);
    r.number("probe_wavelength_nm", c.cavity.probe_wavelength_nm);
    r.number("mirror_transmission_ppm", c.cavity.mirror_transmission_ppm);
    r.number("finesse", c.cavity.finesse);
    r.finish();
  }
  {
    SectionReader r(doc, "probe");
    r.number("pulse_duration_ms", c.probe.pulse_duration_ms);
    r.number("detuning_linewidths", c.probe.detuning_linewidths);
    r.number("detected_photons_m1", c.probe.detected_photons_m1);
    r.number("detected_photons_m2", c.probe.detected_photons_m2);
    r.number("detection_efficiency", c.probe.detection_efficiency);
    r.text("transmission_model", c.probe.transmission_model);
    r.boolean("shot_noise", c.probe.shot_noise);
    r.text("coupling_mode", c.probe.coupling_mode);
    r.integer("coupling_quadrature", c.probe.coupling_quadrature);
    r.finish();
  }
  {
    SectionReader r(doc, "dynamics");
    r.boolean("exchange_enabled", c.dynamics.exchange_enabled);
    r.boolean("lateral_collisions_enabled", c.dynamics.lateral_collisions_enabled);
    r.boolean("loss_enabled", c.dynamics.loss_enabled);
    r.number("exchange_kernel", c.dynamics.exchange_kernel);
    r.text("dephasing_model", c.dynamics.dephasing_model);
    r.triple("quadratic_dephasing_hz_per_um2", c.dynamics.quadratic_dephasing_hz_per_um2);
    r.number("dt_ms", c.dynamics.dt_ms);
    r.finish();
  }
  {
    SectionReader r(doc, "readout");
    r.number("imaging_noise_atoms", c.readout.imaging_noise_atoms);
    r.finish();
  }
  {
    // Run-control settings, not physics: every key has a default.
    SectionReader r(doc, "simulation", false);
    r.count("desk_atom_number", c.simulation.desk_atom_number, false);
    r.count("bootstrap_resamples", c.simulation.bootstrap_resamples, false);
    r.number("ci_level", c.simulation.ci_level, false);
    r.count("threads", c.simulation.threads, false);
    r.number("post_selection_width", c.simulation.post_selection_width, false);
    r.finish();
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["schema_version"] = config_schema_version;
  doc["trap"] = {
      {"freq_x_hz", c.trap.freq_x_hz},
      {"freq_y_hz", c.trap.freq_y_hz},
      {"freq_z_hz", c.trap.freq_z_hz},
      {"temp_longitudinal_nk", c.trap.temp_longitudinal_nk},
      {"temp_transverse_nk", c.trap.temp_transverse_nk},
      {"atom_number", c.trap.atom_number},
      {"mass_amu", c.trap.mass_amu},
      {"scattering_length_bohr", c.trap.scattering_length_bohr},
      {"mean_density_per_cm3", c.trap.mean_density_per_cm3},
      {"lifetime_s", c.trap.lifetime_s},
  };
  doc["cavity"] = {
      {"waist_um", c.cavity.waist_um},
      {"length_um", c.cavity.length_um},
      {"kappa_fwhm_hz", c.cavity.kappa_fwhm_hz},
      {"peak_shift_hz", c.cavity.peak_shift_hz},
      {"mean_coupling_hz", c.cavity.mean_coupling_hz},
      {"probe_wavelength_nm", c.cavity.probe_wavelength_nm},
      {"mirror_transmission_ppm", c.cavity.mirror_transmission_ppm},
      {"finesse", c.cavity.finesse},
  };
  doc["probe"] = {
      {"pulse_duration_ms", c.probe.pulse_duration_ms},
      {"detuning_linewidths", c.probe.detuning_linewidths},
      {"detected_photons_m1", c.probe.detected_photons_m1},
      {"detected_photons_m2", c.probe.detected_photons_m2},
      {"detection_efficiency", c.probe.detection_efficiency},
      {"transmission_model", c.probe.transmission_model},
      {"shot_noise", c.probe.shot_noise},
      {"coupling_mode", c.probe.coupling_mode},
      {"coupling_quadrature", c.probe.coupling_quadrature},
  };
  doc["dynamics"] = {
      {"exchange_enabled", c.dynamics.exchange_enabled},
      {"lateral_collisions_enabled", c.dynamics.lateral_collisions_enabled},
      {"loss_enabled", c.dynamics.loss_enabled},
      {"exchange_kernel", c.dynamics.exchange_kernel},
      {"dephasing_model", c.dynamics.dephasing_model},
      {"quadratic_dephasing_hz_per_um2", c.dynamics.quadratic_dephasing_hz_per_um2},
      {"dt_ms", c.dynamics.dt_ms},
  };
  doc["readout"] = {{"imaging_noise_atoms", c.readout.imaging_noise_atoms}};
  doc["simulation"] = {
      {"desk_atom_number", c.simulation.desk_atom_number},
      {"bootstrap_resamples", c.simulation.bootstrap_resamples},
      {"ci_level", c.simulation.ci_level},
      {"threads", c.simulation.threads},
      {"post_selection_width", c.simulation.post_selection_width},
  };
  return doc;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << canonical_config_text(cfg) << '\n';
}

std::string canonical_config_text(const ExperimentConfig& cfg) {
  return config_to_json(cfg).dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config_text(cfg)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qndsim
