// qndsim command line: run scenarios, validate configs, summarize outputs.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qndsim/config.hpp"
#include "qndsim/constants.hpp"
#include "qndsim/dataset_io.hpp"
#include "qndsim/ensemble.hpp"
#include "qndsim/errors.hpp"
#include "qndsim/scenario.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_other = 1;
constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int cmd_run(const std::string& scenario, const std::string& config_path,
            const qndsim::RunOptions& opt, const std::string& out_dir) {
  const auto kind = qndsim::parse_scenario(scenario);
  if (!kind) {
    std::string known;
    for (const auto& n : qndsim::scenario_names()) known += " " + n;
    throw qndsim::ConfigError("scenario", "unknown scenario '" + scenario + "'; known:" + known);
  }
  const qndsim::ExperimentConfig cfg = qndsim::load_config(config_path);
  const auto t0 = std::chrono::steady_clock::now();
  const qndsim::ScenarioResult res = qndsim::run_scenario(*kind, cfg, opt);
  qndsim::write_scenario_outputs(res, cfg, out_dir);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "qndsim: " << res.name << " wrote " << res.shots.rows.size() << " shot rows to "
            << out_dir << " in " << secs << " s\n";
  return exit_ok;
}

int cmd_validate(const std::string& config_path) {
  const qndsim::ExperimentConfig cfg = qndsim::load_config(config_path);
  std::cout << "config ok, hash " << qndsim::config_hash(cfg) << '\n';
  std::cout << qndsim::derived_quantities(cfg).dump(2) << '\n';
  return exit_ok;
}

int cmd_calibrate(const std::string& config_path, std::size_t samples, std::uint64_t seed) {
  const qndsim::ExperimentConfig cfg = qndsim::load_config(config_path);
  const qndsim::TrapConfig trap = cfg.trap_config();
  const qndsim::CavityConfig cav = cfg.cavity_config();
  const qndsim::ProbeConfig probe = cfg.probe_config(qndsim::Measurement::m1);
  qndsim::Engine rng = qndsim::make_stream(seed, 0, qndsim::Stage::sampling);
  const double omega0 = qndsim::calibrate_peak_shift(
      trap, cav, cfg.omega_bar(), probe.pulse_duration, probe.coupling_mode, samples, rng,
      probe.coupling_quadrature);
  std::printf("peak_shift_hz %.6f\n", omega0 / qndsim::constants::two_pi);
  std::printf("ratio_mean_to_peak %.6f\n", cfg.omega_bar() / omega0);
  return exit_ok;
}

void print_table(const qndsim::Table& t) {
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    std::printf("%s%s", i ? "  " : "", t.columns[i].c_str());
  }
  std::printf("\n");
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const int width = static_cast<int>(t.columns[i].size());
      std::printf("%s%*.5g", i ? "  " : "", width, row[i]);
    }
    std::printf("\n");
  }
}

int cmd_report(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::ifstream in(base / "summary.json");
  if (!in) throw std::runtime_error("no summary.json in " + dir);
  const nlohmann::json summary = nlohmann::json::parse(in);
  std::cout << "scenario      " << summary.value("scenario", "?") << '\n';
  std::cout << "seed          " << summary.value("seed", 0ULL) << '\n';
  std::cout << "shots/group   " << summary.value("shots_per_group", 0ULL) << '\n';
  std::cout << "atoms         " << summary.value("atom_number", 0ULL) << '\n';
  std::cout << "config hash   " << summary.value("config_hash", "?") << '\n';
  if (summary.contains("peak")) {
    std::cout << "peak alpha    " << summary["peak"]["alpha"] << " at t = "
              << summary["peak"]["t_s"] << " s\n";
  }
  if (summary.contains("max_rel_err_up_to_peak")) {
    std::cout << "max |rel err| " << summary["max_rel_err_up_to_peak"] << " (t <= peak)\n";
  }
  std::cout << '\n';
  print_table(qndsim::read_csv(base / "table.csv"));
  return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cavity QND spin-squeezing simulator"};
  app.require_subcommand(1);

  std::string scenario, config_path, out_dir;
  qndsim::RunOptions opt;
  std::size_t atoms = 0;
  std::size_t threads = 0;
  auto* run = app.add_subcommand("run", "run a scenario and write its tables");
  run->add_option("scenario", scenario, "scenario name")->required();
  run->add_option("--config", config_path, "config file")->required();
  run->add_option("--seed", opt.seed, "master seed (u64)")->required();
  run->add_option("--shots", opt.shots, "shots per group")->required();
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--paper-scale", opt.paper_scale, "use trap.atom_number instead of the desk size");
  auto* atoms_opt = run->add_option("--atoms", atoms, "override the atom number");
  auto* threads_opt = run->add_option("--threads", threads, "worker threads (0: all cores)");

  auto* validate = app.add_subcommand("validate", "check a config file");
  validate->add_option("--config", config_path, "config file")->required();

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", report_dir, "output directory of a run")->required();

  std::size_t samples = 100000;
  std::uint64_t cal_seed = 1;
  auto* calibrate = app.add_subcommand("calibrate", "solve the peak shift for the mean coupling");
  calibrate->add_option("--config", config_path, "config file")->required();
  calibrate->add_option("--samples", samples, "sampled atoms");
  calibrate->add_option("--seed", cal_seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (*run) {
      if (*atoms_opt) opt.atoms = atoms;
      if (*threads_opt) opt.threads = threads;
      return cmd_run(scenario, config_path, opt, out_dir);
    }
    if (*validate) return cmd_validate(config_path);
    if (*report) return cmd_report(report_dir);
    if (*calibrate) return cmd_calibrate(config_path, samples, cal_seed);
  } catch (const qndsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const qndsim::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_other;
  }
  return exit_other;
}
