#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qndsim/config.hpp"
#include "qndsim/dataset_io.hpp"

namespace qndsim {

enum class ScenarioKind {
  noise_floor,
  squeezing_vs_photons,
  tomography,
  amplification_vs_time,
  temperature_correlation,
  squeezing_lifetime,
  analytic_vs_sim,
};

const std::vector<std::string>& scenario_names();
std::optional<ScenarioKind> parse_scenario(const std::string& name);
std::string to_string(ScenarioKind kind);

struct RunOptions {
  std::uint64_t seed = 1;
  std::size_t shots = 200;
  bool paper_scale = false;
  std::optional<std::size_t> atoms;  ///< overrides the desk / full-scale choice
  std::optional<std::size_t> threads;
};

/// A block of identically configured shots. Every shot evolves once after
/// M1 and branches off an M2 (plus imaging) at each delay.
struct ShotGroup {
  std::string label;
  double key = 0.0;  ///< grid value this group represents (photons, degrees, ...)
  ExperimentConfig config;
  std::size_t atoms = 0;
  std::vector<double> delays;  ///< s, ascending
  double theta = 0.0;          ///< rotation about the mean spin before M2, rad
};

/// Runs one shot of a group; returns one row per delay in the column order
/// of shot_table_columns().
std::vector<std::vector<double>> simulate_shot(const ShotGroup& group, std::size_t group_index,
                                               std::size_t shot, std::uint64_t seed);

const std::vector<std::string>& shot_table_columns();

/// Runs every shot of every group; rows ordered by (group, shot, delay)
/// whatever the thread count.
Table simulate_groups(const std::vector<ShotGroup>& groups, std::size_t shots,
                      std::uint64_t seed, std::size_t threads);

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

std::vector<ShotGroup> plan_scenario(ScenarioKind kind, const ExperimentConfig& cfg,
                                     const RunOptions& options);

struct ScenarioResult {
  std::string name;
  Table shots;
  Table table;
  nlohmann::json summary;
};

ScenarioResult run_scenario(ScenarioKind kind, const ExperimentConfig& cfg,
                            const RunOptions& options);

/// Writes shots.csv, shots.json, table.csv, summary.json and config.json
/// into `dir`. Files are staged in a sibling directory and moved in at the
/// end, so a failure leaves no partial output behind.
void write_scenario_outputs(const ScenarioResult& result, const ExperimentConfig& cfg,
                            const std::filesystem::path& dir);

/// Rows of `shots` with the given group and delay.
ShotDataset select_shots(const Table& shots, std::size_t group, double delay);

/// Fixed rates and calibration numbers of a configuration, for reports.
nlohmann::json derived_quantities(const ExperimentConfig& cfg);

}  // namespace qndsim
