#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qndsim/estimators.hpp"

namespace qndsim {

/// Rectangular numeric table. Column names carry their unit as a suffix
/// (m1_rad_s, delay_s, temp_z_up_k, ...); dimensionless columns have none.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column_index(const std::string& name) const;  ///< throws if absent
  bool has_column(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
  void add_row(std::vector<double> row);
};

/// Comma-separated, one header row, values printed with 17 significant
/// digits so a write/read cycle is lossless.
void write_csv(const Table& table, const std::filesystem::path& path);
Table read_csv(const std::filesystem::path& path);

/// Array of {column: value} objects, the structured-records form.
nlohmann::json table_to_records(const Table& table);
Table table_from_records(const nlohmann::json& records);
void write_records(const Table& table, const std::filesystem::path& path);

/// Column names of the per-shot table.
namespace shot_columns {
inline constexpr const char* group = "group";
inline constexpr const char* shot = "shot";
inline constexpr const char* delay = "delay_s";
inline constexpr const char* theta = "theta_rad";
inline constexpr const char* m1 = "m1_rad_s";
inline constexpr const char* m2 = "m2_rad_s";
inline constexpr const char* n1 = "n1_photons";
inline constexpr const char* n2 = "n2_photons";
inline constexpr const char* atoms_m1 = "atoms_m1";
inline constexpr const char* atoms_alive = "atoms_alive";
inline constexpr const char* temp_up = "temp_z_up_k";
inline constexpr const char* temp_down = "temp_z_down_k";
inline constexpr const char* temp_all = "temp_z_all_k";
inline constexpr const char* n_up = "n_up_atoms";
inline constexpr const char* n_down = "n_down_atoms";
inline constexpr const char* sz_true = "sz_true";
inline constexpr const char* contrast_m1 = "contrast_m1";
inline constexpr const char* contrast_m2 = "contrast_m2";
inline constexpr const char* omega_bar = "omega_bar_rad_s";
inline constexpr const char* delta_omega = "delta_omega_rad_s";
inline constexpr const char* lin_warning = "linearization_warning";
}  // namespace shot_columns

/// Builds the estimator view of the shot table: rows whose `group` equals
/// `group` (all rows when group < 0).
ShotDataset dataset_from_shots(const Table& shots, double group = -1.0);

}  // namespace qndsim
