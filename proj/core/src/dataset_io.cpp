#include "qndsim/dataset_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "qndsim/errors.hpp"

namespace qndsim {

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw ArgumentError("table has no column '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c == name) return true;
  }
  return false;
}

std::vector<double> Table::column(const std::string& name) const {
  const std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[k]);
  return out;
}

void Table::add_row(std::vector<double> row) {
  if (row.size() != columns.size()) {
    throw ArgumentError("Table::add_row: expected " + std::to_string(columns.size()) +
                        " values, got " + std::to_string(row.size()));
  }
  rows.push_back(std::move(row));
}

namespace {

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_value(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void write_csv(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    out << (i ? "," : "") << table.columns[i];
  }
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_value(row[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Table read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header row");
  t.columns = split(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.columns.size()) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                               ": wrong number of fields");
    }
    std::vector<double> row;
    row.reserve(cells.size());
    try {
      for (const auto& c : cells) row.push_back(parse_value(c));
    } catch (const std::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

nlohmann::json table_to_records(const Table& table) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& row : table.rows) {
    nlohmann::json rec = nlohmann::json::object();
    for (std::size_t i = 0; i < row.size(); ++i) {
      // JSON has no NaN; null marks a missing value.
      rec[table.columns[i]] = std::isfinite(row[i]) ? nlohmann::json(row[i]) : nlohmann::json();
    }
    arr.push_back(std::move(rec));
  }
  return arr;
}

Table table_from_records(const nlohmann::json& records) {
  if (!records.is_array()) throw ArgumentError("records must be a JSON array");
  Table t;
  if (records.empty()) return t;
  for (const auto& item : records.front().items()) t.columns.push_back(item.key());
  for (const auto& rec : records) {
    std::vector<double> row;
    for (const auto& c : t.columns) {
      const auto& v = rec.at(c);
      row.push_back(v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>());
    }
    t.add_row(std::move(row));
  }
  return t;
}

void write_records(const Table& table, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << table_to_records(table).dump(1) << '\n';
}

ShotDataset dataset_from_shots(const Table& shots, double group) {
  namespace c = shot_columns;
  const std::size_t g = shots.column_index(c::group);
  auto pick = [&](const char* name) {
    std::vector<double> out;
    if (!shots.has_column(name)) return out;
    const std::size_t k = shots.column_index(name);
    for (const auto& r : shots.rows) {
      if (group < 0.0 || r[g] == group) out.push_back(r[k]);
    }
    return out;
  };
  ShotDataset d;
  d.m1 = pick(c::m1);
  d.m2 = pick(c::m2);
  d.n1 = pick(c::n1);
  d.n2 = pick(c::n2);
  d.atom_number = pick(c::atoms_m1);
  d.temp_z_up = pick(c::temp_up);
  d.temp_z_down = pick(c::temp_down);
  d.temp_z_all = pick(c::temp_all);
  d.theta = pick(c::theta);
  d.delay = pick(c::delay);
  d.sz_true = pick(c::sz_true);
  d.contrast = pick(c::contrast_m1);
  d.validate();
  return d;
}

}  // namespace qndsim
