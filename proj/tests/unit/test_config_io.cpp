#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "qndsim/config.hpp"
#include "qndsim/constants.hpp"
#include "qndsim/dataset_io.hpp"
#include "qndsim/ensemble.hpp"
#include "qndsim/errors.hpp"
#include "support.hpp"

using namespace qndsim;
namespace fs = std::filesystem;

namespace {

nlohmann::json paper_json() { return config_to_json(test::paper_config()); }

std::string error_field(const nlohmann::json& doc) {
  try {
    config_from_json(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qndsim_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, PaperFileGivesHertzScaleExchange) {
  const ExperimentConfig cfg = test::paper_config();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_NEAR(exchange_rate(cfg.trap_config()) / constants::two_pi, 1.0, 0.25);
  EXPECT_NEAR(cfg.omega_bar(), constants::two_pi * 16.2e3, 1e-9);
  EXPECT_NEAR(cfg.trap_config().loss_rate, 1.0 / 3.0, 1e-15);
}

TEST(Config, MissingKappaNamesTheField) {
  nlohmann::json doc = paper_json();
  doc["cavity"].erase("kappa_fwhm_hz");
  EXPECT_EQ(error_field(doc), "cavity.kappa_fwhm_hz");
}

TEST(Config, UnknownKeyIsAnError) {
  nlohmann::json doc = paper_json();
  doc["trap"]["freq_w_hz"] = 3.0;
  EXPECT_EQ(error_field(doc), "trap.freq_w_hz");
}

TEST(Config, TypeMismatchIsAnError) {
  nlohmann::json doc = paper_json();
  doc["probe"]["shot_noise"] = "yes";
  EXPECT_EQ(error_field(doc), "probe.shot_noise");
}

TEST(Config, SchemaVersionMustMatch) {
  nlohmann::json doc = paper_json();
  doc["schema_version"] = config_schema_version + 1;
  EXPECT_EQ(error_field(doc), "schema_version");
}

TEST(Config, ValidationNamesBadValues) {
  ExperimentConfig cfg = test::paper_config();
  cfg.probe.detection_efficiency = 0.0;
  try {
    cfg.validate();
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "probe.detection_efficiency");
  }
  cfg = test::paper_config();
  cfg.probe.coupling_mode = "psychic";
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Config, EmitThenLoadKeepsTheHash) {
  const ExperimentConfig cfg = test::paper_config();
  const fs::path dir = scratch_dir("config_roundtrip");
  save_config(cfg, dir / "copy.json");
  const ExperimentConfig back = load_config(dir / "copy.json");
  EXPECT_EQ(config_hash(back), config_hash(cfg));
  EXPECT_EQ(canonical_config_text(back), canonical_config_text(cfg));
  EXPECT_EQ(config_hash(cfg).size(), 16u);
  ExperimentConfig other = cfg;
  other.trap.atom_number += 1;
  EXPECT_NE(config_hash(other), config_hash(cfg));
}

TEST(Config, UnreadableFileIsAConfigError) {
  EXPECT_THROW(load_config("/nonexistent/qndsim.json"), ConfigError);
  const fs::path dir = scratch_dir("config_garbage");
  {
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  EXPECT_THROW(load_config(dir / "bad.json"), ConfigError);
}

TEST(Tables, CsvRoundTripIsLossless) {
  Table t;
  t.columns = {"a_s", "b_rad_s", "c"};
  t.add_row({0.1, -1.0 / 3.0, std::numeric_limits<double>::quiet_NaN()});
  t.add_row({1e-300, 6.02214076e23, std::numeric_limits<double>::infinity()});
  const fs::path dir = scratch_dir("csv");
  write_csv(t, dir / "t.csv");
  const Table back = read_csv(dir / "t.csv");
  ASSERT_EQ(back.columns, t.columns);
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0][1], t.rows[0][1]);
  EXPECT_EQ(back.rows[1][0], t.rows[1][0]);
  EXPECT_TRUE(std::isnan(back.rows[0][2]));
  EXPECT_TRUE(std::isinf(back.rows[1][2]));
  EXPECT_THROW(t.add_row({1.0}), ArgumentError);
}

TEST(Tables, RecordsUseNullForMissingValues) {
  Table t;
  t.columns = {"x", "y"};
  t.add_row({1.5, std::numeric_limits<double>::quiet_NaN()});
  const nlohmann::json rec = table_to_records(t);
  EXPECT_TRUE(rec[0]["y"].is_null());
  const Table back = table_from_records(rec);
  EXPECT_EQ(back.rows[0][0], 1.5);
  EXPECT_TRUE(std::isnan(back.rows[0][1]));
}

TEST(Tables, DatasetSelectsOneGroup) {
  namespace c = shot_columns;
  Table t;
  t.columns = {c::group, c::m1, c::m2, c::n1, c::n2};
  t.add_row({0.0, 1.0, 2.0, 10.0, 11.0});
  t.add_row({1.0, 3.0, 4.0, 12.0, 13.0});
  t.add_row({1.0, 5.0, 6.0, 14.0, 15.0});
  const ShotDataset d = dataset_from_shots(t, 1.0);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.m1[1], 5.0);
  EXPECT_TRUE(d.temp_z_up.empty());
  EXPECT_EQ(dataset_from_shots(t).size(), 3u);
}
