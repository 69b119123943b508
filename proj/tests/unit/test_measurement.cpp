#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qndsim/constants.hpp"
#include "qndsim/errors.hpp"
#include "qndsim/measurement.hpp"
#include "qndsim/rng.hpp"
#include "support.hpp"

using namespace qndsim;

namespace {

struct Fixture {
  ExperimentConfig cfg = test::paper_config();
  TrapConfig trap = cfg.trap_config();
  CavityConfig cav = cfg.cavity_config();
  ProbeConfig probe = cfg.probe_config(Measurement::m1);

  EnsembleState ensemble(std::size_t n, std::uint64_t seed) const {
    Engine rng = make_stream(seed, 0, Stage::sampling);
    EnsembleState s = make_ensemble(sample_thermal_ensemble(trap, n, rng));
    prepare_css(s);
    return s;
  }
};

double azimuth(const EnsembleState& s, std::size_t i) { return std::atan2(s.sy[i], s.sx[i]); }

}  // namespace

TEST(Css, PreparedAlongPlusX) {
  Fixture f;
  const EnsembleState s = f.ensemble(500, 1);
  EXPECT_NEAR(s.contrast(), 1.0, 1e-12);
  const Eigen::Vector3d S = s.total_spin();
  EXPECT_NEAR(S.x(), 250.0, 1e-9);
  EXPECT_NEAR(S.y(), 0.0, 1e-9);
  EXPECT_NEAR(S.z(), 0.0, 1e-9);
}

TEST(Projection, VarianceIsQuarterN) {
  Engine rng = make_stream(2, 0, Stage::projection);
  for (auto method : {ProjectionMethod::gaussian, ProjectionMethod::binomial}) {
    constexpr int draws = 40000;
    const std::size_t n = 400;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 0; k < draws; ++k) {
      const double sz = draw_sz(n, rng, method);
      ASSERT_LE(std::abs(sz), n / 2.0);
      ASSERT_EQ(sz * 2.0, std::round(sz * 2.0));
      s1 += sz;
      s2 += sz * sz;
    }
    const double m = s1 / draws;
    const double v = s2 / draws - m * m;
    EXPECT_NEAR(m, 0.0, 0.1);
    EXPECT_NEAR(v / (n / 4.0), 1.0, 0.03);
  }
}

TEST(Projection, UniformAssignmentKeepsAzimuthAndNorm) {
  Fixture f;
  EnsembleState s = f.ensemble(50, 3);
  apply_rotation(s, Eigen::Vector3d::UnitZ(), 0.3);
  assign_uniform_sz(s, 0.1);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_DOUBLE_EQ(s.sz[i], 0.1);
    EXPECT_NEAR(azimuth(s, i), 0.3, 1e-12);
    EXPECT_NEAR(s.sx[i] * s.sx[i] + s.sy[i] * s.sy[i] + s.sz[i] * s.sz[i], 0.25, 1e-15);
  }
}

TEST(CavityShift, HomogeneousSpinGivesOmegaBarTimesSz) {
  Fixture f;
  EnsembleState s = f.ensemble(200, 4);
  assign_uniform_sz(s, 0.05);
  std::vector<double> c(s.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.0 + 0.01 * static_cast<double>(i);
  double mean = 0.0;
  for (double v : c) mean += v;
  mean /= static_cast<double>(c.size());
  EXPECT_NEAR(cavity_shift(s, c), mean * 0.05 * 200.0, 1e-10);
}

TEST(Transmission, SlopeAtHalfLinewidth) {
  const double kappa = 2.0 * constants::pi * 45.8e6;
  EXPECT_NEAR(transmission_slope(0.5 * kappa, kappa), 2.0 / kappa, 1e-22);
}

TEST(Transmission, EstimateInvertsExpectation) {
  Fixture f;
  for (auto model : {TransmissionModel::linearized, TransmissionModel::lorentzian}) {
    ProbeConfig p = f.probe;
    p.transmission = model;
    for (double shift : {-3e6, -1e5, 0.0, 2e5, 4e6}) {
      const double n = expected_transmitted(shift, p, f.cav);
      EXPECT_NEAR(estimate_shift(n, p, f.cav), shift, 1e-6 * std::max(1.0, std::abs(shift)));
    }
  }
}

TEST(Transmission, LinearizedAndLorentzianAgreeForSmallShift) {
  Fixture f;
  ProbeConfig lin = f.probe;
  ProbeConfig lor = f.probe;
  lor.transmission = TransmissionModel::lorentzian;
  const double shift = 1e-4 * f.cav.kappa;
  const double a = expected_transmitted(shift, lin, f.cav) - lin.mean_transmitted;
  const double b = expected_transmitted(shift, lor, f.cav) - lor.mean_transmitted;
  EXPECT_NEAR(a / b, 1.0, 1e-3);
}

TEST(ShotNoise, PsnVariance) {
  const double kappa = 2.0 * constants::pi * 45.8e6;
  EXPECT_DOUBLE_EQ(psn_variance(1e4, kappa), kappa * kappa / 4e4);
  EXPECT_THROW(psn_variance(0.0, kappa), ArgumentError);
}

TEST(Composite, EchoCancelsPhaseSpreadAtZeroSz) {
  Fixture f;
  EnsembleState s = f.ensemble(300, 5);
  assign_uniform_sz(s, 0.0);
  ProbeConfig p = f.probe;
  p.shot_noise = false;
  const auto c = effective_couplings(s, f.cav, f.trap, p);
  Engine rng = make_stream(5, 0, Stage::probe_m1);
  composite_measurement(s, c, p, f.cav, Measurement::m1, rng);
  const double phi0 = azimuth(s, 0);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_NEAR(azimuth(s, i), phi0, 1e-12);
}

TEST(Composite, BothMeasurementsReportTheSameSz) {
  Fixture f;
  EnsembleState s = f.ensemble(2000, 6);
  assign_uniform_sz(s, -12.0 / 2000.0);
  ProbeConfig p = f.probe;
  p.shot_noise = false;
  const auto c = effective_couplings(s, f.cav, f.trap, p);
  const double omega_bar = ensemble_coupling_stats(c).mean;
  Engine rng = make_stream(6, 0, Stage::probe_m1);
  const MeasurementRecord m1 = composite_measurement(s, c, p, f.cav, Measurement::m1, rng);
  const double sz_after = s.total_spin().z();
  EXPECT_NEAR(sz_after, 12.0, 1e-9);
  EXPECT_NEAR(m1.m / (omega_bar * sz_after), 1.0, 1e-3);
  const MeasurementRecord m2 = composite_measurement(s, c, p, f.cav, Measurement::m2, rng);
  EXPECT_NEAR(m2.m / m1.m, 1.0, 1e-3);
  EXPECT_FALSE(m1.linearization_warning);
}

TEST(Composite, EmptyCavityNoiseIsPhotonShotNoise) {
  Fixture f;
  EnsembleState empty = make_ensemble({});
  ProbeConfig p = f.probe;
  p.mean_transmitted = ProbeConfig::transmitted_for_detected(1e4, p.detection_efficiency);
  const std::vector<double> none;
  constexpr int shots = 4000;
  double s1 = 0.0, s2 = 0.0, n = 0.0;
  for (int k = 0; k < shots; ++k) {
    Engine rng = make_stream(7, static_cast<std::uint64_t>(k), Stage::probe_m1);
    const MeasurementRecord r = composite_measurement(empty, none, p, f.cav, Measurement::m1, rng);
    s1 += r.m;
    s2 += r.m * r.m;
    n += r.detected();
  }
  const double var = s2 / shots - (s1 / shots) * (s1 / shots);
  const double psn = f.cav.kappa * f.cav.kappa / (4.0 * n / shots);
  EXPECT_NEAR(var / psn, 1.0, 0.07);
}

TEST(Rotation, PreservesNormsAndMeanSpinAxis) {
  Fixture f;
  EnsembleState s = f.ensemble(100, 8);
  apply_rotation(s, Eigen::Vector3d(0.3, -0.2, 1.0), 0.7);
  const Eigen::Vector3d before = s.total_spin();
  rotate_about_mean_spin(s, 1.1);
  EXPECT_NEAR((s.total_spin() - before).norm(), 0.0, 1e-10);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(s.sx[i] * s.sx[i] + s.sy[i] * s.sy[i] + s.sz[i] * s.sz[i], 0.25, 1e-14);
  }
  EXPECT_THROW(apply_rotation(s, Eigen::Vector3d::Zero(), 1.0), ArgumentError);
}

TEST(Imaging, CountsAddUpWithoutNoise) {
  Fixture f;
  EnsembleState s = f.ensemble(1000, 9);
  Engine rng = make_stream(9, 0, Stage::imaging);
  const ImagingResult r = imaging_readout(s, 0.0, rng);
  EXPECT_DOUBLE_EQ(r.n_up + r.n_down, 1000.0);
  EXPECT_GT(r.temp_z_up, 0.0);
  EXPECT_GT(r.temp_z_down, 0.0);
  EXPECT_NEAR(r.temp_z_all / f.trap.temp_transverse, 1.0, 0.1);
}

TEST(Imaging, EmptyBranchTemperatureIsNan) {
  Fixture f;
  EnsembleState s = f.ensemble(20, 10);
  apply_rotation(s, Eigen::Vector3d::UnitY(), constants::pi / 2.0);  // +x -> -z: all up
  Engine rng = make_stream(10, 0, Stage::imaging);
  const ImagingResult r = imaging_readout(s, 0.0, rng);
  EXPECT_DOUBLE_EQ(r.n_up, 20.0);
  EXPECT_TRUE(std::isnan(r.temp_z_down));
}

TEST(Validation, ProbeRejectsBadEfficiency) {
  Fixture f;
  ProbeConfig p = f.probe;
  p.detection_efficiency = 1.5;
  EXPECT_THROW(p.validate(), ConfigError);
}
