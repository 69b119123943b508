#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "qndsim/config.hpp"
#include "qndsim/estimators.hpp"
#include "qndsim/rng.hpp"

namespace qndsim::test {

inline std::string config_path(const std::string& name) {
  return std::string(QNDSIM_CONFIG_DIR) + "/" + name;
}

inline ExperimentConfig paper_config() { return load_config(config_path("paper.json")); }

/// Shots of an ideal linear measurement pair: M1 = w S + e1, M2 = alpha w S + e2
/// with S ~ N(0, N/4) and photon shot noise e_l of variance kappa^2 / (4 n_l).
struct SyntheticPair {
  double alpha = 1.0;
  double atom_number = 2000.0;
  double omega_bar = 1.0e5;
  double kappa = 2.88e8;
  double n1 = 1.0e4;
  double n2 = 1.0e4;
};

inline ShotDataset synthetic_shots(const SyntheticPair& p, std::size_t shots, std::uint64_t seed) {
  Engine rng = make_stream(seed, 0, Stage::synthetic);
  std::normal_distribution<double> sz(0.0, std::sqrt(p.atom_number / 4.0));
  std::normal_distribution<double> e1(0.0, p.kappa / (2.0 * std::sqrt(p.n1)));
  std::normal_distribution<double> e2(0.0, p.kappa / (2.0 * std::sqrt(p.n2)));
  ShotDataset d;
  for (std::size_t k = 0; k < shots; ++k) {
    const double s = sz(rng);
    d.m1.push_back(p.omega_bar * s + e1(rng));
    d.m2.push_back(p.alpha * p.omega_bar * s + e2(rng));
    d.n1.push_back(p.n1);
    d.n2.push_back(p.n2);
    d.atom_number.push_back(p.atom_number);
    d.sz_true.push_back(s);
    d.contrast.push_back(1.0);
  }
  return d;
}

}  // namespace qndsim::test
