#pragma once

#include <numbers>

namespace qndsim::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double boltzmann = 1.380649e-23;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double speed_of_light = 299792458.0;
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double bohr_radius = 5.29177210903e-11;

inline constexpr double rb87_mass_amu = 86.909180527;

}  // namespace qndsim::constants
