#pragma once

#include <numbers>

namespace ivdac::constants {

// CODATA 2018
inline constexpr double elementary_charge = 1.602176634e-19;  // C
inline constexpr double atomic_mass_unit = 1.66053906660e-27;  // kg
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double hbar = 1.054571817e-34;  // J s
inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline constexpr double calcium40_mass_amu = 39.962590863;

// Hardware figures of the in-vacuum DAC stack. Recorded for reports only.
inline constexpr double dac_noise_density_v_per_rthz = 15e-9;
inline constexpr double rs232_baud = 115200.0;
inline constexpr double nominal_ion_height_m = 60e-6;
inline constexpr double nominal_rf_frequency_hz = 53.17e6;
inline constexpr double nominal_axial_frequency_hz = 1.5e6;

}  // namespace ivdac::constants
