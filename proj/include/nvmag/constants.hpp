#pragma once

#include <numbers>

namespace nvmag::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr double euler_e = std::numbers::e;

// CODATA 2018
inline constexpr double hbar = 1.054571817e-34;   // J s
inline constexpr double mu0 = 1.25663706212e-6;   // T m / A

// Gyromagnetic ratios in rad s^-1 T^-1.
inline constexpr double gamma_e = two_pi * 28.024e9;
inline constexpr double gamma_n15 = two_pi * -4.316e6;
inline constexpr double gamma_n14 = two_pi * 3.077e6;
inline constexpr double gamma_proton = two_pi * 42.577478518e6;

// NV ground state defaults (Hz and T).
inline constexpr double zfs_hz = 2.870e9;
inline constexpr double hyperfine_15n_hz = 3.03e6;
inline constexpr double sensing_field_t = 0.7662;

}  // namespace nvmag::constants

namespace nvmag {

constexpr double hz_to_rad(double hz) { return constants::two_pi * hz; }
constexpr double rad_to_hz(double rad_s) { return rad_s / constants::two_pi; }

}  // namespace nvmag
