#pragma once

#include <numbers>

namespace coolheat::constants {

// SI 2019 exact values.
inline constexpr double planck_h = 6.62607015e-34;       // J s
inline constexpr double boltzmann_k = 1.380649e-23;      // J / K
inline constexpr double speed_of_light = 299792458.0;    // m / s

// Bohr magneton over h, in Hz per gauss.
inline constexpr double bohr_magneton_hz_per_gauss = 1.3996245e6;

inline constexpr double pi = std::numbers::pi;

// nW/THz per W/Hz.
inline constexpr double nw_per_thz_per_w_per_hz = 1e21;

}  // namespace coolheat::constants
