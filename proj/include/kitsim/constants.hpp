#pragma once

// CODATA 2018 exact values. Single source of truth for every module;
// do not redefine these locally.

namespace kitsim::constants {

inline constexpr double electron_charge = 1.602176634e-19;   // C
inline constexpr double planck = 6.62607015e-34;             // J s
inline constexpr double hbar = 1.054571817e-34;              // J s
inline constexpr double boltzmann = 1.380649e-23;            // J/K
inline constexpr double vacuum_permittivity = 8.8541878128e-12;  // F/m
inline constexpr double pi = 3.14159265358979323846;

}  // namespace kitsim::constants
