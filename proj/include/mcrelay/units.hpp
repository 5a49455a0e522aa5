#pragma once

// Canonical internal units: seconds, meters, mol, mol/L.
// Channel gains are in m^-3, so release [mol] * gain [m^-3] is mol/m^3.

namespace mcrelay {

inline constexpr double litres_per_cubic_metre = 1000.0;
inline constexpr double seconds_per_minute = 60.0;

/// Concentration (mol/L) produced at a sample point by `release_mol`
/// through a channel gain in m^-3.
constexpr double unit_convert(double release_mol, double gain_per_m3) noexcept {
  return release_mol * gain_per_m3 / litres_per_cubic_metre;
}

/// Inverse of unit_convert: release needed for `concentration` (mol/L)
/// through `gain_per_m3`.
constexpr double release_for_concentration(double concentration, double gain_per_m3) noexcept {
  return concentration * litres_per_cubic_metre / gain_per_m3;
}

}  // namespace mcrelay
