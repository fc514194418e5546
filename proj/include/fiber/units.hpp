#pragma once

#include <cmath>

// Physical constants and the unit conversions used throughout the library.
//
// Internal convention is SI: seconds, meters, watts, Hz, rad/s.  Configuration
// structs speak the field units common in transmission work (km, dB, ps/nm/km,
// 1/W/km) and are converted at the boundary with the helpers below.

namespace fiber {

inline constexpr double kSpeedOfLight = 2.99792458e8;   // m/s
inline constexpr double kPlanck = 6.62607015e-34;       // J s
inline constexpr double kCarrierWavelength = 1550e-9;   // m, C-band reference

// 193.41 THz for the 1550 nm reference carrier.
inline constexpr double kCarrierFrequency = kSpeedOfLight / kCarrierWavelength;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double dbm_to_watt(double dbm) { return 1e-3 * db_to_linear(dbm); }
inline double watt_to_dbm(double w) { return linear_to_db(w / 1e-3); }

// Fiber attenuation: dB/km quoted, nepers/m (power coefficient) used in the
// propagation equations.
inline double alpha_db_km_to_per_m(double alpha_db_km) {
  return alpha_db_km * std::log(10.0) / 10.0 / 1e3;
}

// Dispersion parameter D [ps/(nm km)] to beta2 [s^2/m] at the reference
// wavelength: beta2 = -D lambda^2 / (2 pi c).
inline double beta2_from_d(double d_ps_nm_km) {
  const double d_si = d_ps_nm_km * 1e-6;  // s/m^2
  return -d_si * kCarrierWavelength * kCarrierWavelength /
         (2.0 * M_PI * kSpeedOfLight);
}

// Accumulated dispersion D_c [ps/nm] to accumulated beta2*L [s^2].
inline double beta2_length_from_dc(double dc_ps_nm) {
  const double dc_si = dc_ps_nm * 1e-3;  // s/m
  return -dc_si * kCarrierWavelength * kCarrierWavelength /
         (2.0 * M_PI * kSpeedOfLight);
}

// gamma [1/(W km)] to [1/(W m)].
inline double gamma_per_w_km_to_per_w_m(double g) { return g * 1e-3; }

}  // namespace fiber
