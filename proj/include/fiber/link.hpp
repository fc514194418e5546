#pragma once

#include <vector>

// Static description of a dispersion-managed link: alternating fiber pieces
// and lumped amplifiers, grouped into identical spans.  The dispersion map
// D_c(z) derived from it drives both the back-propagation step planner and
// the bulk dispersion compensator.

namespace fiber {

struct FiberSegmentSpec {
  double length_km = 0.0;
  double alpha_db_per_km = 0.0;
  double d_ps_nm_km = 0.0;         // dispersion parameter at the carrier
  double gamma_per_w_km = 0.0;
  double pmd_ps_sqrt_km = 0.0;     // PMD coefficient; 0 disables the PMD step
  double step_km = 1.0;            // SSFM segment length (also PMD correlation length)

  int segment_count() const;
  double loss_db() const { return alpha_db_per_km * length_km; }
  void validate() const;
};

struct AmplifierSpec {
  double gain_db = 0.0;
  double noise_figure_db = 0.0;
  double center_freq_hz = 0.0;
};

// One span: fibers[i] is followed by amps[i] (EDFA after each fiber piece).
struct SpanSpec {
  std::vector<FiberSegmentSpec> fibers;
  std::vector<AmplifierSpec> amps;

  double length_km() const;
  void validate() const;  // enforces per-span gain/loss balance
};

struct LinkSpec {
  std::vector<SpanSpec> spans;

  double length_km() const;
  int total_segments() const;  // SSFM segments over the whole link
  void validate() const;
};

// Piecewise-linear accumulated dispersion D_c(z) [ps/nm] with breakpoints at
// fiber boundaries; z in km from the transmitter.
struct DispersionMap {
  std::vector<double> z_km;
  std::vector<double> dc_ps_nm;

  double total_km() const { return z_km.back(); }
  double at(double z) const;  // throws outside [0, total]
};

DispersionMap build_dispersion_map(const LinkSpec& link);

// Parameters of the recurring SMF + DCF span used by all built-in setups.
// The DCF undoes `compensation` of the SMF dispersion; amplifier gains are
// placed so the DCF input sits at a fixed offset below launch power and each
// span is exactly power-balanced.
struct SpanDesign {
  double smf_km = 72.0;
  double dcf_km = 13.0;
  double smf_alpha_db_km = 0.2;
  double dcf_alpha_db_km = 0.5;
  double smf_d_ps_nm_km = 17.0;
  double compensation = 0.85;
  double smf_gamma_per_w_km = 1.4;
  double dcf_gamma_per_w_km = 5.0;
  double pmd_ps_sqrt_km = 0.05;
  double noise_figure_db = 5.0;
  double dcf_input_offset_db = -7.9;  // DCF launch relative to span launch
  double step_km = 1.0;

  double dcf_d_ps_nm_km() const {
    return -compensation * smf_d_ps_nm_km * smf_km / dcf_km;
  }
};

LinkSpec make_link(const SpanDesign& design, int n_spans);

}  // namespace fiber
