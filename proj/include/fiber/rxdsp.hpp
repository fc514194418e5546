#pragma once

#include <cstdint>

#include "fiber/signal.hpp"
#include "fiber/transmitter.hpp"

// Coherent receiver chain: channel selection to 2 samples/symbol, bulk
// dispersion compensation, 2x2 adaptive equalization (CMA warm-up, then
// radius-directed), carrier phase estimation, and the quality metrics.

namespace fiber {

// Downconverts the channel at `offset_hz`, applies the root-raised-cosine
// selection filter of bandwidth (1+rolloff)*baud, and resamples to out_sps.
DualPolBlock channel_select(const DualPolBlock& in, double offset_hz,
                            double baud_hz, double rolloff, int out_sps);

// Bulk compensation of the accumulated dispersion: spectrum multiplied by
// exp(-j beta2L/2 w^2) with beta2L derived from dc_ps_nm.
void cdc(DualPolBlock& block, double dc_ps_nm);

struct MimoConfig {
  int taps = 15;               // per FIR, T/2 spaced
  double mu = 1e-3;
  int cma_warmup_symbols = 10000;
  int qam_order = 16;
};

// Input at 2 samples/symbol, output hard-spaced at the symbol rate.  The
// block is treated circularly; after the warm-up the filters keep adapting
// radius-directed over one full pass that produces the outputs.
struct MimoOutput {
  Eigen::ArrayXcd x, y;
};
MimoOutput mimo_equalize(const DualPolBlock& in, const MimoConfig& cfg);

struct CpeConfig {
  int test_phases = 64;
  int window = 64;             // symbols, sliding
  int qam_order = 16;
};

// Blind phase search over [-pi/4, pi/4) with pi/2 unwrapping between symbols.
void cpe_blind(Eigen::ArrayXcd& symbols, const CpeConfig& cfg);

// Data-aided variant: per-window least-squares phase against the (already
// delay-aligned) reference.  Test-harness privilege; never used blind.
void cpe_genie(Eigen::ArrayXcd& symbols, const Eigen::ArrayXcd& reference,
               int window);

struct MetricsReport {
  double snr_eff_db = 0.0;     // +inf when the error vanishes
  double ber = 0.0;
  double q_db = 0.0;
  Eigen::Index n_symbols = 0;
  Eigen::Index bit_errors = 0;
  Eigen::Index delay = 0;      // resolved circular delay, symbols
  bool pol_swapped = false;
};

// Resolves circular delay, polarization pairing and a global phase per
// polarization against the reference frame, normalizes scale, then computes
// SNR_eff = sum|s_hat|^2 / sum|s - s_hat|^2, bit error rate, and the
// Q-factor derived from it.
MetricsReport measure(const Eigen::ArrayXcd& est_x, const Eigen::ArrayXcd& est_y,
                      const SymbolFrame& ref, int qam_order);

// 20 log10( sqrt(2) erfc^-1(2 ber) ); requires 0 < ber < 0.5.
double q_factor_db(double ber);

double erfc_inv(double y);

}  // namespace fiber
