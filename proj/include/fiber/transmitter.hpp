#pragma once

#include <cstdint>
#include <vector>

#include "fiber/qam.hpp"
#include "fiber/signal.hpp"

// Dual-polarization QAM transmitter: bit generation, pulse shaping at the
// simulation oversampling, and WDM multiplexing of independently modulated
// channels onto one composite block.

namespace fiber {

struct TxConfig {
  int qam_order = 16;
  double baud_hz = 32e9;
  double rolloff = 0.06;
  int sps = 16;                // simulation samples per symbol
  int rrc_span_symbols = 64;   // shaping filter truncation
};

struct SymbolFrame {
  Eigen::ArrayXcd sx, sy;                 // unit-energy symbols
  std::vector<std::uint8_t> bits_x, bits_y;
};

SymbolFrame make_frame(Eigen::Index n_symbols, int qam_order, std::uint64_t seed);

// Circularly shaped waveform, one channel at baseband; length n_symbols*sps.
// Mean power is normalized to 1 W (both polarizations) so launch scaling is a
// plain multiply.
DualPolBlock shape_waveform(const SymbolFrame& frame, const TxConfig& cfg);

// State of a co-propagating channel relative to the channel under test.
struct ChannelState {
  int timing_shift_samples = 0;   // circular, within one symbol
  double carrier_phase = 0.0;
  double pol_theta = 0.0, pol_phi = 0.0;
};

ChannelState random_channel_state(const TxConfig& cfg, std::uint64_t seed);
void apply_channel_state(DualPolBlock& block, const ChannelState& state);

// Sum of channels placed on a grid with the given spacing, centered on the
// channel count (index c - (count-1)/2); offsets are snapped to DFT bins of
// the block so the composite stays circular.  All inputs must share length
// and sample rate, and the outer channels must fit below Nyquist.
DualPolBlock wdm_mux(const std::vector<DualPolBlock>& channels, double spacing_hz);

// Frequency shift by the channel offset used in mux/demux, bin-exact.
void shift_channel(DualPolBlock& block, double offset_hz);

double channel_offset_hz(int index, int count, double spacing_hz);

}  // namespace fiber
