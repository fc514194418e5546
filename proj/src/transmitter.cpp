#include "fiber/transmitter.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "fiber/fft.hpp"
#include "fiber/jones.hpp"
#include "fiber/pulse.hpp"
#include "fiber/rng.hpp"

namespace fiber {

SymbolFrame make_frame(Eigen::Index n_symbols, int qam_order, std::uint64_t seed) {
  const int bps = bits_per_symbol(qam_order);
  SymbolFrame f;
  f.bits_x = random_bits(static_cast<std::size_t>(n_symbols) * bps, seed);
  f.bits_y = random_bits(static_cast<std::size_t>(n_symbols) * bps, splitmix64(seed));
  f.sx = map_bits(f.bits_x, qam_order);
  f.sy = map_bits(f.bits_y, qam_order);
  return f;
}

DualPolBlock shape_waveform(const SymbolFrame& frame, const TxConfig& cfg) {
  const Eigen::Index n_sym = frame.sx.size();
  if (n_sym == 0 || frame.sy.size() != n_sym)
    throw std::invalid_argument("shape_waveform: empty or mismatched frame");
  const Eigen::Index n = n_sym * cfg.sps;
  if (!is_power_of_two(n))
    throw std::invalid_argument("shape_waveform: samples per block must be a power of two");

  const auto taps = rrc_taps(cfg.rolloff, cfg.sps, cfg.rrc_span_symbols);
  DualPolBlock block(n, cfg.baud_hz * cfg.sps);
  // impulse train at the symbol instants, then the circular shaping filter
  for (Eigen::Index s = 0; s < n_sym; ++s) {
    block.x[s * cfg.sps] = frame.sx[s];
    block.y[s * cfg.sps] = frame.sy[s];
  }
  block.x = circular_filter(block.x, taps);
  block.y = circular_filter(block.y, taps);
  block.set_mean_power_w(1.0);
  return block;
}

ChannelState random_channel_state(const TxConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> shift(0, cfg.sps - 1);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  ChannelState st;
  st.timing_shift_samples = shift(rng);
  st.carrier_phase = angle(rng);
  st.pol_theta = angle(rng);
  st.pol_phi = angle(rng);
  return st;
}

void apply_channel_state(DualPolBlock& block, const ChannelState& state) {
  const Eigen::Index n = block.size();
  if (state.timing_shift_samples != 0) {
    const Eigen::Index k = ((state.timing_shift_samples % n) + n) % n;
    Eigen::ArrayXcd tmp(n);
    tmp.tail(n - k) = block.x.head(n - k);
    tmp.head(k) = block.x.tail(k);
    block.x = tmp;
    tmp.tail(n - k) = block.y.head(n - k);
    tmp.head(k) = block.y.tail(k);
    block.y = tmp;
  }
  const cd phase = std::exp(cd{0.0, state.carrier_phase});
  const Eigen::Matrix2cd r = rotation_jones(state.pol_theta, state.pol_phi);
  for (Eigen::Index i = 0; i < n; ++i) {
    const cd qx = block.x[i] * phase, qy = block.y[i] * phase;
    block.x[i] = r(0, 0) * qx + r(0, 1) * qy;
    block.y[i] = r(1, 0) * qx + r(1, 1) * qy;
  }
}

double channel_offset_hz(int index, int count, double spacing_hz) {
  return (index - 0.5 * (count - 1)) * spacing_hz;
}

void shift_channel(DualPolBlock& block, double offset_hz) {
  const Eigen::Index n = block.size();
  const double bin_hz = block.sample_rate_hz / static_cast<double>(n);
  const Eigen::Index bins = static_cast<Eigen::Index>(std::llround(offset_hz / bin_hz));
  if (bins == 0) return;
  if (std::abs(bins * bin_hz - offset_hz) > 0.5 * bin_hz)
    throw std::invalid_argument("shift_channel: offset outside representable grid");
  // rotate the spectrum: positive offset moves content to higher bins
  const Eigen::Index k = ((bins % n) + n) % n;
  auto rotate = [&](Eigen::ArrayXcd& u) {
    Eigen::ArrayXcd spec = dft(u);
    Eigen::ArrayXcd out(n);
    out.tail(n - k) = spec.head(n - k);
    out.head(k) = spec.tail(k);
    u = idft(out);
  };
  rotate(block.x);
  rotate(block.y);
}

DualPolBlock wdm_mux(const std::vector<DualPolBlock>& channels, double spacing_hz) {
  if (channels.empty()) throw std::invalid_argument("wdm_mux: no channels");
  const Eigen::Index n = channels.front().size();
  const double rate = channels.front().sample_rate_hz;
  const int count = static_cast<int>(channels.size());
  // outermost carrier plus half the signal bandwidth must stay below Nyquist
  const double outer = std::abs(channel_offset_hz(0, count, spacing_hz));
  if (outer + 0.5 * spacing_hz > 0.5 * rate)
    throw std::invalid_argument("wdm_mux: aggregate bandwidth exceeds Nyquist");

  DualPolBlock sum(n, rate);
  for (int c = 0; c < count; ++c) {
    const auto& ch = channels[static_cast<std::size_t>(c)];
    if (ch.size() != n || ch.sample_rate_hz != rate)
      throw std::invalid_argument("wdm_mux: channel grids differ");
    DualPolBlock shifted = ch;
    shift_channel(shifted, channel_offset_hz(c, count, spacing_hz));
    sum.x += shifted.x;
    sum.y += shifted.y;
  }
  return sum;
}

}  // namespace fiber
