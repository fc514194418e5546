#include "fiber/pulse.hpp"

#include <cmath>
#include <stdexcept>

#include "fiber/fft.hpp"
#include "fiber/signal.hpp"

namespace fiber {

namespace {

// RRC impulse response at t symbol periods (T = 1), up to a constant factor.
double rrc_value(double t, double rolloff) {
  const double r = rolloff;
  if (std::abs(t) < 1e-12) return 1.0 - r + 4.0 * r / M_PI;
  if (r > 0.0 && std::abs(std::abs(t) - 1.0 / (4.0 * r)) < 1e-9) {
    return r / std::sqrt(2.0) *
           ((1.0 + 2.0 / M_PI) * std::sin(M_PI / (4.0 * r)) +
            (1.0 - 2.0 / M_PI) * std::cos(M_PI / (4.0 * r)));
  }
  const double num = std::sin(M_PI * t * (1.0 - r)) +
                     4.0 * r * t * std::cos(M_PI * t * (1.0 + r));
  const double den = M_PI * t * (1.0 - std::pow(4.0 * r * t, 2));
  return num / den;
}

}  // namespace

Eigen::ArrayXd rrc_taps(double rolloff, int sps, int span_symbols) {
  if (rolloff < 0.0 || rolloff >= 1.0)
    throw std::invalid_argument("rrc_taps: rolloff must be in [0, 1)");
  if (sps < 1 || span_symbols < 2 || span_symbols % 2 != 0)
    throw std::invalid_argument("rrc_taps: need sps >= 1 and even span >= 2");
  const int half = span_symbols * sps / 2;
  Eigen::ArrayXd taps(2 * half + 1);
  for (int k = -half; k <= half; ++k)
    taps[k + half] = rrc_value(static_cast<double>(k) / sps, rolloff);
  taps /= std::sqrt(taps.square().sum());
  return taps;
}

Eigen::ArrayXcd circular_filter(const Eigen::ArrayXcd& block,
                                const Eigen::ArrayXd& taps) {
  const Eigen::Index n = block.size();
  if (taps.size() % 2 == 0)
    throw std::invalid_argument("circular_filter: kernel length must be odd");
  if (taps.size() > n)
    throw std::invalid_argument("circular_filter: kernel longer than block");
  const Eigen::Index half = taps.size() / 2;
  // kernel centered at lag 0, negative lags wrapped to the block end
  Eigen::ArrayXcd kernel = Eigen::ArrayXcd::Zero(n);
  for (Eigen::Index k = -half; k <= half; ++k) {
    const Eigen::Index idx = (k + n) % n;
    kernel[idx] = taps[k + half];
  }
  return idft(dft(block) * dft(kernel));
}

}  // namespace fiber
