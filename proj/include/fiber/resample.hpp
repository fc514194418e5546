#pragma once

#include "fiber/signal.hpp"

// Rational-rate conversion of circular blocks by spectral truncation or
// zero-padding.  Exact for signals already band-limited below the narrower
// Nyquist, which holds for every RRC-shaped waveform in the chain, and
// introduces no delay.

namespace fiber {

// New length n*p/q must be an integer power of two.
DualPolBlock resample(const DualPolBlock& block, int p, int q);

Eigen::ArrayXcd resample_array(const Eigen::ArrayXcd& u, int p, int q);

}  // namespace fiber
