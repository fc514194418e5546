#pragma once

#include <Eigen/Dense>
#include <complex>

// Core sampled-waveform type.  A DualPolBlock is one circular block of the
// dual-polarization complex baseband envelope, in sqrt(W) amplitude units.

namespace fiber {

using cd = std::complex<double>;

struct DualPolBlock {
  Eigen::ArrayXcd x;
  Eigen::ArrayXcd y;
  double sample_rate_hz = 0.0;

  DualPolBlock() = default;
  DualPolBlock(Eigen::Index n, double rate)
      : x(Eigen::ArrayXcd::Zero(n)), y(Eigen::ArrayXcd::Zero(n)),
        sample_rate_hz(rate) {}

  Eigen::Index size() const { return x.size(); }
  double duration_s() const {
    return static_cast<double>(size()) / sample_rate_hz;
  }

  // Mean optical power, both polarizations summed [W].
  double mean_power_w() const {
    if (size() == 0) return 0.0;
    return (x.abs2().sum() + y.abs2().sum()) / static_cast<double>(size());
  }

  void validate() const;

  // Scales both polarizations so mean_power_w() equals the target exactly.
  void set_mean_power_w(double target_w);
};

}  // namespace fiber
