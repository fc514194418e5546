#include "fiber/fft.hpp"

#include <stdexcept>
#include <unsupported/Eigen/FFT>

namespace fiber {

bool is_power_of_two(Eigen::Index n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

Eigen::FFT<double>& engine() {
  // Eigen's FFT caches plans per length, so one long-lived instance avoids
  // re-planning inside the per-segment SSFM loop.
  static thread_local Eigen::FFT<double> fft;
  return fft;
}

void check_length(Eigen::Index n) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("dft: block length must be a power of two, got " +
                                std::to_string(n));
}

}  // namespace

Eigen::ArrayXcd dft(const Eigen::ArrayXcd& u) {
  check_length(u.size());
  Eigen::VectorXcd out;
  engine().fwd(out, u.matrix().eval());
  return out.array();
}

Eigen::ArrayXcd idft(const Eigen::ArrayXcd& spectrum) {
  check_length(spectrum.size());
  Eigen::VectorXcd out;
  engine().inv(out, spectrum.matrix().eval());
  return out.array();
}

Eigen::ArrayXd angular_freq_grid(Eigen::Index n, double sample_rate_hz) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("angular_freq_grid: length must be a power of two");
  if (sample_rate_hz <= 0.0)
    throw std::invalid_argument("angular_freq_grid: sample rate must be positive");
  Eigen::ArrayXd omega(n);
  const double df = sample_rate_hz / static_cast<double>(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double f = (k < n / 2) ? k * df : (k - n) * df;
    omega[k] = 2.0 * M_PI * f;
  }
  return omega;
}

}  // namespace fiber
