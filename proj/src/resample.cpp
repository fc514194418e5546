#include "fiber/resample.hpp"

#include <stdexcept>

#include "fiber/fft.hpp"

namespace fiber {

Eigen::ArrayXcd resample_array(const Eigen::ArrayXcd& u, int p, int q) {
  if (p < 1 || q < 1) throw std::invalid_argument("resample: factors must be positive");
  const Eigen::Index n = u.size();
  if ((n * p) % q != 0)
    throw std::invalid_argument("resample: length not divisible by rate ratio");
  const Eigen::Index m = n * p / q;
  if (!is_power_of_two(m))
    throw std::invalid_argument("resample: output length must be a power of two");
  if (m == n) return u;

  Eigen::ArrayXcd spec = dft(u);
  Eigen::ArrayXcd out = Eigen::ArrayXcd::Zero(m);
  const Eigen::Index half = std::min(n, m) / 2;
  out.head(half) = spec.head(half);
  out.tail(half - 1) = spec.tail(half - 1);
  if (m > n) {
    // source Nyquist bin holds both band edges; split it evenly
    out[n / 2] = 0.5 * spec[n / 2];
    out[m - n / 2] = 0.5 * spec[n / 2];
  }
  out *= static_cast<double>(m) / static_cast<double>(n);
  return idft(out);
}

DualPolBlock resample(const DualPolBlock& block, int p, int q) {
  block.validate();
  DualPolBlock out;
  out.x = resample_array(block.x, p, q);
  out.y = resample_array(block.y, p, q);
  out.sample_rate_hz = block.sample_rate_hz * p / q;
  return out;
}

}  // namespace fiber
