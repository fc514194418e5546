#include "fiber/complexity.hpp"

#include <cmath>
#include <stdexcept>

namespace fiber {

void ComplexityInput::validate() const {
  if (n_steps < 0 || block_n < 2 || cdc_taps < 1 || sps < 1 || fir_half_taps < 1)
    throw std::invalid_argument("complexity: all sizes must be positive");
  if ((block_n & (block_n - 1)) != 0)
    throw std::invalid_argument("complexity: block length must be a power of two");
  if (block_n - cdc_taps + 1 < 1)
    throw std::invalid_argument("complexity: block shorter than the filter");
}

double rmps_frequency(const ComplexityInput& in) {
  in.validate();
  const double n = in.block_n;
  const double fresh = n - in.cdc_taps + 1;
  const double stage = 4.0 * n * (std::log2(n) + 1.0);
  return (in.n_steps + 1) * stage * in.sps / fresh + 4.5 * in.n_steps * in.sps;
}

double rmps_time(const ComplexityInput& in) {
  in.validate();
  const double n = in.block_n;
  const double fresh = n - in.cdc_taps + 1;
  const double stage = 4.0 * (2.0 * in.fir_half_taps + 1.0) * n;
  return (in.n_steps + 1) * stage * in.sps / fresh + 4.5 * in.n_steps * in.sps;
}

int choose_block_n(int cdc_taps) {
  if (cdc_taps < 1)
    throw std::invalid_argument("choose_block_n: filter length must be positive");
  for (int n = 2; n > 0 && n <= (1 << 30); n *= 2)
    if (n - cdc_taps + 1 >= n / 2) return n;
  throw std::invalid_argument("choose_block_n: filter too long");
}

}  // namespace fiber
