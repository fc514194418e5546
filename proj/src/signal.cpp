#include "fiber/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace fiber {

void DualPolBlock::validate() const {
  if (x.size() != y.size())
    throw std::invalid_argument("DualPolBlock: polarization lengths differ");
  if (sample_rate_hz <= 0.0)
    throw std::invalid_argument("DualPolBlock: sample rate must be positive");
}

void DualPolBlock::set_mean_power_w(double target_w) {
  if (target_w < 0.0)
    throw std::invalid_argument("set_mean_power_w: negative target power");
  const double p = mean_power_w();
  if (p <= 0.0)
    throw std::invalid_argument("set_mean_power_w: block has zero power");
  const double s = std::sqrt(target_w / p);
  x *= s;
  y *= s;
}

}  // namespace fiber
