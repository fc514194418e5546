#pragma once

#include <Eigen/Dense>
#include <complex>

// 2x2 Jones-space helpers shared by the channel model and the transmitter's
// random polarization launch.

namespace fiber {

// Unitary rotation parameterized by a mixing angle theta and a differential
// phase phi:
//   [  e^{j phi/2} cos(theta)   e^{-j phi/2} sin(theta) ]
//   [ -e^{j phi/2} sin(theta)   e^{-j phi/2} cos(theta) ]
inline Eigen::Matrix2cd rotation_jones(double theta, double phi) {
  const std::complex<double> ep = std::exp(std::complex<double>(0.0, phi / 2.0));
  const std::complex<double> em = std::exp(std::complex<double>(0.0, -phi / 2.0));
  Eigen::Matrix2cd r;
  r << ep * std::cos(theta), em * std::sin(theta),
      -ep * std::sin(theta), em * std::cos(theta);
  return r;
}

}  // namespace fiber
