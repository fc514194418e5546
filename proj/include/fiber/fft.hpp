#pragma once

#include <Eigen/Dense>

// Block transforms for the split-step solver and the frequency-domain
// equalizers.  All propagation code treats a block as one period of a
// circular signal, so plain DFTs with no windowing are the right primitive.
//
// Convention: forward transform is unscaled, inverse applies 1/N, matching
// sum |u|^2 = (1/N) sum |U|^2.  Block lengths must be powers of two; that is
// part of the interface contract and is checked here once instead of in every
// caller.

namespace fiber {

bool is_power_of_two(Eigen::Index n);

Eigen::ArrayXcd dft(const Eigen::ArrayXcd& u);
Eigen::ArrayXcd idft(const Eigen::ArrayXcd& spectrum);

// Angular frequencies omega_k [rad/s] in DFT bin order (0, positive, negative)
// for a block of n samples at the given rate.
Eigen::ArrayXd angular_freq_grid(Eigen::Index n, double sample_rate_hz);

}  // namespace fiber
