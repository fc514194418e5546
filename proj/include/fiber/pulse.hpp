#pragma once

#include <Eigen/Dense>

// Root-raised-cosine pulse at a given oversampling, truncated to a finite
// symbol span, plus a circular-convolution helper.  All shaping and matched
// filtering in the library runs block-circular with the kernel centered at
// lag zero, so the chain stays delay-free end to end.

namespace fiber {

// Taps of length span_symbols*sps + 1, centered, normalized to unit discrete
// energy (sum of squares = 1).
Eigen::ArrayXd rrc_taps(double rolloff, int sps, int span_symbols);

// Circular convolution of a block with a real, centered kernel (odd length),
// evaluated exactly in the frequency domain.
Eigen::ArrayXcd circular_filter(const Eigen::ArrayXcd& block,
                                const Eigen::ArrayXd& taps);

}  // namespace fiber
