#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

// Square QAM with Gray mapping per rail, normalized to unit average symbol
// energy.  Orders supported: 4, 16, 64.

namespace fiber {

int bits_per_symbol(int order);

// Gray-coded amplitude levels for one rail, e.g. 16-QAM: 00->-3, 01->-1,
// 11->+1, 10->+3 (before normalization).
Eigen::ArrayXcd map_bits(const std::vector<std::uint8_t>& bits, int order);

// Hard decision back to bits; symbols are expected at unit average energy.
std::vector<std::uint8_t> demap_symbols(const Eigen::ArrayXcd& symbols, int order);

// All constellation points at unit average energy (used by decision-directed
// equalizer stages and the phase search).
Eigen::ArrayXcd constellation(int order);

// Distinct constellation radii^2 (ring powers) for radius-directed updates.
Eigen::ArrayXd ring_powers(int order);

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed);

}  // namespace fiber
