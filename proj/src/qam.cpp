#include "fiber/qam.hpp"

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "fiber/rng.hpp"
#include "fiber/signal.hpp"

namespace fiber {

namespace {

int rail_bits(int order) {
  switch (order) {
    case 4: return 1;
    case 16: return 2;
    case 64: return 3;
    default:
      throw std::invalid_argument("qam: order must be 4, 16 or 64");
  }
}

// Gray code of rank i in an m-bit rail, as an amplitude index 0..2^m-1.
unsigned gray(unsigned i) { return i ^ (i >> 1); }

// amplitude level for Gray word g: find rank whose gray code equals g
std::vector<int> gray_to_level_table(int m) {
  const int levels = 1 << m;
  std::vector<int> table(levels, 0);
  for (int rank = 0; rank < levels; ++rank)
    table[gray(rank)] = 2 * rank - (levels - 1);  // -(L-1), ..., +(L-1) step 2
  return table;
}

double norm_factor(int order) {
  // mean of level^2 over one rail, two rails per symbol
  const int m = rail_bits(order);
  const int levels = 1 << m;
  double acc = 0.0;
  for (int rank = 0; rank < levels; ++rank) {
    const double a = 2 * rank - (levels - 1);
    acc += a * a;
  }
  return std::sqrt(2.0 * acc / levels);
}

}  // namespace

int bits_per_symbol(int order) { return 2 * rail_bits(order); }

Eigen::ArrayXcd map_bits(const std::vector<std::uint8_t>& bits, int order) {
  const int m = rail_bits(order);
  const int bps = 2 * m;
  if (bits.size() % bps != 0)
    throw std::invalid_argument("map_bits: bit count not a multiple of bits/symbol");
  const auto table = gray_to_level_table(m);
  const double scale = 1.0 / norm_factor(order);
  const std::size_t n = bits.size() / bps;
  Eigen::ArrayXcd out(n);
  for (std::size_t s = 0; s < n; ++s) {
    unsigned wi = 0, wq = 0;
    for (int b = 0; b < m; ++b) {
      wi = (wi << 1) | (bits[s * bps + b] & 1);
      wq = (wq << 1) | (bits[s * bps + m + b] & 1);
    }
    out[s] = cd{table[wi] * scale, table[wq] * scale};
  }
  return out;
}

namespace {

// nearest-level decision on one rail, returning the Gray word
unsigned decide_rail(double v, int m, double scale) {
  const int levels = 1 << m;
  // levels are -(L-1)..(L-1) step 2, scaled; invert to a rank
  double rank_f = (v / scale + (levels - 1)) / 2.0;
  int rank = static_cast<int>(std::lround(rank_f));
  rank = std::max(0, std::min(levels - 1, rank));
  return gray(static_cast<unsigned>(rank));
}

}  // namespace

std::vector<std::uint8_t> demap_symbols(const Eigen::ArrayXcd& symbols, int order) {
  const int m = rail_bits(order);
  const double scale = 1.0 / norm_factor(order);
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(symbols.size()) * 2 * m);
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    const unsigned wi = decide_rail(symbols[s].real(), m, scale);
    const unsigned wq = decide_rail(symbols[s].imag(), m, scale);
    for (int b = m - 1; b >= 0; --b) bits.push_back((wi >> b) & 1);
    for (int b = m - 1; b >= 0; --b) bits.push_back((wq >> b) & 1);
  }
  return bits;
}

Eigen::ArrayXcd constellation(int order) {
  const int m = rail_bits(order);
  const int levels = 1 << m;
  const double scale = 1.0 / norm_factor(order);
  Eigen::ArrayXcd pts(levels * levels);
  Eigen::Index k = 0;
  for (int i = 0; i < levels; ++i)
    for (int q = 0; q < levels; ++q)
      pts[k++] = cd{(2 * i - (levels - 1)) * scale, (2 * q - (levels - 1)) * scale};
  return pts;
}

Eigen::ArrayXd ring_powers(int order) {
  auto pts = constellation(order);
  std::set<long long> seen;
  std::vector<double> radii;
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    const double p = std::norm(pts[i]);
    const long long key = std::llround(p * 1e12);
    if (seen.insert(key).second) radii.push_back(p);
  }
  Eigen::ArrayXd out(static_cast<Eigen::Index>(radii.size()));
  for (std::size_t i = 0; i < radii.size(); ++i) out[i] = radii[i];
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint8_t> random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = coin(rng) ? 1 : 0;
  return bits;
}

}  // namespace fiber
