#pragma once

// Real-multiplication budgets per transmitted symbol for the equalizer
// ladder.  Linear stages run on overlapped blocks, so their cost is
// amortized over the fresh samples each block contributes; the Manakov
// rotations add a fixed per-sample term.

namespace fiber {

struct ComplexityInput {
  int n_steps = 28;        // nonlinear stages in the ladder; 0 = pure linear
  int block_n = 1024;      // processing block length, power of two
  int cdc_taps = 90;       // full-compensation filter length
  int sps = 2;             // samples per symbol on the equalizer grid
  int fir_half_taps = 16;  // time-domain kernels span 2 * half + 1 taps

  void validate() const;
};

// Frequency-domain stages: one forward/inverse transform pair per stage at
// 4 N (log2 N + 1) real multiplications, over N - cdc_taps + 1 fresh
// samples per block, plus 9/2 per rotation sample.
double rmps_frequency(const ComplexityInput& in);

// Time-domain stages: direct convolution at 4 (2 half + 1) real
// multiplications per sample, amortized the same way.
double rmps_time(const ComplexityInput& in);

// Smallest power-of-two block where at least half of every block is fresh.
int choose_block_n(int cdc_taps);

}  // namespace fiber
