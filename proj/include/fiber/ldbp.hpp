#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fiber/dbp.hpp"
#include "fiber/signal.hpp"

// Learned backpropagation: the ladder's linear steps become trainable
// complex FIR layers (taps shared by both polarizations), the rotations
// become fixed Manakov phase activations, and the filters are fitted by
// Adam on mean squared error against the clean transmitted waveform.
//
// The model operates on waveforms normalized to unit mean power; the launch
// power it was built for is kept in power_ref_w, and the activation
// coefficients are pre-scaled by it so phases match the physical watts-level
// rotation.

namespace fiber {

struct LdbpModel {
  std::vector<Eigen::ArrayXcd> taps;  // per layer, odd length, center = lag 0
  std::vector<double> phase_coeff;    // rad per unit normalized power
  Eigen::Index trim_per_side = 86;    // samples dropped from each window edge
  double power_ref_w = 1.0;

  Eigen::Index n_layers() const { return static_cast<Eigen::Index>(taps.size()); }
  Eigen::Index tap_count() const;     // common layer length
  Eigen::Index param_count() const { return 2 * tap_count() * n_layers(); }
  void validate() const;
};

// Initializes layer i from plan.linear[i] via design_cdc_fir on a
// design_grid-point grid and activation k from plan.delta_eff_km[k].
LdbpModel ldbp_from_plan(const DbpPlan& plan, double sample_rate_hz,
                         Eigen::Index design_grid, Eigen::Index trim_per_side,
                         double power_ref_w);

// Training windows slide over one long received block and its clean
// transmitted counterpart (same grid, same rate); both are stored normalized
// by the target's mean power.
struct LdbpDataset {
  Eigen::ArrayXcd rx_x, rx_y;
  Eigen::ArrayXcd tx_x, tx_y;
  double power_ref_w = 1.0;
  Eigen::Index window = 1024;
  Eigen::Index stride = 16;

  Eigen::Index n_windows() const { return (rx_x.size() - window) / stride + 1; }
  void validate() const;
};

LdbpDataset make_dataset(const DualPolBlock& rx, const DualPolBlock& target,
                         Eigen::Index window, Eigen::Index stride);

// One normalized window pair in, trimmed estimates out.
void ldbp_forward(const LdbpModel& model, const Eigen::ArrayXcd& x,
                  const Eigen::ArrayXcd& y, Eigen::ArrayXcd& out_x,
                  Eigen::ArrayXcd& out_y);

// Covers a circular received block with overlapping windows (stride
// window_n - 2 trim) and stitches the trimmed outputs back together.
DualPolBlock ldbp_equalize(const DualPolBlock& rx, const LdbpModel& model,
                           Eigen::Index window_n = 1024);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999;
  double adam_eps = 1e-8;
  int max_epochs = 75;
  int patience = 5;
  int batch = 32;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct TrainReport {
  std::vector<double> train_loss, val_loss;  // one entry per epoch run
  int best_epoch = 0;                        // 1-based
  double best_val = 0.0;
};

// Fits the FIR taps; activation coefficients stay fixed.  The model is left
// at the best-validation-epoch parameters.
TrainReport train_ldbp(LdbpModel& model, const LdbpDataset& data,
                       const TrainConfig& cfg);

// Largest deviation between the analytic gradient and central differences
// over all parameters on one window, relative to the largest gradient
// magnitude.
double gradient_check(const LdbpModel& model, const Eigen::ArrayXcd& x,
                      const Eigen::ArrayXcd& y, const Eigen::ArrayXcd& tx,
                      const Eigen::ArrayXcd& ty, double h = 1e-6);

// Binary checkpoint, bit-exact round trip.
void save_checkpoint(const LdbpModel& model, const std::string& path);
LdbpModel load_checkpoint(const std::string& path);

}  // namespace fiber
