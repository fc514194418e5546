#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fiber/dbp.hpp"
#include "fiber/link.hpp"
#include "fiber/rxdsp.hpp"

// Sweep orchestration: builds the link for one of the canned setups, runs
// launch-power sweeps through the forward channel and the receiver for each
// configured equalizer, trains the learned ladder where requested, and
// persists rows plus plan/model artifacts.  Everything derives from the
// master seed; reruns of one config are bit-identical.

namespace fiber {

enum class EqualizerKind { le, dbp_fd, dbp_td, ldbp, genie };

struct EqualizerSpec {
  EqualizerKind kind = EqualizerKind::le;
  int steps_num = 1;  // ladder steps per span for the dbp/ldbp kinds
  int steps_den = 1;

  std::string label() const;  // "le", "dbp-fd", ... plus the fraction
  void validate() const;
};

struct ExperimentConfig {
  std::string setup = "A";    // A..D or "custom"
  std::string preset = "desk";
  int n_spans = 7;
  int n_channels = 1;         // odd; the center channel is measured
  int qam_order = 16;
  double baud_hz = 32e9;
  double rolloff = 0.06;
  double spacing_hz = 37.5e9;
  int tx_sps = 8;             // forward oversampling
  Eigen::Index n_symbols = 8192;
  double linewidth_hz = 0.0;  // combined TX+LO, applied at the receiver
  SpanDesign span;
  std::vector<double> power_dbm;
  std::vector<double> ldbp_power_dbm;  // empty: train at every grid power
  std::vector<EqualizerSpec> equalizers;
  int fir_half_taps = 0;      // 0: per-fraction table default
  double eps_step = 0.05;     // scaling-factor search resolution
  int ldbp_epochs = 30;
  Eigen::Index ldbp_window = 1024;
  Eigen::Index ldbp_stride = 32;
  Eigen::Index ldbp_trim = 86;
  std::uint64_t seed = 1;

  void validate() const;
};

// Canned configurations: setup in {'A','B','C','D'}, preset desk or full.
ExperimentConfig make_setup(char setup, const std::string& preset);

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);

struct SweepRow {
  std::string setup;
  std::string equalizer;
  int steps_num = 0, steps_den = 1;  // 0/1 for the non-ladder kinds
  double power_dbm = 0.0;
  double snr_eff_db = 0.0;
  double ber = 0.0;
  double q_db = 0.0;
  double rmps = 0.0;
  std::uint64_t seed = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  bool ok = true;
  std::vector<std::string> errors;
};

// Runs the sweep and writes results.csv, manifest.json, plans/*.txt and
// models/*.ckpt under out_dir (created if needed).  Cell failures are
// recorded and the remaining grid still runs.
SweepResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

std::string rows_to_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> rows_from_csv(const std::string& text);

struct SummaryRow {
  std::string equalizer;
  int steps_num = 0, steps_den = 1;
  double peak_snr_eff_db = 0.0;
  double peak_q_db = 0.0;          // q at the SNR-optimal power
  double optimal_power_dbm = 0.0;
  double gain_over_le_db = 0.0;    // peak SNR_eff difference
  double rmps = 0.0;
};

// Per-equalizer peaks over the swept powers; rejects an empty sweep.
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);
std::string summary_to_text(const std::vector<SummaryRow>& rows);

}  // namespace fiber
