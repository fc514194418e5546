#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fiber/link.hpp"
#include "fiber/signal.hpp"

// Dispersion-managed digital backpropagation: a sparse ladder of linear
// dispersion-compensating steps interleaved with scaled Manakov phase
// rotations, planned from the link's accumulated-dispersion profile.

namespace fiber {

enum class DbpDomain { frequency, time };

// balanced: unit amplitude everywhere (per-span gains cancel losses, so the
// block stays at the launch-power reference).  span_loss: each linear step
// additionally inverts the link's net amplitude change over its interval.
enum class DbpGainMode { balanced, span_loss };

// Effective nonlinear length attributed to each step's tile:
//   smf_profile  power-weighted length of the transmission fiber only
//   all_fiber    every fiber, weighted by gamma ratio and input power
//   flat         (1 - exp(-alpha dz)) / alpha of the reference fiber
enum class DbpEffLength { smf_profile, all_fiber, flat };

struct DbpLinearStep {
  double dc_ps_nm = 0.0;  // accumulated dispersion removed by this step
  double amp_log = 0.0;   // log-amplitude applied (0 in balanced mode)
};

// Steps are stored in application (receiver-first) order: linear[0] undoes
// the tail of the link.  The ladder is linear[0], nl[0], linear[1], ...,
// nl[n-1], linear[n].
struct DbpPlan {
  std::vector<DbpLinearStep> linear;  // n_nonlinear()+1 entries
  std::vector<double> delta_eff_km;   // gamma-normalized effective lengths
  double gamma_per_w_km = 0.0;        // reference nonlinear coefficient
  double epsilon = 1.0;               // global nonlinear phase scale
  DbpDomain domain = DbpDomain::frequency;
  int fir_half_taps = 16;             // F; time domain filters use 2F+1 taps
  double band_fraction = 1.0;         // sampling-band fraction the taps are fit over
  int steps_num = 1, steps_den = 1;   // nonlinear steps per span
  DbpGainMode gain_mode = DbpGainMode::balanced;
  DbpEffLength eff_mode = DbpEffLength::smf_profile;

  int n_nonlinear() const { return static_cast<int>(delta_eff_km.size()); }
  double total_dc_ps_nm() const;
  void validate() const;
};

// Plans steps_num/steps_den nonlinear steps per span: rotation points at the
// centers of equal tiles of the link, linear steps covering the intervals
// between them (half tiles at both ends), each removing the accumulated
// dispersion of its interval.  fir_half_taps 0 selects the step-density
// table via default_fir_half_taps.  The reference alpha and gamma are taken
// from the first fiber of the first span.
DbpPlan plan_steps(const LinkSpec& link, int steps_num, int steps_den,
                   DbpGainMode gain_mode = DbpGainMode::balanced,
                   DbpEffLength eff_mode = DbpEffLength::smf_profile,
                   int fir_half_taps = 0);

// Pinned half-tap counts for the supported step densities; throws for
// densities outside the table.
int default_fir_half_taps(int steps_num, int steps_den);

// Smallest tap count whose span covers the group-delay spread of dc_ps_nm
// over the given signal bandwidth when sampled at sample_rate_hz.
int min_fir_taps(double dc_ps_nm, double bandwidth_hz, double sample_rate_hz);

// 2F+1 symmetric taps (index F is lag zero) fit to the compensator response
// exp(-j beta2L/2 w^2) sampled on a grid_n-point grid.  band_fraction < 1
// fits by weighted least squares with unit weight inside the central
// band_fraction of the sampling band and a small weight outside, spending
// the tap budget where the signal lives; band_fraction 1 reduces to plain
// truncation of the sampled impulse response.
Eigen::ArrayXcd design_cdc_fir(double dc_ps_nm, double sample_rate_hz,
                               Eigen::Index grid_n, int half_taps,
                               double band_fraction = 1.0);

// Runs the ladder in place.  The block must be at the launch-power
// reference (watts) for the nonlinear phases to be correctly scaled.
void run_dbp(DualPolBlock& block, const DbpPlan& plan);

// Scans epsilon over {0, step, 2 step, ..., 1}, keeps the highest score,
// smallest epsilon on ties; leaves the winner in plan.epsilon and returns
// its score.
double optimize_epsilon(DbpPlan& plan,
                        const std::function<double(const DbpPlan&)>& score,
                        double step = 0.01);

std::string plan_to_text(const DbpPlan& plan);
DbpPlan plan_from_text(const std::string& text);

}  // namespace fiber
