#include "fiber/link.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fiber/units.hpp"

namespace fiber {

int FiberSegmentSpec::segment_count() const {
  const double n = length_km / step_km;
  const double rounded = std::round(n);
  if (std::abs(n - rounded) > 1e-9 * std::max(1.0, n))
    throw std::invalid_argument(
        "FiberSegmentSpec: step_km must divide length_km into whole segments");
  return static_cast<int>(rounded);
}

void FiberSegmentSpec::validate() const {
  if (length_km <= 0.0)
    throw std::invalid_argument("FiberSegmentSpec: length must be positive");
  if (step_km <= 0.0)
    throw std::invalid_argument("FiberSegmentSpec: step must be positive");
  if (alpha_db_per_km < 0.0)
    throw std::invalid_argument("FiberSegmentSpec: negative attenuation");
  if (pmd_ps_sqrt_km < 0.0)
    throw std::invalid_argument("FiberSegmentSpec: negative PMD coefficient");
  segment_count();  // checks divisibility
}

double SpanSpec::length_km() const {
  double total = 0.0;
  for (const auto& f : fibers) total += f.length_km;
  return total;
}

void SpanSpec::validate() const {
  if (fibers.empty())
    throw std::invalid_argument("SpanSpec: span has no fiber");
  if (amps.size() != fibers.size())
    throw std::invalid_argument("SpanSpec: need one amplifier per fiber piece");
  double loss_db = 0.0, gain_db = 0.0;
  for (const auto& f : fibers) {
    f.validate();
    loss_db += f.loss_db();
  }
  for (const auto& a : amps) gain_db += a.gain_db;
  if (std::abs(loss_db - gain_db) > 1e-6)
    throw std::invalid_argument("SpanSpec: amplifier gain does not balance fiber loss");
}

double LinkSpec::length_km() const {
  double total = 0.0;
  for (const auto& s : spans) total += s.length_km();
  return total;
}

int LinkSpec::total_segments() const {
  int n = 0;
  for (const auto& s : spans)
    for (const auto& f : s.fibers) n += f.segment_count();
  return n;
}

void LinkSpec::validate() const {
  if (spans.empty()) throw std::invalid_argument("LinkSpec: no spans");
  for (const auto& s : spans) s.validate();
}

double DispersionMap::at(double z) const {
  if (z < -1e-9 || z > total_km() + 1e-9)
    throw std::invalid_argument("DispersionMap: query outside [0, L]");
  z = std::clamp(z, 0.0, total_km());
  // upper_bound on breakpoints, then linear interpolation on the segment
  auto it = std::upper_bound(z_km.begin(), z_km.end(), z);
  if (it == z_km.begin()) return dc_ps_nm.front();
  std::size_t hi = static_cast<std::size_t>(it - z_km.begin());
  if (hi >= z_km.size()) hi = z_km.size() - 1;
  const std::size_t lo = hi - 1;
  const double dz = z_km[hi] - z_km[lo];
  if (dz <= 0.0) return dc_ps_nm[hi];
  const double t = (z - z_km[lo]) / dz;
  return dc_ps_nm[lo] + t * (dc_ps_nm[hi] - dc_ps_nm[lo]);
}

DispersionMap build_dispersion_map(const LinkSpec& link) {
  link.validate();
  DispersionMap map;
  map.z_km.push_back(0.0);
  map.dc_ps_nm.push_back(0.0);
  double z = 0.0, dc = 0.0;
  for (const auto& span : link.spans) {
    for (const auto& f : span.fibers) {
      z += f.length_km;
      dc += f.d_ps_nm_km * f.length_km;
      map.z_km.push_back(z);
      map.dc_ps_nm.push_back(dc);
    }
  }
  return map;
}

LinkSpec make_link(const SpanDesign& d, int n_spans) {
  if (n_spans <= 0) throw std::invalid_argument("make_link: need at least one span");
  FiberSegmentSpec smf{d.smf_km, d.smf_alpha_db_km, d.smf_d_ps_nm_km,
                       d.smf_gamma_per_w_km, d.pmd_ps_sqrt_km, d.step_km};
  FiberSegmentSpec dcf{d.dcf_km, d.dcf_alpha_db_km, d.dcf_d_ps_nm_km(),
                       d.dcf_gamma_per_w_km, d.pmd_ps_sqrt_km, d.step_km};
  // Pre-amp lifts the SMF output to the DCF input level; post-amp restores
  // launch power, so each span nets to 0 dB.
  AmplifierSpec pre{smf.loss_db() + d.dcf_input_offset_db, d.noise_figure_db,
                    kCarrierFrequency};
  AmplifierSpec post{dcf.loss_db() - d.dcf_input_offset_db, d.noise_figure_db,
                     kCarrierFrequency};
  SpanSpec span{{smf, dcf}, {pre, post}};
  span.validate();
  LinkSpec link;
  link.spans.assign(static_cast<std::size_t>(n_spans), span);
  return link;
}

}  // namespace fiber
