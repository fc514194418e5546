#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "fiber/link.hpp"
#include "fiber/signal.hpp"

// Forward channel: symmetric split-step integration of the coupled
// dual-polarization propagation equation, one segment per correlation length.
// Each segment applies a linear half step, the segment's polarization mixing,
// the full nonlinear step, and the closing linear half step.  Amplifiers are
// lumped gain plus optional white circular-Gaussian ASE.

namespace fiber {

// One (theta, phi, tau) triple per SSFM segment over the whole link, in
// propagation order.  tau is the segment differential group delay in seconds.
struct PmdRealization {
  std::vector<double> theta;
  std::vector<double> phi;
  std::vector<double> tau_s;

  std::size_t size() const { return tau_s.size(); }
};

PmdRealization draw_pmd(const LinkSpec& link, std::uint64_t seed);

// Individual split-step ingredients, usable on a bare fiber spec.  The
// composed propagate_link below is the production path; these exist for
// composition and for checking each physical effect in isolation.

// Loss and chromatic dispersion over dz: spectrum multiplied by
// exp(-alpha/2 dz + j beta2/2 w^2 dz).
void linear_step(DualPolBlock& block, const FiberSegmentSpec& fiber, double dz_km);

// Kerr rotation over dz with the instantaneous field:
// qx *= exp(j gamma dz (|qx|^2 + 2/3 |qy|^2)) and symmetrically for y.
void nonlinear_step(DualPolBlock& block, const FiberSegmentSpec& fiber, double dz_km);

// One segment's polarization mixing J = R(theta, phi) D(w, tau) applied in
// the frequency domain.
void pmd_step(DualPolBlock& block, double theta, double phi, double tau_s);

// Lumped gain; when `noise` is non-null adds per-polarization ASE of total
// power 0.5*(G-1)*B*h*nu0*NF with B = noise_bandwidth_hz.  Callers that want
// the physically white floor pass the block sample rate as B.
void amplify(DualPolBlock& block, const AmplifierSpec& amp,
             double noise_bandwidth_hz, std::mt19937_64* noise);

// In-place forward propagation.  `pmd` may be null (PMD step skipped); when
// given its segment count must match the link.  `noise` may be null (ASE off).
void propagate_link(DualPolBlock& block, const LinkSpec& link,
                    const PmdRealization* pmd, std::mt19937_64* noise);

// Exact inverse of the discrete forward operator sequence: reversed segments,
// each sub-step inverted, amplifier gains undone, PMD unitaries conjugated.
// Requires the same PmdRealization the forward run used (or null for both).
void invert_link(DualPolBlock& block, const LinkSpec& link,
                 const PmdRealization* pmd);

// Wiener laser phase walk applied to both polarizations (combined TX+LO
// linewidth), increment variance 2*pi*linewidth*T_sample.
void apply_laser_phase_noise(DualPolBlock& block, double linewidth_hz,
                             std::mt19937_64& rng);

}  // namespace fiber
