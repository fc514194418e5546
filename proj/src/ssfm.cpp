#include "fiber/ssfm.hpp"

#include <cmath>
#include <stdexcept>

#include "fiber/fft.hpp"
#include "fiber/jones.hpp"
#include "fiber/rng.hpp"
#include "fiber/units.hpp"

namespace fiber {

PmdRealization draw_pmd(const LinkSpec& link, std::uint64_t seed) {
  link.validate();
  std::mt19937_64 rng(derive_seed(seed, 0x706d64));  // dedicated PMD stream
  std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
  std::normal_distribution<double> gauss(0.0, 1.0);
  PmdRealization r;
  for (const auto& span : link.spans) {
    for (const auto& f : span.fibers) {
      // segment DGD: zero-mean Gaussian, std = coeff * sqrt(segment length)
      const double tau_std = f.pmd_ps_sqrt_km * std::sqrt(f.step_km) * 1e-12;
      for (int s = 0; s < f.segment_count(); ++s) {
        r.theta.push_back(angle(rng));
        r.phi.push_back(angle(rng));
        r.tau_s.push_back(gauss(rng) * tau_std);
      }
    }
  }
  return r;
}

void amplify(DualPolBlock& block, const AmplifierSpec& amp,
             double noise_bandwidth_hz, std::mt19937_64* noise) {
  const double g = db_to_linear(amp.gain_db);
  block.x *= std::sqrt(g);
  block.y *= std::sqrt(g);
  if (!noise) return;
  if (noise_bandwidth_hz <= 0.0)
    throw std::invalid_argument("amplify: noise bandwidth must be positive");
  const double nf = db_to_linear(amp.noise_figure_db);
  const double nu0 = amp.center_freq_hz > 0.0 ? amp.center_freq_hz : kCarrierFrequency;
  // per-polarization ASE power over the given bandwidth
  const double sigma2 = 0.5 * (g - 1.0) * noise_bandwidth_hz * kPlanck * nu0 * nf;
  const double qstd = std::sqrt(sigma2 / 2.0);  // per quadrature
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index i = 0; i < block.size(); ++i) {
    block.x[i] += cd{qstd * gauss(*noise), qstd * gauss(*noise)};
    block.y[i] += cd{qstd * gauss(*noise), qstd * gauss(*noise)};
  }
}

namespace {

struct FiberOps {
  Eigen::ArrayXcd half_linear;      // loss + CD over half a segment
  Eigen::ArrayXcd half_linear_inv;
  double gamma_delta = 0.0;         // gamma * segment length [1/W]
  int segments = 0;
};

FiberOps prepare(const FiberSegmentSpec& f, const Eigen::ArrayXd& omega) {
  FiberOps ops;
  const double delta_m = f.step_km * 1e3;
  const double alpha = alpha_db_km_to_per_m(f.alpha_db_per_km);
  const double beta2 = beta2_from_d(f.d_ps_nm_km);
  const double att = -0.5 * alpha * (delta_m / 2.0);  // amplitude exponent
  Eigen::ArrayXd phase = 0.5 * beta2 * (delta_m / 2.0) * omega.square();
  ops.half_linear = std::exp(att) * (phase.cos() + cd{0.0, 1.0} * phase.sin());
  ops.half_linear_inv = std::exp(-att) * (phase.cos() - cd{0.0, 1.0} * phase.sin());
  ops.gamma_delta = gamma_per_w_km_to_per_w_m(f.gamma_per_w_km) * delta_m;
  ops.segments = f.segment_count();
  return ops;
}

void apply_pmd_bins(Eigen::ArrayXcd& sx, Eigen::ArrayXcd& sy,
                    const Eigen::ArrayXd& omega, double theta, double phi,
                    double tau, bool inverse) {
  const Eigen::Matrix2cd r = rotation_jones(theta, phi);
  Eigen::ArrayXd ph = -0.5 * tau * omega;  // birefringence phase on pol x
  Eigen::ArrayXcd dx = ph.cos() + cd{0.0, 1.0} * ph.sin();
  for (Eigen::Index k = 0; k < sx.size(); ++k) {
    const cd dxx = dx[k], dyy = std::conj(dx[k]);
    if (!inverse) {
      const cd ax = dxx * sx[k], ay = dyy * sy[k];
      sx[k] = r(0, 0) * ax + r(0, 1) * ay;
      sy[k] = r(1, 0) * ax + r(1, 1) * ay;
    } else {
      // (R D)^-1 = D^H R^H
      const cd ax = std::conj(r(0, 0)) * sx[k] + std::conj(r(1, 0)) * sy[k];
      const cd ay = std::conj(r(0, 1)) * sx[k] + std::conj(r(1, 1)) * sy[k];
      sx[k] = std::conj(dxx) * ax;
      sy[k] = std::conj(dyy) * ay;
    }
  }
}

void kerr_rotation(Eigen::ArrayXcd& x, Eigen::ArrayXcd& y, double gamma_delta,
                   double sign) {
  if (gamma_delta == 0.0) return;
  Eigen::ArrayXd px = x.abs2(), py = y.abs2();
  Eigen::ArrayXd phx = sign * gamma_delta * (px + (2.0 / 3.0) * py);
  Eigen::ArrayXd phy = sign * gamma_delta * (py + (2.0 / 3.0) * px);
  x *= phx.cos() + cd{0.0, 1.0} * phx.sin();
  y *= phy.cos() + cd{0.0, 1.0} * phy.sin();
}

void run_fiber(DualPolBlock& block, const FiberSegmentSpec& f,
               const Eigen::ArrayXd& omega, const PmdRealization* pmd,
               std::size_t& seg_cursor, bool forward) {
  const FiberOps ops = prepare(f, omega);
  const bool use_pmd = pmd && f.pmd_ps_sqrt_km > 0.0;
  Eigen::ArrayXcd sx = dft(block.x), sy = dft(block.y);
  for (int s = 0; s < ops.segments; ++s) {
    const std::size_t idx = forward ? seg_cursor + s : seg_cursor - 1 - s;
    if (forward) {
      sx *= ops.half_linear;
      sy *= ops.half_linear;
      if (use_pmd)
        apply_pmd_bins(sx, sy, omega, pmd->theta[idx], pmd->phi[idx],
                       pmd->tau_s[idx], false);
      block.x = idft(sx);
      block.y = idft(sy);
      kerr_rotation(block.x, block.y, ops.gamma_delta, +1.0);
      sx = dft(block.x);
      sy = dft(block.y);
      sx *= ops.half_linear;
      sy *= ops.half_linear;
    } else {
      sx *= ops.half_linear_inv;
      sy *= ops.half_linear_inv;
      block.x = idft(sx);
      block.y = idft(sy);
      kerr_rotation(block.x, block.y, ops.gamma_delta, -1.0);
      sx = dft(block.x);
      sy = dft(block.y);
      if (use_pmd)
        apply_pmd_bins(sx, sy, omega, pmd->theta[idx], pmd->phi[idx],
                       pmd->tau_s[idx], true);
      sx *= ops.half_linear_inv;
      sy *= ops.half_linear_inv;
    }
  }
  block.x = idft(sx);
  block.y = idft(sy);
  seg_cursor = forward ? seg_cursor + ops.segments : seg_cursor - ops.segments;
}

void check_pmd(const LinkSpec& link, const PmdRealization* pmd) {
  if (pmd && pmd->size() != static_cast<std::size_t>(link.total_segments()))
    throw std::invalid_argument(
        "propagate_link: PMD realization does not match link segmentation");
}

}  // namespace

void linear_step(DualPolBlock& block, const FiberSegmentSpec& fiber, double dz_km) {
  block.validate();
  const double dz = dz_km * 1e3;
  const double alpha = alpha_db_km_to_per_m(fiber.alpha_db_per_km);
  const double beta2 = beta2_from_d(fiber.d_ps_nm_km);
  const auto omega = angular_freq_grid(block.size(), block.sample_rate_hz);
  Eigen::ArrayXd phase = 0.5 * beta2 * dz * omega.square();
  Eigen::ArrayXcd op =
      std::exp(-0.5 * alpha * dz) * (phase.cos() + cd{0.0, 1.0} * phase.sin());
  block.x = idft(dft(block.x) * op);
  block.y = idft(dft(block.y) * op);
}

void nonlinear_step(DualPolBlock& block, const FiberSegmentSpec& fiber, double dz_km) {
  block.validate();
  const double gd = gamma_per_w_km_to_per_w_m(fiber.gamma_per_w_km) * dz_km * 1e3;
  kerr_rotation(block.x, block.y, gd, +1.0);
}

void pmd_step(DualPolBlock& block, double theta, double phi, double tau_s) {
  block.validate();
  const auto omega = angular_freq_grid(block.size(), block.sample_rate_hz);
  Eigen::ArrayXcd sx = dft(block.x), sy = dft(block.y);
  apply_pmd_bins(sx, sy, omega, theta, phi, tau_s, false);
  block.x = idft(sx);
  block.y = idft(sy);
}

void propagate_link(DualPolBlock& block, const LinkSpec& link,
                    const PmdRealization* pmd, std::mt19937_64* noise) {
  block.validate();
  link.validate();
  check_pmd(link, pmd);
  const auto omega = angular_freq_grid(block.size(), block.sample_rate_hz);
  std::size_t cursor = 0;
  for (const auto& span : link.spans) {
    for (std::size_t i = 0; i < span.fibers.size(); ++i) {
      run_fiber(block, span.fibers[i], omega, pmd, cursor, true);
      amplify(block, span.amps[i], block.sample_rate_hz, noise);
    }
  }
}

void invert_link(DualPolBlock& block, const LinkSpec& link,
                 const PmdRealization* pmd) {
  block.validate();
  link.validate();
  check_pmd(link, pmd);
  const auto omega = angular_freq_grid(block.size(), block.sample_rate_hz);
  std::size_t cursor = static_cast<std::size_t>(link.total_segments());
  for (auto span = link.spans.rbegin(); span != link.spans.rend(); ++span) {
    for (std::size_t i = span->fibers.size(); i-- > 0;) {
      const double g = db_to_linear(span->amps[i].gain_db);
      block.x /= std::sqrt(g);
      block.y /= std::sqrt(g);
      run_fiber(block, span->fibers[i], omega, pmd, cursor, false);
    }
  }
}

void apply_laser_phase_noise(DualPolBlock& block, double linewidth_hz,
                             std::mt19937_64& rng) {
  if (linewidth_hz < 0.0)
    throw std::invalid_argument("apply_laser_phase_noise: negative linewidth");
  if (linewidth_hz == 0.0) return;
  const double inc_std =
      std::sqrt(2.0 * M_PI * linewidth_hz / block.sample_rate_hz);
  std::normal_distribution<double> gauss(0.0, inc_std);
  double phase = 0.0;
  for (Eigen::Index i = 0; i < block.size(); ++i) {
    phase += gauss(rng);
    const cd rot = std::exp(cd{0.0, phase});
    block.x[i] *= rot;
    block.y[i] *= rot;
  }
}

}  // namespace fiber
