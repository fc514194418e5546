#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "fiber/dbp.hpp"
#include "fiber/fft.hpp"
#include "fiber/link.hpp"
#include "fiber/rxdsp.hpp"
#include "fiber/signal.hpp"
#include "fiber/ssfm.hpp"
#include "fiber/transmitter.hpp"
#include "fiber/units.hpp"

using namespace fiber;

namespace {

constexpr double kLn10 = 2.302585092994046;

double rel_l2(const DualPolBlock& a, const DualPolBlock& b) {
  const double num = (a.x - b.x).abs2().sum() + (a.y - b.y).abs2().sum();
  const double den = b.x.abs2().sum() + b.y.abs2().sum();
  return std::sqrt(num / den);
}

// Analytic power-weighted length of the first fiber over [0, z1] local km.
double smf_eff(double alpha_db, double z0, double z1) {
  const double ap = alpha_db * kLn10 / 10.0;
  return (std::exp(-ap * z0) - std::exp(-ap * z1)) / ap;
}

}  // namespace

TEST_CASE("single step per span reproduces the managed dispersion ladder") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 28);
  const DbpPlan plan = plan_steps(link, 1, 1);

  REQUIRE(plan.n_nonlinear() == 28);
  REQUIRE(plan.linear.size() == 29);
  CHECK(plan.fir_half_taps == 16);
  CHECK(plan.gamma_per_w_km == 1.4);

  // Receiver order: tail half-interval first, transmitter half-interval last.
  CHECK(plan.linear.front().dc_ps_nm == doctest::Approx(-538.9).epsilon(1e-9));
  CHECK(plan.linear.back().dc_ps_nm == doctest::Approx(722.5).epsilon(1e-9));
  for (int i = 1; i < 28; ++i)
    CHECK(plan.linear[i].dc_ps_nm == doctest::Approx(183.6).epsilon(1e-9));
  CHECK(plan.linear.front().dc_ps_nm / 42.5 == doctest::Approx(-12.68).epsilon(1e-9));
  CHECK(plan.linear[1].dc_ps_nm / 85.0 == doctest::Approx(2.16).epsilon(1e-9));
  CHECK(plan.total_dc_ps_nm() == doctest::Approx(5140.8).epsilon(1e-9));

  const double eff = smf_eff(design.smf_alpha_db_km, 0.0, design.smf_km);
  CHECK(eff == doctest::Approx(20.93).epsilon(2e-4));
  for (double d : plan.delta_eff_km) CHECK(d == doctest::Approx(eff).epsilon(1e-9));
  for (const DbpLinearStep& s : plan.linear) CHECK(s.amp_log == 0.0);
}

TEST_CASE("rational step densities tile whole spans") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 28);

  const DbpPlan seven = plan_steps(link, 1, 7);
  REQUIRE(seven.n_nonlinear() == 4);
  CHECK(seven.fir_half_taps == 30);
  CHECK(seven.linear[1].dc_ps_nm == doctest::Approx(7.0 * 183.6).epsilon(1e-9));
  const double eff7 = 7.0 * smf_eff(design.smf_alpha_db_km, 0.0, design.smf_km);
  CHECK(seven.delta_eff_km[0] == doctest::Approx(eff7).epsilon(1e-12));
  CHECK(seven.total_dc_ps_nm() == doctest::Approx(5140.8).epsilon(1e-9));

  const DbpPlan two = plan_steps(link, 2, 1, DbpGainMode::balanced,
                                 DbpEffLength::smf_profile, 16);
  REQUIRE(two.n_nonlinear() == 56);
  // Application order reverses the forward tiles: tail half-span first.
  CHECK(two.delta_eff_km[0] ==
        doctest::Approx(smf_eff(design.smf_alpha_db_km, 42.5, 72.0)).epsilon(1e-12));
  CHECK(two.delta_eff_km[1] ==
        doctest::Approx(smf_eff(design.smf_alpha_db_km, 0.0, 42.5)).epsilon(1e-12));

  CHECK_THROWS_AS(plan_steps(make_link(design, 7), 1, 14), std::invalid_argument);
  CHECK_THROWS_AS(plan_steps(link, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(plan_steps(link, 1, -2), std::invalid_argument);
}

TEST_CASE("effective length modes weight the power profile") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);

  const DbpPlan all = plan_steps(link, 1, 1, DbpGainMode::balanced,
                                 DbpEffLength::all_fiber);
  const double smf = smf_eff(design.smf_alpha_db_km, 0.0, design.smf_km);
  const double dcf_in_w = db_to_linear(design.dcf_input_offset_db);
  const double dcf = smf_eff(design.dcf_alpha_db_km, 0.0, design.dcf_km);
  const double expect_all =
      smf + design.dcf_gamma_per_w_km / design.smf_gamma_per_w_km * dcf_in_w * dcf;
  CHECK(all.delta_eff_km[0] == doctest::Approx(expect_all).epsilon(1e-9));
  CHECK(expect_all == doctest::Approx(24.83).epsilon(1e-3));

  const DbpPlan flat = plan_steps(link, 1, 1, DbpGainMode::balanced,
                                  DbpEffLength::flat);
  const double span = design.smf_km + design.dcf_km;
  CHECK(flat.delta_eff_km[0] ==
        doctest::Approx(smf_eff(design.smf_alpha_db_km, 0.0, span)).epsilon(1e-12));
}

TEST_CASE("span loss gain mode inverts the amplitude profile") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 1);
  const DbpPlan plan = plan_steps(link, 2, 1, DbpGainMode::span_loss,
                                  DbpEffLength::smf_profile, 16);
  REQUIRE(plan.linear.size() == 3);
  // Receiver order: [63.75, 85] saw 12.75 dB net gain, [21.25, 63.75] pure
  // 8.5 dB loss, [0, 21.25] pure 4.25 dB loss.
  CHECK(plan.linear[0].amp_log == doctest::Approx(-12.75 * kLn10 / 20.0).epsilon(1e-9));
  CHECK(plan.linear[1].amp_log == doctest::Approx(8.5 * kLn10 / 20.0).epsilon(1e-9));
  CHECK(plan.linear[2].amp_log == doctest::Approx(4.25 * kLn10 / 20.0).epsilon(1e-9));
  // Net amplitude over the whole ladder cancels on a balanced link.
  double sum = 0.0;
  for (const DbpLinearStep& s : plan.linear) sum += s.amp_log;
  CHECK(sum == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
}

TEST_CASE("tap table and minimum tap rule match the pinned values") {
  CHECK(default_fir_half_taps(1, 1) == 16);
  CHECK(default_fir_half_taps(1, 2) == 16);
  CHECK(default_fir_half_taps(1, 4) == 24);
  CHECK(default_fir_half_taps(1, 7) == 30);
  CHECK(default_fir_half_taps(1, 14) == 36);
  CHECK(default_fir_half_taps(2, 28) == 36);  // reducible ratio
  CHECK_THROWS_AS(default_fir_half_taps(3, 5), std::invalid_argument);

  const double bw = 1.06 * 32e9;
  CHECK(min_fir_taps(183.6, bw, 64e9) == 4);
  CHECK(min_fir_taps(5140.8, bw, 64e9) == 90);
  CHECK_THROWS_AS(min_fir_taps(183.6, 0.0, 64e9), std::invalid_argument);
}

TEST_CASE("compensating filter taps are symmetric and near unit gain") {
  const Eigen::ArrayXcd taps = design_cdc_fir(183.6, 64e9, 1024, 16);
  REQUIRE(taps.size() == 33);
  for (int m = 1; m <= 16; ++m) {
    CHECK(taps[16 + m].real() == taps[16 - m].real());
    CHECK(taps[16 + m].imag() == taps[16 - m].imag());
  }
  CHECK(std::abs(taps.sum()) == doctest::Approx(1.0).epsilon(0.05));
  CHECK_THROWS_AS(design_cdc_fir(183.6, 64e9, 16, 16), std::invalid_argument);
}

TEST_CASE("band-limited tap fit beats plain truncation inside the band") {
  // 33 taps with the signal occupying 53% of the sampling band (2 samples
  // per symbol, 6% rolloff); 183.6 ps/nm is one ladder step of the desk
  // link, 1285.2 ps/nm the whole desk map in a single filter.
  const double rate = 64e9, frac = 0.53;
  const Eigen::Index grid = 4096;
  const int F = 16;
  const Eigen::ArrayXd w = angular_freq_grid(grid, rate);

  auto response = [&](const Eigen::ArrayXcd& taps) {
    Eigen::ArrayXcd kernel = Eigen::ArrayXcd::Zero(grid);
    kernel[0] = taps[F];
    for (int m = 1; m <= F; ++m) {
      kernel[m] = taps[F + m];
      kernel[grid - m] = taps[F - m];
    }
    return dft(kernel);
  };

  for (double dc : {183.6, 1285.2}) {
    const Eigen::ArrayXcd rt = response(design_cdc_fir(dc, rate, grid, F));
    const Eigen::ArrayXcd fitted = design_cdc_fir(dc, rate, grid, F, frac);
    const Eigen::ArrayXcd rf = response(fitted);
    const double b2l = dc * 1e-3 * 1.55e-6 * 1.55e-6 / (2.0 * M_PI * 2.99792458e8);
    const Eigen::ArrayXcd ideal =
        (std::complex<double>(0.0, 0.5 * b2l) * w.square()).exp();

    double err_trunc = 0.0, err_fit = 0.0, out_gain = 0.0;
    for (Eigen::Index m = 0; m < grid; ++m) {
      if (std::abs(w[m]) <= frac * M_PI * rate) {
        err_trunc = std::max(err_trunc, std::abs(rt[m] - ideal[m]));
        err_fit = std::max(err_fit, std::abs(rf[m] - ideal[m]));
      } else {
        out_gain = std::max(out_gain, std::abs(rf[m]));
      }
    }
    CHECK(err_fit < err_trunc / 5.0);
    CHECK(out_gain < 1.5);  // the ridge weight keeps the stopband tame
    if (dc < 200.0) CHECK(err_fit < 1e-3);

    // Fitted taps keep the even lag symmetry of the compensator.
    for (int m = 1; m <= F; ++m) {
      CHECK(fitted[F + m].real() == fitted[F - m].real());
      CHECK(fitted[F + m].imag() == fitted[F - m].imag());
    }
  }

  CHECK_THROWS_AS(design_cdc_fir(183.6, rate, grid, F, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(design_cdc_fir(183.6, rate, grid, F, 1.2), std::invalid_argument);
}

TEST_CASE("zero epsilon backpropagation collapses to bulk compensation") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);
  DbpPlan plan = plan_steps(link, 1, 1);
  plan.epsilon = 0.0;

  TxConfig cfg;
  const auto frame = make_frame(1024, cfg.qam_order, 5);
  DualPolBlock a = channel_select(shape_waveform(frame, cfg), 0.0, cfg.baud_hz,
                                  cfg.rolloff, 2);
  DualPolBlock b = a;
  run_dbp(a, plan);
  cdc(b, plan.total_dc_ps_nm());
  CHECK(plan.total_dc_ps_nm() == doctest::Approx(7.0 * 183.6).epsilon(1e-9));
  CHECK(rel_l2(a, b) < 1e-10);
}

TEST_CASE("time domain ladder converges to the frequency domain ladder") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);

  TxConfig cfg;
  const auto frame = make_frame(2048, cfg.qam_order, 17);
  DualPolBlock tx = shape_waveform(frame, cfg);
  tx.set_mean_power_w(dbm_to_watt(-1.0));
  propagate_link(tx, link, nullptr, nullptr);
  const DualPolBlock rx = channel_select(tx, 0.0, cfg.baud_hz, cfg.rolloff, 2);

  DbpPlan fd = plan_steps(link, 1, 1);
  DbpPlan td = fd;
  td.domain = DbpDomain::time;

  DualPolBlock a = rx, b = rx, c = rx;
  run_dbp(a, fd);
  run_dbp(b, td);
  const double err16 = rel_l2(b, a);
  CHECK(err16 < 0.05);

  td.fir_half_taps = 120;
  run_dbp(c, td);
  const double err120 = rel_l2(c, a);
  CHECK(err120 < err16);
  CHECK(err120 < 5e-3);
}

TEST_CASE("fine ladder inverts the nonlinear channel and the forward scheme is converged") {
  SpanDesign design;
  TxConfig cfg;
  const auto frame = make_frame(2048, cfg.qam_order, 29);

  auto received_snr = [&](double step_km) {
    design.step_km = step_km;
    const LinkSpec link = make_link(design, 7);
    DualPolBlock tx = shape_waveform(frame, cfg);
    tx.set_mean_power_w(dbm_to_watt(-2.0));
    propagate_link(tx, link, nullptr, nullptr);
    DualPolBlock rx = channel_select(tx, 0.0, cfg.baud_hz, cfg.rolloff, 2);
    // One rotation per SSFM segment, every fiber weighted: the ladder is the
    // backward Manakov model at full resolution.
    const LinkSpec plan_link = make_link(SpanDesign{}, 7);
    const DbpPlan plan = plan_steps(plan_link, 85, 1, DbpGainMode::balanced,
                                    DbpEffLength::all_fiber, 16);
    run_dbp(rx, plan);
    Eigen::ArrayXcd ex(frame.sx.size()), ey(frame.sy.size());
    for (Eigen::Index k = 0; k < ex.size(); ++k) {
      ex[k] = rx.x[2 * k];
      ey[k] = rx.y[2 * k];
    }
    return measure(ex, ey, frame, cfg.qam_order).snr_eff_db;
  };

  const double snr_full = received_snr(1.0);
  const double snr_half = received_snr(0.5);
  CHECK(snr_full > 30.0);
  CHECK(std::abs(snr_full - snr_half) < 0.1);
}

TEST_CASE("epsilon search keeps the smallest of tied optima") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);
  DbpPlan plan = plan_steps(link, 1, 1);

  int evals = 0;
  const double best = optimize_epsilon(
      plan,
      [&](const DbpPlan& p) {
        ++evals;
        return -std::abs(std::round(100.0 * p.epsilon) - 37.0);
      });
  CHECK(evals == 101);
  CHECK(best == 0.0);
  CHECK(plan.epsilon == doctest::Approx(0.37).epsilon(1e-12));

  optimize_epsilon(plan, [](const DbpPlan& p) {
    return p.epsilon >= 0.295 && p.epsilon <= 0.405 ? 1.0 : 0.0;
  });
  CHECK(plan.epsilon == doctest::Approx(0.30).epsilon(1e-12));

  CHECK_THROWS_AS(optimize_epsilon(plan, [](const DbpPlan&) { return 0.0; }, 0.0),
                  std::invalid_argument);
}

TEST_CASE("plan serialization round-trips bit-exactly") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 28);
  DbpPlan plan = plan_steps(link, 1, 7, DbpGainMode::span_loss,
                            DbpEffLength::all_fiber);
  plan.domain = DbpDomain::time;
  plan.epsilon = 0.63;

  const std::string text = plan_to_text(plan);
  const DbpPlan back = plan_from_text(text);
  CHECK(plan_to_text(back) == text);

  REQUIRE(back.linear.size() == plan.linear.size());
  REQUIRE(back.delta_eff_km.size() == plan.delta_eff_km.size());
  for (std::size_t i = 0; i < plan.linear.size(); ++i) {
    CHECK(std::memcmp(&back.linear[i].dc_ps_nm, &plan.linear[i].dc_ps_nm,
                      sizeof(double)) == 0);
    CHECK(std::memcmp(&back.linear[i].amp_log, &plan.linear[i].amp_log,
                      sizeof(double)) == 0);
  }
  for (std::size_t i = 0; i < plan.delta_eff_km.size(); ++i)
    CHECK(std::memcmp(&back.delta_eff_km[i], &plan.delta_eff_km[i],
                      sizeof(double)) == 0);
  CHECK(back.epsilon == plan.epsilon);
  CHECK(back.gamma_per_w_km == plan.gamma_per_w_km);
  CHECK(back.domain == plan.domain);
  CHECK(back.gain_mode == plan.gain_mode);
  CHECK(back.eff_mode == plan.eff_mode);
  CHECK(back.fir_half_taps == plan.fir_half_taps);
  CHECK(back.steps_num == plan.steps_num);
  CHECK(back.steps_den == plan.steps_den);

  CHECK_THROWS_AS(plan_from_text("dbp-plan v2\n"), std::invalid_argument);
  CHECK_THROWS_AS(plan_from_text(text.substr(0, text.size() / 2)),
                  std::invalid_argument);
  std::string bad = text;
  bad.replace(bad.find("span_loss"), 9, "span_lost");
  CHECK_THROWS_AS(plan_from_text(bad), std::invalid_argument);
}

TEST_CASE("inconsistent plans are rejected") {
  DbpPlan plan;
  plan.linear.resize(3);
  plan.delta_eff_km.resize(3);  // must be one fewer than linear
  plan.gamma_per_w_km = 1.4;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan.delta_eff_km.resize(2);
  plan.epsilon = -0.5;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
  plan.epsilon = 1.0;
  plan.fir_half_taps = 0;
  CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}
