#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>

#include <unistd.h>

#include "doctest.h"
#include "fiber/dbp.hpp"
#include "fiber/ldbp.hpp"
#include "fiber/link.hpp"
#include "fiber/signal.hpp"

using namespace fiber;

namespace {

Eigen::ArrayXcd random_wave(Eigen::Index n, std::mt19937_64& eng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(0.5));
  Eigen::ArrayXcd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = cd(dist(eng), dist(eng));
  return out;
}

DualPolBlock random_block(Eigen::Index n, double rate, double power_w,
                          std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  DualPolBlock block(n, rate);
  block.x = random_wave(n, eng);
  block.y = random_wave(n, eng);
  block.set_mean_power_w(power_w);
  return block;
}

// Identity-layer model: one layer, center tap one, no activations.
LdbpModel identity_model(Eigen::Index taps, Eigen::Index trim, Eigen::Index lag = 0) {
  LdbpModel model;
  model.taps.emplace_back(Eigen::ArrayXcd::Zero(taps));
  model.taps[0][(taps - 1) / 2 + lag] = 1.0;
  model.trim_per_side = trim;
  return model;
}

LdbpModel small_random_model(Eigen::Index layers, Eigen::Index taps,
                             Eigen::Index trim, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> dist(0.0, 0.3);
  LdbpModel model;
  for (Eigen::Index i = 0; i < layers; ++i) {
    Eigen::ArrayXcd t(taps);
    for (Eigen::Index k = 0; k < taps; ++k) t[k] = cd(dist(eng), dist(eng));
    t[(taps - 1) / 2] += 1.0;
    model.taps.push_back(t);
  }
  for (Eigen::Index i = 0; i + 1 < layers; ++i)
    model.phase_coeff.push_back(0.5 + 0.3 * double(i));
  model.trim_per_side = trim;
  return model;
}

}  // namespace

TEST_CASE("dataset window bookkeeping matches the sliding-window counts") {
  LdbpDataset data;
  data.rx_x = Eigen::ArrayXcd::Ones(65536);
  data.rx_y = data.rx_x;
  data.tx_x = data.rx_x;
  data.tx_y = data.rx_x;
  data.window = 1024;
  data.stride = 16;
  data.validate();
  CHECK(data.n_windows() == 4033);

  data.stride = 852;
  CHECK(data.n_windows() == 76);
}

TEST_CASE("make_dataset normalizes both blocks by the target power") {
  const Eigen::Index n = 512;
  DualPolBlock rx = random_block(n, 64e9, 2.5e-3, 11);
  DualPolBlock target = random_block(n, 64e9, 1.0, 12);
  target.set_mean_power_w(4.0);

  const LdbpDataset data = make_dataset(rx, target, 128, 32);
  CHECK(data.power_ref_w == doctest::Approx(4.0).epsilon(1e-12));
  const double tx_power =
      (data.tx_x.abs2().sum() + data.tx_y.abs2().sum()) / double(n);
  CHECK(tx_power == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(data.rx_x[0] * std::sqrt(data.power_ref_w) - rx.x[0]) < 1e-15);

  DualPolBlock short_rx = random_block(n / 2, 64e9, 1e-3, 13);
  CHECK_THROWS_AS(make_dataset(short_rx, target, 128, 32), std::invalid_argument);
  DualPolBlock wrong_rate = rx;
  wrong_rate.sample_rate_hz = 32e9;
  CHECK_THROWS_AS(make_dataset(wrong_rate, target, 128, 32), std::invalid_argument);
}

TEST_CASE("model and dataset validation reject malformed inputs") {
  LdbpModel model = small_random_model(3, 5, 4, 1);
  CHECK_NOTHROW(model.validate());
  CHECK(model.param_count() == 30);

  LdbpModel even = model;
  for (auto& t : even.taps) t = Eigen::ArrayXcd::Zero(4);
  CHECK_THROWS_AS(even.validate(), std::invalid_argument);

  LdbpModel ragged = model;
  ragged.taps[1] = Eigen::ArrayXcd::Zero(7);
  CHECK_THROWS_AS(ragged.validate(), std::invalid_argument);

  LdbpModel acts = model;
  acts.phase_coeff.push_back(0.1);
  CHECK_THROWS_AS(acts.validate(), std::invalid_argument);

  LdbpModel power = model;
  power.power_ref_w = 0.0;
  CHECK_THROWS_AS(power.validate(), std::invalid_argument);

  LdbpDataset data;
  data.rx_x = Eigen::ArrayXcd::Ones(64);
  data.rx_y = data.rx_x;
  data.tx_x = data.rx_x;
  data.tx_y = Eigen::ArrayXcd::Ones(32);
  data.window = 16;
  data.stride = 4;
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  data.tx_y = data.rx_x;
  data.window = 128;
  CHECK_THROWS_AS(data.validate(), std::invalid_argument);
}

TEST_CASE("identity and pure-delay layers act as circular shifts on a block") {
  const Eigen::Index n = 1024;
  const DualPolBlock rx = random_block(n, 64e9, 1.3e-3, 21);

  const DualPolBlock same = ldbp_equalize(rx, identity_model(33, 16), 256);
  CHECK(((same.x - rx.x).abs().maxCoeff()) < 1e-15);
  CHECK(((same.y - rx.y).abs().maxCoeff()) < 1e-15);

  // Tap at lag 2 delays by two samples; tiling must keep that circular.
  const DualPolBlock late = ldbp_equalize(rx, identity_model(33, 16, 2), 256);
  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(std::abs(late.x[i] - rx.x[(i - 2 + n) % n]) < 1e-15);
    CHECK(std::abs(late.y[i] - rx.y[(i - 2 + n) % n]) < 1e-15);
  }
}

TEST_CASE("block equalization agrees with the window forward pass that wrote it") {
  const Eigen::Index n = 4096, window = 1024;
  const DualPolBlock rx = random_block(n, 64e9, 9e-4, 22);
  LdbpModel model = small_random_model(3, 9, 86, 2);
  model.power_ref_w = 9e-4;

  const DualPolBlock out = ldbp_equalize(rx, model, window);
  const Eigen::Index out_len = window - 2 * model.trim_per_side;

  // Second tile writes [out_len, 2 out_len); rebuild it by hand.
  const double scale = 1.0 / std::sqrt(model.power_ref_w);
  Eigen::ArrayXcd wx(window), wy(window), ox, oy;
  for (Eigen::Index j = 0; j < window; ++j) {
    const Eigen::Index src = ((out_len - model.trim_per_side + j) % n + n) % n;
    wx[j] = rx.x[src] * scale;
    wy[j] = rx.y[src] * scale;
  }
  ldbp_forward(model, wx, wy, ox, oy);
  const double err =
      (out.x.segment(out_len, out_len) - ox * std::sqrt(model.power_ref_w))
          .abs()
          .maxCoeff();
  CHECK(err < 1e-15);

  CHECK_THROWS_AS(ldbp_equalize(rx, model, n + 1), std::invalid_argument);
  CHECK_THROWS_AS(ldbp_equalize(rx, model, 2 * model.trim_per_side),
                  std::invalid_argument);
}

TEST_CASE("plan initialization reproduces time-domain backpropagation inside the window") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);
  DbpPlan plan = plan_steps(link, 1, 1);
  plan.domain = DbpDomain::time;

  const Eigen::Index n = 1024;
  const double rate = 64e9;
  const double power = 6.31e-4;
  DualPolBlock block = random_block(n, rate, power, 31);
  DualPolBlock reference = block;
  run_dbp(reference, plan);

  const LdbpModel model = ldbp_from_plan(plan, rate, n, 86, power);
  CHECK(model.n_layers() == 8);
  CHECK(model.tap_count() == 33);
  CHECK(model.param_count() == 528);
  REQUIRE(model.phase_coeff.size() == 7);
  for (std::size_t k = 0; k < model.phase_coeff.size(); ++k)
    CHECK(model.phase_coeff[k] ==
          doctest::Approx(8.0 / 9.0 * plan.gamma_per_w_km * plan.delta_eff_km[k] *
                          power)
              .epsilon(1e-12));

  const double scale = 1.0 / std::sqrt(power);
  Eigen::ArrayXcd ox, oy;
  ldbp_forward(model, block.x * scale, block.y * scale, ox, oy);

  // Zero padding reaches (layers * half_taps) = 128 samples per edge, so the
  // comparison region is the circular result minus that margin.
  const Eigen::Index reach = model.n_layers() * (model.tap_count() - 1) / 2;
  REQUIRE(reach == 128);
  const Eigen::Index m = model.trim_per_side;
  double worst = 0.0;
  for (Eigen::Index i = reach; i < n - reach; ++i) {
    worst = std::max(worst, std::abs(ox[i - m] - reference.x[i] * scale));
    worst = std::max(worst, std::abs(oy[i - m] - reference.y[i] * scale));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 eng(41);
  const Eigen::Index n = 64, trim = 8;
  LdbpModel model = small_random_model(3, 5, trim, 3);
  const Eigen::ArrayXcd x = random_wave(n, eng), y = random_wave(n, eng);
  const Eigen::ArrayXcd tx = random_wave(n - 2 * trim, eng);
  const Eigen::ArrayXcd ty = random_wave(n - 2 * trim, eng);

  CHECK(gradient_check(model, x, y, tx, ty, 1e-6) < 1e-7);
  CHECK_THROWS_AS(gradient_check(model, x, y, tx, ty, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gradient_check(model, x, y, x, y, 1e-6), std::invalid_argument);
}

TEST_CASE("gradients stay consistent at the physical initialization") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);
  const DbpPlan plan = plan_steps(link, 1, 1);
  const double power = 6.31e-4;
  const LdbpModel model = ldbp_from_plan(plan, 64e9, 1024, 86, power);

  const Eigen::Index n = 1024;
  DualPolBlock rx = random_block(n, 64e9, power, 51);
  DualPolBlock target = random_block(n, 64e9, power, 52);
  const double scale = 1.0 / std::sqrt(power);
  const Eigen::Index m = model.trim_per_side;

  const double dev = gradient_check(
      model, rx.x * scale, rx.y * scale,
      target.x.segment(m, n - 2 * m) * scale,
      target.y.segment(m, n - 2 * m) * scale, 1e-6);
  CHECK(dev < 1e-4);
}

TEST_CASE("training recovers perturbed taps on a synthetic inverse problem") {
  const Eigen::Index n = 4096, trim = 8;
  std::mt19937_64 eng(61);
  DualPolBlock u(n, 64e9);
  u.x = random_wave(n, eng);
  u.y = random_wave(n, eng);

  // Ground truth: reach (2 layers * 4) equals the trim, so a whole-block
  // window of the zero-padded forward pass is exactly the circular response.
  LdbpModel truth = small_random_model(2, 9, trim, 4);
  const DualPolBlock clean = ldbp_equalize(u, truth, n);

  LdbpModel model = truth;
  std::normal_distribution<double> jitter(0.0, 0.05);
  for (auto& t : model.taps)
    for (Eigen::Index k = 0; k < t.size(); ++k)
      t[k] += cd(jitter(eng), jitter(eng));

  LdbpDataset data;
  data.rx_x = u.x;
  data.rx_y = u.y;
  data.tx_x = clean.x;
  data.tx_y = clean.y;
  data.window = 128;
  data.stride = 32;
  data.validate();
  REQUIRE(data.n_windows() == 125);

  TrainConfig cfg;
  cfg.max_epochs = 40;
  cfg.batch = 16;
  cfg.seed = 7;
  TrainReport report = train_ldbp(model, data, cfg);

  REQUIRE(!report.val_loss.empty());
  CHECK(report.val_loss.size() == report.train_loss.size());
  CHECK(report.best_epoch >= 1);
  CHECK(report.best_val == *std::min_element(report.val_loss.begin(),
                                             report.val_loss.end()));
  CHECK(report.val_loss[report.best_epoch - 1] == report.best_val);
  CHECK(report.best_val < 0.2 * report.val_loss.front());

  // The fitted model should be close to the generator on fresh data.
  DualPolBlock probe(n, 64e9);
  std::mt19937_64 eng2(62);
  probe.x = random_wave(n, eng2);
  probe.y = random_wave(n, eng2);
  const DualPolBlock want = ldbp_equalize(probe, truth, n);
  const DualPolBlock got = ldbp_equalize(probe, model, n);
  const double rel = std::sqrt(((want.x - got.x).abs2().sum() +
                                (want.y - got.y).abs2().sum()) /
                               (want.x.abs2().sum() + want.y.abs2().sum()));
  CHECK(rel < 0.05);

  CHECK_THROWS_AS(train_ldbp(model, data, [] {
                    TrainConfig bad;
                    bad.batch = 0;
                    return bad;
                  }()),
                  std::invalid_argument);
  CHECK_THROWS_AS(train_ldbp(model, data, [] {
                    TrainConfig bad;
                    bad.val_fraction = 1.0;
                    return bad;
                  }()),
                  std::invalid_argument);
}

TEST_CASE("training without a validation split falls back to the train loss") {
  const Eigen::Index n = 1024, trim = 8;
  std::mt19937_64 eng(71);
  LdbpModel truth = small_random_model(2, 9, trim, 5);
  DualPolBlock u(n, 64e9);
  u.x = random_wave(n, eng);
  u.y = random_wave(n, eng);
  const DualPolBlock clean = ldbp_equalize(u, truth, n);

  LdbpModel model = truth;
  for (auto& t : model.taps) t *= 1.02;

  LdbpDataset data;
  data.rx_x = u.x;
  data.rx_y = u.y;
  data.tx_x = clean.x;
  data.tx_y = clean.y;
  data.window = 128;
  data.stride = 64;

  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.batch = 8;
  cfg.val_fraction = 0.0;
  const TrainReport report = train_ldbp(model, data, cfg);
  CHECK(report.val_loss == report.train_loss);
  CHECK(report.best_val <= report.train_loss.front());
}

TEST_CASE("checkpoints round-trip bit exactly") {
  const SpanDesign design;
  const LinkSpec link = make_link(design, 7);
  const DbpPlan plan = plan_steps(link, 1, 1);
  const LdbpModel model = ldbp_from_plan(plan, 64e9, 1024, 86, 6.31e-4);

  const char* path = "test_ldbp_roundtrip.ckpt";
  save_checkpoint(model, path);
  const LdbpModel back = load_checkpoint(path);

  REQUIRE(back.n_layers() == model.n_layers());
  REQUIRE(back.tap_count() == model.tap_count());
  CHECK(back.trim_per_side == model.trim_per_side);
  CHECK(std::memcmp(&back.power_ref_w, &model.power_ref_w, sizeof(double)) == 0);
  for (Eigen::Index i = 0; i < model.n_layers(); ++i)
    CHECK(std::memcmp(back.taps[i].data(), model.taps[i].data(),
                      sizeof(cd) * model.tap_count()) == 0);
  CHECK(std::memcmp(back.phase_coeff.data(), model.phase_coeff.data(),
                    sizeof(double) * model.phase_coeff.size()) == 0);

  // Truncation and a foreign header must both be rejected.
  save_checkpoint(model, path);
  {
    FILE* f = std::fopen(path, "rb+");
    REQUIRE(f != nullptr);
    REQUIRE(std::fseek(f, 0, SEEK_END) == 0);
    const long full = std::ftell(f);
    std::fclose(f);
    REQUIRE(truncate(path, full / 2) == 0);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::invalid_argument);
  {
    FILE* f = std::fopen(path, "wb");
    REQUIRE(f != nullptr);
    std::fputs("definitely not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::invalid_argument);
  CHECK_THROWS_AS(load_checkpoint("test_ldbp_missing.ckpt"), std::invalid_argument);
  std::remove(path);
}
