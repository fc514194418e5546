#include "fiber/ldbp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace fiber {
namespace {

// Same-size zero-padded convolution with centered taps:
// out[n] = sum_k taps[k] in[n + F - k], reads outside the window are zero.
void conv_same(const Eigen::ArrayXcd& taps, const Eigen::ArrayXcd& in,
               Eigen::ArrayXcd& out) {
  const Eigen::Index n = in.size();
  const Eigen::Index nk = taps.size();
  const Eigen::Index half = (nk - 1) / 2;
  out.setZero(n);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const Eigen::Index shift = half - k;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min(n, n - shift);
    if (hi > lo)
      out.segment(lo, hi - lo) += taps[k] * in.segment(lo + shift, hi - lo);
  }
}

// Adjoint of conv_same with respect to its input.
void conv_adjoint(const Eigen::ArrayXcd& taps, const Eigen::ArrayXcd& g_out,
                  Eigen::ArrayXcd& g_in) {
  const Eigen::Index n = g_out.size();
  const Eigen::Index nk = taps.size();
  const Eigen::Index half = (nk - 1) / 2;
  g_in.setZero(n);
  for (Eigen::Index k = 0; k < nk; ++k) {
    const Eigen::Index shift = k - half;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min(n, n - shift);
    if (hi > lo)
      g_in.segment(lo, hi - lo) +=
          std::conj(taps[k]) * g_out.segment(lo + shift, hi - lo);
  }
}

// A_k += sum_n g_out[n] conj(in[n + F - k]).
void conv_tap_grad(const Eigen::ArrayXcd& g_out, const Eigen::ArrayXcd& in,
                   Eigen::ArrayXcd& acc) {
  const Eigen::Index n = g_out.size();
  const Eigen::Index nk = acc.size();
  const Eigen::Index half = (nk - 1) / 2;
  for (Eigen::Index k = 0; k < nk; ++k) {
    const Eigen::Index shift = half - k;
    const Eigen::Index lo = std::max<Eigen::Index>(0, -shift);
    const Eigen::Index hi = std::min(n, n - shift);
    if (hi > lo)
      acc[k] += (g_out.segment(lo, hi - lo) *
                 in.segment(lo + shift, hi - lo).conjugate())
                    .sum();
  }
}

Eigen::ArrayXcd unit_phasor(const Eigen::ArrayXd& phase) {
  return phase.cos().cast<cd>() + cd(0.0, 1.0) * phase.sin().cast<cd>();
}

struct Cache {
  std::vector<Eigen::ArrayXcd> conv_in_x, conv_in_y;  // input of conv i
  std::vector<Eigen::ArrayXcd> act_in_x, act_in_y;    // input of activation j
  std::vector<Eigen::ArrayXd> act_phase;

  explicit Cache(Eigen::Index n_layers)
      : conv_in_x(n_layers), conv_in_y(n_layers), act_in_x(n_layers - 1),
        act_in_y(n_layers - 1), act_phase(n_layers - 1) {}
};

void forward_impl(const LdbpModel& model, const Eigen::ArrayXcd& x,
                  const Eigen::ArrayXcd& y, Cache* cache, Eigen::ArrayXcd& fx,
                  Eigen::ArrayXcd& fy) {
  const Eigen::Index layers = model.n_layers();
  Eigen::ArrayXcd cur_x = x, cur_y = y, cx, cy;
  for (Eigen::Index i = 0; i < layers; ++i) {
    if (cache) {
      cache->conv_in_x[i] = cur_x;
      cache->conv_in_y[i] = cur_y;
    }
    conv_same(model.taps[i], cur_x, cx);
    conv_same(model.taps[i], cur_y, cy);
    if (i + 1 < layers) {
      const Eigen::ArrayXd phase =
          -model.phase_coeff[i] * (cx.abs2() + cy.abs2());
      const Eigen::ArrayXcd rot = unit_phasor(phase);
      if (cache) {
        cache->act_in_x[i] = cx;
        cache->act_in_y[i] = cy;
        cache->act_phase[i] = phase;
      }
      cur_x = cx * rot;
      cur_y = cy * rot;
    } else {
      cur_x.swap(cx);
      cur_y.swap(cy);
    }
  }
  fx.swap(cur_x);
  fy.swap(cur_y);
}

Eigen::ArrayXd get_params(const LdbpModel& model) {
  const Eigen::Index nk = model.tap_count();
  Eigen::ArrayXd p(model.param_count());
  for (Eigen::Index i = 0; i < model.n_layers(); ++i) {
    p.segment(2 * nk * i, nk) = model.taps[i].real();
    p.segment(2 * nk * i + nk, nk) = model.taps[i].imag();
  }
  return p;
}

void set_params(LdbpModel& model, const Eigen::ArrayXd& p) {
  const Eigen::Index nk = model.tap_count();
  for (Eigen::Index i = 0; i < model.n_layers(); ++i)
    model.taps[i] = p.segment(2 * nk * i, nk) +
                    cd(0.0, 1.0) * p.segment(2 * nk * i + nk, nk);
}

// Forward, loss, and parameter/input gradients for one window.  The MSE over
// the four real output channels uses denom = 4 * out_len * batch; returns the
// raw squared error so the caller can aggregate losses consistently.
double backward_window(const LdbpModel& model, const Eigen::ArrayXcd& x,
                       const Eigen::ArrayXcd& y, const Eigen::ArrayXcd& tx,
                       const Eigen::ArrayXcd& ty, double denom,
                       Eigen::ArrayXd& grad) {
  const Eigen::Index layers = model.n_layers();
  const Eigen::Index nk = model.tap_count();
  const Eigen::Index m = model.trim_per_side;
  const Eigen::Index out_len = x.size() - 2 * m;

  Cache cache(layers);
  Eigen::ArrayXcd fx, fy;
  forward_impl(model, x, y, &cache, fx, fy);

  const Eigen::ArrayXcd dx = fx.segment(m, out_len) - tx;
  const Eigen::ArrayXcd dy = fy.segment(m, out_len) - ty;
  const double raw = dx.abs2().sum() + dy.abs2().sum();

  Eigen::ArrayXcd gx = Eigen::ArrayXcd::Zero(x.size());
  Eigen::ArrayXcd gy = Eigen::ArrayXcd::Zero(x.size());
  gx.segment(m, out_len) = dx / denom;
  gy.segment(m, out_len) = dy / denom;

  Eigen::ArrayXcd acc(nk), tmp_x, tmp_y;
  for (Eigen::Index i = layers - 1; i >= 0; --i) {
    acc.setZero();
    conv_tap_grad(gx, cache.conv_in_x[i], acc);
    conv_tap_grad(gy, cache.conv_in_y[i], acc);
    grad.segment(2 * nk * i, nk) += 2.0 * acc.real();
    grad.segment(2 * nk * i + nk, nk) += 2.0 * acc.imag();

    conv_adjoint(model.taps[i], gx, tmp_x);
    conv_adjoint(model.taps[i], gy, tmp_y);
    gx.swap(tmp_x);
    gy.swap(tmp_y);

    if (i > 0) {
      const Eigen::Index j = i - 1;
      const Eigen::ArrayXcd& ax = cache.act_in_x[j];
      const Eigen::ArrayXcd& ay = cache.act_in_y[j];
      const Eigen::ArrayXcd em = unit_phasor(-cache.act_phase[j]);
      const Eigen::ArrayXcd s = gx * em;
      const Eigen::ArrayXcd t = gy * em;
      const Eigen::ArrayXd rho =
          (ax.conjugate() * s).imag() + (ay.conjugate() * t).imag();
      const double c = model.phase_coeff[j];
      gx = s - 2.0 * c * rho.cast<cd>() * ax;
      gy = t - 2.0 * c * rho.cast<cd>() * ay;
    }
  }
  return raw;
}

struct Adam {
  Eigen::ArrayXd m, v;
  int t = 0;

  explicit Adam(Eigen::Index n) : m(Eigen::ArrayXd::Zero(n)), v(Eigen::ArrayXd::Zero(n)) {}

  void step(Eigen::ArrayXd& params, const Eigen::ArrayXd& grad,
            const TrainConfig& cfg) {
    ++t;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.square();
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    params -= cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.adam_eps);
  }
};

}  // namespace

Eigen::Index LdbpModel::tap_count() const {
  return taps.empty() ? 0 : taps.front().size();
}

void LdbpModel::validate() const {
  if (taps.empty()) throw std::invalid_argument("ldbp model: no layers");
  const Eigen::Index nk = taps.front().size();
  if (nk < 1 || nk % 2 == 0)
    throw std::invalid_argument("ldbp model: tap count must be odd");
  for (const Eigen::ArrayXcd& t : taps)
    if (t.size() != nk)
      throw std::invalid_argument("ldbp model: layers must share one tap count");
  if (static_cast<Eigen::Index>(phase_coeff.size()) != n_layers() - 1)
    throw std::invalid_argument(
        "ldbp model: need exactly one activation between consecutive layers");
  if (trim_per_side < 0) throw std::invalid_argument("ldbp model: negative trim");
  if (!(power_ref_w > 0.0))
    throw std::invalid_argument("ldbp model: power reference must be positive");
}

LdbpModel ldbp_from_plan(const DbpPlan& plan, double sample_rate_hz,
                         Eigen::Index design_grid, Eigen::Index trim_per_side,
                         double power_ref_w) {
  plan.validate();
  if (!(power_ref_w > 0.0))
    throw std::invalid_argument("ldbp_from_plan: power reference must be positive");
  LdbpModel model;
  model.trim_per_side = trim_per_side;
  model.power_ref_w = power_ref_w;
  for (const DbpLinearStep& s : plan.linear) {
    Eigen::ArrayXcd taps =
        design_cdc_fir(s.dc_ps_nm, sample_rate_hz, design_grid, plan.fir_half_taps,
                       plan.band_fraction);
    taps *= std::exp(s.amp_log);
    model.taps.push_back(std::move(taps));
  }
  for (double d : plan.delta_eff_km)
    model.phase_coeff.push_back(8.0 / 9.0 * plan.gamma_per_w_km * plan.epsilon *
                                d * power_ref_w);
  model.validate();
  return model;
}

void LdbpDataset::validate() const {
  const Eigen::Index n = rx_x.size();
  if (rx_y.size() != n || tx_x.size() != n || tx_y.size() != n)
    throw std::invalid_argument("ldbp dataset: stream sizes differ");
  if (window < 1 || stride < 1 || window > n)
    throw std::invalid_argument("ldbp dataset: bad window or stride");
  if (!(power_ref_w > 0.0))
    throw std::invalid_argument("ldbp dataset: power reference must be positive");
}

LdbpDataset make_dataset(const DualPolBlock& rx, const DualPolBlock& target,
                         Eigen::Index window, Eigen::Index stride) {
  rx.validate();
  target.validate();
  if (rx.size() != target.size())
    throw std::invalid_argument("make_dataset: received/target sizes differ");
  if (std::abs(rx.sample_rate_hz - target.sample_rate_hz) >
      1e-6 * target.sample_rate_hz)
    throw std::invalid_argument("make_dataset: received/target rates differ");
  const double p = target.mean_power_w();
  if (!(p > 0.0)) throw std::invalid_argument("make_dataset: empty target");

  LdbpDataset data;
  const double scale = 1.0 / std::sqrt(p);
  data.rx_x = rx.x * scale;
  data.rx_y = rx.y * scale;
  data.tx_x = target.x * scale;
  data.tx_y = target.y * scale;
  data.power_ref_w = p;
  data.window = window;
  data.stride = stride;
  data.validate();
  return data;
}

void ldbp_forward(const LdbpModel& model, const Eigen::ArrayXcd& x,
                  const Eigen::ArrayXcd& y, Eigen::ArrayXcd& out_x,
                  Eigen::ArrayXcd& out_y) {
  model.validate();
  if (x.size() != y.size())
    throw std::invalid_argument("ldbp_forward: polarization sizes differ");
  const Eigen::Index out_len = x.size() - 2 * model.trim_per_side;
  if (out_len < 1)
    throw std::invalid_argument("ldbp_forward: window consumed by the trim");
  Eigen::ArrayXcd fx, fy;
  forward_impl(model, x, y, nullptr, fx, fy);
  out_x = fx.segment(model.trim_per_side, out_len);
  out_y = fy.segment(model.trim_per_side, out_len);
}

DualPolBlock ldbp_equalize(const DualPolBlock& rx, const LdbpModel& model,
                           Eigen::Index window_n) {
  model.validate();
  rx.validate();
  const Eigen::Index n = rx.size();
  const Eigen::Index m = model.trim_per_side;
  const Eigen::Index out_len = window_n - 2 * m;
  if (out_len < 1 || window_n > n)
    throw std::invalid_argument("ldbp_equalize: bad window size");

  const double scale = 1.0 / std::sqrt(model.power_ref_w);
  DualPolBlock out(n, rx.sample_rate_hz);
  Eigen::ArrayXcd wx(window_n), wy(window_n), ox, oy;
  for (Eigen::Index w0 = 0; w0 < n; w0 += out_len) {
    const Eigen::Index write = std::min(w0, n - out_len);
    for (Eigen::Index j = 0; j < window_n; ++j) {
      const Eigen::Index src = ((write - m + j) % n + n) % n;
      wx[j] = rx.x[src] * scale;
      wy[j] = rx.y[src] * scale;
    }
    ldbp_forward(model, wx, wy, ox, oy);
    out.x.segment(write, out_len) = ox;
    out.y.segment(write, out_len) = oy;
  }
  out.x *= std::sqrt(model.power_ref_w);
  out.y *= std::sqrt(model.power_ref_w);
  return out;
}

TrainReport train_ldbp(LdbpModel& model, const LdbpDataset& data,
                       const TrainConfig& cfg) {
  model.validate();
  data.validate();
  if (cfg.batch < 1 || cfg.max_epochs < 1 || cfg.patience < 1)
    throw std::invalid_argument("train_ldbp: bad loop configuration");
  if (!(cfg.lr > 0.0) || !(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0))
    throw std::invalid_argument("train_ldbp: bad rate or validation fraction");
  const Eigen::Index out_len = data.window - 2 * model.trim_per_side;
  if (out_len < 1)
    throw std::invalid_argument("train_ldbp: window consumed by the trim");
  const Eigen::Index n_windows = data.n_windows();
  if (n_windows < 2) throw std::invalid_argument("train_ldbp: dataset too small");

  std::mt19937_64 eng(cfg.seed);
  std::vector<Eigen::Index> idx(n_windows);
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), eng);
  const Eigen::Index n_val =
      static_cast<Eigen::Index>(std::llround(cfg.val_fraction * double(n_windows)));
  std::vector<Eigen::Index> val_idx(idx.end() - n_val, idx.end());
  std::vector<Eigen::Index> train_idx(idx.begin(), idx.end() - n_val);
  if (train_idx.empty()) throw std::invalid_argument("train_ldbp: no training windows");

  const Eigen::Index m = model.trim_per_side;
  auto window_in = [&](Eigen::Index w, Eigen::ArrayXcd& x, Eigen::ArrayXcd& y) {
    const Eigen::Index o = w * data.stride;
    x = data.rx_x.segment(o, data.window);
    y = data.rx_y.segment(o, data.window);
  };
  auto window_target = [&](Eigen::Index w, Eigen::ArrayXcd& x, Eigen::ArrayXcd& y) {
    const Eigen::Index o = w * data.stride + m;
    x = data.tx_x.segment(o, out_len);
    y = data.tx_y.segment(o, out_len);
  };

  auto mean_loss = [&](const std::vector<Eigen::Index>& set) {
    double raw = 0.0;
    Eigen::ArrayXcd x, y, tx, ty, fx, fy;
    for (Eigen::Index w : set) {
      window_in(w, x, y);
      window_target(w, tx, ty);
      ldbp_forward(model, x, y, fx, fy);
      raw += (fx - tx).abs2().sum() + (fy - ty).abs2().sum();
    }
    return raw / (4.0 * double(out_len) * double(set.size()));
  };

  Eigen::ArrayXd params = get_params(model);
  Eigen::ArrayXd grad(params.size());
  Adam opt(params.size());

  TrainReport report;
  Eigen::ArrayXd best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  Eigen::ArrayXcd x, y, tx, ty;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), eng);
    double epoch_raw = 0.0;
    for (std::size_t at = 0; at < train_idx.size(); at += cfg.batch) {
      const std::size_t bsz =
          std::min<std::size_t>(cfg.batch, train_idx.size() - at);
      const double denom = 4.0 * double(out_len) * double(bsz);
      grad.setZero();
      for (std::size_t b = 0; b < bsz; ++b) {
        const Eigen::Index w = train_idx[at + b];
        window_in(w, x, y);
        window_target(w, tx, ty);
        epoch_raw += backward_window(model, x, y, tx, ty, denom, grad);
      }
      opt.step(params, grad, cfg);
      set_params(model, params);
    }
    report.train_loss.push_back(
        epoch_raw / (4.0 * double(out_len) * double(train_idx.size())));
    const double vl = val_idx.empty() ? report.train_loss.back() : mean_loss(val_idx);
    report.val_loss.push_back(vl);

    if (vl < best_val) {
      best_val = vl;
      report.best_epoch = epoch;
      best_params = params;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  set_params(model, best_params);
  report.best_val = best_val;
  return report;
}

double gradient_check(const LdbpModel& model, const Eigen::ArrayXcd& x,
                      const Eigen::ArrayXcd& y, const Eigen::ArrayXcd& tx,
                      const Eigen::ArrayXcd& ty, double h) {
  model.validate();
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: bad step");
  const Eigen::Index out_len = x.size() - 2 * model.trim_per_side;
  if (tx.size() != out_len || ty.size() != out_len)
    throw std::invalid_argument("gradient_check: target size must match the trim");

  const double denom = 4.0 * double(out_len);
  Eigen::ArrayXd analytic(model.param_count());
  analytic.setZero();
  backward_window(model, x, y, tx, ty, denom, analytic);

  LdbpModel probe = model;
  Eigen::ArrayXd params = get_params(probe);
  auto loss_at = [&]() {
    Eigen::ArrayXcd fx, fy;
    ldbp_forward(probe, x, y, fx, fy);
    return ((fx - tx).abs2().sum() + (fy - ty).abs2().sum()) / denom;
  };

  Eigen::ArrayXd numeric(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    set_params(probe, params);
    const double up = loss_at();
    params[i] = keep - h;
    set_params(probe, params);
    const double down = loss_at();
    params[i] = keep;
    numeric[i] = (up - down) / (2.0 * h);
  }
  const double scale = std::max(numeric.abs().maxCoeff(), 1e-12);
  return (analytic - numeric).abs().maxCoeff() / scale;
}

void save_checkpoint(const LdbpModel& model, const std::string& path) {
  model.validate();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::invalid_argument("save_checkpoint: cannot open " + path);
  const char magic[16] = "ldbp-ckpt-v1";
  f.write(magic, sizeof magic);
  const std::int64_t dims[4] = {model.n_layers(), model.tap_count(),
                                static_cast<std::int64_t>(model.phase_coeff.size()),
                                model.trim_per_side};
  f.write(reinterpret_cast<const char*>(dims), sizeof dims);
  f.write(reinterpret_cast<const char*>(&model.power_ref_w), sizeof(double));
  for (const Eigen::ArrayXcd& t : model.taps) {
    const Eigen::ArrayXd re = t.real(), im = t.imag();
    f.write(reinterpret_cast<const char*>(re.data()), re.size() * sizeof(double));
    f.write(reinterpret_cast<const char*>(im.data()), im.size() * sizeof(double));
  }
  f.write(reinterpret_cast<const char*>(model.phase_coeff.data()),
          model.phase_coeff.size() * sizeof(double));
  if (!f) throw std::invalid_argument("save_checkpoint: write failed for " + path);
}

LdbpModel load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("load_checkpoint: cannot open " + path);
  char magic[16] = {};
  f.read(magic, sizeof magic);
  if (std::strncmp(magic, "ldbp-ckpt-v1", sizeof magic) != 0)
    throw std::invalid_argument("load_checkpoint: not a model checkpoint");
  std::int64_t dims[4] = {};
  f.read(reinterpret_cast<char*>(dims), sizeof dims);
  const std::int64_t layers = dims[0], nk = dims[1], acts = dims[2], trim = dims[3];
  if (layers < 1 || nk < 1 || nk % 2 == 0 || acts != layers - 1 || trim < 0)
    throw std::invalid_argument("load_checkpoint: corrupt header");

  LdbpModel model;
  model.trim_per_side = trim;
  f.read(reinterpret_cast<char*>(&model.power_ref_w), sizeof(double));
  Eigen::ArrayXd re(nk), im(nk);
  for (std::int64_t i = 0; i < layers; ++i) {
    f.read(reinterpret_cast<char*>(re.data()), nk * sizeof(double));
    f.read(reinterpret_cast<char*>(im.data()), nk * sizeof(double));
    model.taps.push_back(re + cd(0.0, 1.0) * im);
  }
  model.phase_coeff.resize(acts);
  f.read(reinterpret_cast<char*>(model.phase_coeff.data()), acts * sizeof(double));
  if (!f) throw std::invalid_argument("load_checkpoint: truncated file");
  model.validate();
  return model;
}

}  // namespace fiber
