#include "fiber/dbp.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "fiber/fft.hpp"
#include "fiber/units.hpp"

namespace fiber {
namespace {

constexpr double kLn10 = 2.302585092994046;

double atten_power_per_km(const FiberSegmentSpec& f) {
  return f.alpha_db_per_km * kLn10 / 10.0;
}

// One fiber with its position and the net log-amplitude (launch reference,
// nepers) at its input; amplifiers located exactly at a queried position are
// counted as already passed.
struct FiberExtent {
  double z0_km = 0.0, z1_km = 0.0;
  const FiberSegmentSpec* fiber = nullptr;
  bool first_in_span = false;
  double amp_log_in = 0.0;
};

struct LinkWalk {
  std::vector<FiberExtent> extents;
  double final_amp_log = 0.0;
};

LinkWalk walk_link(const LinkSpec& link) {
  LinkWalk walk;
  double z = 0.0, lam = 0.0;
  for (const SpanSpec& span : link.spans) {
    for (std::size_t i = 0; i < span.fibers.size(); ++i) {
      const FiberSegmentSpec& f = span.fibers[i];
      walk.extents.push_back({z, z + f.length_km, &f, i == 0, lam});
      z += f.length_km;
      lam -= f.alpha_db_per_km * f.length_km * kLn10 / 20.0;
      lam += span.amps[i].gain_db * kLn10 / 20.0;
    }
  }
  walk.final_amp_log = lam;
  return walk;
}

double amp_log_at(const LinkWalk& walk, double z) {
  for (const FiberExtent& e : walk.extents)
    if (z < e.z1_km - 1e-9)
      return e.amp_log_in -
             e.fiber->alpha_db_per_km * (z - e.z0_km) * kLn10 / 20.0;
  return walk.final_amp_log;
}

double tile_eff_length(const LinkWalk& walk, DbpEffLength mode,
                       double gamma_ref, double atten_ref, double ta, double tb) {
  if (mode == DbpEffLength::flat) {
    const double dz = tb - ta;
    return atten_ref > 0.0 ? (1.0 - std::exp(-atten_ref * dz)) / atten_ref : dz;
  }
  double eff = 0.0;
  for (const FiberExtent& e : walk.extents) {
    const double oa = std::max(ta, e.z0_km), ob = std::min(tb, e.z1_km);
    if (ob - oa <= 1e-12) continue;
    if (mode == DbpEffLength::smf_profile && !e.first_in_span) continue;
    const double ap = atten_power_per_km(*e.fiber);
    const double integ =
        ap > 0.0 ? (std::exp(-ap * (oa - e.z0_km)) - std::exp(-ap * (ob - e.z0_km))) / ap
                 : ob - oa;
    double w = std::exp(2.0 * e.amp_log_in);  // input power, launch reference
    if (mode == DbpEffLength::all_fiber)
      w *= e.fiber->gamma_per_w_km / gamma_ref;
    eff += w * integ;
  }
  return eff;
}

const char* domain_name(DbpDomain d) {
  return d == DbpDomain::frequency ? "frequency" : "time";
}
const char* gain_name(DbpGainMode g) {
  return g == DbpGainMode::balanced ? "balanced" : "span_loss";
}
const char* eff_name(DbpEffLength e) {
  switch (e) {
    case DbpEffLength::smf_profile: return "smf_profile";
    case DbpEffLength::all_fiber: return "all_fiber";
    default: return "flat";
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double DbpPlan::total_dc_ps_nm() const {
  double sum = 0.0;
  for (const DbpLinearStep& s : linear) sum += s.dc_ps_nm;
  return sum;
}

void DbpPlan::validate() const {
  if (linear.size() != delta_eff_km.size() + 1)
    throw std::invalid_argument("dbp plan: linear/nonlinear step counts inconsistent");
  if (!(gamma_per_w_km >= 0.0) || !(epsilon >= 0.0))
    throw std::invalid_argument("dbp plan: negative gamma or epsilon");
  for (double d : delta_eff_km)
    if (!(d >= 0.0)) throw std::invalid_argument("dbp plan: negative effective length");
  if (fir_half_taps < 1)
    throw std::invalid_argument("dbp plan: fir_half_taps must be at least 1");
  if (!(band_fraction > 0.0 && band_fraction <= 1.0))
    throw std::invalid_argument("dbp plan: band fraction outside (0, 1]");
  if (steps_num < 1 || steps_den < 1)
    throw std::invalid_argument("dbp plan: bad steps-per-span ratio");
}

DbpPlan plan_steps(const LinkSpec& link, int steps_num, int steps_den,
                   DbpGainMode gain_mode, DbpEffLength eff_mode,
                   int fir_half_taps) {
  link.validate();
  if (steps_num < 1 || steps_den < 1)
    throw std::invalid_argument("plan_steps: steps ratio must be positive");
  const int n_spans = static_cast<int>(link.spans.size());
  if ((static_cast<long>(n_spans) * steps_num) % steps_den != 0)
    throw std::invalid_argument("plan_steps: steps per span do not tile the link");
  const int n_nl = n_spans * steps_num / steps_den;

  const DispersionMap map = build_dispersion_map(link);
  const LinkWalk walk = walk_link(link);
  const FiberSegmentSpec& ref = link.spans.front().fibers.front();
  const double total = link.length_km();
  const double dd = total / n_nl;

  // Interval boundaries in forward order: 0, (k-1/2) dd, total.
  std::vector<double> bounds;
  bounds.push_back(0.0);
  for (int k = 1; k <= n_nl; ++k) bounds.push_back((k - 0.5) * dd);
  bounds.push_back(total);

  DbpPlan plan;
  plan.gamma_per_w_km = ref.gamma_per_w_km;
  plan.steps_num = steps_num;
  plan.steps_den = steps_den;
  plan.gain_mode = gain_mode;
  plan.eff_mode = eff_mode;
  plan.fir_half_taps =
      fir_half_taps > 0 ? fir_half_taps : default_fir_half_taps(steps_num, steps_den);

  for (int i = n_nl; i >= 0; --i) {  // receiver-first order
    DbpLinearStep s;
    s.dc_ps_nm = map.at(bounds[i + 1]) - map.at(bounds[i]);
    if (gain_mode == DbpGainMode::span_loss)
      s.amp_log = amp_log_at(walk, bounds[i]) - amp_log_at(walk, bounds[i + 1]);
    plan.linear.push_back(s);
  }
  for (int t = n_nl - 1; t >= 0; --t)
    plan.delta_eff_km.push_back(tile_eff_length(
        walk, eff_mode, ref.gamma_per_w_km, atten_power_per_km(ref), t * dd,
        (t + 1) * dd));
  plan.validate();
  return plan;
}

int default_fir_half_taps(int steps_num, int steps_den) {
  const int g = std::gcd(steps_num, steps_den);
  const int num = steps_num / g, den = steps_den / g;
  if (num == 1) {
    switch (den) {
      case 1: return 16;
      case 2: return 16;
      case 4: return 24;
      case 7: return 30;
      case 14: return 36;
      default: break;
    }
  }
  throw std::invalid_argument("default_fir_half_taps: step density not in the table");
}

int min_fir_taps(double dc_ps_nm, double bandwidth_hz, double sample_rate_hz) {
  if (bandwidth_hz <= 0.0 || sample_rate_hz <= 0.0)
    throw std::invalid_argument("min_fir_taps: bad bandwidth or rate");
  const double dlambda =
      kCarrierWavelength * kCarrierWavelength / kSpeedOfLight * bandwidth_hz;
  const double tau = std::abs(dc_ps_nm) * 1e-3 * dlambda;  // ps/nm = 1e-3 s/m
  return static_cast<int>(std::ceil(tau * sample_rate_hz - 1e-9));
}

Eigen::ArrayXcd design_cdc_fir(double dc_ps_nm, double sample_rate_hz,
                               Eigen::Index grid_n, int half_taps,
                               double band_fraction) {
  if (half_taps < 1 || 2 * half_taps + 1 > grid_n)
    throw std::invalid_argument("design_cdc_fir: tap count exceeds the design grid");
  if (!(band_fraction > 0.0 && band_fraction <= 1.0))
    throw std::invalid_argument("design_cdc_fir: band fraction outside (0, 1]");
  const double b2l = beta2_length_from_dc(dc_ps_nm);
  const Eigen::ArrayXd w = angular_freq_grid(grid_n, sample_rate_hz);
  const Eigen::ArrayXcd target = (cd(0.0, -0.5 * b2l) * w.square()).exp();

  const int F = half_taps;
  // The response is even in frequency, so the taps come out even in lag up
  // to grid asymmetry at Nyquist; enforce the symmetry exactly.
  auto symmetrize = [F](Eigen::ArrayXcd& t) {
    for (int m = 1; m <= F; ++m) {
      const cd avg = 0.5 * (t[F + m] + t[F - m]);
      t[F + m] = avg;
      t[F - m] = avg;
    }
  };

  if (band_fraction == 1.0) {
    const Eigen::ArrayXcd h = idft(target);
    Eigen::ArrayXcd taps(2 * F + 1);
    for (int m = -F; m <= F; ++m) taps[F + m] = h[(m + grid_n) % grid_n];
    symmetrize(taps);
    return taps;
  }

  // Weighted least squares against the sampled response: unit weight inside
  // the occupied band, a small one outside.  On the uniform grid the normal
  // equations collapse to a real symmetric Toeplitz system whose diagonals
  // and right-hand side are inverse transforms of the weight mask and of the
  // weighted response; the small outside weight doubles as ridge
  // regularization, keeping the system well conditioned however short the
  // band is relative to the tap count.
  constexpr double kOutOfBandWeight = 1e-3;
  const double w_edge = band_fraction * M_PI * sample_rate_hz;
  Eigen::ArrayXd mask(grid_n);
  for (Eigen::Index m = 0; m < grid_n; ++m)
    mask[m] = std::abs(w[m]) <= w_edge ? 1.0 : kOutOfBandWeight;
  const Eigen::ArrayXcd corr = idft(mask.cast<cd>().eval());
  const Eigen::ArrayXcd cross = idft((mask.cast<cd>() * target).eval());

  const int K = 2 * F + 1;
  Eigen::MatrixXd gram(K, K);
  for (int k = 0; k < K; ++k)
    for (int l = 0; l < K; ++l) gram(k, l) = corr[std::abs(k - l)].real();
  Eigen::VectorXd re(K), im(K);
  for (int k = 0; k < K; ++k) {
    const cd v = cross[((k - F) % grid_n + grid_n) % grid_n];
    re[k] = v.real();
    im[k] = v.imag();
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("design_cdc_fir: singular design system");
  const Eigen::VectorXd tr = llt.solve(re), ti = llt.solve(im);
  Eigen::ArrayXcd taps(K);
  for (int k = 0; k < K; ++k) taps[k] = cd(tr[k], ti[k]);
  symmetrize(taps);
  return taps;
}

void run_dbp(DualPolBlock& block, const DbpPlan& plan) {
  plan.validate();
  block.validate();
  const Eigen::Index n = block.size();
  const Eigen::ArrayXd w = angular_freq_grid(n, block.sample_rate_hz);

  // Identical linear steps share one response (interior steps of a uniform
  // ladder all remove the same dispersion).
  std::map<std::pair<double, double>, Eigen::ArrayXcd> responses;
  auto response = [&](const DbpLinearStep& s) -> const Eigen::ArrayXcd& {
    auto it = responses.find({s.dc_ps_nm, s.amp_log});
    if (it != responses.end()) return it->second;
    Eigen::ArrayXcd resp;
    if (plan.domain == DbpDomain::frequency) {
      const double b2l = beta2_length_from_dc(s.dc_ps_nm);
      resp = (cd(0.0, -0.5 * b2l) * w.square()).exp();
    } else {
      const Eigen::ArrayXcd taps =
          design_cdc_fir(s.dc_ps_nm, block.sample_rate_hz, n, plan.fir_half_taps,
                         plan.band_fraction);
      Eigen::ArrayXcd kernel = Eigen::ArrayXcd::Zero(n);
      kernel[0] = taps[plan.fir_half_taps];
      for (int m = 1; m <= plan.fir_half_taps; ++m) {
        kernel[m] = taps[plan.fir_half_taps + m];
        kernel[n - m] = taps[plan.fir_half_taps - m];
      }
      resp = dft(kernel);
    }
    resp *= std::exp(s.amp_log);
    return responses.emplace(std::make_pair(s.dc_ps_nm, s.amp_log), std::move(resp))
        .first->second;
  };

  const int n_nl = plan.n_nonlinear();
  Eigen::ArrayXcd X = dft(block.x), Y = dft(block.y);
  for (int i = 0; i <= n_nl; ++i) {
    const Eigen::ArrayXcd& resp = response(plan.linear[i]);
    X *= resp;
    Y *= resp;
    if (i < n_nl) {
      Eigen::ArrayXcd x = idft(X), y = idft(Y);
      const double c =
          8.0 / 9.0 * plan.gamma_per_w_km * plan.epsilon * plan.delta_eff_km[i];
      const Eigen::ArrayXd phase = -c * (x.abs2() + y.abs2());
      const Eigen::ArrayXcd rot =
          phase.cos().cast<cd>() + cd(0.0, 1.0) * phase.sin().cast<cd>();
      x *= rot;
      y *= rot;
      X = dft(x);
      Y = dft(y);
    }
  }
  block.x = idft(X);
  block.y = idft(Y);
}

double optimize_epsilon(DbpPlan& plan,
                        const std::function<double(const DbpPlan&)>& score,
                        double step) {
  if (!(step > 0.0 && step <= 1.0))
    throw std::invalid_argument("optimize_epsilon: bad grid step");
  double best_eps = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int i = 0;; ++i) {
    double eps = i * step;
    if (eps > 1.0 + 1e-12) break;
    eps = std::min(eps, 1.0);
    plan.epsilon = eps;
    const double s = score(plan);
    if (s > best_score) {  // strict: ties keep the smaller epsilon
      best_score = s;
      best_eps = eps;
    }
    if (eps >= 1.0) break;
  }
  plan.epsilon = best_eps;
  return best_score;
}

std::string plan_to_text(const DbpPlan& plan) {
  plan.validate();
  std::ostringstream out;
  out << "dbp-plan v1\n";
  out << "steps " << plan.steps_num << " " << plan.steps_den << "\n";
  out << "domain " << domain_name(plan.domain) << "\n";
  out << "gain " << gain_name(plan.gain_mode) << "\n";
  out << "eff " << eff_name(plan.eff_mode) << "\n";
  out << "gamma " << fmt_double(plan.gamma_per_w_km) << "\n";
  out << "epsilon " << fmt_double(plan.epsilon) << "\n";
  out << "fir_half_taps " << plan.fir_half_taps << "\n";
  out << "band " << fmt_double(plan.band_fraction) << "\n";
  out << "linear " << plan.linear.size() << "\n";
  for (const DbpLinearStep& s : plan.linear)
    out << fmt_double(s.dc_ps_nm) << " " << fmt_double(s.amp_log) << "\n";
  out << "nl " << plan.delta_eff_km.size() << "\n";
  for (double d : plan.delta_eff_km) out << fmt_double(d) << "\n";
  out << "end\n";
  return out.str();
}

DbpPlan plan_from_text(const std::string& text) {
  std::istringstream in(text);
  auto fail = [](const std::string& what) -> std::invalid_argument {
    return std::invalid_argument("plan_from_text: " + what);
  };
  auto expect = [&](const std::string& tag) {
    std::string tok;
    if (!(in >> tok) || tok != tag) throw fail("expected '" + tag + "'");
  };

  expect("dbp-plan");
  expect("v1");
  DbpPlan plan;
  expect("steps");
  if (!(in >> plan.steps_num >> plan.steps_den)) throw fail("bad steps");
  std::string tok;
  expect("domain");
  in >> tok;
  if (tok == "frequency") plan.domain = DbpDomain::frequency;
  else if (tok == "time") plan.domain = DbpDomain::time;
  else throw fail("unknown domain '" + tok + "'");
  expect("gain");
  in >> tok;
  if (tok == "balanced") plan.gain_mode = DbpGainMode::balanced;
  else if (tok == "span_loss") plan.gain_mode = DbpGainMode::span_loss;
  else throw fail("unknown gain mode '" + tok + "'");
  expect("eff");
  in >> tok;
  if (tok == "smf_profile") plan.eff_mode = DbpEffLength::smf_profile;
  else if (tok == "all_fiber") plan.eff_mode = DbpEffLength::all_fiber;
  else if (tok == "flat") plan.eff_mode = DbpEffLength::flat;
  else throw fail("unknown effective-length mode '" + tok + "'");
  expect("gamma");
  if (!(in >> plan.gamma_per_w_km)) throw fail("bad gamma");
  expect("epsilon");
  if (!(in >> plan.epsilon)) throw fail("bad epsilon");
  expect("fir_half_taps");
  if (!(in >> plan.fir_half_taps)) throw fail("bad fir_half_taps");
  expect("band");
  if (!(in >> plan.band_fraction)) throw fail("bad band fraction");

  std::size_t n = 0;
  expect("linear");
  if (!(in >> n)) throw fail("bad linear count");
  plan.linear.resize(n);
  for (DbpLinearStep& s : plan.linear)
    if (!(in >> s.dc_ps_nm >> s.amp_log)) throw fail("bad linear step");
  expect("nl");
  if (!(in >> n)) throw fail("bad nonlinear count");
  plan.delta_eff_km.resize(n);
  for (double& d : plan.delta_eff_km)
    if (!(in >> d)) throw fail("bad effective length");
  expect("end");
  plan.validate();
  return plan;
}

}  // namespace fiber
