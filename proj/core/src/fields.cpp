#include "zrp/fields.hpp"

#include <algorithm>
#include <cmath>

#include "zrp/errors.hpp"
#include "zrp/kinetics.hpp"

namespace zrp {

namespace {

// Cubic B-spline on [0,4) and its derivatives; C^2, peak 2/3 at x = 2.
double bspline3(double x) {
  if (x <= 0.0 || x >= 4.0) return 0.0;
  if (x < 1.0) return x * x * x / 6.0;
  if (x < 2.0) return (-3 * x * x * x + 12 * x * x - 12 * x + 4) / 6.0;
  if (x < 3.0) return (3 * x * x * x - 24 * x * x + 60 * x - 44) / 6.0;
  double r = 4.0 - x;
  return r * r * r / 6.0;
}

double bspline3_d(double x) {
  if (x <= 0.0 || x >= 4.0) return 0.0;
  if (x < 1.0) return x * x / 2.0;
  if (x < 2.0) return (-9 * x * x + 24 * x - 12) / 6.0;
  if (x < 3.0) return (9 * x * x - 48 * x + 60) / 6.0;
  double r = 4.0 - x;
  return -r * r / 2.0;
}

double bspline3_dd(double x) {
  if (x <= 0.0 || x >= 4.0) return 0.0;
  if (x < 1.0) return x;
  if (x < 2.0) return (-18 * x + 24) / 6.0;
  if (x < 3.0) return (18 * x - 48) / 6.0;
  return 4.0 - x;
}

double poly_eval(const std::vector<double>& c, double tau) {
  double v = 0.0;
  for (size_t j = c.size(); j-- > 0;) v = v * tau + c[j];
  return v;
}

double poly_deriv_eval(const std::vector<double>& c, double tau) {
  double v = 0.0;
  for (size_t j = c.size(); j-- > 1;) v = v * tau + j * c[j];
  return v;
}

}  // namespace

TestFunction::TestFunction()
    : h_([](double, double) { return 0.0; }),
      dt_([](double, double) { return 0.0; }),
      du_([](double, double) { return 0.0; }),
      duu_([](double, double) { return 0.0; }),
      zero_(true) {}

TestFunction::TestFunction(Fn h, Fn dt, Fn du, Fn duu, double s0, double s1,
                           double horizon, bool time_dependent)
    : h_(std::move(h)),
      dt_(std::move(dt)),
      du_(std::move(du)),
      duu_(std::move(duu)),
      s0_(s0),
      s1_(s1),
      horizon_(horizon),
      time_dependent_(time_dependent),
      zero_(false),
      env_cache_(std::make_shared<EnvelopeTable>()) {}

TestFunction TestFunction::bump(double amplitude, double center,
                                double halfwidth,
                                std::vector<double> time_poly,
                                double horizon) {
  if (!(halfwidth > 0.0)) throw OutOfRange("bump halfwidth must be positive");
  while (time_poly.size() > 1 && time_poly.back() == 0.0)
    time_poly.pop_back();
  bool timedep = time_poly.size() > 1;
  auto q = [time_poly, horizon](double t) {
    return poly_eval(time_poly, t / horizon);
  };
  auto qp = [time_poly, horizon](double t) {
    return poly_deriv_eval(time_poly, t / horizon) / horizon;
  };
  auto shape = [center, halfwidth](double u) -> double {
    double r = (u - center) / halfwidth;
    if (std::abs(r) >= 1.0) return 0.0;
    double s = 1.0 - r * r;
    return s * s * s;
  };
  auto shape_d = [center, halfwidth](double u) -> double {
    double r = (u - center) / halfwidth;
    if (std::abs(r) >= 1.0) return 0.0;
    double s = 1.0 - r * r;
    return -6.0 * r * s * s / halfwidth;
  };
  auto shape_dd = [center, halfwidth](double u) -> double {
    double r = (u - center) / halfwidth;
    if (std::abs(r) >= 1.0) return 0.0;
    double s = 1.0 - r * r;
    return (-6.0 * s * s + 24.0 * r * r * s) / (halfwidth * halfwidth);
  };
  double A = amplitude;
  return TestFunction(
      [=](double t, double u) { return A * shape(u) * q(t); },
      [=](double t, double u) { return A * shape(u) * qp(t); },
      [=](double t, double u) { return A * shape_d(u) * q(t); },
      [=](double t, double u) { return A * shape_dd(u) * q(t); },
      center - halfwidth, center + halfwidth, horizon, timedep);
}

TestFunction TestFunction::spline_combo(double s0, double s1, int n_space,
                                        int n_time,
                                        std::span<const double> coeffs,
                                        double horizon) {
  if (n_space < 1 || n_time < 1 ||
      coeffs.size() != static_cast<size_t>(n_space) * n_time)
    throw OutOfRange("spline_combo coefficient count mismatch");
  if (!(s1 > s0)) throw OutOfRange("spline_combo needs s1 > s0");
  std::vector<double> c(coeffs.begin(), coeffs.end());
  const double h = (s1 - s0) / (n_space + 3);
  bool timedep = false;
  for (int i = 0; i < n_space; ++i)
    for (int j = 1; j < n_time; ++j)
      if (c[i * n_time + j] != 0.0) timedep = true;

  auto spatial = [=](double u, int deriv) -> std::vector<double> {
    std::vector<double> b(n_space, 0.0);
    double x = (u - s0) / h;
    // basis i supported on knots [i, i+4)
    int i_lo = std::max(0, static_cast<int>(std::ceil(x - 4.0)));
    int i_hi = std::min(n_space - 1, static_cast<int>(std::floor(x)));
    for (int i = i_lo; i <= i_hi; ++i) {
      double arg = x - i;
      double v = deriv == 0   ? bspline3(arg)
                 : deriv == 1 ? bspline3_d(arg) / h
                              : bspline3_dd(arg) / (h * h);
      b[i] = v;
    }
    return b;
  };
  auto combine = [=](double t, double u, int sderiv, bool tderiv) -> double {
    auto b = spatial(u, sderiv);
    double tau = t / horizon;
    double out = 0.0;
    for (int i = 0; i < n_space; ++i) {
      if (b[i] == 0.0) continue;
      double acc = 0.0;
      if (!tderiv) {
        for (int j = n_time; j-- > 0;) acc = acc * tau + c[i * n_time + j];
      } else {
        for (int j = n_time; j-- > 1;)
          acc = acc * tau + j * c[i * n_time + j];
        acc /= horizon;
      }
      out += b[i] * acc;
    }
    return out;
  };
  return TestFunction(
      [=](double t, double u) { return combine(t, u, 0, false); },
      [=](double t, double u) { return combine(t, u, 0, true); },
      [=](double t, double u) { return combine(t, u, 1, false); },
      [=](double t, double u) { return combine(t, u, 2, false); }, s0, s1,
      horizon, timedep);
}

const TestFunction::EnvelopeTable& TestFunction::envelope_table() const {
  EnvelopeTable& tab = *env_cache_;
  std::call_once(tab.once, [&] {
    // Grid maximization with 10x oversampling of the support, padded so the
    // nearest-cell lookup stays an upper bound.
    const double width = s1_ - s0_;
    const int n_sup = 10 * 32;
    tab.step = width / n_sup;
    tab.lo = s0_ - 1.0 - 2.0 * tab.step;
    const double hi = s1_ + 1.0 + 2.0 * tab.step;
    const int n = static_cast<int>(std::ceil((hi - tab.lo) / tab.step)) + 1;

    std::vector<double> t_probe;
    if (time_dependent_) {
      for (int i = 0; i <= 32; ++i) t_probe.push_back(horizon_ * i / 32.0);
    } else {
      t_probe.push_back(0.0);
    }

    // Pointwise max of |H|, |dH|, |d2H| over probed times.
    std::vector<double> m(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double u = tab.lo + i * tab.step;
      double v = 0.0;
      for (double t : t_probe) {
        double d = std::abs(du_(t, u));
        tab.max_du = std::max(tab.max_du, d);
        v = std::max({v, std::abs(h_(t, u)), d, std::abs(duu_(t, u))});
      }
      m[i] = v;
    }
    // G(u_i) = max of m over [u_i - 1 - pad, u_i + 1 + pad].
    tab.env.assign(n, 0.0);
    const int halo = static_cast<int>(std::ceil(1.0 / tab.step)) + 2;
    for (int i = 0; i < n; ++i) {
      double v = 0.0;
      for (int j = std::max(0, i - halo); j <= std::min(n - 1, i + halo); ++j)
        v = std::max(v, m[j]);
      tab.env[i] = v;
      tab.max_env = std::max(tab.max_env, v);
    }
  });
  return tab;
}

double TestFunction::envelope(double u) const {
  if (zero_) return 0.0;
  const EnvelopeTable& tab = envelope_table();
  double pos = (u - tab.lo) / tab.step;
  int i = static_cast<int>(std::floor(pos));
  if (i < 0 || i >= static_cast<int>(tab.env.size()) - 1) return 0.0;
  return std::max(tab.env[i], tab.env[i + 1]);
}

double TestFunction::max_abs_du() const {
  return zero_ ? 0.0 : envelope_table().max_du;
}

double TestFunction::max_envelope() const {
  return zero_ ? 0.0 : envelope_table().max_env;
}

CylinderObservable::CylinderObservable(
    int k0, std::function<double(std::span<const std::int32_t>)> eval,
    double lipschitz, std::string tag)
    : k0_(k0),
      eval_(std::move(eval)),
      lipschitz_(lipschitz),
      tag_(std::move(tag)) {
  if (k0_ < 0) throw OutOfRange("cylinder window radius must be >= 0");
}

CylinderObservable CylinderObservable::occupancy() {
  CylinderObservable psi(
      0, [](std::span<const std::int32_t> w) { return double(w[0]); }, 1.0,
      "occupancy");
  psi.exact_tilde_ = [](const FugacityMaps&, double rho) { return rho; };
  return psi;
}

CylinderObservable CylinderObservable::rate_at_origin(const RateFunction& g) {
  CylinderObservable psi(
      0, [g](std::span<const std::int32_t> w) { return g(w[0]); },
      g.max_increment(), "rate_at_origin");
  psi.exact_tilde_ = [](const FugacityMaps& maps, double rho) {
    // E[g(eta(0))] = phi/p sitewise, so the quenched mean is Phi(rho) E[1/p].
    return maps.fugacity(rho) * maps.mean_inverse_p();
  };
  return psi;
}

CylinderObservable CylinderObservable::pair_product() {
  // Lipschitz constant probed on occupations <= 20, not global.
  return CylinderObservable(
      1,
      [](std::span<const std::int32_t> w) { return double(w[1]) * w[2]; },
      20.0, "pair_product");
}

double CylinderObservable::operator()(
    std::span<const std::int32_t> window) const {
  return eval_(window);
}

double empirical_pairing(const Configuration& config, int N,
                         const TestFunction& G, double t) {
  const int L = config.size();
  double sum = 0.0;
  for (int x = 0; x < L; ++x) {
    if (config.eta[x] == 0) continue;
    double v = G(t, double(x) / N);
    if (v != 0.0) sum += v * config.eta[x];
  }
  return sum / N;
}

double block_average(const Configuration& config, int x, int l) {
  const int L = config.size();
  if (2 * l + 1 > L) throw BlockTooLarge("block exceeds lattice");
  long long s = 0;
  for (int y = x - l; y <= x + l; ++y) s += config.at(y);
  return double(s) / (2 * l + 1);
}

namespace {

struct SitePmf {
  std::vector<double> pmf;  // truncated, tail folded into last entry
};

// Truncation index so that the worst-case site marginal (fugacity
// phi / a0) carries tail mass below tail_tol.
int pmf_truncation(const RateFunction& g, double phi_worst, double tail_tol) {
  double term = 1.0, sum = 1.0;
  const int depth = g.probe_depth();
  for (int k = 1; k <= depth; ++k) {
    term *= phi_worst / g(k);
    sum += term;
    if (k < depth) {
      double ratio = phi_worst / g.suffix_min(k + 1);
      if (ratio < 1.0 && term * ratio / (1.0 - ratio) < tail_tol * sum)
        return k;
    }
  }
  throw NonConvergent("pmf truncation not reached by probe depth");
}

SitePmf site_pmf(const RateFunction& g, double phi, int K) {
  SitePmf out;
  out.pmf.assign(K + 1, 0.0);
  double term = 1.0, z = 0.0;
  std::vector<double> terms(K + 1);
  terms[0] = 1.0;
  for (int k = 1; k <= K; ++k) {
    term *= phi / g(k);
    terms[k] = term;
  }
  for (int k = 0; k <= K; ++k) z += terms[k];
  for (int k = 0; k <= K; ++k) out.pmf[k] = terms[k] / z;
  return out;
}

// Expectation of psi over the product of the given site pmfs.
double window_expectation(const CylinderObservable& psi,
                          std::span<const SitePmf> pmfs) {
  const int m = static_cast<int>(pmfs.size());
  std::vector<std::int32_t> window(m, 0);
  double total = 0.0;
  // Odometer over all occupation tuples.
  std::vector<int> idx(m, 0);
  while (true) {
    double prob = 1.0;
    for (int z = 0; z < m; ++z) prob *= pmfs[z].pmf[idx[z]];
    if (prob > 0.0) {
      for (int z = 0; z < m; ++z) window[z] = idx[z];
      total += prob * psi(window);
    }
    int z = 0;
    while (z < m) {
      if (++idx[z] <= static_cast<int>(pmfs[z].pmf.size()) - 1) break;
      idx[z] = 0;
      ++z;
    }
    if (z == m) break;
  }
  return total;
}

}  // namespace

double psi_tilde(const CylinderObservable& psi, double rho,
                 const EnvironmentLaw& law, const FugacityMaps& maps,
                 int quad_nodes, double tail_tol, double* se_out) {
  if (se_out) *se_out = 0.0;
  if (rho == 0.0) {
    std::vector<std::int32_t> zeros(psi.window_size(), 0);
    return psi(zeros);
  }
  const RateFunction& g = maps.g();
  const double phi = maps.fugacity(rho);
  const int m = psi.window_size();
  const int K = pmf_truncation(g, phi / law.a0(), tail_tol);

  const double states = std::pow(double(K + 1), m);
  if (law.iid() && states <= 2e6) {
    // Sites are iid pairs (p_z, eta_z), so the window law is the product of
    // one mixed marginal q(k) = E_m[pmf(k; phi/p)].
    SitePmf mixed;
    if (law.point_mass()) {
      mixed = site_pmf(g, phi / law.a0(), K);
    } else {
      mixed.pmf.assign(K + 1, 0.0);
      const auto& rule = num::gauss_legendre(quad_nodes);
      const double mid = 0.5 * (law.a0() + law.a1());
      const double half = 0.5 * (law.a1() - law.a0());
      for (int i = 0; i < quad_nodes; ++i) {
        const double p = mid + half * rule.nodes[i];
        const double w = half * rule.weights[i] * law.marginal_density(p);
        SitePmf node = site_pmf(g, phi / p, K);
        for (int k = 0; k <= K; ++k) mixed.pmf[k] += w * node.pmf[k];
      }
    }
    std::vector<SitePmf> pmfs(m, mixed);
    return window_expectation(psi, pmfs);
  }

  // Correlated law or large window: deterministic Monte Carlo over window
  // environments, exact inner summation per draw.
  const int draws = 600;
  RandomSource rng(0x5eedf1e1d5ULL);
  double sum = 0.0, sum2 = 0.0;
  for (int d = 0; d < draws; ++d) {
    // Window marginal of the law on sites -k0..k0, drawn on a strip so
    // moving averages do not wrap.
    std::vector<double> p_window(m);
    if (law.kind() == EnvironmentLaw::Kind::shift_coupled) {
      const int w = law.window();
      std::vector<double> u(m + w - 1);
      for (auto& v : u) v = rng.u01();
      for (int z = 0; z < m; ++z) {
        double s = 0.0;
        for (int j = 0; j < w; ++j) s += u[z + j];
        p_window[z] = law.a0() + (law.a1() - law.a0()) * (s / w);
      }
    } else {
      Environment env = generate(law, m, rng.bits());
      for (int z = 0; z < m; ++z) p_window[z] = env.p[z];
    }
    std::vector<SitePmf> pmfs;
    pmfs.reserve(m);
    for (int z = 0; z < m; ++z)
      pmfs.push_back(site_pmf(g, phi / p_window[z], K));
    double v = window_expectation(psi, pmfs);
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / draws;
  if (se_out) {
    double var = std::max(0.0, sum2 / draws - mean * mean);
    *se_out = std::sqrt(var / draws);
  }
  return mean;
}

PsiTildeTable::PsiTildeTable(const CylinderObservable& psi,
                             const FugacityMaps& maps, double rho_hi,
                             int nodes) {
  std::vector<double> xs(nodes), ys(nodes);
  for (int i = 0; i < nodes; ++i) {
    double rho = rho_hi * i / (nodes - 1);
    xs[i] = rho;
    ys[i] = psi_tilde(psi, rho, maps.law(), maps, maps.quad_nodes(),
                      maps.tail_tol());
  }
  spline_ = num::MonotoneSpline(std::move(xs), std::move(ys));
}

double one_block_field(const Configuration& config,
                       const CylinderObservable& psi, int x, int l,
                       const std::function<double(double)>& tilde) {
  const int L = config.size();
  if (2 * l + 1 > L) throw BlockTooLarge("block exceeds lattice");
  const int k0 = psi.k0();
  std::vector<std::int32_t> window(2 * k0 + 1);
  double avg = 0.0;
  for (int y = x - l; y <= x + l; ++y) {
    for (int z = -k0; z <= k0; ++z) window[z + k0] = config.at(y + z);
    avg += psi(window);
  }
  avg /= (2 * l + 1);
  return avg - tilde(block_average(config, x, l));
}

double superexp_field(const Configuration& config, int N, double eps,
                      const TestFunction& H, const CylinderObservable& psi,
                      double t, const std::function<double(double)>& tilde) {
  const int L = config.size();
  const int b = static_cast<int>(std::floor(eps * N));
  if (b < 1) throw OutOfRange("eps * N must be >= 1");
  if (2 * b + 1 > L) throw BlockTooLarge("block exceeds lattice");
  if (H.is_zero()) return 0.0;

  // Prefix sums for O(1) block averages.
  std::vector<long long> pre(L + 1, 0);
  for (int i = 0; i < L; ++i) pre[i + 1] = pre[i] + config.eta[i];
  auto block_sum = [&](int lo, int hi) -> long long {  // inclusive, wrapped
    long long s = 0;
    // Split into at most two in-range segments.
    int len = hi - lo + 1;
    int start = ((lo % L) + L) % L;
    int first = std::min(len, L - start);
    s += pre[start + first] - pre[start];
    if (first < len) s += pre[len - first];
    return s;
  };

  const int lo_site = std::max(0, int(std::floor(N * H.support_lo())) - 1);
  const int hi_site = std::min(L - 1, int(std::ceil(N * H.support_hi())) + 1);
  const int k0 = psi.k0();
  std::vector<std::int32_t> window(2 * k0 + 1);
  double sum = 0.0;
  for (int x = lo_site; x <= hi_site; ++x) {
    const double hval = H(t, double(x) / N);
    if (hval == 0.0) continue;
    for (int z = -k0; z <= k0; ++z) window[z + k0] = config.at(x + z);
    const double local = psi(window);
    const double blk = double(block_sum(x - b, x + b)) / (2 * b + 1);
    sum += hval * (local - tilde(blk));
  }
  return sum / N;
}

double two_block_discrepancy(const Configuration& config, int x, int l,
                             double eps, int N) {
  const int b = static_cast<int>(std::floor(eps * N));
  if (b < 1) throw OutOfRange("eps * N must be >= 1");
  return std::abs(block_average(config, x, b) - block_average(config, x, l));
}

}  // namespace zrp
