#include "zrp/deviations.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>

#include "zrp/errors.hpp"
#include "zrp/numerics.hpp"

namespace zrp {

TrajectoryMeasure TrajectoryMeasure::from_path(const PathRecord& rec,
                                               std::string provenance) {
  TrajectoryMeasure t;
  t.times = rec.snapshot_times;
  t.profiles = rec.profiles;
  t.width = rec.width;
  t.provenance = std::move(provenance);
  return t;
}

TrajectoryMeasure TrajectoryMeasure::from_fields(
    std::span<const DensityField> path, std::string provenance) {
  TrajectoryMeasure t;
  if (path.empty()) throw GridMismatch("empty field path");
  t.width = path.front().width;
  t.provenance = std::move(provenance);
  for (const auto& f : path) {
    t.times.push_back(f.time);
    t.profiles.push_back(f.u);
  }
  return t;
}

namespace {

void check_traj(const TrajectoryMeasure& traj) {
  if (traj.times.size() < 2 || traj.profiles.size() != traj.times.size())
    throw GridMismatch("trajectory needs matching times and profiles");
  const size_t J = traj.profiles.front().size();
  for (const auto& u : traj.profiles)
    if (u.size() != J) throw GridMismatch("ragged trajectory profiles");
  for (size_t i = 0; i + 1 < traj.times.size(); ++i)
    if (!(traj.times[i] < traj.times[i + 1]))
      throw GridMismatch("trajectory times must increase");
}

double pair_profile(const std::vector<double>& u, double width,
                    const std::function<double(double)>& f) {
  const int J = static_cast<int>(u.size());
  const double dx = width / J;
  double s = 0.0;
  for (int j = 0; j < J; ++j) s += f((j + 0.5) * dx) * u[j];
  return s * dx;
}

}  // namespace

double j_functional(const TrajectoryMeasure& traj, const TestFunction& H,
                    double sigma, const std::function<double(double)>& phi) {
  check_traj(traj);
  if (H.is_zero()) return 0.0;
  const double W = traj.width;
  const size_t n = traj.times.size();

  const double t0 = traj.times.front(), tT = traj.times.back();
  double j1 = pair_profile(traj.profiles.back(), W,
                           [&](double x) { return H(tT, x); }) -
              pair_profile(traj.profiles.front(), W,
                           [&](double x) { return H(t0, x); });
  std::vector<double> f1(n), f2(n);
  for (size_t i = 0; i < n; ++i) {
    const double t = traj.times[i];
    f1[i] = pair_profile(traj.profiles[i], W,
                         [&](double x) { return H.dt(t, x); });
    std::vector<double> phi_u(traj.profiles[i].size());
    for (size_t j = 0; j < phi_u.size(); ++j)
      phi_u[j] = phi(traj.profiles[i][j]);
    f2[i] = pair_profile(phi_u, W, [&](double x) {
      const double d = H.du(t, x);
      return H.duu(t, x) + d * d;
    });
  }
  j1 -= num::trapezoid(traj.times, f1);
  const double j2 = 0.5 * sigma * num::trapezoid(traj.times, f2);
  return j1 - j2;
}

TestFunction SplinePolyFamily::build(std::span<const double> coeffs) const {
  bool all_zero = true;
  for (double c : coeffs)
    if (c != 0.0) all_zero = false;
  if (all_zero) return TestFunction();
  return TestFunction::spline_combo(s0, s1, n_space, n_time, coeffs, horizon);
}

RateEstimate rate_lower_approx(const TrajectoryMeasure& traj,
                               const SplinePolyFamily& family, double sigma,
                               const std::function<double(double)>& phi,
                               int budget, RandomSource& rng) {
  check_traj(traj);
  RateEstimate est;
  est.method = "maximized";
  const int d = family.dim();

  auto objective = [&](std::span<const double> c) -> double {
    return j_functional(traj, family.build(c), sigma, phi);
  };

  const int restarts = 4;
  const int per_restart = std::max(50, budget / restarts);
  std::vector<double> best_x(d, 0.0);
  double best = 0.0;  // J at H == 0, always in the family
  for (int r = 0; r < restarts; ++r) {
    std::vector<double> x0(d, 0.0);
    if (r > 0) {
      // Deterministic perturbed starts around the best point so far.
      for (int i = 0; i < d; ++i)
        x0[i] = best_x[i] + 0.5 * (rng.u01() - 0.5);
    }
    auto res = num::nelder_mead_max(objective, x0, 0.4, per_restart, 1e-12);
    est.evals += res.evals;
    est.restart_values.push_back(res.value);
    if (res.value > best) {
      best = res.value;
      best_x = res.x;
    }
  }
  est.budget_exhausted = est.evals >= budget;
  est.value = std::max(0.0, best);
  est.h_star_coeffs = best_x;
  return est;
}

double entropy(const Profile& gamma, double rho, const EnvironmentLaw& law,
               const FugacityMaps& maps, int quad_nodes) {
  if (!(rho > 0.0)) throw OutOfRange("entropy needs rho > 0");
  if (gamma.bump_hi <= gamma.bump_lo) return 0.0;
  const double phi_rho = maps.fugacity(rho);
  const double log_phi_rho = std::log(phi_rho);

  auto integrand = [&](double x) -> double {
    const double gx = gamma.value(x);
    const double phi_g = maps.fugacity(gx);
    double first = 0.0;
    if (gx > 0.0) first = gx * (std::log(phi_g) - log_phi_rho);
    const double second = law.expect(
        [&](double p) {
          return std::log(maps.partition(phi_g / p) /
                          maps.partition(phi_rho / p));
        },
        quad_nodes);
    return first - second;
  };
  return num::integrate(quad_nodes, gamma.bump_lo, gamma.bump_hi, integrand);
}

double entropy_finite_n(const Configuration& config, const Environment& env,
                        const Profile& gamma, double rho,
                        const FugacityMaps& maps, int N) {
  if (config.size() != env.size())
    throw GridMismatch("configuration/environment length mismatch");
  const int L = config.size();
  const double phi_rho = maps.fugacity(rho);
  // gamma is typically flat outside its bump; memoize the inversion.
  std::vector<double> phi_g(L);
  {
    std::map<double, double> cache;
    for (int x = 0; x < L; ++x) {
      const double gx = gamma.value(double(x) / N);
      auto it = cache.find(gx);
      if (it == cache.end()) it = cache.emplace(gx, maps.fugacity(gx)).first;
      phi_g[x] = it->second;
    }
  }
  double pairing = 0.0, zsum = 0.0;
  for (int x = 0; x < L; ++x) {
    if (config.eta[x] != 0 && phi_g[x] != phi_rho)
      pairing += config.eta[x] * std::log(phi_g[x] / phi_rho);
    if (phi_g[x] != phi_rho)
      zsum += std::log(maps.partition(phi_g[x] / env.p[x]) /
                       maps.partition(phi_rho / env.p[x]));
  }
  return (pairing - zsum) / N;
}

namespace {

double censored_rate(int hits, int replicas, int N, bool* censored) {
  if (hits > 0) {
    *censored = false;
    return -std::log(double(hits) / replicas) / N;
  }
  *censored = true;  // rule-of-three upper confidence limit
  return -std::log(3.0 / replicas) / N;
}

}  // namespace

std::vector<ScanRow> ld_probability_scan(
    const std::function<bool(const TrajectoryMeasure&)>& event,
    std::span<const int> Ns, int replicas, const BaseSpec& spec,
    const FugacityMaps& maps, RandomSource& rng) {
  if (replicas < 100) throw OutOfRange("ld scan needs replicas >= 100");
  std::vector<ScanRow> rows;
  std::uint64_t block = 0;
  for (int N : Ns) {
    const int L = static_cast<int>(std::lround(N * spec.width));
    if (std::abs(L - N * spec.width) > 1e-9)
      throw GridMismatch("N * width must be an integer site count");
    std::vector<char> hit(replicas, 0);
    RandomSource base = rng.child(0x10000 + block++);
    num::parallel_replicas(replicas, spec.threads, [&](int r) {
      RandomSource local = base.child(r);
      Environment env = generate(maps.law(), L, local.bits());
      SimulationState state =
          spec.gamma ? init_profile(env, maps.g(), maps, spec.gamma, N,
                                    spec.kernel, local)
                     : init_equilibrium(env, maps.g(), maps, spec.rho, N,
                                        spec.kernel, local);
      auto snaps = snapshot_grid(spec.horizon, spec.snapshots);
      RunOptions opt;
      opt.grid_cells = spec.grid_cells;
      PathRecord rec = run(state, spec.horizon, snaps, local, opt);
      hit[r] = event(TrajectoryMeasure::from_path(rec)) ? 1 : 0;
    });
    ScanRow row;
    row.N = N;
    row.replicas = replicas;
    row.hits = 0;
    for (char h : hit) row.hits += h;
    row.p_hat = double(row.hits) / replicas;
    auto ci = num::wilson_interval(row.hits, replicas);
    row.ci_lo = ci.lo;
    row.ci_hi = ci.hi;
    row.rate = censored_rate(row.hits, replicas, N, &row.censored);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ProbeRow> superexp_probe(const TestFunction& H,
                                     const CylinderObservable& psi,
                                     double delta,
                                     std::span<const double> eps_list,
                                     std::span<const int> Ns, int replicas,
                                     const BaseSpec& spec,
                                     const FugacityMaps& maps,
                                     RandomSource& rng,
                                     FieldSeries* series) {
  if (replicas < 100) throw OutOfRange("probe needs replicas >= 100");
  // Psi~ evaluator, tabulated once: block densities hit it per site per
  // snapshot, so the closed form is sampled into a spline as well.
  const double rho_hi = std::max(4.0 * spec.rho, spec.rho + 4.0);
  std::function<double(double)> tilde;
  if (psi.has_exact_tilde()) {
    const int nodes = 513;
    std::vector<double> xs(nodes), ys(nodes);
    for (int i = 0; i < nodes; ++i) {
      xs[i] = rho_hi * i / (nodes - 1);
      ys[i] = psi.exact_tilde(maps, xs[i]);
    }
    auto spline =
        std::make_shared<num::MonotoneSpline>(std::move(xs), std::move(ys));
    tilde = [spline](double r) { return (*spline)(r); };
  } else {
    auto table = std::make_shared<PsiTildeTable>(psi, maps, rho_hi);
    tilde = [table](double r) { return (*table)(r); };
  }

  std::vector<ProbeRow> rows;
  std::uint64_t block = 0;
  for (double eps : eps_list) {
    for (int N : Ns) {
      const int L = static_cast<int>(std::lround(N * spec.width));
      // A pair with floor(eps N) < 1 has no block to average over; skip it
      // rather than poisoning the whole scan.
      if (static_cast<int>(std::floor(eps * N)) < 1) {
        ++block;
        continue;
      }
      auto snaps = snapshot_grid(spec.horizon, spec.snapshots);
      std::vector<char> hit(replicas, 0);
      const int kept = series ? std::min(replicas, series->keep) : 0;
      std::vector<std::vector<double>> kept_series(kept);
      RandomSource base = rng.child(0x20000 + block++);
      num::parallel_replicas(replicas, spec.threads, [&](int r) {
        RandomSource local = base.child(r);
        Environment env = generate(maps.law(), L, local.bits());
        SimulationState state = init_equilibrium(env, maps.g(), maps,
                                                 spec.rho, N, spec.kernel,
                                                 local);
        std::vector<double> values(snaps.size(), 0.0);
        size_t sidx = 0;
        RunOptions opt;
        opt.grid_cells = spec.grid_cells;
        opt.observer = [&](double t, const Configuration& c) {
          values[sidx++] =
              superexp_field(c, N, eps, H, psi, t, tilde);
        };
        run(state, spec.horizon, snaps, local, opt);
        const double integral = num::trapezoid(snaps, values);
        hit[r] = std::abs(integral) > delta ? 1 : 0;
        if (r < kept) kept_series[r] = values;
      });
      if (series) {
        for (int r = 0; r < kept; ++r)
          for (size_t s = 0; s < snaps.size(); ++s)
            series->rows.push_back(
                {eps, N, r, snaps[s], kept_series[r][s]});
      }
      ProbeRow row;
      row.eps = eps;
      row.N = N;
      row.replicas = replicas;
      for (char h : hit) row.hits += h;
      row.p_hat = double(row.hits) / replicas;
      auto ci = num::wilson_interval(row.hits, replicas);
      row.ci_lo = ci.lo;
      row.ci_hi = ci.hi;
      row.rate = censored_rate(row.hits, replicas, N, &row.censored);
      rows.push_back(row);
    }
  }
  return rows;
}

TrendVerdict trend_test(std::span<const ProbeRow> rows, int bootstrap,
                        RandomSource& rng) {
  TrendVerdict v;
  if (rows.size() < 2) {
    v.point_nondecreasing = true;
    v.bootstrap_confidence = 1.0;
    v.pass = true;
    return v;
  }
  v.point_nondecreasing = true;
  for (size_t i = 0; i + 1 < rows.size(); ++i)
    if (rows[i + 1].rate < rows[i].rate) v.point_nondecreasing = false;

  int good = 0;
  for (int b = 0; b < bootstrap; ++b) {
    bool ok = true;
    double prev = -1.0;
    for (const auto& row : rows) {
      int k = 0;
      for (int i = 0; i < row.replicas; ++i)
        if (rng.u01() < row.p_hat) ++k;
      bool cens = false;
      double rate = censored_rate(k, row.replicas, row.N, &cens);
      if (rate < prev) {
        ok = false;
        break;
      }
      prev = rate;
    }
    if (ok) ++good;
  }
  v.bootstrap_confidence = double(good) / bootstrap;
  v.pass = v.bootstrap_confidence >= 0.95;
  return v;
}

}  // namespace zrp
