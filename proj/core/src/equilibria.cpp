#include "zrp/equilibria.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "zrp/errors.hpp"

namespace zrp {

namespace {

// Shared truncated-series walk: terms t_k = phi^k / g(k)!, stopping when
// the geometric tail bound drops below tail_tol * partial_sum. Calls
// visit(k, t_k) for every retained term.
template <typename Visit>
void series_walk(const RateFunction& g, double phi, double tail_tol,
                 Visit&& visit) {
  if (phi < 0.0) throw OutOfRange("fugacity must be nonnegative");
  double term = 1.0;
  visit(0, term);
  if (phi == 0.0) return;
  double sum = 1.0;
  const int depth = g.probe_depth();
  for (int k = 1; k <= depth; ++k) {
    term *= phi / g(k);
    sum += term;
    visit(k, term);
    if (k < depth) {
      double ratio = phi / g.suffix_min(k + 1);
      if (ratio < 1.0) {
        double tail = term * ratio / (1.0 - ratio);
        if (tail < tail_tol * sum) return;
      }
    }
  }
  throw NonConvergent("series tail bound not reached by probe depth at phi=" +
                      std::to_string(phi));
}

}  // namespace

double partition_function(const RateFunction& g, double phi,
                          double tail_tol) {
  double z = 0.0;
  series_walk(g, phi, tail_tol, [&](int, double t) { z += t; });
  return z;
}

double mean_occupation(const RateFunction& g, double phi, double tail_tol) {
  double z = 0.0, kz = 0.0;
  series_walk(g, phi, tail_tol, [&](int k, double t) {
    z += t;
    kz += k * t;
  });
  return kz / z;
}

double quenched_density(const RateFunction& g, const EnvironmentLaw& law,
                        double phi, int quad_nodes, double tail_tol) {
  if (phi == 0.0) return 0.0;
  return law.expect(
      [&](double p) { return mean_occupation(g, phi / p, tail_tol); },
      quad_nodes);
}

int sample_site(const RateFunction& g, double phi_x, double tail_tol,
                RandomSource& rng) {
  if (phi_x == 0.0) return 0;
  const double z = partition_function(g, phi_x, tail_tol);
  const double u = rng.u01() * z;
  double cum = 1.0, term = 1.0;
  if (u <= cum) return 0;
  const int depth = g.probe_depth();
  for (int k = 1; k <= depth; ++k) {
    term *= phi_x / g(k);
    cum += term;
    if (u <= cum) return k;
    if (k < depth) {
      double ratio = phi_x / g.suffix_min(k + 1);
      if (ratio < 1.0 && term * ratio / (1.0 - ratio) < tail_tol * cum)
        return k;  // tail mass folded into the last bucket
    }
  }
  return depth;
}

FugacityMaps::FugacityMaps(RateFunction g, EnvironmentLaw law,
                           MapTolerances tol)
    : g_(std::move(g)), law_(std::move(law)), tol_(tol) {
  if (tol_.phi_max <= 0.0) {
    // Keep the series term ratio below 1/2 near truncation: cap by half the
    // smallest probed rate over the last quarter of the table, scaled by a0
    // so site fugacities phi/p stay inside too.
    int k0 = 3 * g_.probe_depth() / 4;
    tol_.phi_max = 0.5 * g_.suffix_min(k0) * law_.a0();
    if (!(tol_.phi_max > 0.0)) throw OutOfRange("cannot derive phi_max");
  }
  rho_max_ = density(tol_.phi_max);
  mean_inv_p_ = law_.expect([](double p) { return 1.0 / p; },
                            tol_.quad_nodes);

  // Tabulate the inverse on the working density window from forward
  // evaluations only; high densities fall back to plain bisection.
  table_phi_hi_ = std::min(1.0, tol_.phi_max);
  while (table_phi_hi_ < tol_.phi_max && density(table_phi_hi_) < 16.0)
    table_phi_hi_ = std::min(2.0 * table_phi_hi_, tol_.phi_max);
  const int nodes = 512;
  std::vector<double> rs(nodes), ps(nodes);
  for (int i = 0; i < nodes; ++i) {
    ps[i] = table_phi_hi_ * i / (nodes - 1);
    rs[i] = density(ps[i]);
  }
  table_rho_hi_ = rs.back();
  inverse_ = num::MonotoneSpline(std::move(rs), std::move(ps));
}

double FugacityMaps::bisect_fugacity(double rho, double lo, double hi) const {
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double r = density(mid);
    if (std::abs(r - rho) <= tol_.root_tol) return mid;
    (r < rho ? lo : hi) = mid;
    if (hi - lo < 1e-15 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

double FugacityMaps::partition(double phi) const {
  return partition_function(g_, phi, tol_.tail_tol);
}

double FugacityMaps::mean_occupation(double phi) const {
  return zrp::mean_occupation(g_, phi, tol_.tail_tol);
}

double FugacityMaps::density(double phi) const {
  return quenched_density(g_, law_, phi, tol_.quad_nodes, tol_.tail_tol);
}

double FugacityMaps::fugacity(double rho) const {
  if (rho < 0.0) throw OutOfRange("density must be nonnegative");
  if (rho == 0.0) return 0.0;
  if (rho > rho_max_)
    throw OutOfRange("density above R(phi_max); raise phi_max");
  if (rho <= table_rho_hi_) {
    double guess =
        std::clamp(inverse_(rho), 0.0, tol_.phi_max);
    if (std::abs(density(guess) - rho) <= tol_.root_tol) return guess;
    // Expand a bracket around the tabulated guess, then bisect.
    double step = std::max(1e-4, 1e-3 * guess);
    double lo = guess, hi = guess;
    while (lo > 0.0 && density(lo) > rho) {
      lo = std::max(0.0, lo - step);
      step *= 2.0;
    }
    step = std::max(1e-4, 1e-3 * guess);
    while (hi < tol_.phi_max && density(hi) < rho) {
      hi = std::min(tol_.phi_max, hi + step);
      step *= 2.0;
    }
    return bisect_fugacity(rho, lo, hi);
  }
  // Above the table: narrow by doubling from its top.
  double hi = std::max(table_phi_hi_, 1e-6);
  while (density(hi) < rho) hi = std::min(2.0 * hi, tol_.phi_max);
  return bisect_fugacity(rho, 0.0, hi);
}

num::MonotoneSpline FugacityMaps::fugacity_spline(double rho_hi,
                                                  int nodes) const {
  rho_hi = std::min(rho_hi, rho_max_);
  std::vector<double> xs(nodes), ys(nodes);
  for (int i = 0; i < nodes; ++i) {
    double rho = rho_hi * i / (nodes - 1);
    xs[i] = rho;
    ys[i] = fugacity(rho);
  }
  return num::MonotoneSpline(std::move(xs), std::move(ys));
}

MomentEnvelope MomentEnvelope::xlogx(double theta) {
  return from_function([](double a) { return a * std::log1p(a); }, theta,
                       "xlogx");
}

MomentEnvelope MomentEnvelope::quadratic(double theta) {
  return from_function([](double a) { return a * a; }, theta, "quadratic");
}

MomentEnvelope MomentEnvelope::from_function(std::function<double(double)> f,
                                             double theta, std::string tag) {
  MomentEnvelope m;
  m.f_ = std::move(f);
  m.theta_ = theta;
  m.tag_ = std::move(tag);
  return m;
}

double legendre_transform(const MomentEnvelope& omega, double x,
                          std::span<const double> grid) {
  if (x < 0.0) throw OutOfRange("legendre_transform wants x >= 0");
  if (grid.size() < 2) throw OutOfRange("legendre grid too small");
  auto objective = [&](double a) { return a * x - omega(a); };
  size_t best = 0;
  double best_val = objective(grid[0]);
  for (size_t i = 1; i < grid.size(); ++i) {
    double v = objective(grid[i]);
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  if (best + 1 == grid.size() &&
      objective(grid[best]) > objective(grid[best - 1]))
    throw UnboundedSup("objective still increasing at grid end");
  double lo = grid[best == 0 ? 0 : best - 1];
  double hi = grid[std::min(best + 1, grid.size() - 1)];
  double a_star = num::golden_section_max(objective, lo, hi, 1e-12);
  double refined = objective(a_star);
  double supv = std::max({refined, best_val, 0.0});
  return supv;
}

HypothesisReport check_hypotheses(const RateFunction& g,
                                  const TransitionKernel& T,
                                  const MomentEnvelope& omega,
                                  double phi_work) {
  HypothesisReport rep;
  std::ostringstream ev;

  // H1: zero mean, irreducible, finite range (finite by construction).
  bool zm = T.zero_mean();
  bool irr = T.irreducible();
  rep.h1_pass = zm && irr;
  ev << "mean=" << T.mean() << " irreducible=" << (irr ? "yes" : "no")
     << " range=" << T.range();
  rep.h1_evidence = ev.str();

  // H2: bounded increments. Probed g* is always finite; flag growth when
  // the largest increment sits in the final decile and exceeds the rest.
  rep.g_star = g.max_increment();
  const int depth = g.probe_depth();
  double head_max = 0.0, tail_max = 0.0;
  int tail_start = depth - std::max(1, depth / 10);
  for (int k = 0; k < depth; ++k) {
    double inc = std::abs(g(k + 1) - g(k));
    if (k >= tail_start)
      tail_max = std::max(tail_max, inc);
    else
      head_max = std::max(head_max, inc);
  }
  rep.h2_pass = tail_max <= head_max * (1.0 + 1e-9);
  ev.str("");
  ev << "g*=" << rep.g_star << " head_max=" << head_max
     << " tail_max=" << tail_max;
  rep.h2_evidence = ev.str();

  // H3: positive definite covariance (d = 1: sigma > 0).
  rep.sigma = T.sigma();
  rep.kappa = rep.sigma;
  rep.h3_pass = rep.sigma > 0.0;
  ev.str("");
  ev << "sigma=" << rep.sigma;
  rep.h3_evidence = ev.str();

  // H4: sum_k exp(theta * omega(k)) phi^k / g(k)! converges at the working
  // fugacity -- term-ratio test over the probed range.
  const double theta = omega.theta();
  bool ratio_ok = false;
  double last_ratio = std::numeric_limits<double>::infinity();
  for (int k = depth / 2; k < depth; ++k) {
    double dw = omega(double(k + 1)) - omega(double(k));
    last_ratio = std::exp(theta * dw) * phi_work / g(k + 1);
    if (last_ratio >= 1.0) {
      ratio_ok = false;
      break;
    }
    ratio_ok = true;
  }
  // Sufficient condition from the remark: increments bounded below
  // eventually. Report the tail infimum as evidence either way.
  double tail_inf = std::numeric_limits<double>::infinity();
  for (int k = depth / 2; k < depth; ++k)
    tail_inf = std::min(tail_inf, g(k + 1) - g(k));
  rep.g0_star = tail_inf;
  rep.h4_pass = ratio_ok;
  ev.str("");
  ev << "theta=" << theta << " omega=" << omega.tag()
     << " phi_work=" << phi_work << " final_term_ratio=" << last_ratio
     << " tail_inf_increment=" << tail_inf;
  rep.h4_evidence = ev.str();

  return rep;
}

}  // namespace zrp
