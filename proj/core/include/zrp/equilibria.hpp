#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>

#include "zrp/media.hpp"
#include "zrp/numerics.hpp"
#include "zrp/random.hpp"
#include "zrp/rate_function.hpp"
#include "zrp/transition_kernel.hpp"

namespace zrp {

// Z(phi) = sum_k phi^k / g(k)!, truncated once the geometric tail bound
// drops below tail_tol relative to the partial sum.
double partition_function(const RateFunction& g, double phi, double tail_tol);

// M(phi) = phi d/dphi log Z(phi), computed as a ratio of truncated series
// sharing one truncation index.
double mean_occupation(const RateFunction& g, double phi, double tail_tol);

// R(phi) = E_m[M(phi / p_0)].
double quenched_density(const RateFunction& g, const EnvironmentLaw& law,
                        double phi, int quad_nodes, double tail_tol);

// One draw from the single-site marginal at site fugacity phi_x; the tail
// mass below tail_tol is folded into the last bucket.
int sample_site(const RateFunction& g, double phi_x, double tail_tol,
                RandomSource& rng);

struct MapTolerances {
  double tail_tol = 1e-12;
  double root_tol = 1e-10;
  double phi_max = 0.0;  // 0: derive from g so the term ratio stays < 0.5
  int quad_nodes = 64;
};

// Cached Z/M/R/Phi for one (g, law) pair. Immutable after construction.
class FugacityMaps {
 public:
  FugacityMaps(RateFunction g, EnvironmentLaw law, MapTolerances tol = {});

  double partition(double phi) const;        // Z
  double mean_occupation(double phi) const;  // M
  double density(double phi) const;          // R
  // Phi = R^{-1} by monotone bisection on [0, phi_max]; throws OutOfRange
  // when rho > R(phi_max).
  double fugacity(double rho) const;

  double rho_max() const { return rho_max_; }
  double phi_max() const { return tol_.phi_max; }
  double tail_tol() const { return tol_.tail_tol; }
  double root_tol() const { return tol_.root_tol; }
  int quad_nodes() const { return tol_.quad_nodes; }
  double mean_inverse_p() const { return mean_inv_p_; }

  const RateFunction& g() const { return g_; }
  const EnvironmentLaw& law() const { return law_; }

  // Monotone spline rho -> Phi(rho) on [0, rho_hi] for solver use.
  num::MonotoneSpline fugacity_spline(double rho_hi, int nodes = 512) const;

 private:
  double bisect_fugacity(double rho, double lo, double hi) const;

  RateFunction g_;
  EnvironmentLaw law_;
  MapTolerances tol_;
  double rho_max_ = 0.0;
  double mean_inv_p_ = 1.0;
  // Inverse table sampled from forward R evaluations; fugacity() uses it
  // as a bracket and verifies against root_tol, falling back to bisection.
  num::MonotoneSpline inverse_;
  double table_rho_hi_ = 0.0;
  double table_phi_hi_ = 0.0;
};

// Exponential-moment envelope omega (convex, increasing, omega(0)=0) with
// moment parameter theta.
class MomentEnvelope {
 public:
  static MomentEnvelope xlogx(double theta);      // a*log(1+a)
  static MomentEnvelope quadratic(double theta);  // a^2
  static MomentEnvelope from_function(std::function<double(double)> f,
                                      double theta, std::string tag);

  double operator()(double a) const { return f_(a); }
  double theta() const { return theta_; }
  const std::string& tag() const { return tag_; }

 private:
  std::function<double(double)> f_;
  double theta_ = 0.0;
  std::string tag_;
};

// omega*(x) = sup_{a>0} { a x - omega(a) }, maximized over the grid and
// refined by golden section around the grid argmax.
double legendre_transform(const MomentEnvelope& omega, double x,
                          std::span<const double> grid);

struct HypothesisReport {
  bool h1_pass = false;
  bool h2_pass = false;
  bool h3_pass = false;
  bool h4_pass = false;
  double g_star = 0.0;   // probed sup |g(k+1)-g(k)|
  double sigma = 0.0;    // kernel second moment
  double kappa = 0.0;    // ellipticity constant (= sigma in d = 1)
  double g0_star = 0.0;  // tail inf of increments (sufficient condition for H4)
  std::string h1_evidence, h2_evidence, h3_evidence, h4_evidence;

  bool all_pass() const { return h1_pass && h2_pass && h3_pass && h4_pass; }
};

// Checks H1..H4 at the given working fugacity. Failures are reported,
// never thrown.
HypothesisReport check_hypotheses(const RateFunction& g,
                                  const TransitionKernel& T,
                                  const MomentEnvelope& omega,
                                  double phi_work = 1.0);

}  // namespace zrp
