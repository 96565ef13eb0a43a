#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "zrp/equilibria.hpp"
#include "zrp/numerics.hpp"

namespace zrp {

struct Configuration;  // kinetics.hpp

// Space-time test function H(t,u) with compact spatial support, evaluable
// derivatives, and a stored sup-envelope G over [u-1,u+1] windows.
class TestFunction {
 public:
  TestFunction();  // identically zero

  // amplitude * (1-r^2)^3 bump at |r| = |u-center|/halfwidth < 1, times a
  // polynomial in t/horizon (coefficient list; {c0} is time-independent).
  static TestFunction bump(double amplitude, double center, double halfwidth,
                           std::vector<double> time_poly = {1.0},
                           double horizon = 1.0);

  // sum_{i,j} c[i*n_time+j] * Bspline_i(u) * (t/horizon)^j with cubic
  // B-splines pinned to vanish (C^2) outside [s0,s1].
  static TestFunction spline_combo(double s0, double s1, int n_space,
                                   int n_time, std::span<const double> coeffs,
                                   double horizon);

  double operator()(double t, double u) const { return h_(t, u); }
  double dt(double t, double u) const { return dt_(t, u); }
  double du(double t, double u) const { return du_(t, u); }
  double duu(double t, double u) const { return duu_(t, u); }

  double support_lo() const { return s0_; }
  double support_hi() const { return s1_; }
  double horizon() const { return horizon_; }
  bool time_dependent() const { return time_dependent_; }
  bool is_zero() const { return zero_; }

  // G(u) >= max{|H|,|dH|,|d2H|} over [u-1,u+1] x [0,horizon]. The table is
  // built on first use and cached; construction itself stays cheap so the
  // rate-functional optimizer can mint candidate functions freely.
  double envelope(double u) const;
  double max_abs_du() const;
  double max_envelope() const;

 private:
  using Fn = std::function<double(double, double)>;
  TestFunction(Fn h, Fn dt, Fn du, Fn duu, double s0, double s1,
               double horizon, bool time_dependent);

  struct EnvelopeTable {
    std::once_flag once;
    double lo = 0.0, step = 1.0;
    std::vector<double> env;
    double max_du = 0.0, max_env = 0.0;
  };
  const EnvelopeTable& envelope_table() const;

  Fn h_, dt_, du_, duu_;
  double s0_ = 0.0, s1_ = 0.0, horizon_ = 1.0;
  bool time_dependent_ = false;
  bool zero_ = true;
  std::shared_ptr<EnvelopeTable> env_cache_;
};

// Local (cylinder) observable of the occupations in a window of radius k0.
class CylinderObservable {
 public:
  CylinderObservable(int k0,
                     std::function<double(std::span<const std::int32_t>)> eval,
                     double lipschitz, std::string tag);

  static CylinderObservable occupancy();                            // eta(0)
  static CylinderObservable rate_at_origin(const RateFunction& g);  // g(eta(0))
  static CylinderObservable pair_product();  // eta(0)*eta(1), probed Lipschitz

  double operator()(std::span<const std::int32_t> window) const;
  int k0() const { return k0_; }
  int window_size() const { return 2 * k0_ + 1; }
  double lipschitz() const { return lipschitz_; }
  const std::string& tag() const { return tag_; }

  bool has_exact_tilde() const { return bool(exact_tilde_); }
  double exact_tilde(const FugacityMaps& maps, double rho) const {
    return exact_tilde_(maps, rho);
  }

 private:
  int k0_;
  std::function<double(std::span<const std::int32_t>)> eval_;
  double lipschitz_;
  std::string tag_;
  std::function<double(const FugacityMaps&, double)> exact_tilde_;
};

// <pi^N, G(t,.)> = N^{-1} sum_x G(t, x/N) eta(x).
double empirical_pairing(const Configuration& config, int N,
                         const TestFunction& G, double t);

// Mean occupation over the (2l+1)-site box centered at x, periodic.
double block_average(const Configuration& config, int x, int l);

// Psi~(rho) = E_m[ nu^p_{Phi(rho)}(Psi) ]. Exact (mixed-marginal product
// summation) for iid laws and small windows; deterministic Monte Carlo with
// *se_out reported otherwise.
double psi_tilde(const CylinderObservable& psi, double rho,
                 const EnvironmentLaw& law, const FugacityMaps& maps,
                 int quad_nodes, double tail_tol, double* se_out = nullptr);

// rho -> Psi~(rho) sampled on a grid and interpolated monotonically in the
// sample points; linear extrapolation past rho_hi.
class PsiTildeTable {
 public:
  PsiTildeTable(const CylinderObservable& psi, const FugacityMaps& maps,
                double rho_hi, int nodes = 65);
  double operator()(double rho) const { return spline_(rho); }
  std::function<double(double)> fn() const {
    return [s = spline_](double rho) { return s(rho); };
  }

 private:
  num::MonotoneSpline spline_;
};

// W_l^Psi at site x: block average of shifted Psi minus Psi~ at the block
// density.
double one_block_field(const Configuration& config,
                       const CylinderObservable& psi, int x, int l,
                       const std::function<double(double)>& tilde);

// W_{N,eps}^{H,Psi}(t, eta) with block radius floor(eps*N).
double superexp_field(const Configuration& config, int N, double eps,
                      const TestFunction& H, const CylinderObservable& psi,
                      double t, const std::function<double(double)>& tilde);

// |eta^{floor(eps N)}(x) - eta^l(x)|.
double two_block_discrepancy(const Configuration& config, int x, int l,
                             double eps, int N);

}  // namespace zrp
