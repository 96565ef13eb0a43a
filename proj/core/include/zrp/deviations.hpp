#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "zrp/fields.hpp"
#include "zrp/hydro.hpp"
#include "zrp/kinetics.hpp"

namespace zrp {

// A path of density profiles, from either the simulator or the solver.
struct TrajectoryMeasure {
  std::vector<double> times;
  std::vector<std::vector<double>> profiles;
  double width = 0.0;
  std::string provenance;

  int cells() const {
    return profiles.empty() ? 0 : static_cast<int>(profiles.front().size());
  }
  static TrajectoryMeasure from_path(const PathRecord& rec,
                                     std::string provenance = "simulation");
  static TrajectoryMeasure from_fields(std::span<const DensityField> path,
                                       std::string provenance = "pde");
};

// J_H = J_H^1 - J_H^2 with endpoint pairings, trapezoid time quadrature and
// midpoint space pairings on the profile grid.
double j_functional(const TrajectoryMeasure& traj, const TestFunction& H,
                    double sigma, const std::function<double(double)>& phi);

// Finite-dimensional H family: cubic B-spline bumps in space tensor
// low-order polynomials in time. Contains H == 0 at zero coefficients.
struct SplinePolyFamily {
  double s0 = 0.0, s1 = 1.0;
  int n_space = 6, n_time = 2;
  double horizon = 1.0;

  int dim() const { return n_space * n_time; }
  TestFunction build(std::span<const double> coeffs) const;
};

struct RateEstimate {
  double value = 0.0;
  std::string method;  // "single_H" or "maximized"
  std::vector<double> h_star_coeffs;
  int evals = 0;
  bool budget_exhausted = false;
  std::vector<double> restart_values;
};

// Maximizes J_H over the family coefficients (simplex search, 4 restarts);
// the returned value is a certified lower bound on I_0(traj) up to
// discretization error, and is never below 0.
RateEstimate rate_lower_approx(const TrajectoryMeasure& traj,
                               const SplinePolyFamily& family, double sigma,
                               const std::function<double(double)>& phi,
                               int budget, RandomSource& rng);

// Density profile equal to base_rho outside [bump_lo, bump_hi].
struct Profile {
  std::function<double(double)> value;
  double base_rho = 1.0;
  double bump_lo = 0.0, bump_hi = 0.0;
};

// Static entropy h(gamma | rho): spatial quadrature over the bump interval
// of gamma log(Phi(gamma)/Phi(rho)) - E_m[log(Z(Phi(gamma)/p)/Z(Phi(rho)/p))].
double entropy(const Profile& gamma, double rho, const EnvironmentLaw& law,
               const FugacityMaps& maps, int quad_nodes);

// Finite-N entropy h_gamma^{p,N}(pi_0^N | rho), exact sums as displayed.
double entropy_finite_n(const Configuration& config, const Environment& env,
                        const Profile& gamma, double rho,
                        const FugacityMaps& maps, int N);

// Shared description of the base dynamics for replica experiments.
struct BaseSpec {
  TransitionKernel kernel = TransitionKernel::nearest_neighbor();
  double rho = 1.0;
  std::function<double(double)> gamma;  // empty: equilibrium at rho
  double width = 4.0;
  double horizon = 0.1;
  int snapshots = 11;
  int grid_cells = 32;
  int threads = 0;
};

struct ScanRow {
  int N = 0;
  int replicas = 0;
  int hits = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 1.0;
  double rate = 0.0;  // -log(p_hat)/N; rule-of-three lower bound if censored
  bool censored = false;
};

// Crude Monte Carlo estimate of P[event] across N values, with Wilson 95%
// intervals. Deterministic given the random source's seed.
std::vector<ScanRow> ld_probability_scan(
    const std::function<bool(const TrajectoryMeasure&)>& event,
    std::span<const int> Ns, int replicas, const BaseSpec& spec,
    const FugacityMaps& maps, RandomSource& rng);

struct ProbeRow {
  double eps = 0.0;
  int N = 0;
  int replicas = 0;
  int hits = 0;
  double p_hat = 0.0;
  double ci_lo = 0.0, ci_hi = 1.0;
  double rate = 0.0;
  bool censored = false;
};

// Per-snapshot field values retained for the first `keep` replicas of each
// (eps, N) pair; long-format rows for plot-ready CSV emission.
struct FieldSeries {
  struct Row {
    double eps;
    int N;
    int replica;
    double time;
    double value;
  };
  int keep = 4;
  std::vector<Row> rows;
};

// Threshold exceedance of |int_0^T W_{N,eps}^{H,Psi} dt| over replicas of
// the base dynamics, per (eps, N). Pairs with floor(eps N) < 1 are skipped.
std::vector<ProbeRow> superexp_probe(const TestFunction& H,
                                     const CylinderObservable& psi,
                                     double delta,
                                     std::span<const double> eps_list,
                                     std::span<const int> Ns, int replicas,
                                     const BaseSpec& spec,
                                     const FugacityMaps& maps,
                                     RandomSource& rng,
                                     FieldSeries* series = nullptr);

struct TrendVerdict {
  bool point_nondecreasing = false;
  double bootstrap_confidence = 0.0;  // P_boot[rates nondecreasing]
  bool pass = false;                  // confidence >= 0.95
};

// Bootstrap monotone-trend test on the rate column of rows ordered by N.
TrendVerdict trend_test(std::span<const ProbeRow> rows, int bootstrap,
                        RandomSource& rng);

}  // namespace zrp
