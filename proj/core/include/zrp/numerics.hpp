#pragma once

#include <functional>
#include <span>
#include <vector>

#include "zrp/random.hpp"

namespace zrp::num {

inline constexpr double kPi = 3.14159265358979323846;

// Gauss-Legendre rule on [-1,1]; cached per order.
struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const QuadRule& gauss_legendre(int n);

double integrate(int n, double a, double b,
                 const std::function<double(double)>& f);

// Regularized upper incomplete gamma Q(a,x).
double gamma_q(double a, double x);

// p-value of a chi-square statistic with the given degrees of freedom.
inline double chi2_pvalue(double stat, double dof) {
  return gamma_q(0.5 * dof, 0.5 * stat);
}

// Maximum of a unimodal function on [lo,hi]; returns the argmax.
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol = 1e-10, int max_iter = 200);

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evals = 0;
  bool converged = false;
};
// Derivative-free simplex maximization.
NelderMeadResult nelder_mead_max(
    const std::function<double(std::span<const double>)>& f,
    std::vector<double> x0, double step, int max_evals, double ftol = 1e-10);

// Monotone piecewise-cubic interpolant (Fritsch-Carlson). Linear
// extrapolation outside the knot range.
class MonotoneSpline {
 public:
  MonotoneSpline() = default;
  MonotoneSpline(std::vector<double> x, std::vector<double> y);
  double operator()(double x) const;
  double derivative(double x) const;
  bool empty() const { return x_.empty(); }
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }

 private:
  int segment(double x) const;
  std::vector<double> x_, y_, m_;  // knots, values, knot slopes
};

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
};
// 95% score interval by default (z = Phi^{-1}(0.975)).
WilsonInterval wilson_interval(int hits, int n,
                               double z = 1.959963984540054);

// Trapezoid rule over a (possibly non-uniform) grid.
double trapezoid(std::span<const double> t, std::span<const double> f);

// Runs fn(replica) for replica in [0,n) over `threads` workers (0 = serial).
// Deterministic output requires fn to write only to its own replica slot.
void parallel_replicas(int n, int threads,
                       const std::function<void(int)>& fn);

}  // namespace zrp::num
