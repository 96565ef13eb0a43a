#pragma once

#include <functional>
#include <ostream>
#include <span>
#include <vector>

#include "zrp/fields.hpp"

namespace zrp {

struct DensityField {
  std::vector<double> u;  // cell-centered values on the torus [0, width)
  double time = 0.0;
  double width = 0.0;
  int cells() const { return static_cast<int>(u.size()); }
};

// dt u = (sigma/2) dxx Phi(u) - dx(Phi(u) dx H) on the periodic domain.
struct HydroProblem {
  std::function<double(double)> phi;      // monotone, from FugacityMaps
  double sigma = 1.0;
  const TestFunction* drive = nullptr;    // H; nullptr for the plain equation
  std::function<double(double)> initial;  // gamma on [0, width)
  double width = 1.0;
  double horizon = 0.1;
  // Optional convention: multiply the drift term by sigma as well. The
  // equation as printed carries no sigma on the drift; off by default.
  bool sigma_on_drift = false;
};

// Explicit conservative finite differences: centered diffusive flux,
// upwinded advective flux, time step adapted to cfl_safety * dx^2 /
// (sigma * max Phi'(u)). Returns fields at the requested output times
// (first may be 0, last must be <= horizon).
std::vector<DensityField> solve(const HydroProblem& problem, int J,
                                double cfl_safety,
                                std::span<const double> output_times);

// Weak-form defect of the path against test function G; near zero for true
// solutions of the problem.
double residual(std::span<const DensityField> path, const HydroProblem& problem,
                const TestFunction& G);

double mass(const DensityField& f);

// Rows "time,grid_index,u".
void write_csv(std::span<const DensityField> path, std::ostream& os);

}  // namespace zrp
