#include "zrp/hydro.hpp"

#include <algorithm>
#include <cmath>

#include "zrp/csv.hpp"
#include "zrp/errors.hpp"
#include "zrp/numerics.hpp"

namespace zrp {

namespace {

// Centered numeric derivative of Phi, floored away from zero only to form
// the step bound; a true nonpositive slope is a data error.
double phi_prime(const std::function<double(double)>& phi, double u,
                 double h) {
  double lo = std::max(0.0, u - h);
  double dp = (phi(u + h) - phi(lo)) / (u + h - lo);
  if (dp <= 0.0)
    throw DegenerateStep("Phi'(u) <= 0 at u=" + std::to_string(u));
  return dp;
}

}  // namespace

std::vector<DensityField> solve(const HydroProblem& problem, int J,
                                double cfl_safety,
                                std::span<const double> output_times) {
  if (J < 16) throw GridMismatch("solver needs J >= 16");
  if (output_times.empty()) throw GridMismatch("no output times requested");
  for (size_t i = 0; i + 1 < output_times.size(); ++i)
    if (!(output_times[i] < output_times[i + 1]))
      throw GridMismatch("output times must increase strictly");
  if (output_times.back() > problem.horizon + 1e-12)
    throw GridMismatch("output time beyond horizon");

  const double W = problem.width;
  const double dx = W / J;
  std::vector<double> u(J), phi_u(J);
  for (int j = 0; j < J; ++j) {
    u[j] = problem.initial((j + 0.5) * dx);
    if (u[j] < 0.0) throw OutOfRange("initial profile must be nonnegative");
  }

  const TestFunction* H = problem.drive;
  const bool driven = H != nullptr && !H->is_zero();
  const double drift_scale = problem.sigma_on_drift ? problem.sigma : 1.0;

  std::vector<DensityField> out;
  out.reserve(output_times.size());
  double t = 0.0;
  size_t oi = 0;

  auto emit = [&](double at) {
    DensityField f;
    f.u = u;
    f.time = at;
    f.width = W;
    out.push_back(std::move(f));
  };
  while (oi < output_times.size() && output_times[oi] <= t) {
    emit(output_times[oi]);
    ++oi;
  }

  std::vector<double> flux(J);  // interface j+1/2 between cells j and j+1
  const double fd_h = 1e-6;
  while (oi < output_times.size()) {
    // CFL from the diffusive term, with an advective cap when driven.
    double max_dphi = 0.0;
    for (int j = 0; j < J; ++j) {
      phi_u[j] = problem.phi(u[j]);
      max_dphi = std::max(max_dphi, phi_prime(problem.phi, u[j], fd_h));
    }
    double dt = cfl_safety * dx * dx / (problem.sigma * max_dphi);
    if (driven) {
      double vmax = drift_scale * H->max_abs_du() * max_dphi;
      if (vmax > 0.0) dt = std::min(dt, cfl_safety * dx / vmax);
    }
    dt = std::min(dt, output_times[oi] - t);

    for (int j = 0; j < J; ++j) {
      const int jp = (j + 1) % J;
      double f = -0.5 * problem.sigma * (phi_u[jp] - phi_u[j]) / dx;
      if (driven) {
        const double xi = (j + 1) * dx;  // interface position
        const double dh = drift_scale * H->du(t, xi);
        f += dh > 0.0 ? phi_u[j] * dh : phi_u[jp] * dh;  // upwind
      }
      flux[j] = f;
    }
    for (int j = 0; j < J; ++j) {
      const int jm = (j - 1 + J) % J;
      u[j] -= dt / dx * (flux[j] - flux[jm]);
      if (u[j] < 0.0 && u[j] > -1e-14) u[j] = 0.0;  // clip roundoff only
    }
    t += dt;
    while (oi < output_times.size() && output_times[oi] <= t + 1e-15) {
      emit(output_times[oi]);
      ++oi;
    }
  }
  return out;
}

double residual(std::span<const DensityField> path,
                const HydroProblem& problem, const TestFunction& G) {
  if (path.size() < 2) throw GridMismatch("residual needs >= 2 fields");
  const int J = path.front().cells();
  const double W = path.front().width;
  const double dx = W / J;
  const TestFunction* H = problem.drive;
  const bool driven = H != nullptr && !H->is_zero();
  const double drift_scale = problem.sigma_on_drift ? problem.sigma : 1.0;

  auto pair_with = [&](const DensityField& f,
                       const std::function<double(double, double)>& w,
                       double t) {
    double s = 0.0;
    for (int j = 0; j < J; ++j) s += w(t, (j + 0.5) * dx) * f.u[j];
    return s * dx;
  };

  std::vector<double> times(path.size()), integrand(path.size());
  for (size_t i = 0; i < path.size(); ++i) {
    const DensityField& f = path[i];
    times[i] = f.time;
    double v = 0.0;
    for (int j = 0; j < J; ++j) {
      const double x = (j + 0.5) * dx;
      const double phi = problem.phi(f.u[j]);
      double term = f.u[j] * G.dt(f.time, x) +
                    0.5 * problem.sigma * phi * G.duu(f.time, x);
      if (driven)
        term += phi * drift_scale * H->du(f.time, x) * G.du(f.time, x);
      v += term;
    }
    integrand[i] = v * dx;
  }
  double time_part = num::trapezoid(times, integrand);
  double ends =
      pair_with(path.back(), [&](double t, double x) { return G(t, x); },
                path.back().time) -
      pair_with(path.front(), [&](double t, double x) { return G(t, x); },
                path.front().time);
  return ends - time_part;
}

double mass(const DensityField& f) {
  double s = 0.0;
  for (double v : f.u) s += v;
  return s * f.width / f.cells();
}

void write_csv(std::span<const DensityField> path, std::ostream& os) {
  os << "time,grid_index,u\n";
  for (const auto& f : path)
    for (int j = 0; j < f.cells(); ++j)
      os << csv::fmt(f.time) << ',' << j << ',' << csv::fmt(f.u[j]) << '\n';
}

}  // namespace zrp
