#include "zrp/media.hpp"

#include <cmath>

#include "zrp/csv.hpp"
#include "zrp/errors.hpp"
#include "zrp/numerics.hpp"
#include "zrp/random.hpp"

namespace zrp {

namespace {

// Density of the mean of n iid U(0,1) (Bates), evaluated at x in [0,1].
// The alternating sum cancels heavily for larger windows; accumulate in
// extended precision.
double bates_density(double x, int n) {
  if (x < 0.0 || x > 1.0) return 0.0;
  long double s = static_cast<long double>(n) * x;
  long double sum = 0.0L;
  long double binom = 1.0L;  // C(n,j)
  for (int j = 0; j <= static_cast<int>(s); ++j) {
    long double term = binom * std::pow(s - j, n - 1);
    sum += (j % 2 == 0) ? term : -term;
    binom = binom * (n - j) / (j + 1);
  }
  long double fact = 1.0L;
  for (int k = 2; k <= n - 1; ++k) fact *= k;
  return static_cast<double>(n * sum / fact);
}

}  // namespace

EnvironmentLaw EnvironmentLaw::iid_uniform(double a0, double a1) {
  EnvironmentLaw law;
  law.kind_ = Kind::iid_uniform;
  law.a0_ = a0;
  law.a1_ = a1;
  law.tag_ = "iid_uniform";
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::iid_density(
    double a0, double a1, std::function<double(double)> density,
    std::string tag) {
  EnvironmentLaw law;
  law.kind_ = Kind::iid_density;
  law.a0_ = a0;
  law.a1_ = a1;
  law.density_ = std::move(density);
  law.tag_ = std::move(tag);
  law.validate();
  return law;
}

EnvironmentLaw EnvironmentLaw::shift_coupled(double a0, double a1,
                                             int window) {
  EnvironmentLaw law;
  law.kind_ = Kind::shift_coupled;
  law.a0_ = a0;
  law.a1_ = a1;
  law.window_ = window;
  law.tag_ = "shift_coupled_w" + std::to_string(window);
  law.validate();
  return law;
}

double EnvironmentLaw::marginal_density(double p) const {
  if (point_mass()) return p == a0_ ? 1.0 : 0.0;
  if (p < a0_ || p > a1_) return 0.0;
  const double width = a1_ - a0_;
  switch (kind_) {
    case Kind::iid_uniform:
      return 1.0 / width;
    case Kind::iid_density:
      return density_(p);
    case Kind::shift_coupled:
      return bates_density((p - a0_) / width, window_) / width;
  }
  return 0.0;
}

double EnvironmentLaw::expect(const std::function<double(double)>& f,
                              int quad_nodes) const {
  if (point_mass()) return f(a0_);
  auto weighted = [&](double p) { return f(p) * marginal_density(p); };
  if (kind_ != Kind::shift_coupled)
    return num::integrate(quad_nodes, a0_, a1_, weighted);
  // The Bates marginal is piecewise polynomial with knots at j/w; quadrature
  // must not straddle them.
  double sum = 0.0;
  for (int j = 0; j < window_; ++j) {
    double lo = a0_ + (a1_ - a0_) * j / window_;
    double hi = a0_ + (a1_ - a0_) * (j + 1) / window_;
    sum += num::integrate(quad_nodes, lo, hi, weighted);
  }
  return sum;
}

void EnvironmentLaw::validate() const {
  if (!(a0_ > 0.0) || !(a0_ <= a1_))
    throw BadLaw("environment interval requires 0 < a0 <= a1");
  if (kind_ == Kind::shift_coupled && window_ < 1)
    throw BadLaw("shift_coupled window must be >= 1");
  if (point_mass()) return;
  if (kind_ == Kind::iid_density && !density_)
    throw BadLaw("iid_density law without density");
  double mass = expect([](double) { return 1.0; }, 128);
  if (std::abs(mass - 1.0) > 1e-9)
    throw BadLaw("marginal density does not integrate to 1 (got " +
                 std::to_string(mass) + ")");
  // Mass near both edges must be positive for a few probe widths.
  for (double frac : {0.25, 0.1, 0.02}) {
    double eps = frac * (a1_ - a0_);
    double lo = num::integrate(64, a0_, a0_ + eps,
                               [&](double p) { return marginal_density(p); });
    double hi = num::integrate(64, a1_ - eps, a1_,
                               [&](double p) { return marginal_density(p); });
    if (!(lo > 0.0) || !(hi > 0.0))
      throw BadLaw("marginal has no mass near an edge of [a0,a1]");
  }
}

Environment generate(const EnvironmentLaw& law, int L, std::uint64_t seed) {
  if (L < 1) throw BadLaw("environment length must be >= 1");
  Environment env;
  env.law = law;
  env.seed = seed;
  env.p.resize(L);
  RandomSource rng(splitmix64(seed ^ 0x632be59bd9b4e019ULL));
  const double a0 = law.a0(), a1 = law.a1();
  if (law.point_mass()) {
    std::fill(env.p.begin(), env.p.end(), a0);
    return env;
  }
  switch (law.kind()) {
    case EnvironmentLaw::Kind::iid_uniform: {
      for (int x = 0; x < L; ++x) env.p[x] = a0 + (a1 - a0) * rng.u01();
      break;
    }
    case EnvironmentLaw::Kind::iid_density: {
      // Inverse CDF through a fixed table; deterministic in the seed.
      const int n = 2048;
      std::vector<double> cdf(n + 1, 0.0);
      double h = (a1 - a0) / n;
      for (int i = 0; i < n; ++i) {
        double mid = a0 + (i + 0.5) * h;
        cdf[i + 1] = cdf[i] + law.marginal_density(mid) * h;
      }
      for (auto& c : cdf) c /= cdf[n];
      for (int x = 0; x < L; ++x) {
        double u = rng.u01();
        int lo = 0, hi = n;
        while (hi - lo > 1) {
          int mid = (lo + hi) / 2;
          (cdf[mid] <= u ? lo : hi) = mid;
        }
        double t = (u - cdf[lo]) / std::max(cdf[lo + 1] - cdf[lo], 1e-300);
        env.p[x] = a0 + (lo + t) * h;
      }
      break;
    }
    case EnvironmentLaw::Kind::shift_coupled: {
      // Periodic ring of uniforms keeps the law exactly shift-stationary.
      const int w = law.window();
      std::vector<double> u(L);
      for (int x = 0; x < L; ++x) u[x] = rng.u01();
      for (int x = 0; x < L; ++x) {
        double s = 0.0;
        for (int j = 0; j < w; ++j) s += u[(x + j) % L];
        env.p[x] = a0 + (a1 - a0) * (s / w);
      }
      break;
    }
  }
  return env;
}

Environment shift(const Environment& env, int y) {
  Environment out = env;
  const int L = env.size();
  for (int x = 0; x < L; ++x) out.p[x] = env.at(x + y);
  return out;
}

void write_csv(const Environment& env, std::ostream& os) {
  os << "site,value\n";
  for (int x = 0; x < env.size(); ++x)
    os << x << ',' << csv::fmt(env.p[x]) << '\n';
}

}  // namespace zrp
