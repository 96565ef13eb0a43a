#include <doctest.h>

#include <cmath>

#include "zrp/numerics.hpp"
#include "zrp/random.hpp"

using namespace zrp;

TEST_CASE("gauss-legendre integrates smooth functions to machine precision") {
  double p5 = num::integrate(8, 0.0, 1.0, [](double x) { return x * x * x * x * x; });
  CHECK(p5 == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  double inv = num::integrate(64, 1.0, 2.0, [](double p) { return 1.0 / p; });
  CHECK(inv == doctest::Approx(std::log(2.0)).epsilon(1e-14));

  double e = num::integrate(32, 0.0, 1.0, [](double x) { return std::exp(x); });
  CHECK(e == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
}

TEST_CASE("chi-square p-values match tabulated quantiles") {
  // 95% quantiles: dof 1 -> 3.8415, dof 10 -> 18.307.
  CHECK(num::chi2_pvalue(3.841459, 1.0) == doctest::Approx(0.05).epsilon(1e-4));
  CHECK(num::chi2_pvalue(18.30704, 10.0) == doctest::Approx(0.05).epsilon(1e-4));
  // dof 2 is exponential: p = exp(-x/2).
  CHECK(num::chi2_pvalue(5.0, 2.0) ==
        doctest::Approx(std::exp(-2.5)).epsilon(1e-10));
  CHECK(num::chi2_pvalue(0.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("golden section finds the maximizer of a unimodal function") {
  auto f = [](double x) { return -(x - 2.0) * (x - 2.0); };
  double x = num::golden_section_max(f, 0.0, 5.0, 1e-12);
  CHECK(x == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("nelder-mead maximizes a smooth concave function") {
  auto f = [](std::span<const double> x) {
    double v = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      double d = x[i] - double(i + 1);
      v -= d * d;
    }
    return v;
  };
  auto res = num::nelder_mead_max(f, std::vector<double>(3, 0.0), 0.5, 4000);
  CHECK(res.value == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(res.x[2] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("monotone spline interpolates and stays monotone") {
  std::vector<double> x{0.0, 1.0, 2.0, 3.5, 5.0};
  std::vector<double> y{0.0, 0.5, 2.0, 2.2, 6.0};
  num::MonotoneSpline s(x, y);
  for (size_t i = 0; i < x.size(); ++i)
    CHECK(s(x[i]) == doctest::Approx(y[i]).epsilon(1e-13));
  double prev = s(0.0);
  for (double t = 0.01; t <= 5.0; t += 0.01) {
    double v = s(t);
    CHECK(v >= prev - 1e-12);
    prev = v;
  }
  CHECK(s.derivative(1.5) > 0.0);
}

TEST_CASE("wilson interval covers a known p at roughly nominal rate") {
  RandomSource rng(1234);
  const double p = 0.3;
  const int n = 200, reps = 2000;
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    int hits = 0;
    for (int i = 0; i < n; ++i)
      if (rng.u01() < p) ++hits;
    auto ci = num::wilson_interval(hits, n);
    if (ci.lo <= p && p <= ci.hi) ++covered;
  }
  double coverage = double(covered) / reps;
  CHECK(coverage > 0.93);
  CHECK(coverage < 0.99);
}

TEST_CASE("trapezoid rule is exact for linear integrands") {
  std::vector<double> t{0.0, 0.5, 1.25, 2.0};
  std::vector<double> f{1.0, 2.0, 3.5, 5.0};  // f = 1 + 2t
  CHECK(num::trapezoid(t, f) == doctest::Approx(2.0 + 4.0).epsilon(1e-14));
}

TEST_CASE("parallel replica fan-out is deterministic in the thread count") {
  auto fill = [](int threads) {
    std::vector<double> out(64);
    num::parallel_replicas(64, threads, [&](int r) {
      RandomSource rng(RandomSource(77).child(r).seed());
      out[r] = rng.u01();
    });
    return out;
  };
  CHECK(fill(1) == fill(4));
}

TEST_CASE("random source substreams are reproducible in isolation") {
  RandomSource master(42);
  double a = master.child(7).u01();
  master.u01();  // advancing the parent must not disturb children
  CHECK(RandomSource(42).child(7).u01() == a);
}
