#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "zrp/errors.hpp"
#include "zrp/media.hpp"
#include "zrp/numerics.hpp"

using namespace zrp;

TEST_CASE("degenerate interval gives the deterministic environment") {
  auto env = generate(EnvironmentLaw::iid_uniform(1.0, 1.0), 8, 123);
  for (double p : env.p) CHECK(p == 1.0);
}

TEST_CASE("uniform law: empirical mean within Monte Carlo error") {
  const int L = 100000;
  auto env = generate(EnvironmentLaw::iid_uniform(1.0, 2.0), L, 2024);
  double mean = 0.0;
  for (double p : env.p) mean += p;
  mean /= L;
  CHECK(std::abs(mean - 1.5) < 3.0 * std::sqrt(1.0 / 12.0 / L));
  for (double p : env.p) {
    CHECK(p >= 1.0);
    CHECK(p <= 2.0);
  }
}

TEST_CASE("generation is deterministic in (law, L, seed)") {
  auto law = EnvironmentLaw::shift_coupled(0.5, 1.5, 3);
  auto a = generate(law, 512, 77);
  auto b = generate(law, 512, 77);
  CHECK(a.p == b.p);
  auto c = generate(law, 512, 78);
  CHECK(a.p != c.p);
}

TEST_CASE("ramp density sampling matches its analytic mean") {
  auto law = EnvironmentLaw::iid_density(
      1.0, 2.0, [](double p) { return 2.0 * (p - 1.0); }, "ramp");
  const int L = 100000;
  auto env = generate(law, L, 5);
  double mean = 0.0;
  for (double p : env.p) mean += p;
  mean /= L;
  CHECK(std::abs(mean - 5.0 / 3.0) < 0.005);  // int 2p(p-1) dp on [1,2]
}

TEST_CASE("shift acts as the periodic group action") {
  auto env = generate(EnvironmentLaw::iid_uniform(1.0, 2.0), 64, 9);
  CHECK(shift(env, 0).p == env.p);
  CHECK(shift(env, 64).p == env.p);
  CHECK(shift(env, -64).p == env.p);
  auto ab = shift(shift(env, 5), 11);
  CHECK(ab.p == shift(env, 16).p);
  CHECK(shift(env, 1).p[0] == env.p[1]);
}

TEST_CASE("law validation rejects bad marginals") {
  CHECK_THROWS_AS(EnvironmentLaw::iid_uniform(0.0, 1.0), BadLaw);
  CHECK_THROWS_AS(EnvironmentLaw::iid_uniform(2.0, 1.0), BadLaw);
  // Not a probability density.
  CHECK_THROWS_AS(EnvironmentLaw::iid_density(
                      1.0, 2.0, [](double) { return 2.0; }, "double"),
                  BadLaw);
  // No mass near the interval edges.
  CHECK_THROWS_AS(EnvironmentLaw::iid_density(
                      1.0, 2.0,
                      [](double p) {
                        return (p > 1.25 && p < 1.75) ? 2.0 : 0.0;
                      },
                      "inner"),
                  BadLaw);
}

TEST_CASE("bates marginal of the moving-average law is a density") {
  for (int w : {1, 2, 3, 5, 8}) {
    auto law = EnvironmentLaw::shift_coupled(1.0, 2.0, w);
    double mass = law.expect([](double) { return 1.0; }, 64);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
    // Mean of the moving average is the interval midpoint.
    double mean = law.expect([](double p) { return p; }, 64);
    CHECK(mean == doctest::Approx(1.5).epsilon(1e-10));
  }
}

namespace {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double d = 0.0;
  size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("stationarity proxy: shifted environments keep the marginal") {
  const int w = 3;
  auto law = EnvironmentLaw::shift_coupled(1.0, 2.0, w);
  const int L = 10000 * w;
  auto env1 = generate(law, L, 31);
  auto env2 = shift(generate(law, L, 32), 7);
  // Subsample disjoint moving-average windows so samples are iid.
  std::vector<double> a, b;
  for (int x = 0; x + w <= L; x += w) {
    a.push_back(env1.p[x]);
    b.push_back(env2.p[x]);
  }
  double d = ks_statistic(a, b);
  // Two-sample KS critical value at alpha = 1e-3.
  double crit = 1.949 * std::sqrt(2.0 / a.size());
  CHECK(d < crit);
}

TEST_CASE("ergodicity proxy: block-average variance decreases in block size") {
  auto law = EnvironmentLaw::shift_coupled(1.0, 2.0, 4);
  const int L = 1 << 16;
  auto env = generate(law, L, 11);
  double lo = 1.0, mid = 1.5;  // indicator of [a0, 1.5)
  auto block_var = [&](int k) {
    std::vector<double> means;
    for (int start = 0; start + k <= L; start += k) {
      double s = 0.0;
      for (int i = start; i < start + k; ++i)
        s += (env.p[i] >= lo && env.p[i] < mid) ? 1.0 : 0.0;
      means.push_back(s / k);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= means.size();
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    return var / means.size();
  };
  double v4 = block_var(4), v32 = block_var(32), v256 = block_var(256);
  CHECK(v32 < v4);
  CHECK(v256 < v32);
}

TEST_CASE("environment CSV serialization shape") {
  auto env = generate(EnvironmentLaw::iid_uniform(1.0, 2.0), 4, 3);
  std::ostringstream os;
  write_csv(env, os);
  std::string text = os.str();
  CHECK(text.rfind("site,value\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}
