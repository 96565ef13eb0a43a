#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace zrp {

// Law of the random environment {p_x}: stationary, ergodic, with an
// absolutely continuous one-site marginal supported in [a0,a1].
class EnvironmentLaw {
 public:
  enum class Kind { iid_uniform, iid_density, shift_coupled };

  static EnvironmentLaw iid_uniform(double a0, double a1);
  static EnvironmentLaw iid_density(double a0, double a1,
                                    std::function<double(double)> density,
                                    std::string tag);
  // Window-w moving average of iid uniforms, rescaled into [a0,a1].
  static EnvironmentLaw shift_coupled(double a0, double a1, int window);

  Kind kind() const { return kind_; }
  double a0() const { return a0_; }
  double a1() const { return a1_; }
  int window() const { return window_; }
  bool point_mass() const { return a0_ == a1_; }
  bool iid() const { return kind_ != Kind::shift_coupled; }
  const std::string& tag() const { return tag_; }

  // One-site marginal density on [a0,a1] (Bates for shift_coupled).
  double marginal_density(double p) const;

  // E_m[f(p_0)] by fixed-order quadrature over the marginal.
  double expect(const std::function<double(double)>& f, int quad_nodes) const;

  // Throws BadLaw if the marginal is not a probability density or misses
  // mass near either edge of [a0,a1].
  void validate() const;

 private:
  Kind kind_ = Kind::iid_uniform;
  double a0_ = 1.0, a1_ = 1.0;
  int window_ = 1;
  std::function<double(double)> density_;
  std::string tag_;
};

struct Environment {
  std::vector<double> p;
  EnvironmentLaw law;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(p.size()); }
  double operator[](int x) const { return p[x]; }
  // Periodic access.
  double at(int x) const {
    int L = size();
    int i = x % L;
    return p[i < 0 ? i + L : i];
  }
};

// Deterministic in (law, L, seed).
Environment generate(const EnvironmentLaw& law, int L, std::uint64_t seed);

// (tau_y p)(x) = p(x+y) with periodic wraparound.
Environment shift(const Environment& env, int y);

// Rows "site,value"; header included.
void write_csv(const Environment& env, std::ostream& os);

}  // namespace zrp
