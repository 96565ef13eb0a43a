#pragma once

#include <map>
#include <utility>
#include <vector>

#include "zrp/random.hpp"

namespace zrp {

// Finite-range translation-invariant jump distribution T(y) on Z.
class TransitionKernel {
 public:
  static TransitionKernel nearest_neighbor();  // T(+-1) = 1/2

  explicit TransitionKernel(const std::map<int, double>& weights);

  double operator()(int y) const;
  const std::vector<std::pair<int, double>>& entries() const {
    return entries_;
  }

  // A with T(y) = 0 for |y| >= A.
  int range() const { return range_; }
  double mean() const { return mean_; }
  // sigma = sum_y y^2 T(y) (d = 1 covariance).
  double sigma() const { return sigma_; }

  bool zero_mean(double tol = 1e-12) const;
  // Support offsets generate Z as a group and both directions are reachable.
  bool irreducible() const;

  int sample(RandomSource& rng) const;

 private:
  std::vector<std::pair<int, double>> entries_;  // increasing offsets
  std::vector<double> cdf_;
  int range_ = 1;
  double mean_ = 0.0;
  double sigma_ = 0.0;
};

}  // namespace zrp
