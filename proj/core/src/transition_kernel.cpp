#include "zrp/transition_kernel.hpp"

#include <cmath>
#include <numeric>

#include "zrp/errors.hpp"

namespace zrp {

TransitionKernel TransitionKernel::nearest_neighbor() {
  return TransitionKernel({{-1, 0.5}, {1, 0.5}});
}

TransitionKernel::TransitionKernel(const std::map<int, double>& weights) {
  double total = 0.0;
  for (auto [y, w] : weights) {
    if (w < 0.0) throw OutOfRange("kernel weight negative");
    if (w == 0.0) continue;
    entries_.emplace_back(y, w);
    total += w;
  }
  if (entries_.empty() || std::abs(total - 1.0) > 1e-12)
    throw OutOfRange("kernel weights must sum to 1");
  cdf_.reserve(entries_.size());
  double acc = 0.0;
  for (auto& [y, w] : entries_) {
    acc += w;
    cdf_.push_back(acc);
    mean_ += y * w;
    sigma_ += double(y) * y * w;
    range_ = std::max(range_, std::abs(y) + 1);
  }
  cdf_.back() = 1.0;
}

double TransitionKernel::operator()(int y) const {
  for (auto& [off, w] : entries_)
    if (off == y) return w;
  return 0.0;
}

bool TransitionKernel::zero_mean(double tol) const {
  return std::abs(mean_) <= tol;
}

bool TransitionKernel::irreducible() const {
  bool pos = false, neg = false;
  int g = 0;
  for (auto& [y, w] : entries_) {
    if (y > 0) pos = true;
    if (y < 0) neg = true;
    if (y != 0) g = std::gcd(g, std::abs(y));
  }
  return pos && neg && g == 1;
}

int TransitionKernel::sample(RandomSource& rng) const {
  double u = rng.u01();
  for (size_t i = 0; i < cdf_.size(); ++i)
    if (u <= cdf_[i]) return entries_[i].first;
  return entries_.back().first;
}

}  // namespace zrp
