#pragma once

#include <memory>
#include <string>
#include <vector>

namespace zrp {

inline constexpr int kDefaultProbeDepth = 1024;

// Jump rate g with g(0) = 0 and g(k) > 0 for k >= 1, tabulated to a probe
// depth. Access past the probed depth throws rather than extrapolating.
class RateFunction {
 public:
  static RateFunction linear(int probe_depth = kDefaultProbeDepth);
  static RateFunction constant(int probe_depth = kDefaultProbeDepth);
  static RateFunction sqrt(int probe_depth = kDefaultProbeDepth);
  static RateFunction from_table(std::vector<double> values,
                                 std::string tag = "custom");

  double operator()(int k) const;
  int probe_depth() const { return static_cast<int>(d_->values.size()) - 1; }
  const std::string& tag() const { return d_->tag; }

  // g* = max probed |g(k+1)-g(k)|.
  double max_increment() const { return d_->g_star; }

  // min g(j) over probed j in [k, depth]; used for geometric tail bounds.
  double suffix_min(int k) const;

 private:
  struct Data {
    std::vector<double> values;      // values[k] = g(k), k = 0..depth
    std::vector<double> suffix_min;  // suffix_min[k] = min_{j>=k} values[j]
    double g_star = 0.0;
    std::string tag;
  };
  explicit RateFunction(std::shared_ptr<const Data> d) : d_(std::move(d)) {}
  static RateFunction build(std::vector<double> values, std::string tag);
  std::shared_ptr<const Data> d_;
};

}  // namespace zrp
