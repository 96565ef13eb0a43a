#include "zrp/rate_function.hpp"

#include <cmath>
#include <limits>

#include "zrp/errors.hpp"

namespace zrp {

RateFunction RateFunction::build(std::vector<double> values, std::string tag) {
  if (values.size() < 2) throw OutOfRange("rate function needs depth >= 1");
  if (values[0] != 0.0) throw OutOfRange("g(0) must be 0");
  for (size_t k = 1; k < values.size(); ++k)
    if (!(values[k] > 0.0))
      throw OutOfRange("g(k) must be positive for k >= 1 (k=" +
                       std::to_string(k) + ")");
  auto d = std::make_shared<Data>();
  d->values = std::move(values);
  d->tag = std::move(tag);
  const int n = static_cast<int>(d->values.size());
  d->suffix_min.assign(n, 0.0);
  d->suffix_min[n - 1] = d->values[n - 1];
  for (int k = n - 2; k >= 1; --k)
    d->suffix_min[k] = std::min(d->values[k], d->suffix_min[k + 1]);
  d->suffix_min[0] = d->suffix_min[1];
  double g_star = 0.0;
  for (int k = 0; k + 1 < n; ++k)
    g_star = std::max(g_star, std::abs(d->values[k + 1] - d->values[k]));
  d->g_star = g_star;
  return RateFunction(std::move(d));
}

RateFunction RateFunction::linear(int probe_depth) {
  std::vector<double> v(probe_depth + 1);
  for (int k = 0; k <= probe_depth; ++k) v[k] = k;
  return build(std::move(v), "linear");
}

RateFunction RateFunction::constant(int probe_depth) {
  std::vector<double> v(probe_depth + 1, 1.0);
  v[0] = 0.0;
  return build(std::move(v), "constant");
}

RateFunction RateFunction::sqrt(int probe_depth) {
  std::vector<double> v(probe_depth + 1);
  for (int k = 0; k <= probe_depth; ++k) v[k] = std::sqrt(double(k));
  return build(std::move(v), "sqrt");
}

RateFunction RateFunction::from_table(std::vector<double> values,
                                      std::string tag) {
  return build(std::move(values), std::move(tag));
}

double RateFunction::operator()(int k) const {
  if (k < 0 || k >= static_cast<int>(d_->values.size()))
    throw OutOfRange("g probed past depth at k=" + std::to_string(k));
  return d_->values[k];
}

double RateFunction::suffix_min(int k) const {
  if (k < 0) k = 0;
  if (k >= static_cast<int>(d_->suffix_min.size()))
    throw OutOfRange("suffix_min past depth");
  return d_->suffix_min[k];
}

}  // namespace zrp
