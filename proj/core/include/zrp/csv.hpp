#pragma once

#include <cstdio>
#include <ostream>
#include <string>

namespace zrp::csv {

// Shortest round-trip decimal form; deterministic across runs.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void field(std::ostream& os, double x, bool last = false) {
  os << fmt(x) << (last ? '\n' : ',');
}

inline void field(std::ostream& os, long long x, bool last = false) {
  os << x << (last ? '\n' : ',');
}

}  // namespace zrp::csv
