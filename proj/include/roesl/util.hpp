#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roesl {

// Phase variables live on the unit circle [0,1).
inline double wrap01(double x) {
  double r = x - std::floor(x);
  if (r >= 1.0) r = 0.0;  // guard against floor rounding at exact integers
  return r;
}

// Circular distance between two phases, in [0, 0.5].
inline double circ_dist(double a, double b) {
  double d = std::fabs(wrap01(a) - wrap01(b));
  return std::min(d, 1.0 - d);
}

// Signed circular difference a - b mapped to [-0.5, 0.5).
inline double circ_signed(double a, double b) {
  double d = wrap01(a - b);
  return d < 0.5 ? d : d - 1.0;
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

inline double mean(std::span<const double> xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

template <typename T>
std::string join(const std::vector<T>& xs, const char* sep = ",") {
  std::ostringstream os;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) os << sep;
    os << xs[i];
  }
  return os.str();
}

}  // namespace roesl
