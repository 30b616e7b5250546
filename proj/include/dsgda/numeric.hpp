#pragma once

#include <cstdio>
#include <string>

namespace dsgda {

// Kahan compensated accumulator; keeps long bound sums (T up to 1e5)
// accurate to ~1e-10 relative.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - compensation_;
    const double t = sum_ + y;
    compensation_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// 17 significant digits round-trip doubles exactly; used for every CSV cell
// so repeated runs are byte-identical.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace dsgda
