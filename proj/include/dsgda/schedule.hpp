#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsgda {

// Learning-rate schedule. Decaying mode runs each block at
// eta_alpha(t) = 1 / (mu_alpha_ref * (t+1)^{c_alpha}) with c_alpha in (0,1];
// the block with the smaller exponent is the max-rate block.
struct Schedule {
  enum class Kind { Fixed, Decaying };
  Kind kind = Kind::Fixed;
  double eta_x_const = 0.01, eta_y_const = 0.01;
  double mu_x_ref = 1.0, c_x = 1.0;
  double mu_y_ref = 1.0, c_y = 1.0;

  static Schedule fixed(double eta_x, double eta_y) {
    if (eta_x <= 0.0 || eta_y <= 0.0) throw std::invalid_argument("rates must be positive");
    Schedule s;
    s.kind = Kind::Fixed;
    s.eta_x_const = eta_x;
    s.eta_y_const = eta_y;
    return s;
  }

  // Common asymmetric shape: min block at 1/(mu(t+1)), max block at
  // 1/(mu(t+1)^c).
  static Schedule decaying(double mu_ref, double c, bool x_takes_max = true) {
    return x_takes_max ? decaying_per_block(mu_ref, c, mu_ref, 1.0)
                       : decaying_per_block(mu_ref, 1.0, mu_ref, c);
  }

  static Schedule decaying_per_block(double mu_x, double c_x, double mu_y, double c_y) {
    if (mu_x <= 0.0 || mu_y <= 0.0) throw std::invalid_argument("reference moduli must be positive");
    if (!(c_x > 0.0) || c_x > 1.0 || !(c_y > 0.0) || c_y > 1.0)
      throw std::invalid_argument("decay exponents must lie in (0,1]");
    Schedule s;
    s.kind = Kind::Decaying;
    s.mu_x_ref = mu_x;
    s.c_x = c_x;
    s.mu_y_ref = mu_y;
    s.c_y = c_y;
    return s;
  }

  double eta_x(long t) const {
    return kind == Kind::Fixed ? eta_x_const
                               : 1.0 / (mu_x_ref * std::pow(static_cast<double>(t + 1), c_x));
  }
  double eta_y(long t) const {
    return kind == Kind::Fixed ? eta_y_const
                               : 1.0 / (mu_y_ref * std::pow(static_cast<double>(t + 1), c_y));
  }
  double rate_min(long t) const { return std::min(eta_x(t), eta_y(t)); }
  double rate_max(long t) const { return std::max(eta_x(t), eta_y(t)); }
};

}  // namespace dsgda
