#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dsgda/errors.hpp"
#include "dsgda/numeric.hpp"
#include "dsgda/problems.hpp"
#include "dsgda/schedule.hpp"
#include "dsgda/topology.hpp"

namespace dsgda {

enum class RateMode { Fixed, Decaying };
enum class GapMode { Weak, Strong };
enum class PopulationSetting { ScscFixed, ScscDecaying, CcFixed };

struct BoundTerm {
  std::string label;
  double value = 0.0;
};

// One evaluated closed-form guarantee. divergent marks cases where a
// denominator (1-lambda), C_lambda, or a series convergence condition fails;
// the value may still be finite (failed convergence condition) or +inf
// (degenerate topology).
struct BoundReport {
  std::string name;
  double value = 0.0;
  bool divergent = false;
  std::vector<BoundTerm> decomposition;

  double term(const std::string& label) const {
    for (const auto& t : decomposition)
      if (t.label == label) return t.value;
    throw std::out_of_range("no bound term labeled '" + label + "'");
  }
};

struct BoundInputs {
  ProblemConstants constants;
  int n = 0;          // samples per agent
  int m = 0;          // agents
  long T = 0;         // iterations
  double lambda = 0;  // second-largest mixing eigenvalue magnitude
  Schedule schedule;
  double C_x = 0.0, C_y = 0.0;  // domain radii

  double mu() const { return std::min(constants.mu_x, constants.mu_y); }

  void validate() const {
    if (n < 1 || m < 1 || T < 1) throw std::invalid_argument("n, m, T must all be at least 1");
    if (!(lambda >= 0.0) || lambda > 1.0) throw std::invalid_argument("lambda outside [0,1]");
    if (constants.G <= 0.0 || constants.L <= 0.0)
      throw std::invalid_argument("constants G and L must be positive");
  }
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline BoundReport make_report(std::string name, std::vector<BoundTerm> terms,
                               bool divergent = false) {
  BoundReport r;
  r.name = std::move(name);
  r.decomposition = std::move(terms);
  r.divergent = divergent;
  KahanSum acc;
  for (const auto& t : r.decomposition) {
    if (std::isinf(t.value)) {
      r.value = kInf;
      r.divergent = true;
      return r;
    }
    acc.add(t.value);
  }
  r.value = acc.value();
  return r;
}

inline void require_fixed(const Schedule& s) {
  if (s.kind != Schedule::Kind::Fixed)
    throw std::invalid_argument("this bound assumes a fixed learning-rate schedule");
}

inline bool close_rel(double a, double b) {
  return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
}

// Stability-shaped decaying schedule: both blocks share the reference modulus
// mu_ref, the min-rate block decays at exponent 1, the max-rate block at
// c = min(c_x, c_y). Returns c.
inline double stability_decay_exponent(const Schedule& s, double mu_ref) {
  if (s.kind != Schedule::Kind::Decaying)
    throw std::invalid_argument("this bound assumes a decaying learning-rate schedule");
  if (!close_rel(s.mu_x_ref, mu_ref) || !close_rel(s.mu_y_ref, mu_ref))
    throw std::invalid_argument("decaying schedule reference modulus must equal " + fmt17(mu_ref));
  if (!close_rel(std::max(s.c_x, s.c_y), 1.0))
    throw std::invalid_argument("the slower learning-rate block must decay at exponent 1");
  return std::min(s.c_x, s.c_y);
}

// C_lambda with the degenerate endpoints resolved: a fully mixed network has
// no cross-agent drift, so the topology constant vanishes at lambda=0; at
// lambda=1 it is infinite.
inline double c_lambda_or_limit(double lambda, double exponent) {
  if (lambda == 0.0) return 0.0;
  if (lambda == 1.0) return kInf;
  return c_lambda(lambda, exponent);
}

inline double inv_gap_or_inf(double lambda) {
  return lambda == 1.0 ? kInf : 1.0 / (1.0 - lambda);
}

}  // namespace detail

// Multiplier turning argument stability into a primal-dual generalization
// gap: sqrt(2)G for the weak gap, G sqrt(2 + 2L^2/mu^2) for the strong gap.
inline double gap_multiplier(const ProblemConstants& k, GapMode mode) {
  if (mode == GapMode::Weak) return std::sqrt(2.0) * k.G;
  const double mu = std::min(k.mu_x, k.mu_y);
  if (mu <= 0.0) throw ZeroModulus("strong gap needs positive convexity moduli");
  return k.G * std::sqrt(2.0 + 2.0 * k.L * k.L / (mu * mu));
}

inline double gen_gap_from_stability(double epsilon, const ProblemConstants& k, GapMode mode) {
  if (epsilon < 0.0) throw std::invalid_argument("stability must be nonnegative");
  return gap_multiplier(k, mode) * epsilon;
}

// Exact double-sum argument-stability bound for strongly convex-strongly
// concave losses, evaluated as displayed:
//   (2G/n) sum_k eta_k^max prod_{s>k} (1 - eta_s^min L mu/(L+mu))
// + 4GL sum_{k>=1} eta_k^max (sum_{s<k} eta_s^max lambda^{k-1-s}) prod_{j>k} (...).
inline BoundReport scsc_stability_general(const BoundInputs& in) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L, mu = in.mu();
  if (mu <= 0.0) throw std::invalid_argument("strong convexity modulus must be positive");
  const double kappa = L * mu / (L + mu);
  const long T = in.T;

  std::vector<double> tail(static_cast<std::size_t>(T));
  tail[static_cast<std::size_t>(T - 1)] = 1.0;
  for (long k = T - 2; k >= 0; --k)
    tail[static_cast<std::size_t>(k)] = tail[static_cast<std::size_t>(k + 1)] *
                                        (1.0 - in.schedule.rate_min(k + 1) * kappa);

  KahanSum sample, consensus;
  double geo = 0.0;  // sum_{s<k} eta_s^max lambda^{k-1-s}
  for (long k = 0; k < T; ++k) {
    const double emax = in.schedule.rate_max(k);
    const double p = tail[static_cast<std::size_t>(k)];
    sample.add(emax * p);
    if (k >= 1) consensus.add(emax * geo * p);
    geo = in.lambda * geo + emax;
  }
  return detail::make_report("scsc_stability_general",
                             {{"sample", 2.0 * G / in.n * sample.value()},
                              {"consensus", 4.0 * G * L * consensus.value()}});
}

// Fixed-rate closed form majorizing the double sum:
//   2G (L+mu)/(eta^min L mu) (2 (eta^max)^2 L/(1-lambda) + eta^max/n).
inline BoundReport scsc_stability_fixed(const BoundInputs& in) {
  in.validate();
  detail::require_fixed(in.schedule);
  const double G = in.constants.G, L = in.constants.L, mu = in.mu();
  if (mu <= 0.0) throw std::invalid_argument("strong convexity modulus must be positive");
  const double emin = in.schedule.rate_min(0), emax = in.schedule.rate_max(0);
  const double pre = 2.0 * G * (L + mu) / (emin * L * mu);
  return detail::make_report(
      "scsc_stability_fixed",
      {{"topology", pre * 2.0 * emax * emax * L * detail::inv_gap_or_inf(in.lambda)},
       {"sample", pre * emax / in.n}});
}

// Decaying-rate partial sums with eta_t^min = 1/(mu(t+1)), eta_t^max =
// 1/(mu(t+1)^c):
//   (2G/(mu n T^b)) sum_{k=0}^{T-1} (k+1)^{b-c}
// + (4GL/(mu^2 T^b)) C_lambda sum_{k=1}^{T-1} (k+1)^{b-c}/k^c,  b = L/(L+mu).
// Flagged divergent when 2c < b+1 (the bound stops shrinking with T).
inline BoundReport scsc_stability_decaying(const BoundInputs& in) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L, mu = in.mu();
  if (mu <= 0.0) throw std::invalid_argument("strong convexity modulus must be positive");
  const double c = detail::stability_decay_exponent(in.schedule, mu);
  const double beta = L / (L + mu);
  const long T = in.T;
  const double tpow = std::pow(static_cast<double>(T), beta);

  KahanSum s1, s2;
  for (long k = 0; k < T; ++k)
    s1.add(std::pow(static_cast<double>(k + 1), beta - c));
  const double clam = detail::c_lambda_or_limit(in.lambda, c);
  if (std::isfinite(clam) && clam > 0.0)
    for (long k = 1; k < T; ++k)
      s2.add(std::pow(static_cast<double>(k + 1), beta - c) /
             std::pow(static_cast<double>(k), c));

  const double sample = 2.0 * G / (mu * in.n * tpow) * s1.value();
  const double topology = std::isinf(clam)
                              ? detail::kInf
                              : 4.0 * G * L / (mu * mu * tpow) * clam * s2.value();
  return detail::make_report("scsc_stability_decaying",
                             {{"sample", sample}, {"topology", topology}},
                             2.0 * c < beta + 1.0);
}

// Simplified closed form of the decaying-rate bound (integral comparison of
// the partial sums); kept as a labeled approximation for cross-checks.
inline BoundReport scsc_stability_decaying_closed(const BoundInputs& in) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L, mu = in.mu();
  if (mu <= 0.0) throw std::invalid_argument("strong convexity modulus must be positive");
  const double c = detail::stability_decay_exponent(in.schedule, mu);
  const double beta = L / (L + mu);
  const double T = static_cast<double>(in.T);

  const double sample = 2.0 * G / (mu * (1.0 - c + beta)) * std::pow(T, 1.0 - c) / in.n;
  const double clam = detail::c_lambda_or_limit(in.lambda, c);
  double topology;
  bool divergent = false;
  if (std::isinf(clam)) {
    topology = detail::kInf;
  } else if (clam == 0.0) {
    topology = 0.0;
  } else {
    const double slack = 2.0 * c - beta - 1.0;
    double series;
    if (slack > 0.0) {
      series = 1.0 / slack;
    } else if (slack == 0.0) {
      series = std::log(T);
    } else {
      series = detail::kInf;  // series grows with T; no fixed closed form
      divergent = true;
    }
    topology = 4.0 * G * L * clam / (mu * mu * std::pow(T, beta)) * series;
  }
  return detail::make_report("scsc_stability_decaying_closed",
                             {{"sample", sample}, {"topology", topology}}, divergent);
}

// Convex-concave stability: the exact running sum
//   (2G/n) sum_k eta_k^max + 4GL sum_{k>=1} eta_k^max sum_{s<k} eta_s^max lambda^{k-1-s}
// plus, for fixed rates, the closed form 2 G eta T/n + 4 G L eta^2 T/(1-lambda).
struct CcStabilityReport {
  BoundReport exact;
  std::optional<BoundReport> closed;  // fixed schedules only
};

inline CcStabilityReport cc_stability(const BoundInputs& in) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L;
  const long T = in.T;

  KahanSum rates, consensus;
  double geo = 0.0;
  for (long k = 0; k < T; ++k) {
    const double emax = in.schedule.rate_max(k);
    rates.add(emax);
    if (k >= 1) consensus.add(emax * geo);
    geo = in.lambda * geo + emax;
  }
  CcStabilityReport out;
  out.exact = detail::make_report("cc_stability_exact",
                                  {{"sample", 2.0 * G / in.n * rates.value()},
                                   {"consensus", 4.0 * G * L * consensus.value()}});

  if (in.schedule.kind == Schedule::Kind::Fixed) {
    const double eta = in.schedule.rate_max(0);
    out.closed = detail::make_report(
        "cc_stability_closed",
        {{"sample", 2.0 * G * eta * T / in.n},
         {"topology", 4.0 * G * L * eta * eta * T * detail::inv_gap_or_inf(in.lambda)}});
    if (!out.closed->divergent && out.exact.value > out.closed->value * (1.0 + 1e-12))
      throw std::logic_error("convex-concave exact sum exceeded its closed form");
  }
  return out;
}

// Weak stability for nonconvex-nonconcave losses.
// Fixed rates: 2 sqrt(2) G^2 (eta^max T/n + 2 L (eta^max)^2 T/(1-lambda)).
// Decaying rates (eta_t^min = 1/(t+1), eta_t^max = 1/(t+1)^c, c+L > 1):
//   (c+L)(c+L-1)^{1/(c+L)} (2 sqrt(2) G^2 T^L/((c+L-1)n)
//     + 4 sqrt(2) G^2 L C_lambda T^L/(2c+L-1))^{1/(c+L)} (Bm/n)^{1-1/(c+L)},
// the burn-in-optimized form, which needs the loss range B.
inline BoundReport ncnc_weak_stability(const BoundInputs& in, RateMode mode) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L;
  const double sqrt2 = std::sqrt(2.0);

  if (mode == RateMode::Fixed) {
    detail::require_fixed(in.schedule);
    const double eta = in.schedule.rate_max(0);
    const double T = static_cast<double>(in.T);
    return detail::make_report(
        "ncnc_weak_stability_fixed",
        {{"sample", 2.0 * sqrt2 * G * G * eta * T / in.n},
         {"topology",
          2.0 * sqrt2 * G * G * 2.0 * L * eta * eta * T * detail::inv_gap_or_inf(in.lambda)}});
  }

  const double c = detail::stability_decay_exponent(in.schedule, 1.0);
  if (c + L <= 1.0) throw std::domain_error("decaying rates need c + L > 1 for the sums to converge");
  if (!in.constants.B) throw MissingB("nonconvex weak stability needs the loss range B");
  const double B = *in.constants.B;
  const double clam = detail::c_lambda_or_limit(in.lambda, c);
  if (std::isinf(clam))
    return detail::make_report("ncnc_weak_stability_decaying",
                               {{"optimized_closed_form", detail::kInf}}, true);

  const double TL = std::pow(static_cast<double>(in.T), L);
  const double inner = 2.0 * sqrt2 * G * G * TL / ((c + L - 1.0) * in.n) +
                       4.0 * sqrt2 * G * G * L * clam * TL / (2.0 * c + L - 1.0);
  const double p = 1.0 / (c + L);
  const double value = (c + L) * std::pow(c + L - 1.0, p) * std::pow(inner, p) *
                       std::pow(B * in.m / in.n, 1.0 - p);
  return detail::make_report("ncnc_weak_stability_decaying", {{"optimized_closed_form", value}});
}

// Strong primal-dual empirical risk of the averaged iterate.
// Fixed rates:
//   (C_x^2+C_y^2)/(2 eta^min T) + eta^max G^2
// + 4 (C_x+C_y) G L eta^max/(1-lambda) + 2 (C_x+C_y) G/sqrt(T).
// Decaying rates eta_{a,t} = 1/(mu_a (t+1)^{c_a}) per block:
//   2 G (C_x+C_y)/sqrt(T) + T_x + T_y + T_drift with the c=1 log branches.
inline BoundReport scsc_optimization_error(const BoundInputs& in, RateMode mode) {
  in.validate();
  const double G = in.constants.G, L = in.constants.L;
  const double T = static_cast<double>(in.T);
  const double csum = in.C_x + in.C_y;

  if (mode == RateMode::Fixed) {
    detail::require_fixed(in.schedule);
    const double emin = in.schedule.rate_min(0), emax = in.schedule.rate_max(0);
    return detail::make_report(
        "scsc_optimization_fixed",
        {{"averaging", (in.C_x * in.C_x + in.C_y * in.C_y) / (2.0 * emin * T)},
         {"rate", emax * G * G},
         {"drift", 4.0 * csum * G * L * emax * detail::inv_gap_or_inf(in.lambda)},
         {"deviation", 2.0 * csum * G / std::sqrt(T)}});
  }

  if (in.schedule.kind != Schedule::Kind::Decaying)
    throw std::invalid_argument("this bound assumes a decaying learning-rate schedule");
  const double mux = in.constants.mu_x, muy = in.constants.mu_y;
  if (mux <= 0.0 || muy <= 0.0)
    throw std::invalid_argument("strong convexity moduli must be positive");
  if (!detail::close_rel(in.schedule.mu_x_ref, mux) || !detail::close_rel(in.schedule.mu_y_ref, muy))
    throw std::invalid_argument("decaying blocks must use the problem moduli as reference");
  const double cx = in.schedule.c_x, cy = in.schedule.c_y;
  const double mu = std::min(mux, muy), cmin = std::min(cx, cy);

  auto block = [&](double mua, double ca) {
    return ca == 1.0 ? G * G * (1.0 + std::log(T)) / (2.0 * mua * T)
                     : G * G / (2.0 * mua * (1.0 - ca) * std::pow(T, ca));
  };
  const double clam = detail::c_lambda_or_limit(in.lambda, cmin);
  double drift;
  if (std::isinf(clam)) {
    drift = detail::kInf;
  } else if (clam == 0.0) {
    drift = 0.0;
  } else {
    drift = cmin == 1.0 ? 4.0 * G * L * clam * csum * std::log(T) / (mu * T)
                        : 4.0 * G * L * clam * csum / (mu * (1.0 - cmin) * std::pow(T, cmin));
  }
  return detail::make_report("scsc_optimization_decaying",
                             {{"deviation", 2.0 * G * csum / std::sqrt(T)},
                              {"block_x", block(mux, cx)},
                              {"block_y", block(muy, cy)},
                              {"drift", drift}});
}

// Population risk = generalization gap from stability + empirical
// optimization error. Strongly convex settings use the strong-gap
// multiplier; the convex-concave setting uses the weak gap and the
// fixed-rate closed forms.
inline BoundReport population_risk_bound(const BoundInputs& in, PopulationSetting setting) {
  BoundReport stab;
  BoundReport opt;
  double mult;
  std::string name;
  switch (setting) {
    case PopulationSetting::ScscFixed:
      stab = scsc_stability_fixed(in);
      opt = scsc_optimization_error(in, RateMode::Fixed);
      mult = gap_multiplier(in.constants, GapMode::Strong);
      name = "population_risk_scsc_fixed";
      break;
    case PopulationSetting::ScscDecaying:
      stab = scsc_stability_decaying(in);
      opt = scsc_optimization_error(in, RateMode::Decaying);
      mult = gap_multiplier(in.constants, GapMode::Strong);
      name = "population_risk_scsc_decaying";
      break;
    case PopulationSetting::CcFixed: {
      detail::require_fixed(in.schedule);
      auto cc = cc_stability(in);
      stab = *cc.closed;  // fixed-rate closed form, present for fixed schedules
      opt = scsc_optimization_error(in, RateMode::Fixed);
      mult = gap_multiplier(in.constants, GapMode::Weak);
      name = "population_risk_cc_fixed";
      break;
    }
    default:
      throw std::invalid_argument("unknown population risk setting");
  }
  return detail::make_report(std::move(name),
                             {{"generalization", mult * stab.value}, {"optimization", opt.value}},
                             stab.divergent || opt.divergent);
}

}  // namespace dsgda
