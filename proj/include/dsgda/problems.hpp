#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsgda/data.hpp"
#include "dsgda/errors.hpp"
#include "dsgda/jacobi.hpp"
#include "dsgda/rng.hpp"

namespace dsgda {

struct DomainSpec {
  int d_x = 1, d_y = 1;
  double C_x = 1.0, C_y = 1.0;  // Euclidean ball radii
};

struct ProblemConstants {
  double G = 0.0;  // Lipschitz continuity of the per-sample loss
  double L = 0.0;  // Lipschitz smoothness of its gradient
  double mu_x = 0.0, mu_y = 0.0;
  std::optional<double> B;  // uniform |f| bound, nonconvex family only
};

struct GradPair {
  Eigen::VectorXd gx, gy;
};

namespace detail {

inline void check_domain(const DomainSpec& dom, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) {
  if (x.size() != dom.d_x || y.size() != dom.d_y)
    throw MismatchedShapes("point dimensions do not match the problem domain");
  if (x.norm() > dom.C_x + 1e-9)
    throw DomainViolation("x outside its ball: |x|=" + std::to_string(x.norm()));
  if (y.norm() > dom.C_y + 1e-9)
    throw DomainViolation("y outside its ball: |y|=" + std::to_string(y.norm()));
}

}  // namespace detail

// Uniform draw from the Euclidean ball of radius C in dimension d.
inline Eigen::VectorXd random_in_ball(int d, double C, std::uint64_t seed, std::uint64_t stream,
                                      std::uint64_t step, std::uint64_t slot0 = 0) {
  Eigen::VectorXd v(d);
  for (int j = 0; j < d; ++j) v[j] = rng::normal(seed, stream, step, slot0 + j);
  const double norm = v.norm();
  if (norm == 0.0) return Eigen::VectorXd::Zero(d);
  const double u = rng::u01(seed, stream, step, slot0 + 2 * static_cast<std::uint64_t>(d) + 7);
  return v * (C * std::pow(u, 1.0 / d) / norm);
}

template <class P>
concept MinimaxProblem = requires(const P& p, int agent, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y, const typename P::Sample& s,
                                  std::uint64_t seed, std::uint64_t k) {
  { p.agents() } -> std::convertible_to<int>;
  { p.domain() } -> std::convertible_to<const DomainSpec&>;
  { p.constants() } -> std::convertible_to<const ProblemConstants&>;
  { p.loss(agent, x, y, s) } -> std::convertible_to<double>;
  { p.grad(agent, x, y, s) } -> std::convertible_to<GradPair>;
  { p.probe_sample(seed, k) } -> std::convertible_to<typename P::Sample>;
};

// f_i(x,y;xi) = (mu_x/2)|x|^2 - (mu_y/2)|y|^2 + x'A_i y + b(xi)'x + c(xi)'y.
// Strongly convex-concave with closed-form saddle and population risk.
class QuadraticProblem {
 public:
  using Sample = QuadraticSample;

  QuadraticProblem(double mu_x, double mu_y, std::vector<Eigen::MatrixXd> coupling,
                   DomainSpec dom, double radius_b, double radius_c)
      : mu_x_(mu_x),
        mu_y_(mu_y),
        coupling_(std::move(coupling)),
        dom_(dom),
        radius_b_(radius_b),
        radius_c_(radius_c) {
    if (mu_x_ < 0.0 || mu_y_ < 0.0) throw std::invalid_argument("moduli must be >= 0");
    if (coupling_.empty()) throw InvalidSize("at least one agent required");
    double a_norm_max = 0.0;
    double l_max = 0.0;
    for (const auto& a : coupling_) {
      if (a.rows() != dom_.d_x || a.cols() != dom_.d_y)
        throw MismatchedShapes("coupling matrix shape mismatch");
      a_norm_max = std::max(a_norm_max, spectral_norm(a));
      // Per-sample Hessian is constant: [[mu_x I, A],[A', -mu_y I]].
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dom_.d_x + dom_.d_y, dom_.d_x + dom_.d_y);
      h.topLeftCorner(dom_.d_x, dom_.d_x) = mu_x_ * Eigen::MatrixXd::Identity(dom_.d_x, dom_.d_x);
      h.bottomRightCorner(dom_.d_y, dom_.d_y) =
          -mu_y_ * Eigen::MatrixXd::Identity(dom_.d_y, dom_.d_y);
      h.topRightCorner(dom_.d_x, dom_.d_y) = a;
      h.bottomLeftCorner(dom_.d_y, dom_.d_x) = a.transpose();
      const auto eig = jacobi_eigenvalues(h);
      l_max = std::max({l_max, std::fabs(eig.front()), std::fabs(eig.back())});
    }
    const double gx = mu_x_ * dom_.C_x + a_norm_max * dom_.C_y + radius_b_;
    const double gy = mu_y_ * dom_.C_y + a_norm_max * dom_.C_x + radius_c_;
    consts_.G = std::hypot(gx, gy);
    consts_.L = l_max;
    consts_.mu_x = mu_x_;
    consts_.mu_y = mu_y_;
  }

  // Deterministic instance with per-agent coupling matrices of spectral norm
  // coupling_scale.
  static QuadraticProblem synthesize(int m, DomainSpec dom, double mu_x, double mu_y,
                                     double coupling_scale, double radius_b, double radius_c,
                                     std::uint64_t seed) {
    std::vector<Eigen::MatrixXd> coupling;
    coupling.reserve(m);
    for (int i = 0; i < m; ++i) {
      Eigen::MatrixXd a(dom.d_x, dom.d_y);
      for (int r = 0; r < dom.d_x; ++r)
        for (int c = 0; c < dom.d_y; ++c)
          a(r, c) = rng::normal_truncated(seed, rng::kSynthesis + 2, i,
                                          static_cast<std::uint64_t>(r) * dom.d_y + c, 4.0);
      const double norm = spectral_norm(a);
      if (norm > 0.0) a *= coupling_scale / norm;
      coupling.push_back(std::move(a));
    }
    return QuadraticProblem(mu_x, mu_y, std::move(coupling), dom, radius_b, radius_c);
  }

  int agents() const { return static_cast<int>(coupling_.size()); }
  const DomainSpec& domain() const { return dom_; }
  const ProblemConstants& constants() const { return consts_; }
  double mu_x() const { return mu_x_; }
  double mu_y() const { return mu_y_; }
  const Eigen::MatrixXd& coupling(int agent) const { return coupling_.at(agent); }

  Eigen::MatrixXd mean_coupling() const {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dom_.d_x, dom_.d_y);
    for (const auto& ai : coupling_) a += ai;
    return a / static_cast<double>(coupling_.size());
  }

  double loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const Sample& s) const {
    detail::check_domain(dom_, x, y);
    return 0.5 * mu_x_ * x.squaredNorm() - 0.5 * mu_y_ * y.squaredNorm() +
           x.dot(coupling_.at(agent) * y) + s.b.dot(x) + s.c.dot(y);
  }

  GradPair grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Sample& s) const {
    detail::check_domain(dom_, x, y);
    const Eigen::MatrixXd& a = coupling_.at(agent);
    return {mu_x_ * x + a * y + s.b, -mu_y_ * y + a.transpose() * x + s.c};
  }

  Sample probe_sample(std::uint64_t seed, std::uint64_t k) const {
    Sample s;
    s.b = random_in_ball(dom_.d_x, radius_b_, seed, rng::kProbe, k, 0);
    s.c = random_in_ball(dom_.d_y, radius_c_, seed, rng::kProbe, k, std::uint64_t{1} << 20);
    return s;
  }

 private:
  double mu_x_, mu_y_;
  std::vector<Eigen::MatrixXd> coupling_;
  DomainSpec dom_;
  double radius_b_, radius_c_;
  ProblemConstants consts_;
};

// Saddle of the averaged quadratic with linear terms bbar, cbar:
//   mu_x x + Abar y + bbar = 0,  -mu_y y + Abar' x + cbar = 0.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> solve_quadratic_saddle(
    const QuadraticProblem& p, const Eigen::VectorXd& bbar, const Eigen::VectorXd& cbar) {
  if (p.mu_x() <= 0.0 || p.mu_y() <= 0.0)
    throw std::invalid_argument("saddle oracle needs mu_x, mu_y > 0");
  const DomainSpec& dom = p.domain();
  const int d = dom.d_x + dom.d_y;
  const Eigen::MatrixXd abar = p.mean_coupling();

  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d, d);
  k.topLeftCorner(dom.d_x, dom.d_x) = p.mu_x() * Eigen::MatrixXd::Identity(dom.d_x, dom.d_x);
  k.bottomRightCorner(dom.d_y, dom.d_y) = -p.mu_y() * Eigen::MatrixXd::Identity(dom.d_y, dom.d_y);
  k.topRightCorner(dom.d_x, dom.d_y) = abar;
  k.bottomLeftCorner(dom.d_y, dom.d_x) = abar.transpose();

  Eigen::VectorXd rhs(d);
  rhs.head(dom.d_x) = -bbar;
  rhs.tail(dom.d_y) = -cbar;
  const Eigen::VectorXd z = k.fullPivLu().solve(rhs);
  if ((k * z - rhs).norm() > 1e-10) throw NotConverged("saddle solve residual too large");

  Eigen::VectorXd xs = z.head(dom.d_x), ys = z.tail(dom.d_y);
  if (xs.norm() >= dom.C_x || ys.norm() >= dom.C_y)
    throw SaddleOutsideDomain("unconstrained saddle leaves the domain balls");
  return {std::move(xs), std::move(ys)};
}

// Empirical saddle from the dataset's grand sample means.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> saddle_point(
    const QuadraticProblem& p, const DistributedDataset<QuadraticSample>& data) {
  Eigen::VectorXd bbar = Eigen::VectorXd::Zero(p.domain().d_x);
  Eigen::VectorXd cbar = Eigen::VectorXd::Zero(p.domain().d_y);
  std::size_t count = 0;
  for (const auto& shard : data.shards)
    for (const auto& s : shard) {
      bbar += s.b;
      cbar += s.c;
      ++count;
    }
  if (count == 0) throw InsufficientData("empty dataset");
  return solve_quadratic_saddle(p, bbar / count, cbar / count);
}

// SOLAM min-max AUC surrogate. Primal x = (w, a, b), dual y = (alpha).
// Convex in x, concave in the scalar alpha, for class prior p in (0,1).
class AucProblem {
 public:
  using Sample = LabeledSample;

  AucProblem(double positive_prior, int feature_dim, DomainSpec dom,
             std::vector<LabeledSample> probe_pool)
      : p_(positive_prior), dim_(feature_dim), dom_(dom), probe_pool_(std::move(probe_pool)) {
    if (!(p_ > 0.0) || !(p_ < 1.0))
      throw std::invalid_argument("class prior must lie strictly inside (0,1)");
    if (dom_.d_x != dim_ + 2 || dom_.d_y != 1)
      throw MismatchedShapes("AUC domain must be d_x = features+2, d_y = 1");
    if (probe_pool_.empty()) throw InsufficientData("AUC probe pool is empty");
    double r = 0.0;
    for (const auto& s : probe_pool_)
      r = std::max(r, std::sqrt(feature_sq_norm(s)));
    feature_radius_ = r;
    // Provisional conservative constants; calibrate_constants tightens them.
    const double q = std::max(p_, 1.0 - p_);
    const double umax = dom_.C_x * feature_radius_;
    const double gw = 2.0 * q * (umax + dom_.C_x) * feature_radius_ +
                      2.0 * (1.0 + dom_.C_y) * q * feature_radius_;
    const double gab = 2.0 * q * (umax + dom_.C_x);
    const double galpha = 2.0 * q * umax + 0.5 * dom_.C_y;
    consts_.G = std::sqrt(gw * gw + 2.0 * gab * gab + galpha * galpha);
    consts_.L = 2.0 * (feature_radius_ + 1.0) * (feature_radius_ + 1.0) + 2.0;
    consts_.mu_x = consts_.mu_y = 0.0;
  }

  // Replaces the conservative analytic constants with empirical estimates
  // plus a 10% margin (the loss is piecewise quadratic, so probe maxima
  // approach the true suprema).
  void calibrate_constants(int trials, std::uint64_t seed);

  int agents() const { return 0; }  // 0 = loss is agent-independent
  const DomainSpec& domain() const { return dom_; }
  const ProblemConstants& constants() const { return consts_; }
  double prior() const { return p_; }
  double feature_radius() const { return feature_radius_; }

  double loss(int, const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Sample& s) const {
    detail::check_domain(dom_, x, y);
    const double u = dot_features(x, s);
    const double alpha = y[0];
    const bool pos = s.label > 0.0;
    if (pos) {
      const double r = u - x[dim_];
      return (1.0 - p_) * r * r - 2.0 * (1.0 + alpha) * (1.0 - p_) * u -
             p_ * (1.0 - p_) * alpha * alpha;
    }
    const double r = u - x[dim_ + 1];
    return p_ * r * r + 2.0 * (1.0 + alpha) * p_ * u - p_ * (1.0 - p_) * alpha * alpha;
  }

  GradPair grad(int, const Eigen::VectorXd& x, const Eigen::VectorXd& y, const Sample& s) const {
    detail::check_domain(dom_, x, y);
    const double u = dot_features(x, s);
    const double alpha = y[0];
    const bool pos = s.label > 0.0;

    GradPair g;
    g.gx = Eigen::VectorXd::Zero(dom_.d_x);
    g.gy = Eigen::VectorXd::Zero(1);
    if (pos) {
      const double r = u - x[dim_];
      const double wcoef = 2.0 * (1.0 - p_) * r - 2.0 * (1.0 + alpha) * (1.0 - p_);
      add_features(g.gx, s, wcoef);
      g.gx[dim_] = -2.0 * (1.0 - p_) * r;
      g.gy[0] = -2.0 * (1.0 - p_) * u - 2.0 * p_ * (1.0 - p_) * alpha;
    } else {
      const double r = u - x[dim_ + 1];
      const double wcoef = 2.0 * p_ * r + 2.0 * (1.0 + alpha) * p_;
      add_features(g.gx, s, wcoef);
      g.gx[dim_ + 1] = -2.0 * p_ * r;
      g.gy[0] = 2.0 * p_ * u - 2.0 * p_ * (1.0 - p_) * alpha;
    }
    return g;
  }

  Sample probe_sample(std::uint64_t seed, std::uint64_t k) const {
    return probe_pool_[rng::index(seed, rng::kProbe, k, probe_pool_.size())];
  }

 private:
  static double feature_sq_norm(const LabeledSample& s) {
    double acc = 0.0;
    for (const auto& [idx, val] : s.features) acc += val * val;
    return acc;
  }
  double dot_features(const Eigen::VectorXd& x, const Sample& s) const {
    double acc = 0.0;
    for (const auto& [idx, val] : s.features)
      if (idx <= dim_) acc += x[idx - 1] * val;
    return acc;
  }
  void add_features(Eigen::VectorXd& g, const Sample& s, double coef) const {
    for (const auto& [idx, val] : s.features)
      if (idx <= dim_) g[idx - 1] += coef * val;
  }

  double p_;
  int dim_;
  DomainSpec dom_;
  std::vector<LabeledSample> probe_pool_;
  double feature_radius_ = 0.0;
  ProblemConstants consts_;
};

// f_i(x,y;xi) = B sin(u_i'x + xi) sin(v_i'y) with unit u_i, v_i.
// Bounded by B with G = L = B exactly.
class SineProblem {
 public:
  using Sample = double;

  SineProblem(double bound, std::vector<Eigen::VectorXd> u, std::vector<Eigen::VectorXd> v,
              DomainSpec dom)
      : bound_(bound), u_(std::move(u)), v_(std::move(v)), dom_(dom) {
    if (bound_ <= 0.0) throw std::invalid_argument("bound B must be positive");
    if (u_.empty() || u_.size() != v_.size()) throw InvalidSize("one (u,v) pair per agent");
    for (std::size_t i = 0; i < u_.size(); ++i) {
      if (u_[i].size() != dom_.d_x || v_[i].size() != dom_.d_y)
        throw MismatchedShapes("direction dimensions mismatch");
      if (std::fabs(u_[i].norm() - 1.0) > 1e-9 || std::fabs(v_[i].norm() - 1.0) > 1e-9)
        throw std::invalid_argument("direction vectors must be unit norm");
    }
    consts_.G = bound_;
    consts_.L = bound_;
    consts_.mu_x = consts_.mu_y = 0.0;
    consts_.B = bound_;
  }

  static SineProblem synthesize(int m, DomainSpec dom, double bound, std::uint64_t seed) {
    const auto unit = [&](int agent, int d, std::uint64_t slot0) {
      Eigen::VectorXd v(d);
      for (int j = 0; j < d; ++j)
        v[j] = rng::normal(seed, rng::kSynthesis + 3, agent, slot0 + j);
      const double norm = v.norm();
      if (norm == 0.0) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
        e[0] = 1.0;
        return e;
      }
      return Eigen::VectorXd(v / norm);
    };
    std::vector<Eigen::VectorXd> u, v;
    for (int i = 0; i < m; ++i) {
      u.push_back(unit(i, dom.d_x, 0));
      v.push_back(unit(i, dom.d_y, std::uint64_t{1} << 20));
    }
    return SineProblem(bound, std::move(u), std::move(v), dom);
  }

  int agents() const { return static_cast<int>(u_.size()); }
  const DomainSpec& domain() const { return dom_; }
  const ProblemConstants& constants() const { return consts_; }

  double loss(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
              const Sample& s) const {
    detail::check_domain(dom_, x, y);
    return bound_ * std::sin(u_.at(agent).dot(x) + s) * std::sin(v_.at(agent).dot(y));
  }

  GradPair grad(int agent, const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                const Sample& s) const {
    detail::check_domain(dom_, x, y);
    const double a = u_.at(agent).dot(x) + s;
    const double b = v_.at(agent).dot(y);
    return {bound_ * std::cos(a) * std::sin(b) * u_.at(agent),
            bound_ * std::sin(a) * std::cos(b) * v_.at(agent)};
  }

  Sample probe_sample(std::uint64_t seed, std::uint64_t k) const {
    return 6.283185307179586476925286766559 * rng::u01(seed, rng::kProbe, k, 3);
  }

 private:
  double bound_;
  std::vector<Eigen::VectorXd> u_, v_;
  DomainSpec dom_;
  ProblemConstants consts_;
};

// Random-probe measurement of the constants over the domain balls.
template <MinimaxProblem P>
ProblemConstants measure_constants(const P& p, int trials, std::uint64_t seed) {
  const DomainSpec& dom = p.domain();
  const int m = std::max(1, std::min(p.agents(), 1 << 10));
  ProblemConstants est;
  est.mu_x = est.mu_y = std::numeric_limits<double>::infinity();
  double bmax = 0.0;

  for (int t = 0; t < trials; ++t) {
    const int agent = t % m;
    const auto s = p.probe_sample(seed, t);
    const Eigen::VectorXd x1 = random_in_ball(dom.d_x, dom.C_x, seed, rng::kProbe + 1, t, 0);
    const Eigen::VectorXd y1 = random_in_ball(dom.d_y, dom.C_y, seed, rng::kProbe + 1, t, 100);
    const Eigen::VectorXd x2 = random_in_ball(dom.d_x, dom.C_x, seed, rng::kProbe + 1, t, 200);
    const Eigen::VectorXd y2 = random_in_ball(dom.d_y, dom.C_y, seed, rng::kProbe + 1, t, 300);

    const double f11 = p.loss(agent, x1, y1, s);
    const GradPair g1 = p.grad(agent, x1, y1, s);
    const GradPair g2 = p.grad(agent, x2, y2, s);

    est.G = std::max(est.G, std::hypot(g1.gx.norm(), g1.gy.norm()));
    bmax = std::max(bmax, std::fabs(f11));

    // near-coincident pairs amplify float cancellation in the secant
    // ratios far beyond the audit tolerances, so they carry no information
    const double dist2 = (x1 - x2).squaredNorm() + (y1 - y2).squaredNorm();
    if (dist2 > 1e-4) {
      const double gdist = std::hypot((g1.gx - g2.gx).norm(), (g1.gy - g2.gy).norm());
      est.L = std::max(est.L, gdist / std::sqrt(dist2));
    }
    const double dx2 = (x2 - x1).squaredNorm();
    if (dx2 > 1e-4) {
      const double fx2 = p.loss(agent, x2, y1, s);
      est.mu_x = std::min(est.mu_x, 2.0 * (fx2 - f11 - g1.gx.dot(x2 - x1)) / dx2);
    }
    const double dy2 = (y2 - y1).squaredNorm();
    if (dy2 > 1e-4) {
      const double fy2 = p.loss(agent, x1, y2, s);
      est.mu_y = std::min(est.mu_y, 2.0 * (f11 + g1.gy.dot(y2 - y1) - fy2) / dy2);
    }
  }
  if (p.constants().B) est.B = bmax;
  return est;
}

// Certifies the declared constants by random probing; returns the tightened
// empirical estimates. Throws ConstantViolation naming the breached bound.
template <MinimaxProblem P>
ProblemConstants audit_constants(const P& p, int trials, std::uint64_t seed) {
  if (trials < 1000) throw std::invalid_argument("audit needs at least 1000 trials");
  const ProblemConstants declared = p.constants();
  const ProblemConstants est = measure_constants(p, trials, seed);

  if (est.G > declared.G + 1e-9)
    throw ConstantViolation("gradient norm " + fmt17(est.G) + " exceeds declared G=" +
                            fmt17(declared.G));
  if (est.L > declared.L * (1.0 + 1e-9) + 1e-12)
    throw ConstantViolation("gradient Lipschitz ratio " + fmt17(est.L) +
                            " exceeds declared L=" + fmt17(declared.L));
  // zero moduli declare no curvature, so there is nothing to certify
  if (declared.mu_x > 0.0 && est.mu_x < declared.mu_x - 1e-9)
    throw ConstantViolation("x-curvature " + fmt17(est.mu_x) + " below declared mu_x=" +
                            fmt17(declared.mu_x));
  if (declared.mu_y > 0.0 && est.mu_y < declared.mu_y - 1e-9)
    throw ConstantViolation("y-curvature " + fmt17(est.mu_y) + " below declared mu_y=" +
                            fmt17(declared.mu_y));
  if (declared.B && est.B && *est.B > *declared.B + 1e-9)
    throw ConstantViolation("loss magnitude " + fmt17(*est.B) + " exceeds declared B=" +
                            fmt17(*declared.B));
  return est;
}

inline void AucProblem::calibrate_constants(int trials, std::uint64_t seed) {
  const ProblemConstants est = measure_constants(*this, trials, seed);
  consts_.G = 1.1 * est.G;
  consts_.L = 1.1 * est.L;
}

}  // namespace dsgda
