#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dsgda/data.hpp"
#include "dsgda/errors.hpp"
#include "dsgda/problems.hpp"
#include "dsgda/rng.hpp"
#include "dsgda/schedule.hpp"
#include "dsgda/topology.hpp"

namespace dsgda {

inline Eigen::VectorXd project_ball(const Eigen::VectorXd& v, double radius) {
  if (radius <= 0.0) throw std::invalid_argument("ball radius must be positive");
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

// Agent i's sample draw at iteration t, 1-based. Pure function of
// (seed, i, t): coupled trajectories replay identical streams.
inline int sample_index(std::uint64_t seed, int agent, long t, int n) {
  if (n < 1) throw InvalidSize("shard size must be >= 1");
  const std::uint64_t step =
      (static_cast<std::uint64_t>(static_cast<std::uint32_t>(agent)) << 40) +
      static_cast<std::uint64_t>(t);
  return static_cast<int>(rng::index(seed, rng::kSampling, step, n)) + 1;
}

template <MinimaxProblem P>
struct RunConfig {
  const P* problem = nullptr;
  const DistributedDataset<typename P::Sample>* data = nullptr;
  const MixingMatrix* mixing = nullptr;
  long T = 1;
  Schedule schedule;
  std::uint64_t seed = 0;
  int record_every = 0;  // 0 = default stride max(1, T/1000)

  void validate() const {
    if (!problem || !data || !mixing) throw ConfigError("run config", "", "missing component");
    if (T < 1) throw ConfigError("run config", "T", "iteration count must be >= 1");
    if (mixing->m != data->m)
      throw ConfigError("run config", "m", "mixing matrix and dataset disagree on agent count");
    if (problem->agents() > 0 && problem->agents() != data->m)
      throw ConfigError("run config", "m", "problem parameterization and dataset disagree");
    if (data->n < 1 || static_cast<int>(data->shards.size()) != data->m)
      throw ConfigError("run config", "n", "dataset shards malformed");
  }
  int stride() const {
    return record_every > 0 ? record_every : static_cast<int>(std::max<long>(1, T / 1000));
  }
};

struct Trajectory {
  std::vector<long> rec_t;
  std::vector<Eigen::MatrixXd> x_rec, y_rec;  // per-agent rows at recorded t
  std::vector<Eigen::VectorXd> xbar_rec, ybar_rec;
  std::vector<double> consensus;
  Eigen::MatrixXd x_final, y_final;  // state at t = T
  Eigen::VectorXd xbar_final, ybar_final;
  Eigen::VectorXd x_ave, y_ave;  // rate-weighted averages over t = 0..T-1
};

// Centered Frobenius norm of the stacked agent states:
// sqrt(sum_i |x_i - xbar|^2 + |y_i - ybar|^2).
inline double consensus_residual(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw MismatchedShapes("agent counts differ between blocks");
  const Eigen::RowVectorXd xbar = x.colwise().mean();
  const Eigen::RowVectorXd ybar = y.colwise().mean();
  const double sq = (x.rowwise() - xbar).squaredNorm() + (y.rowwise() - ybar).squaredNorm();
  return std::sqrt(sq);
}

// One D-SGDA update: gossip-mix both blocks, take the stochastic
// descent/ascent step at the pre-mix states, project onto the balls.
template <MinimaxProblem P>
void dsgda_step(const RunConfig<P>& cfg, long t, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  const auto& prob = *cfg.problem;
  const auto& data = *cfg.data;
  const DomainSpec& dom = prob.domain();
  const int m = data.m;

  Eigen::MatrixXd gx(m, dom.d_x), gy(m, dom.d_y);
  for (int i = 0; i < m; ++i) {
    const int j = sample_index(cfg.seed, i, t, data.n);
    const GradPair g = prob.grad(i, x.row(i).transpose(), y.row(i).transpose(),
                                 data.shards[i][j - 1]);
    gx.row(i) = g.gx.transpose();
    gy.row(i) = g.gy.transpose();
  }

  const Eigen::MatrixXd xm = cfg.mixing->weights * x;
  const Eigen::MatrixXd ym = cfg.mixing->weights * y;
  const double ex = cfg.schedule.eta_x(t);
  const double ey = cfg.schedule.eta_y(t);
  for (int i = 0; i < m; ++i) {
    x.row(i) = project_ball(xm.row(i).transpose() - ex * gx.row(i).transpose(), dom.C_x);
    y.row(i) = project_ball(ym.row(i).transpose() + ey * gy.row(i).transpose(), dom.C_y);
  }
}

template <MinimaxProblem P>
Trajectory run(const RunConfig<P>& cfg) {
  cfg.validate();
  const DomainSpec& dom = cfg.problem->domain();
  const int m = cfg.data->m;
  const int stride = cfg.stride();

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(m, dom.d_x);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(m, dom.d_y);
  Eigen::VectorXd x_acc = Eigen::VectorXd::Zero(dom.d_x);
  Eigen::VectorXd y_acc = Eigen::VectorXd::Zero(dom.d_y);
  double wx = 0.0, wy = 0.0;

  Trajectory traj;
  const auto record = [&](long t) {
    traj.rec_t.push_back(t);
    traj.x_rec.push_back(x);
    traj.y_rec.push_back(y);
    traj.xbar_rec.push_back(x.colwise().mean().transpose());
    traj.ybar_rec.push_back(y.colwise().mean().transpose());
    traj.consensus.push_back(consensus_residual(x, y));
  };

  for (long t = 0; t < cfg.T; ++t) {
    if (t % stride == 0) record(t);
    const double ex = cfg.schedule.eta_x(t);
    const double ey = cfg.schedule.eta_y(t);
    x_acc += ex * x.colwise().mean().transpose();
    y_acc += ey * y.colwise().mean().transpose();
    wx += ex;
    wy += ey;
    dsgda_step(cfg, t, x, y);
  }
  record(cfg.T);

  traj.x_final = x;
  traj.y_final = y;
  traj.xbar_final = x.colwise().mean().transpose();
  traj.ybar_final = y.colwise().mean().transpose();
  traj.x_ave = x_acc / wx;
  traj.y_ave = y_acc / wy;
  return traj;
}

// Step-size window under which the one-step GDA map is contractive for
// SC-SC losses: (L+mu)/2 * eta_max^2 <= eta_min <= (L+mu)/(2 L mu).
inline bool contraction_window_ok(const ProblemConstants& c, double eta_x, double eta_y) {
  const double mu = std::min(c.mu_x, c.mu_y);
  if (mu <= 0.0) return false;
  const double lo = 0.5 * (c.L + mu) * std::max(eta_x, eta_y) * std::max(eta_x, eta_y);
  const double hi = 0.5 * (c.L + mu) / (c.L * mu);
  const double eta_min = std::min(eta_x, eta_y);
  return lo <= eta_min && eta_min <= hi;
}

inline void require_contraction_window(const ProblemConstants& c, double eta_x, double eta_y) {
  if (!contraction_window_ok(c, eta_x, eta_y))
    throw StepConditionViolated("step sizes leave the SC-SC contraction window");
}

// Max one-step GDA expansion ratio |G(u)-G(v)| / |u-v| over random pairs
// inside the domain balls, for a fixed per-sample loss.
template <MinimaxProblem P>
double expansiveness_probe(const P& p, int agent, const typename P::Sample& s, double eta_x,
                           double eta_y, int pairs, std::uint64_t seed) {
  const DomainSpec& dom = p.domain();
  const auto gda = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    const GradPair g = p.grad(agent, x, y, s);
    Eigen::VectorXd out(dom.d_x + dom.d_y);
    out.head(dom.d_x) = x - eta_x * g.gx;
    out.tail(dom.d_y) = y + eta_y * g.gy;
    return out;
  };
  double max_ratio = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const Eigen::VectorXd xu = random_in_ball(dom.d_x, dom.C_x, seed, rng::kProbe + 2, k, 0);
    const Eigen::VectorXd yu = random_in_ball(dom.d_y, dom.C_y, seed, rng::kProbe + 2, k, 100);
    const Eigen::VectorXd xv = random_in_ball(dom.d_x, dom.C_x, seed, rng::kProbe + 2, k, 200);
    const Eigen::VectorXd yv = random_in_ball(dom.d_y, dom.C_y, seed, rng::kProbe + 2, k, 300);
    const double dist2 = (xu - xv).squaredNorm() + (yu - yv).squaredNorm();
    if (dist2 <= 1e-20) continue;  // coincident pair carries no ratio
    const double expanded = (gda(xu, yu) - gda(xv, yv)).norm();
    max_ratio = std::max(max_ratio, expanded / std::sqrt(dist2));
  }
  return max_ratio;
}

}  // namespace dsgda
