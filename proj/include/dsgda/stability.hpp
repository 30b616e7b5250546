#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsgda/bounds.hpp"
#include "dsgda/data.hpp"
#include "dsgda/engine.hpp"
#include "dsgda/errors.hpp"
#include "dsgda/numeric.hpp"
#include "dsgda/problems.hpp"

namespace dsgda {

// Two trajectories driven by the same sampling stream on neighboring
// datasets. delta is measured on the agent-averaged iterates (the declared
// algorithm output); delta_stacked keeps the per-agent stacked distance for
// diagnostics.
template <MinimaxProblem P>
struct CoupledRun {
  RunConfig<P> cfg;  // unperturbed configuration
  NeighborPerturbation<typename P::Sample> perturbation;
  Trajectory a, b;
  std::vector<long> rec_t;
  std::vector<double> delta;
  std::vector<double> delta_stacked;
  double delta_final = 0.0;
  double delta_avg_iterate = 0.0;
  long first_hit_t = -1;  // first iteration any agent draws its replaced index; -1 = never
};

struct StabilityReport {
  double epsilon_arg = 0.0, epsilon_arg_stderr = 0.0;
  double epsilon_arg_avg_iterate = 0.0, epsilon_arg_avg_iterate_stderr = 0.0;
  std::optional<double> epsilon_weak;
  int seeds = 0;
};

enum class StabilityPoint { Final, AvgIterate };

struct ModelPair {
  Eigen::VectorXd x, y;
};

namespace detail {

inline std::pair<double, double> mean_stderr(const std::vector<double>& v) {
  const int k = static_cast<int>(v.size());
  KahanSum s;
  for (double d : v) s.add(d);
  const double mean = s.value() / k;
  if (k < 2) return {mean, 0.0};
  KahanSum sq;
  for (double d : v) sq.add((d - mean) * (d - mean));
  return {mean, std::sqrt(sq.value() / (k - 1)) / std::sqrt(static_cast<double>(k))};
}

inline double stacked_distance(const Eigen::VectorXd& xa, const Eigen::VectorXd& ya,
                               const Eigen::VectorXd& xb, const Eigen::VectorXd& yb) {
  return std::sqrt((xa - xb).squaredNorm() + (ya - yb).squaredNorm());
}

}  // namespace detail

template <MinimaxProblem P>
CoupledRun<P> coupled_run(const RunConfig<P>& cfg,
                          const DistributedDataset<typename P::Sample>& neighbor,
                          const NeighborPerturbation<typename P::Sample>& pert) {
  cfg.validate();
  const auto& base = *cfg.data;
  if (neighbor.m != base.m || neighbor.n != base.n)
    throw MismatchedShapes("neighbor dataset shape differs from the base dataset");
  if (static_cast<int>(pert.replaced_index.size()) != base.m)
    throw MismatchedShapes("perturbation does not cover every agent");

  CoupledRun<P> out;
  out.cfg = cfg;
  out.perturbation = pert;
  out.a = run(cfg);
  RunConfig<P> cfg_b = cfg;
  cfg_b.data = &neighbor;
  out.b = run(cfg_b);

  out.rec_t = out.a.rec_t;
  const std::size_t k = out.rec_t.size();
  out.delta.resize(k);
  out.delta_stacked.resize(k);
  for (std::size_t r = 0; r < k; ++r) {
    out.delta[r] = detail::stacked_distance(out.a.xbar_rec[r], out.a.ybar_rec[r],
                                            out.b.xbar_rec[r], out.b.ybar_rec[r]);
    const double sq = (out.a.x_rec[r] - out.b.x_rec[r]).squaredNorm() +
                      (out.a.y_rec[r] - out.b.y_rec[r]).squaredNorm();
    out.delta_stacked[r] = std::sqrt(sq);
  }
  out.delta_final = detail::stacked_distance(out.a.xbar_final, out.a.ybar_final,
                                             out.b.xbar_final, out.b.ybar_final);
  out.delta_avg_iterate =
      detail::stacked_distance(out.a.x_ave, out.a.y_ave, out.b.x_ave, out.b.y_ave);

  for (long t = 0; t < cfg.T && out.first_hit_t < 0; ++t)
    for (int i = 0; i < base.m; ++i)
      if (sample_index(cfg.seed, i, t, base.n) == pert.replaced_index[i]) {
        out.first_hit_t = t;
        break;
      }
  return out;
}

template <MinimaxProblem P>
StabilityReport argument_stability(const std::vector<CoupledRun<P>>& runs,
                                   StabilityPoint at = StabilityPoint::Final) {
  if (runs.size() < 2) throw TooFewSeeds("argument stability needs at least 2 seeds");
  std::vector<double> fin, avg;
  fin.reserve(runs.size());
  avg.reserve(runs.size());
  for (const auto& r : runs) {
    fin.push_back(r.delta_final);
    avg.push_back(r.delta_avg_iterate);
  }
  StabilityReport rep;
  rep.seeds = static_cast<int>(runs.size());
  std::tie(rep.epsilon_arg_avg_iterate, rep.epsilon_arg_avg_iterate_stderr) =
      detail::mean_stderr(avg);
  if (at == StabilityPoint::Final)
    std::tie(rep.epsilon_arg, rep.epsilon_arg_stderr) = detail::mean_stderr(fin);
  else {
    rep.epsilon_arg = rep.epsilon_arg_avg_iterate;
    rep.epsilon_arg_stderr = rep.epsilon_arg_avg_iterate_stderr;
  }
  return rep;
}

namespace detail {

// Extensible low-discrepancy sequence in the radius-C ball: the additive
// recurrence of Roberts' generalized golden ratio in the cube, radially
// clamped. Prefixes are nested, so estimates grow monotonically with the
// grid size.
inline Eigen::VectorXd quasi_ball_point(long k, int d, double radius) {
  double g = 1.5;
  for (int it = 0; it < 64; ++it) {
    const double f = std::pow(g, d + 1) - g - 1.0;
    const double fp = (d + 1) * std::pow(g, d) - 1.0;
    g -= f / fp;
  }
  Eigen::VectorXd p(d);
  double alpha = 1.0;
  for (int j = 0; j < d; ++j) {
    alpha /= g;
    double u = 0.5 + (static_cast<double>(k) + 1.0) * alpha;
    u -= std::floor(u);
    p[j] = radius * (2.0 * u - 1.0);
  }
  const double norm = p.norm();
  if (norm > radius) p *= radius / norm;
  return p;
}

}  // namespace detail

struct ProbeGrid {
  int points_x = 0;
  int points_y = 0;
};

// Lower estimate of the weak-stability value
//   sup_xi { sup_y' E_A[f(A_x(S),y';xi) - f(A_x(S'),y';xi)]
//          + sup_x' E_A[f(x',A_y(S);xi) - f(x',A_y(S');xi)] }
// with the sups over nested quasi-random ball grids and a finite sample
// pool (one pool per agent), and E_A over the supplied seeds.
template <MinimaxProblem P>
double weak_stability_estimate(const P& prob, const std::vector<CoupledRun<P>>& runs,
                               const ProbeGrid& grid,
                               const std::vector<std::vector<typename P::Sample>>& pool) {
  if (runs.empty()) throw TooFewSeeds("weak stability needs at least one coupled run");
  if (grid.points_x < 1 || grid.points_y < 1) throw EmptyGrid("probe grid must be nonempty");
  if (pool.empty() || pool.front().empty()) throw EmptyGrid("sample pool must be nonempty");
  const int agents = static_cast<int>(pool.size());
  if (prob.agents() > 0 && agents != prob.agents())
    throw MismatchedShapes("one sample pool per agent required");
  const std::size_t q = pool.front().size();
  for (const auto& shard : pool)
    if (shard.size() != q) throw MismatchedShapes("sample pools must share one length");

  const DomainSpec& dom = prob.domain();
  const auto f = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& y, std::size_t s) {
    KahanSum acc;
    for (int i = 0; i < agents; ++i) acc.add(prob.loss(i, x, y, pool[i][s]));
    return acc.value() / agents;
  };

  double best = 0.0;
  for (std::size_t s = 0; s < q; ++s) {
    double sup_y = -std::numeric_limits<double>::infinity();
    for (int gy = 0; gy < grid.points_y; ++gy) {
      const Eigen::VectorXd yp = detail::quasi_ball_point(gy, dom.d_y, dom.C_y);
      KahanSum diff;
      for (const auto& r : runs)
        diff.add(f(r.a.xbar_final, yp, s) - f(r.b.xbar_final, yp, s));
      sup_y = std::max(sup_y, diff.value() / static_cast<double>(runs.size()));
    }
    double sup_x = -std::numeric_limits<double>::infinity();
    for (int gx = 0; gx < grid.points_x; ++gx) {
      const Eigen::VectorXd xp = detail::quasi_ball_point(gx, dom.d_x, dom.C_x);
      KahanSum diff;
      for (const auto& r : runs)
        diff.add(f(xp, r.a.ybar_final, s) - f(xp, r.b.ybar_final, s));
      sup_x = std::max(sup_x, diff.value() / static_cast<double>(runs.size()));
    }
    best = std::max(best, sup_y + sup_x);
  }
  return best;
}

// Smooth objective on a product of balls, with enough structure for the
// projected inner solves: value, block gradients, smoothness, and geometry.
struct SaddleObjective {
  int d_x = 0, d_y = 0;
  double C_x = 0.0, C_y = 0.0;
  double L = 1.0;  // inner solver uses step 1/L
  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_x;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)> grad_y;
};

// Average of the per-agent losses over finite per-agent sample pools.
// Covers the empirical objective (pools = training shards), the held-out
// population estimate (pools = test shards), and the exact population
// objective of losses linear in the sample (pools = per-agent means).
template <MinimaxProblem P>
SaddleObjective pool_objective(const P& prob,
                               std::vector<std::vector<typename P::Sample>> pools) {
  if (pools.empty() || pools.front().empty()) throw EmptyGrid("objective pools must be nonempty");
  if (prob.agents() > 0 && static_cast<int>(pools.size()) != prob.agents())
    throw MismatchedShapes("one pool per agent required");
  const DomainSpec& dom = prob.domain();
  SaddleObjective obj;
  obj.d_x = dom.d_x;
  obj.d_y = dom.d_y;
  obj.C_x = dom.C_x;
  obj.C_y = dom.C_y;
  obj.L = prob.constants().L;
  const auto shared = std::make_shared<std::vector<std::vector<typename P::Sample>>>(
      std::move(pools));
  const P* pp = &prob;
  obj.value = [pp, shared](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    KahanSum acc;
    long count = 0;
    for (int i = 0; i < static_cast<int>(shared->size()); ++i)
      for (const auto& s : (*shared)[i]) {
        acc.add(pp->loss(i, x, y, s));
        ++count;
      }
    return acc.value() / static_cast<double>(count);
  };
  const auto grads = [pp, shared](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    Eigen::VectorXd gx = Eigen::VectorXd::Zero(x.size());
    Eigen::VectorXd gy = Eigen::VectorXd::Zero(y.size());
    long count = 0;
    for (int i = 0; i < static_cast<int>(shared->size()); ++i)
      for (const auto& s : (*shared)[i]) {
        const GradPair g = pp->grad(i, x, y, s);
        gx += g.gx;
        gy += g.gy;
        ++count;
      }
    return std::make_pair((gx / count).eval(), (gy / count).eval());
  };
  obj.grad_x = [grads](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return grads(x, y).first;
  };
  obj.grad_y = [grads](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return grads(x, y).second;
  };
  return obj;
}

namespace detail {

constexpr double kInnerTol = 1e-8;
constexpr long kInnerMaxIter = 100000;

// Projected gradient ascent over a ball; stops when the gradient-mapping
// norm drops below tolerance.
inline Eigen::VectorXd maximize_over_ball(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad, int d, double radius,
    double smoothness) {
  const double step = 1.0 / std::max(smoothness, 1e-12);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
  if (radius <= 0.0) return z;
  for (long it = 0; it < kInnerMaxIter; ++it) {
    const Eigen::VectorXd next = project_ball(z + step * grad(z), radius);
    const double mapping = (next - z).norm() / step;
    z = next;
    if (mapping <= kInnerTol) return z;
  }
  throw InnerSolveFailed("projected ascent did not reach tolerance " + fmt17(kInnerTol));
}

}  // namespace detail

// sup_{y'} mean_s F(x_s, y') - inf_{x'} mean_s F(x', y_s): seed-averaged
// objective first, inner solve second.
inline double weak_pd_risk(const SaddleObjective& obj, const std::vector<ModelPair>& models) {
  if (models.empty()) throw TooFewSeeds("risk evaluation needs at least one model");
  const double inv = 1.0 / static_cast<double>(models.size());
  const auto gy = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(obj.d_y);
    for (const auto& m : models) g += obj.grad_y(m.x, y);
    return (g * inv).eval();
  };
  const Eigen::VectorXd y_star = detail::maximize_over_ball(gy, obj.d_y, obj.C_y, obj.L);
  const auto gx = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(obj.d_x);
    for (const auto& m : models) g -= obj.grad_x(x, m.y);
    return (g * inv).eval();
  };
  const Eigen::VectorXd x_star = detail::maximize_over_ball(gx, obj.d_x, obj.C_x, obj.L);

  KahanSum sup_part, inf_part;
  for (const auto& m : models) {
    sup_part.add(obj.value(m.x, y_star));
    inf_part.add(obj.value(x_star, m.y));
  }
  return (sup_part.value() - inf_part.value()) * inv;
}

// mean_s [ sup_{y'} F(x_s, y') - inf_{x'} F(x', y_s) ]: inner solve per
// seed, averaged afterwards.
inline double strong_pd_risk(const SaddleObjective& obj, const std::vector<ModelPair>& models) {
  if (models.empty()) throw TooFewSeeds("risk evaluation needs at least one model");
  KahanSum acc;
  for (const auto& m : models) {
    const auto gy = [&](const Eigen::VectorXd& y) { return obj.grad_y(m.x, y); };
    const Eigen::VectorXd y_star = detail::maximize_over_ball(gy, obj.d_y, obj.C_y, obj.L);
    const auto gx = [&](const Eigen::VectorXd& x) { return (-obj.grad_x(x, m.y)).eval(); };
    const Eigen::VectorXd x_star = detail::maximize_over_ball(gx, obj.d_x, obj.C_x, obj.L);
    acc.add(obj.value(m.x, y_star) - obj.value(x_star, m.y));
  }
  return acc.value() / static_cast<double>(models.size());
}

namespace detail {

inline const SaddleObjective& paired_objective(const std::vector<SaddleObjective>& objs,
                                               std::size_t s, std::size_t models) {
  if (objs.empty() || (objs.size() != 1 && objs.size() != models))
    throw MismatchedShapes("need one objective, or one per model");
  return objs[objs.size() == 1 ? 0 : s];
}

}  // namespace detail

// Paired variant: model s is scored against objective s (its own empirical
// objective, say); a single objective broadcasts. All objectives must share
// one geometry.
inline double weak_pd_risk(const std::vector<SaddleObjective>& objs,
                           const std::vector<ModelPair>& models) {
  if (models.empty()) throw TooFewSeeds("risk evaluation needs at least one model");
  const SaddleObjective& ref = detail::paired_objective(objs, 0, models.size());
  const double inv = 1.0 / static_cast<double>(models.size());
  const auto gy = [&](const Eigen::VectorXd& y) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ref.d_y);
    for (std::size_t s = 0; s < models.size(); ++s)
      g += detail::paired_objective(objs, s, models.size()).grad_y(models[s].x, y);
    return (g * inv).eval();
  };
  const Eigen::VectorXd y_star = detail::maximize_over_ball(gy, ref.d_y, ref.C_y, ref.L);
  const auto gx = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(ref.d_x);
    for (std::size_t s = 0; s < models.size(); ++s)
      g -= detail::paired_objective(objs, s, models.size()).grad_x(x, models[s].y);
    return (g * inv).eval();
  };
  const Eigen::VectorXd x_star = detail::maximize_over_ball(gx, ref.d_x, ref.C_x, ref.L);

  KahanSum sup_part, inf_part;
  for (std::size_t s = 0; s < models.size(); ++s) {
    const SaddleObjective& obj = detail::paired_objective(objs, s, models.size());
    sup_part.add(obj.value(models[s].x, y_star));
    inf_part.add(obj.value(x_star, models[s].y));
  }
  return (sup_part.value() - inf_part.value()) * inv;
}

inline double strong_pd_risk(const std::vector<SaddleObjective>& objs,
                             const std::vector<ModelPair>& models) {
  if (models.empty()) throw TooFewSeeds("risk evaluation needs at least one model");
  KahanSum acc;
  for (std::size_t s = 0; s < models.size(); ++s) {
    const SaddleObjective& obj = detail::paired_objective(objs, s, models.size());
    acc.add(strong_pd_risk(obj, {models[s]}));
  }
  return acc.value() / static_cast<double>(models.size());
}

struct RiskReport {
  double weak_pd_population = 0.0, weak_pd_empirical = 0.0;
  double strong_pd_population = 0.0, strong_pd_empirical = 0.0;
  double weak_gap = 0.0, strong_gap = 0.0;
  std::string population_method, empirical_method;
  int seeds = 0;
};

inline RiskReport weak_pd_risks(const std::vector<ModelPair>& models,
                                const SaddleObjective& population,
                                const SaddleObjective& empirical,
                                std::string population_method = "oracle",
                                std::string empirical_method = "training shards") {
  RiskReport r;
  r.seeds = static_cast<int>(models.size());
  r.weak_pd_population = weak_pd_risk(population, models);
  r.weak_pd_empirical = weak_pd_risk(empirical, models);
  r.strong_pd_population = strong_pd_risk(population, models);
  r.strong_pd_empirical = strong_pd_risk(empirical, models);
  r.weak_gap = r.weak_pd_population - r.weak_pd_empirical;
  r.strong_gap = r.strong_pd_population - r.strong_pd_empirical;
  r.population_method = std::move(population_method);
  r.empirical_method = std::move(empirical_method);
  return r;
}

template <MinimaxProblem P>
RiskReport weak_pd_risks(const std::vector<ModelPair>& models, const P& prob,
                         const DistributedDataset<typename P::Sample>& train,
                         const SaddleObjective& population) {
  return weak_pd_risks(models, population, pool_objective(prob, train.shards),
                       "oracle", "training shards");
}

template <MinimaxProblem P>
std::vector<ModelPair> models_from_runs(const std::vector<CoupledRun<P>>& runs,
                                        StabilityPoint at = StabilityPoint::Final,
                                        bool perturbed_side = false) {
  std::vector<ModelPair> out;
  out.reserve(runs.size());
  for (const auto& r : runs) {
    const Trajectory& t = perturbed_side ? r.b : r.a;
    if (at == StabilityPoint::Final)
      out.push_back({t.xbar_final, t.ybar_final});
    else
      out.push_back({t.x_ave, t.y_ave});
  }
  return out;
}

// Exact population objective for losses linear in the sample vectors: one
// mean sample per agent.
inline std::vector<std::vector<QuadraticSample>> mean_sample_pools(
    const std::vector<Eigen::VectorXd>& mean_b, const std::vector<Eigen::VectorXd>& mean_c) {
  if (mean_b.size() != mean_c.size()) throw MismatchedShapes("mean vectors disagree on agents");
  std::vector<std::vector<QuadraticSample>> pools(mean_b.size());
  for (std::size_t i = 0; i < mean_b.size(); ++i)
    pools[i].push_back(QuadraticSample{mean_b[i], mean_c[i]});
  return pools;
}

inline double gen_gap_from_stability(double epsilon, double G, double L, double mu,
                                     GapMode mode) {
  ProblemConstants k;
  k.G = G;
  k.L = L;
  k.mu_x = mu;
  k.mu_y = mu;
  return gen_gap_from_stability(epsilon, k, mode);
}

}  // namespace dsgda
