// Acceptance gate: one self-contained check per release criterion, each
// printing a single pass/fail line. Exit code 0 only when every criterion
// holds. Tolerances are pinned here, not configurable.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "dsgda/sweep.hpp"

namespace fs = std::filesystem;
using namespace dsgda;

namespace {

struct Outcome {
  bool ok = true;
  std::string note;

  void fail(const std::string& why) {
    if (ok) {
      ok = false;
      note = why;
    }
  }
  void expect(bool cond, const std::string& why) {
    if (!cond) fail(why);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const fs::path kOutDir = "acceptance_out";

// ---------------------------------------------------------------------------
// 1. Mixing matrices: symmetry, double stochasticity, and the pinned spectra.

Outcome mixing_invariants() {
  Outcome out;
  const Topology kinds[] = {Topology::FullyConnected, Topology::Ring,  Topology::Star,
                            Topology::Grid2D,         Topology::Exponential,
                            Topology::Disconnected};
  for (const Topology kind : kinds)
    for (const int m : {4, 9, 16, 64}) {
      const MixingMatrix mix = build_mixing_matrix({kind, m});
      const std::string where = std::string(topology_name(kind)) + " m=" + std::to_string(m);
      const Eigen::MatrixXd& w = mix.weights;
      out.expect((w - w.transpose()).cwiseAbs().maxCoeff() <= 1e-12, where + ": not symmetric");
      out.expect((w.rowwise().sum() - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff() <= 1e-12,
                 where + ": rows not stochastic");
      out.expect(
          (w.colwise().sum().transpose() - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff() <=
              1e-12,
          where + ": columns not stochastic");
      out.expect(w.minCoeff() >= 0.0, where + ": negative weight");
      if (kind == Topology::FullyConnected)
        out.expect(mix.lambda == 0.0, where + ": lambda must be exactly 0");
      if (kind == Topology::Disconnected)
        out.expect(mix.lambda == 1.0, where + ": lambda must be exactly 1");
      if (kind == Topology::Ring) {
        const double want = (1.0 + 2.0 * std::cos(2.0 * std::numbers::pi / m)) / 3.0;
        out.expect(std::fabs(mix.lambda - want) <= 1e-10,
                   where + ": ring lambda " + fmt17(mix.lambda) + " != " + fmt17(want));
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// 2. The geometric-polynomial tail sum never exceeds its topology-constant
//    envelope C_lambda / t^k. The sum is tracked with its exact one-step
//    recurrence S(t) = lambda S(t-1) + 1/t^k over the full range, and the
//    library evaluation is pinned to that recurrence on a dense subgrid.

Outcome decay_sum_envelope() {
  Outcome out;
  for (int li = 1; li <= 9 && out.ok; ++li) {
    const double lam = 0.1 * li;
    for (const double k : {0.5, 0.75, 1.0}) {
      const double envelope = c_lambda(lam, k);
      double s = 0.0;
      for (long t = 1; t <= 10000; ++t) {
        const double tk = std::pow(static_cast<double>(t), k);
        s = lam * s + 1.0 / tk;
        if (s > envelope / tk) {
          out.fail("violation at lambda=" + fmt17(lam) + " k=" + fmt17(k) +
                   " t=" + std::to_string(t));
          break;
        }
        const bool spot = t <= 100 || (t & (t - 1)) == 0 || t == 10000;
        if (spot) {
          const double lib = geometric_decay_sum(lam, k, t);
          if (std::fabs(lib - s) > 1e-11 * std::max(1.0, s)) {
            out.fail("library sum drifts from the recurrence at lambda=" + fmt17(lam) +
                     " k=" + fmt17(k) + " t=" + std::to_string(t));
            break;
          }
        }
      }
      if (!out.ok) break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// 3. One-step descent-ascent maps on strongly convex-concave quadratics
//    contract at rate 1 - eta L mu / (L + mu) inside the step window, and
//    never expand beyond 1 + eta L.

Outcome gda_expansiveness() {
  Outcome out;
  const DomainSpec dom{3, 2, 1.0, 1.0};
  for (int inst = 0; inst < 10; ++inst) {
    const auto u = [&](std::uint64_t slot) { return rng::u01(2026, rng::kProbe + 9, inst, slot); };
    // mild coupling keeps L/mu <= sqrt(1 + 0.45^2), where the claimed
    // contraction rate is valid across the whole step window
    const double mu = 0.5 + 1.5 * u(0);
    const double coupling = (0.4 + 0.6 * u(2)) * 0.45 * mu;
    const QuadraticProblem prob = QuadraticProblem::synthesize(
        1, dom, mu, mu, coupling, 0.3, 0.3, 1000 + static_cast<std::uint64_t>(inst));
    const ProblemConstants& c = prob.constants();
    const double eta = (0.3 + 0.6 * u(3)) * 2.0 / (c.L + mu);
    try {
      require_contraction_window(c, eta, eta);
    } catch (const StepConditionViolated&) {
      out.fail("instance " + std::to_string(inst) + " left the step window");
      continue;
    }
    const double ratio = expansiveness_probe(prob, 0, prob.probe_sample(55, inst), eta, eta,
                                             1000, 77 + static_cast<std::uint64_t>(inst));
    const double contraction = 1.0 - eta * c.L * mu / (c.L + mu);
    out.expect(ratio <= contraction + 1e-10,
               "instance " + std::to_string(inst) + ": ratio " + fmt17(ratio) +
                   " above the contraction rate " + fmt17(contraction));
    out.expect(ratio <= 1.0 + eta * c.L + 1e-10,
               "instance " + std::to_string(inst) + ": ratio above the smoothness envelope");
  }
  return out;
}

// ---------------------------------------------------------------------------
// 4. Recorded consensus residuals stay below the gossip drift envelope
//    2 sqrt(m) G sum_{s<t} eta_max(s) lambda^{t-1-s} along 20 trajectories
//    over mixed topologies, families, and schedules.

template <MinimaxProblem P>
long consensus_violations(const ExperimentConfig& cfg, const P& prob, const MixingMatrix& mix,
                          const std::vector<CoupledRun<P>>& runs, std::string& why) {
  const double g = prob.constants().G;
  const double lam = mix.lambda;
  const double scale = 2.0 * std::sqrt(static_cast<double>(cfg.topology.m)) * g;
  long bad = 0;
  for (const auto& run : runs)
    for (const Trajectory* traj : {&run.a, &run.b}) {
      double acc = 0.0;  // sum_{s<t} eta_max(s) lambda^{t-1-s}, stride-1 recurrence
      long prev = 0;
      for (std::size_t r = 0; r < traj->rec_t.size(); ++r) {
        const long t = traj->rec_t[r];
        for (long s = prev; s < t; ++s)
          acc = lam * acc +
                std::max(cfg.schedule.schedule.eta_x(s), cfg.schedule.schedule.eta_y(s));
        prev = t;
        if (traj->consensus[r] > scale * acc + 1e-12) {
          ++bad;
          if (why.empty())
            why = "t=" + std::to_string(t) + " residual " + fmt17(traj->consensus[r]) +
                  " over envelope " + fmt17(scale * acc);
        }
      }
    }
  return bad;
}

Outcome consensus_envelope() {
  Outcome out;
  long trajectories = 0;
  const auto run_family = [&](ExperimentConfig cfg) {
    cfg.T = 250;
    cfg.seeds = 1;
    cfg.seed = 23;
    cfg.record_every = 1;
    cfg.workers = 1;
    cfg.data.n = 40;
    std::string why;
    const long bad = with_study(cfg, [&](const auto& prob, const MixingMatrix& mix,
                                         const auto& instance) {
      const auto study = coupled_study_runs(cfg, prob, mix, instance, 1);
      trajectories += 2 * static_cast<long>(study.runs.size());
      return consensus_violations(cfg, prob, mix, study.runs, why);
    });
    out.expect(bad == 0, topology_name(cfg.topology.kind) + (" m=" +
               std::to_string(cfg.topology.m)) + ": " + why);
  };

  ExperimentConfig quad;
  quad.problem.family = ProblemFamily::Quadratic;
  quad.problem.d_x = 3;
  quad.problem.d_y = 2;
  quad.schedule.schedule = Schedule::fixed(0.02, 0.02);
  const std::pair<Topology, int> grid[] = {{Topology::FullyConnected, 4}, {Topology::Ring, 8},
                                           {Topology::Star, 4},           {Topology::Grid2D, 9},
                                           {Topology::Exponential, 8},    {Topology::Disconnected, 4}};
  for (const auto& [kind, m] : grid) {
    quad.topology.kind = kind;
    quad.topology.m = m;
    run_family(quad);
  }
  quad.schedule.schedule = Schedule::decaying(1.0, 1.0);
  for (const auto& [kind, m] : {std::pair{Topology::Ring, 8}, std::pair{Topology::Grid2D, 9}}) {
    quad.topology.kind = kind;
    quad.topology.m = m;
    run_family(quad);
  }

  ExperimentConfig auc;
  auc.problem.family = ProblemFamily::Auc;
  auc.schedule.schedule = Schedule::fixed(0.005, 0.005);
  for (const auto& [kind, m] :
       {std::pair{Topology::FullyConnected, 4}, std::pair{Topology::Exponential, 8}}) {
    auc.topology.kind = kind;
    auc.topology.m = m;
    run_family(auc);
  }

  out.expect(trajectories == 20, "expected 20 trajectories, saw " + std::to_string(trajectories));
  return out;
}

// ---------------------------------------------------------------------------
// 5. Replace-one identity: under full enumeration of a two-point sample law,
//    the expected population-minus-empirical gap of the algorithm output
//    equals the expected replace-one loss difference, exactly.

Outcome replace_one_identity() {
  Outcome out;
  for (const auto& [m, n] : {std::pair{2, 3}, std::pair{3, 2}}) {
    const DomainSpec dom{1, 1, 1.0, 1.0};
    const QuadraticProblem prob = QuadraticProblem::synthesize(
        m, dom, 1.0, 1.0, 0.5, 0.4, 0.4, 21 + static_cast<std::uint64_t>(m));
    const MixingMatrix mix = build_mixing_matrix({Topology::Ring, m});

    QuadraticSample xi[2];
    xi[0].b = Eigen::VectorXd::Constant(1, 0.35);
    xi[0].c = Eigen::VectorXd::Constant(1, -0.2);
    xi[1].b = Eigen::VectorXd::Constant(1, -0.3);
    xi[1].c = Eigen::VectorXd::Constant(1, 0.25);
    const double p[2] = {0.4, 0.6};

    const int slots = m * n;
    const int masks = 1 << slots;
    std::vector<ModelPair> theta(static_cast<std::size_t>(masks));
    for (int mask = 0; mask < masks; ++mask) {
      DistributedDataset<QuadraticSample> data;
      data.m = m;
      data.n = n;
      data.shards.assign(static_cast<std::size_t>(m), {});
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < n; ++k)
          data.shards[static_cast<std::size_t>(i)].push_back(xi[(mask >> (i * n + k)) & 1]);
      RunConfig<QuadraticProblem> rc;
      rc.problem = &prob;
      rc.data = &data;
      rc.mixing = &mix;
      rc.T = 6;
      rc.schedule = Schedule::fixed(0.1, 0.1);
      rc.seed = 5;
      rc.record_every = 1 << 30;
      const Trajectory traj = run(rc);
      theta[static_cast<std::size_t>(mask)] = {traj.xbar_final, traj.ybar_final};
    }

    const auto weight = [&](int mask) {
      double w = 1.0;
      for (int b = 0; b < slots; ++b) w *= p[(mask >> b) & 1];
      return w;
    };
    const auto population = [&](const ModelPair& mp) {
      KahanSum acc;
      for (int i = 0; i < m; ++i)
        for (int v = 0; v < 2; ++v) acc.add(p[v] * prob.loss(i, mp.x, mp.y, xi[v]));
      return acc.value() / m;
    };

    KahanSum lhs, rhs;
    for (int mask = 0; mask < masks; ++mask) {
      const double w = weight(mask);
      const ModelPair& mp = theta[static_cast<std::size_t>(mask)];
      KahanSum emp;
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < n; ++k)
          emp.add(prob.loss(i, mp.x, mp.y, xi[(mask >> (i * n + k)) & 1]));
      lhs.add(w * (population(mp) - emp.value() / slots));

      for (int i = 0; i < m; ++i)
        for (int k = 0; k < n; ++k) {
          const int bit = i * n + k;
          const QuadraticSample& held = xi[(mask >> bit) & 1];
          for (int v = 0; v < 2; ++v) {
            const int swapped = (mask & ~(1 << bit)) | (v << bit);
            const ModelPair& mq = theta[static_cast<std::size_t>(swapped)];
            rhs.add(w * p[v] * (prob.loss(i, mq.x, mq.y, held) - prob.loss(i, mp.x, mp.y, held)) /
                    slots);
          }
        }
    }
    out.expect(std::fabs(lhs.value() - rhs.value()) <= 1e-12,
               "m=" + std::to_string(m) + " n=" + std::to_string(n) + ": |lhs-rhs| = " +
                   fmt17(std::fabs(lhs.value() - rhs.value())));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 6. The fixed-rate strongly-convex stability bound dominates measured
//    divergences across a rate x sample-size x topology grid.

Outcome scsc_bound_domination() {
  Outcome out;
  ExperimentConfig cfg;
  cfg.problem.family = ProblemFamily::Quadratic;
  cfg.problem.d_x = 3;
  cfg.problem.d_y = 2;
  cfg.topology.m = 8;
  cfg.T = 2000;
  cfg.seeds = 10;
  cfg.seed = 101;
  cfg.record_every = 1 << 30;
  cfg.workers = 1;
  for (const Topology kind : {Topology::FullyConnected, Topology::Ring})
    for (const double eta : {0.001, 0.005, 0.01})
      for (const int n : {50, 200}) {
        cfg.topology.kind = kind;
        cfg.schedule.schedule = Schedule::fixed(eta, eta);
        cfg.data.n = n;
        const StudyResult study = run_study(cfg);
        const double measured = study.eps_mean + 3.0 * study.eps_stderr;
        out.expect(measured <= study.bound_fixed,
                   std::string(topology_name(kind)) + " eta=" + fmt17(eta) + " n=" +
                       std::to_string(n) + ": " + fmt17(measured) + " > bound " +
                       fmt17(study.bound_fixed));
      }
  return out;
}

// ---------------------------------------------------------------------------
// 7. Slower-mixing topologies are measurably less stable on the AUC family
//    (data and rate calibrated once, then pinned), with a 2x spread between
//    the disconnected and fully connected ends.

ExperimentConfig topology_trend_config(const std::string& out_dir) {
  ExperimentConfig cfg;
  cfg.problem.family = ProblemFamily::Auc;
  // calibrated once and pinned: rich features and a hot rate keep the
  // divergence in the accumulating regime where gossip speed matters
  cfg.problem.feature_dim = 64;
  cfg.problem.sigma = 0.5;
  cfg.problem.C_x = 4.0;
  cfg.problem.C_y = 4.0;
  cfg.topology.m = 16;
  cfg.data.n = 200;
  cfg.schedule.schedule = Schedule::fixed(0.3, 0.3);
  cfg.T = 2000;
  cfg.seeds = 10;
  cfg.seed = 11;
  cfg.record_every = 1 << 30;
  cfg.workers = 1;
  cfg.output_dir = out_dir;
  cfg.sweep.topology = {"full", "exp", "ring", "single"};
  return cfg;
}

Outcome topology_trend() {
  Outcome out;
  const SweepFiles files = run_sweep_files(topology_trend_config((kOutDir / "topo_a").string()));
  const auto& rows = files.result.rows;
  out.expect(rows.size() == 4, "expected 4 sweep rows");
  if (!out.ok) return out;
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const StudyResult& a = rows[i].study;
    const StudyResult& b = rows[i + 1].study;
    out.expect(a.eps_mean <= b.eps_mean + 3.0 * (a.eps_stderr + b.eps_stderr),
               rows[i].axis_values[0] + " (" + fmt17(a.eps_mean) + ") not below " +
                   rows[i + 1].axis_values[0] + " (" + fmt17(b.eps_mean) + ")");
  }
  const double full = rows.front().study.eps_mean;
  const double single = rows.back().study.eps_mean;
  out.expect(full > 0.0 && single >= 2.0 * full,
             "spread single/full = " + fmt17(full > 0.0 ? single / full : 0.0) + " below 2");
  return out;
}

// ---------------------------------------------------------------------------
// 8. Stability improves strictly with per-agent sample size.

Outcome sample_size_trend() {
  Outcome out;
  ExperimentConfig cfg;
  cfg.problem.family = ProblemFamily::Quadratic;
  cfg.problem.d_x = 3;
  cfg.problem.d_y = 2;
  cfg.topology.kind = Topology::Ring;
  cfg.topology.m = 8;
  cfg.schedule.schedule = Schedule::fixed(0.01, 0.01);
  cfg.T = 2000;
  cfg.seeds = 10;
  cfg.seed = 17;
  cfg.record_every = 1 << 30;
  cfg.workers = 1;
  std::vector<double> eps, se;
  for (const int n : {50, 100, 200, 400}) {
    cfg.data.n = n;
    const StudyResult study = run_study(cfg);
    eps.push_back(study.eps_mean);
    se.push_back(study.eps_stderr);
  }
  for (std::size_t j = 0; j + 1 < eps.size(); ++j) {
    out.expect(eps[j] > eps[j + 1],
               "mean divergence did not drop from n index " + std::to_string(j) + " (" +
                   fmt17(eps[j]) + " vs " + fmt17(eps[j + 1]) + ")");
    out.expect(eps[j] > eps[j + 1] - 3.0 * (se[j] + se[j + 1]), "trend outside the noise slack");
  }
  return out;
}

// ---------------------------------------------------------------------------
// 9. Analytic gradients match central finite differences on all families.

template <MinimaxProblem P>
double max_fd_error(const P& prob, std::uint64_t seed) {
  const DomainSpec& dom = prob.domain();
  const int agents = std::max(1, prob.agents());
  const double h = 1e-6;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int agent = k % agents;
    const Eigen::VectorXd x =
        random_in_ball(dom.d_x, 0.9 * dom.C_x, seed, rng::kProbe + 3, k, 0);
    const Eigen::VectorXd y =
        random_in_ball(dom.d_y, 0.9 * dom.C_y, seed, rng::kProbe + 3, k, 500);
    const auto s = prob.probe_sample(seed + 1, k);
    const GradPair g = prob.grad(agent, x, y, s);

    Eigen::VectorXd fx(dom.d_x), fy(dom.d_y);
    for (int j = 0; j < dom.d_x; ++j) {
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      fx[j] = (prob.loss(agent, xp, y, s) - prob.loss(agent, xm, y, s)) / (2.0 * h);
    }
    for (int j = 0; j < dom.d_y; ++j) {
      Eigen::VectorXd yp = y, ym = y;
      yp[j] += h;
      ym[j] -= h;
      fy[j] = (prob.loss(agent, x, yp, s) - prob.loss(agent, x, ym, s)) / (2.0 * h);
    }
    const double err = std::hypot((fx - g.gx).norm(), (fy - g.gy).norm());
    const double scale = std::max(1.0, std::hypot(g.gx.norm(), g.gy.norm()));
    worst = std::max(worst, err / scale);
  }
  return worst;
}

Outcome gradient_probes() {
  Outcome out;
  const QuadraticProblem quad =
      QuadraticProblem::synthesize(4, {3, 2, 1.0, 1.0}, 1.0, 1.5, 0.5, 0.3, 0.3, 31);
  const double eq = max_fd_error(quad, 61);
  out.expect(eq <= 1e-5, "quadratic gradient error " + fmt17(eq));

  const AucProblem auc(0.3, 4, DomainSpec{6, 1, 1.0, 1.0},
                       synthesize_auc_pool(256, 4, 0.3, 0.25, 0.1, 99));
  const double ea = max_fd_error(auc, 62);
  out.expect(ea <= 1e-5, "auc gradient error " + fmt17(ea));

  const SineProblem sine = SineProblem::synthesize(4, {2, 2, 1.5, 1.5}, 1.0, 13);
  const double es = max_fd_error(sine, 63);
  out.expect(es <= 1e-5, "sine gradient error " + fmt17(es));
  return out;
}

// ---------------------------------------------------------------------------
// 10. The strong primal-dual empirical gap of the rate-weighted average
//     iterate sits inside the optimization-error guarantee.

Outcome optimization_guarantee() {
  Outcome out;
  ExperimentConfig cfg;
  cfg.problem.family = ProblemFamily::Quadratic;
  cfg.problem.d_x = 3;
  cfg.problem.d_y = 2;
  cfg.topology.kind = Topology::FullyConnected;
  cfg.topology.m = 4;
  cfg.data.n = 50;
  cfg.T = 10000;
  cfg.schedule.schedule = Schedule::fixed(0.01, 0.01);  // 1/sqrt(T)
  cfg.seeds = 1;
  cfg.seed = 29;
  cfg.record_every = 1 << 30;
  cfg.workers = 1;

  const auto [measured, bound] = with_study(
      cfg, [&](const auto& prob, const MixingMatrix& mix, const auto& instance) {
        const auto inst = instance(0);
        RunConfig<std::decay_t<decltype(prob)>> rc;
        rc.problem = &prob;
        rc.data = &inst.train;
        rc.mixing = &mix;
        rc.T = cfg.T;
        rc.schedule = cfg.schedule.schedule;
        rc.seed = cfg.seed;
        rc.record_every = cfg.record_every;
        const Trajectory traj = run(rc);

        const SaddleObjective emp = pool_objective(prob, inst.train.shards);
        const double gap = strong_pd_risk(emp, {ModelPair{traj.x_ave, traj.y_ave}});

        BoundInputs in;
        in.constants = prob.constants();
        in.n = cfg.data.n;
        in.m = cfg.topology.m;
        in.T = cfg.T;
        in.lambda = mix.lambda;
        in.schedule = cfg.schedule.schedule;
        in.C_x = prob.domain().C_x;
        in.C_y = prob.domain().C_y;
        return std::make_pair(gap, scsc_optimization_error(in, RateMode::Fixed).value);
      });
  out.expect(std::isfinite(bound), "guarantee is not finite");
  out.expect(measured <= bound,
             "measured gap " + fmt17(measured) + " above the guarantee " + fmt17(bound));
  return out;
}

// ---------------------------------------------------------------------------
// 11. The measured weak primal-dual generalization gap stays below
//     sqrt(2) G times the measured argument stability, within noise.

Outcome weak_gap_connection() {
  Outcome out;
  ExperimentConfig cfg;
  cfg.problem.family = ProblemFamily::Quadratic;
  cfg.problem.d_x = 3;
  cfg.problem.d_y = 2;
  cfg.topology.kind = Topology::FullyConnected;
  cfg.topology.m = 4;
  cfg.data.n = 50;
  cfg.T = 2000;
  cfg.schedule.schedule = Schedule::fixed(0.01, 0.01);
  cfg.seeds = 50;
  cfg.seed = 41;
  cfg.record_every = 1 << 30;
  cfg.workers = 1;

  struct Estimates {
    double gap_mean = 0.0, gap_se = 0.0;
    double eps = 0.0, eps_se = 0.0;
    double g = 0.0;
  };
  const Estimates est = with_study(cfg, [&](const auto& prob, const MixingMatrix& mix,
                                            const auto& instance) -> Estimates {
    (void)mix;
    if constexpr (std::is_same_v<std::decay_t<decltype(prob)>, QuadraticProblem>) {
      const auto study = coupled_study_runs(cfg, prob, mix, instance, 1);
      const StabilityReport rep = argument_stability(study.runs, StabilityPoint::Final);

      // exact population objective: the loss is linear in the sample vectors
      const SyntheticQuadraticData law =
          synthesize_quadratic_data(cfg.problem.d_x, cfg.problem.d_y, cfg.topology.m, 1,
                                    cfg.problem.sigma, cfg.seed, cfg.problem.mean_scale, 1);
      const SaddleObjective population =
          pool_objective(prob, mean_sample_pools(law.mean_b, law.mean_c));

      const std::vector<ModelPair> models = models_from_runs(study.runs, StabilityPoint::Final);
      std::vector<SaddleObjective> empirical;
      empirical.reserve(models.size());
      for (const auto& inst : study.instances)
        empirical.push_back(pool_objective(prob, inst.train.shards));

      // gap uncertainty from disjoint seed blocks
      const std::size_t blocks = 5, per = models.size() / blocks;
      std::vector<double> gaps;
      for (std::size_t b = 0; b < blocks; ++b) {
        const std::vector<ModelPair> mb(models.begin() + b * per,
                                        models.begin() + (b + 1) * per);
        const std::vector<SaddleObjective> ob(empirical.begin() + b * per,
                                              empirical.begin() + (b + 1) * per);
        gaps.push_back(weak_pd_risk(population, mb) - weak_pd_risk(ob, mb));
      }
      Estimates e;
      std::tie(e.gap_mean, e.gap_se) = detail::mean_stderr(gaps);
      e.eps = rep.epsilon_arg;
      e.eps_se = rep.epsilon_arg_stderr;
      e.g = prob.constants().G;
      return e;
    } else {
      return {};
    }
  });

  const double lift = std::sqrt(2.0) * est.g;
  const double slack = 3.0 * std::hypot(est.gap_se, lift * est.eps_se);
  out.expect(est.gap_mean <= lift * est.eps + slack,
             "gap " + fmt17(est.gap_mean) + " above " + fmt17(lift * est.eps) + " + slack " +
                 fmt17(slack));
  return out;
}

// ---------------------------------------------------------------------------
// 12. Repeating the topology sweep yields byte-identical tables.

Outcome sweep_determinism() {
  Outcome out;
  const SweepFiles b = run_sweep_files(topology_trend_config((kOutDir / "topo_b").string()));
  const fs::path a_dir = kOutDir / "topo_a";
  for (const char* name : {"sweep.csv", "stability.csv", "bounds.csv"}) {
    const std::string first = slurp(a_dir / name);
    const std::string second = slurp(fs::path(b.sweep_csv).parent_path() / name);
    out.expect(!first.empty(), std::string(name) + " missing from the first sweep");
    out.expect(first == second, std::string(name) + " differs between identical sweeps");
  }
  return out;
}

}  // namespace

int main() {
  unsetenv("DSGDA_WORKERS");
  std::error_code ec;
  fs::remove_all(kOutDir, ec);

  struct Criterion {
    const char* what;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"mixing matrices are symmetric, doubly stochastic, with the expected spectra",
       mixing_invariants},
      {"geometric-polynomial tail sums stay below the topology-constant envelope",
       decay_sum_envelope},
      {"one-step descent-ascent maps contract within the step window", gda_expansiveness},
      {"consensus residuals stay under the gossip drift envelope", consensus_envelope},
      {"replace-one expectation identity holds under full enumeration", replace_one_identity},
      {"fixed-rate strongly-convex stability bound dominates measurements",
       scsc_bound_domination},
      {"slower-mixing topologies are measurably less stable", topology_trend},
      {"stability improves strictly with per-agent sample size", sample_size_trend},
      {"analytic gradients match finite differences", gradient_probes},
      {"averaged-iterate empirical saddle gap is within the optimization guarantee",
       optimization_guarantee},
      {"weak primal-dual generalization gap obeys the stability multiplier",
       weak_gap_connection},
      {"repeated sweeps produce byte-identical tables", sweep_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome res;
    try {
      res = criteria[i].check();
    } catch (const std::exception& e) {
      res.fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << (i + 1) << ": " << (res.ok ? "pass" : "fail") << " - "
              << criteria[i].what;
    if (!res.ok) std::cout << " (" << res.note << ")";
    std::cout << " [" << static_cast<long>(secs * 1000.0) << " ms]" << std::endl;
    if (!res.ok) ++failures;
  }
  if (failures > 0) {
    std::cout << failures << " of " << criteria.size() << " criteria failed" << std::endl;
    return 1;
  }
  std::cout << "all " << criteria.size() << " criteria passed" << std::endl;
  return 0;
}
