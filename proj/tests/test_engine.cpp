#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "dsgda/engine.hpp"

using namespace dsgda;

namespace {

Eigen::VectorXd vec1(double a) {
  Eigen::VectorXd v(1);
  v[0] = a;
  return v;
}

// Dataset assembled from the problem's own probe stream.
DistributedDataset<QuadraticSample> probe_dataset(const QuadraticProblem& p, int m, int n,
                                                  std::uint64_t seed) {
  DistributedDataset<QuadraticSample> ds;
  ds.m = m;
  ds.n = n;
  ds.shards.assign(m, {});
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < n; ++l)
      ds.shards[i].push_back(p.probe_sample(seed, static_cast<std::uint64_t>(i) * n + l));
  return ds;
}

}  // namespace

TEST_CASE("ball projection") {
  REQUIRE(project_ball(Eigen::Vector2d(3.0, 4.0), 5.0) == Eigen::Vector2d(3.0, 4.0));
  const Eigen::VectorXd shrunk = project_ball(Eigen::Vector2d(6.0, 8.0), 5.0);
  REQUIRE(shrunk.isApprox(Eigen::Vector2d(3.0, 4.0), 1e-15));
  REQUIRE(project_ball(Eigen::VectorXd::Zero(3), 1.0).norm() == 0.0);
  REQUIRE_THROWS_AS(project_ball(vec1(1.0), 0.0), std::invalid_argument);
}

TEST_CASE("sample indices are deterministic and in range") {
  for (long t = 0; t < 200; ++t) REQUIRE(sample_index(5, 0, t, 1) == 1);
  for (long t = 0; t < 200; ++t) {
    const int j = sample_index(5, 3, t, 17);
    REQUIRE(j == sample_index(5, 3, t, 17));
    REQUIRE(j >= 1);
    REQUIRE(j <= 17);
  }
  REQUIRE_THROWS_AS(sample_index(5, 0, 0, 0), InvalidSize);
}

TEST_CASE("sample indices are uniform by a chi-square test") {
  const int n = 10;
  const long draws = 100000;
  std::vector<long> counts(n, 0);
  for (long t = 0; t < draws; ++t) ++counts[sample_index(12345, 2, t, n) - 1];
  const double expected = static_cast<double>(draws) / n;
  double stat = 0.0;
  for (const long c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  // chi-square critical value, 9 degrees of freedom, alpha = 0.001
  REQUIRE(stat < 27.877);
}

TEST_CASE("agents draw distinct streams") {
  int diffs = 0;
  for (long t = 0; t < 100; ++t)
    if (sample_index(7, 0, t, 1000) != sample_index(7, 1, t, 1000)) ++diffs;
  REQUIRE(diffs > 90);
}

TEST_CASE("run config validation") {
  const DomainSpec dom{1, 1, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(2, dom, 1.0, 1.0, 0.3, 0.2, 0.2, 3);
  const auto ds = probe_dataset(p, 2, 4, 5);
  const MixingMatrix mix = build_mixing_matrix({Topology::FullyConnected, 2});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 10;
  REQUIRE_NOTHROW(cfg.validate());

  RunConfig<QuadraticProblem> bad = cfg;
  bad.T = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.problem = nullptr;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);

  const MixingMatrix mix3 = build_mixing_matrix({Topology::FullyConnected, 3});
  bad = cfg;
  bad.mixing = &mix3;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);  // agent count disagreement
}

TEST_CASE("one step matches the hand-computed update") {
  // m=2, d=1, full mixing, n=1 so the sample draw is forced
  std::vector<Eigen::MatrixXd> coupling{Eigen::MatrixXd::Constant(1, 1, 0.5),
                                        Eigen::MatrixXd::Constant(1, 1, -0.25)};
  const QuadraticProblem p(1.0, 1.0, std::move(coupling), DomainSpec{1, 1, 5.0, 5.0}, 1.0, 1.0);

  DistributedDataset<QuadraticSample> ds;
  ds.m = 2;
  ds.n = 1;
  ds.shards = {{QuadraticSample{vec1(0.3), vec1(-0.1)}},
               {QuadraticSample{vec1(-0.2), vec1(0.4)}}};
  const MixingMatrix mix = build_mixing_matrix({Topology::FullyConnected, 2});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 1;
  cfg.schedule = Schedule::fixed(0.1, 0.2);
  cfg.seed = 9;

  Eigen::MatrixXd x(2, 1), y(2, 1);
  x << 1.0, -0.5;
  y << 0.25, 0.75;
  const Eigen::MatrixXd x0 = x, y0 = y;
  dsgda_step(cfg, 0, x, y);

  const double xmix = 0.5 * (x0(0, 0) + x0(1, 0));
  const double ymix = 0.5 * (y0(0, 0) + y0(1, 0));
  // agent 0: gx = x + 0.5 y + b, gy = -y + 0.5 x + c
  const double gx0 = x0(0, 0) + 0.5 * y0(0, 0) + 0.3;
  const double gy0 = -y0(0, 0) + 0.5 * x0(0, 0) - 0.1;
  // agent 1: coupling -0.25
  const double gx1 = x0(1, 0) - 0.25 * y0(1, 0) - 0.2;
  const double gy1 = -y0(1, 0) - 0.25 * x0(1, 0) + 0.4;

  REQUIRE(x(0, 0) == Catch::Approx(xmix - 0.1 * gx0).margin(1e-12));
  REQUIRE(x(1, 0) == Catch::Approx(xmix - 0.1 * gx1).margin(1e-12));
  REQUIRE(y(0, 0) == Catch::Approx(ymix + 0.2 * gy0).margin(1e-12));
  REQUIRE(y(1, 0) == Catch::Approx(ymix + 0.2 * gy1).margin(1e-12));
}

TEST_CASE("zero gradients leave pure gossip mixing") {
  // mu=0, A=0, b=c=0: every gradient vanishes and X^{t+1} = W X^t
  std::vector<Eigen::MatrixXd> coupling{Eigen::MatrixXd::Zero(1, 1),
                                        Eigen::MatrixXd::Zero(1, 1),
                                        Eigen::MatrixXd::Zero(1, 1)};
  const QuadraticProblem p(0.0, 0.0, std::move(coupling), DomainSpec{1, 1, 5.0, 5.0}, 0.0, 0.0);

  DistributedDataset<QuadraticSample> ds;
  ds.m = 3;
  ds.n = 1;
  ds.shards.assign(3, {QuadraticSample{vec1(0.0), vec1(0.0)}});
  const MixingMatrix mix = build_mixing_matrix({Topology::Ring, 3});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 1;
  cfg.schedule = Schedule::fixed(0.1, 0.1);

  Eigen::MatrixXd x(3, 1), y(3, 1);
  x << 1.0, -2.0, 0.5;
  y << 0.0, 1.0, -1.0;
  const Eigen::MatrixXd ex = mix.weights * x, ey = mix.weights * y;
  dsgda_step(cfg, 0, x, y);
  REQUIRE((x - ex).cwiseAbs().maxCoeff() <= 1e-15);
  REQUIRE((y - ey).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("single agent reduces to projected SGDA") {
  const DomainSpec dom{2, 2, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(1, dom, 1.0, 1.0, 0.4, 0.3, 0.3, 17);
  const auto ds = probe_dataset(p, 1, 5, 19);
  const MixingMatrix mix = build_mixing_matrix({Topology::Disconnected, 1});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 50;
  cfg.schedule = Schedule::fixed(0.05, 0.07);
  cfg.seed = 23;
  cfg.record_every = 1;
  const Trajectory traj = run(cfg);

  // independent single-machine reference on the same stream
  Eigen::VectorXd x = Eigen::VectorXd::Zero(2), y = Eigen::VectorXd::Zero(2);
  for (long t = 0; t < cfg.T; ++t) {
    REQUIRE((traj.x_rec[static_cast<std::size_t>(t)].row(0).transpose() - x).norm() <= 1e-12);
    REQUIRE((traj.y_rec[static_cast<std::size_t>(t)].row(0).transpose() - y).norm() <= 1e-12);
    const int j = sample_index(cfg.seed, 0, t, ds.n);
    const GradPair g = p.grad(0, x, y, ds.shards[0][j - 1]);
    x = project_ball(x - 0.05 * g.gx, 1.0);
    y = project_ball(y + 0.07 * g.gy, 1.0);
  }
  REQUIRE((traj.x_final.row(0).transpose() - x).norm() <= 1e-12);
  REQUIRE((traj.y_final.row(0).transpose() - y).norm() <= 1e-12);
}

TEST_CASE("runs start at zero, stay feasible, and repeat bit-identically") {
  const DomainSpec dom{2, 1, 0.5, 0.5};
  const QuadraticProblem p = QuadraticProblem::synthesize(4, dom, 1.0, 1.0, 0.5, 1.0, 1.0, 29);
  const auto ds = probe_dataset(p, 4, 6, 31);
  const MixingMatrix mix = build_mixing_matrix({Topology::Ring, 4});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 40;
  cfg.schedule = Schedule::fixed(0.4, 0.4);  // large enough to hit the projection
  cfg.seed = 37;
  cfg.record_every = 1;

  const Trajectory a = run(cfg);
  REQUIRE(a.rec_t.front() == 0);
  REQUIRE(a.rec_t.back() == cfg.T);
  REQUIRE(a.x_rec.front().cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.y_rec.front().cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(a.consensus.front() == 0.0);

  bool projected = false;
  for (std::size_t r = 0; r < a.rec_t.size(); ++r)
    for (int i = 0; i < 4; ++i) {
      const double nx = a.x_rec[r].row(i).norm();
      const double ny = a.y_rec[r].row(i).norm();
      REQUIRE(nx <= 0.5 + 1e-12);
      REQUIRE(ny <= 0.5 + 1e-12);
      projected = projected || nx >= 0.5 - 1e-9 || ny >= 0.5 - 1e-9;
    }
  REQUIRE(projected);  // the rate was chosen to make projection bind

  const Trajectory b = run(cfg);
  REQUIRE((a.x_final - b.x_final).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((a.y_final - b.y_final).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((a.x_ave - b.x_ave).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("averaged output uses the schedule weights") {
  const DomainSpec dom{1, 1, 2.0, 2.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(2, dom, 1.0, 1.0, 0.3, 0.5, 0.5, 41);
  const auto ds = probe_dataset(p, 2, 4, 43);
  const MixingMatrix mix = build_mixing_matrix({Topology::FullyConnected, 2});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 30;
  cfg.seed = 47;
  cfg.record_every = 1;

  for (const bool decaying : {false, true}) {
    cfg.schedule = decaying ? Schedule::decaying_per_block(1.0, 1.0, 2.0, 0.5)
                            : Schedule::fixed(0.05, 0.08);
    const Trajectory traj = run(cfg);
    Eigen::VectorXd xw = Eigen::VectorXd::Zero(1), yw = Eigen::VectorXd::Zero(1);
    double sx = 0.0, sy = 0.0;
    for (long t = 0; t < cfg.T; ++t) {
      const double ex = cfg.schedule.eta_x(t), ey = cfg.schedule.eta_y(t);
      xw += ex * traj.xbar_rec[static_cast<std::size_t>(t)];
      yw += ey * traj.ybar_rec[static_cast<std::size_t>(t)];
      sx += ex;
      sy += ey;
    }
    REQUIRE((traj.x_ave - xw / sx).norm() <= 1e-12);
    REQUIRE((traj.y_ave - yw / sy).norm() <= 1e-12);
  }
}

TEST_CASE("record stride subsamples the trajectory") {
  const DomainSpec dom{1, 1, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(2, dom, 1.0, 1.0, 0.2, 0.2, 0.2, 53);
  const auto ds = probe_dataset(p, 2, 3, 55);
  const MixingMatrix mix = build_mixing_matrix({Topology::FullyConnected, 2});

  RunConfig<QuadraticProblem> cfg;
  cfg.problem = &p;
  cfg.data = &ds;
  cfg.mixing = &mix;
  cfg.T = 10;
  cfg.seed = 57;
  cfg.record_every = 4;
  const Trajectory traj = run(cfg);
  REQUIRE(traj.rec_t == std::vector<long>{0, 4, 8, 10});
}

TEST_CASE("consensus residual hand values") {
  Eigen::MatrixXd x(2, 1), y(2, 1);
  x << 1.0, -1.0;
  y << 0.0, 0.0;
  REQUIRE(consensus_residual(x, y) == Catch::Approx(std::sqrt(2.0)).margin(1e-14));

  // 0.75 is dyadic, so the row mean and the residual are exact
  Eigen::MatrixXd same = Eigen::MatrixXd::Constant(3, 2, 0.75);
  REQUIRE(consensus_residual(same, same) == 0.0);
  REQUIRE_THROWS_AS(consensus_residual(Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(3, 1)),
                    MismatchedShapes);
}

TEST_CASE("consensus stays below the gossip accumulation bound") {
  const DomainSpec dom{2, 2, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(4, dom, 1.0, 1.0, 0.5, 0.3, 0.3, 61);
  const auto ds = probe_dataset(p, 4, 8, 63);

  for (const Topology topo : {Topology::Ring, Topology::Star, Topology::FullyConnected}) {
    const MixingMatrix mix = build_mixing_matrix({topo, 4});
    RunConfig<QuadraticProblem> cfg;
    cfg.problem = &p;
    cfg.data = &ds;
    cfg.mixing = &mix;
    cfg.T = 200;
    cfg.schedule = Schedule::fixed(0.02, 0.02);
    cfg.seed = 67;
    cfg.record_every = 1;
    const Trajectory traj = run(cfg);

    const double G = p.constants().G;
    double geo = 0.0;  // sum_{s<t} eta_s^max lambda^{t-1-s}
    for (long t = 0; t <= cfg.T; ++t) {
      INFO(topology_name(topo) << " t=" << t);
      REQUIRE(traj.consensus[static_cast<std::size_t>(t)] <=
              2.0 * std::sqrt(4.0) * G * geo + 1e-12);
      geo = mix.lambda * geo + cfg.schedule.rate_max(t);
    }
  }
}

TEST_CASE("contraction window arithmetic") {
  ProblemConstants k;
  k.G = 1.0;
  k.L = 1.0;
  k.mu_x = k.mu_y = 1.0;
  // lo = eta_max^2 (L+mu)/2, hi = (L+mu)/(2 L mu) = 1
  REQUIRE(contraction_window_ok(k, 0.01, 0.01));
  REQUIRE(contraction_window_ok(k, 0.02, 0.1));          // asymmetric, lo = 0.01
  REQUIRE_FALSE(contraction_window_ok(k, 0.01, 0.5));    // min below lo = 0.25
  REQUIRE_FALSE(contraction_window_ok(k, 2.0, 2.0));     // above hi
  REQUIRE_FALSE(contraction_window_ok(k, 1e-9, 1.0));    // min below lo
  k.mu_x = 0.0;
  REQUIRE_FALSE(contraction_window_ok(k, 0.01, 0.01));
  REQUIRE_THROWS_AS(require_contraction_window(k, 0.01, 0.01), StepConditionViolated);
}

TEST_CASE("GDA map contracts under the step condition") {
  const DomainSpec dom{2, 2, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(1, dom, 1.0, 1.0, 0.4, 0.3, 0.3, 71);
  const double L = p.constants().L, mu = 1.0;
  const double eta_min = 0.01, eta_max = 0.012;
  require_contraction_window(p.constants(), eta_min, eta_max);

  const auto s = p.probe_sample(73, 0);
  const double ratio = expansiveness_probe(p, 0, s, eta_max, eta_min, 1000, 75);
  REQUIRE(ratio <= 1.0 - eta_min * L * mu / (L + mu) + 1e-10);
}

TEST_CASE("smooth-only GDA map expands at most by the step times smoothness") {
  const DomainSpec dom{2, 2, 1.0, 1.0};
  const QuadraticProblem p = QuadraticProblem::synthesize(1, dom, 0.0, 0.0, 0.8, 0.3, 0.3, 81);
  const double L = p.constants().L;
  const auto s = p.probe_sample(83, 0);
  const double ratio = expansiveness_probe(p, 0, s, 0.05, 0.03, 1000, 85);
  REQUIRE(ratio <= 1.0 + 0.05 * L + 1e-10);
}
