#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "dsgda/bounds.hpp"
#include "dsgda/config.hpp"
#include "dsgda/data.hpp"
#include "dsgda/engine.hpp"
#include "dsgda/errors.hpp"
#include "dsgda/numeric.hpp"
#include "dsgda/problems.hpp"
#include "dsgda/rng.hpp"
#include "dsgda/stability.hpp"
#include "dsgda/topology.hpp"

namespace dsgda {

inline int resolve_workers(const ExperimentConfig& cfg) {
  if (cfg.workers > 0) return cfg.workers;
  if (const char* env = std::getenv("DSGDA_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
      throw ConfigError("DSGDA_WORKERS", "", std::string("invalid worker count '") + env + "'");
    return static_cast<int>(v);
  }
  return 1;
}

// fn(0..count-1) on up to `workers` threads; the first failure stops the
// dispatch and is rethrown after all threads drain.
template <class Fn>
void parallel_for(int workers, long count, Fn&& fn) {
  if (count <= 0) return;
  const long use = std::min<long>(std::max(workers, 1), count);
  if (use == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mu;
  std::exception_ptr first;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(use));
  for (long w = 0; w < use; ++w)
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        const long i = next.fetch_add(1, std::memory_order_relaxed);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lk(err_mu);
          if (!first) first = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

// Per-seed replica: a training set plus the neighbor differing in one sample
// per shard.
template <MinimaxProblem P>
struct SeedInstance {
  DistributedDataset<typename P::Sample> train;
  DistributedDataset<typename P::Sample> neighbor;
  NeighborPerturbation<typename P::Sample> pert;
};

// Two Gaussian feature clouds at +-separation/sqrt(dim) per coordinate
// (component truncation at 3 sigma keeps the support bounded), labels +-1
// with the given positive prior. Dense 1-based feature indices.
inline std::vector<LabeledSample> synthesize_auc_pool(int count, int dim, double prior,
                                                      double separation, double noise,
                                                      std::uint64_t seed) {
  if (count < 1 || dim < 1) throw InvalidSize("pool size and feature dimension must be >= 1");
  if (!(prior > 0.0) || !(prior < 1.0))
    throw std::invalid_argument("class prior must lie strictly inside (0,1)");
  if (noise < 0.0) throw std::invalid_argument("noise scale must be >= 0");
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(count));
  const double shift = separation / std::sqrt(static_cast<double>(dim));
  for (int k = 0; k < count; ++k) {
    const std::uint64_t step = static_cast<std::uint64_t>(k);
    LabeledSample s;
    s.label =
        rng::u01(seed, rng::kSynthesis + 5, step, std::uint64_t{1} << 20) < prior ? 1.0 : -1.0;
    s.features.reserve(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      const double v = s.label * shift + noise * rng::normal_truncated(seed, rng::kSynthesis + 5,
                                                                       step, j, 3.0);
      s.features.emplace_back(j + 1, v);
    }
    out.push_back(std::move(s));
  }
  return out;
}

// One shuffle of the pool dealt into shards of n + reservoir_per_agent
// samples, split into the training set and disjoint per-agent replacement
// reservoirs.
template <class Sample>
std::pair<DistributedDataset<Sample>, std::vector<std::vector<Sample>>> split_train_reservoir(
    const std::vector<Sample>& pool, int m, int n, int reservoir_per_agent, std::uint64_t seed) {
  if (reservoir_per_agent < 1) throw InvalidSize("reservoir size must be >= 1");
  const DistributedDataset<Sample> wide = partition(pool, m, n + reservoir_per_agent, seed);
  DistributedDataset<Sample> train;
  train.m = m;
  train.n = n;
  train.partition_seed = seed;
  train.shards.assign(static_cast<std::size_t>(m), {});
  std::vector<std::vector<Sample>> reservoirs(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& shard = wide.shards[static_cast<std::size_t>(i)];
    train.shards[static_cast<std::size_t>(i)].assign(shard.begin(), shard.begin() + n);
    reservoirs[static_cast<std::size_t>(i)].assign(shard.begin() + n, shard.end());
  }
  return {std::move(train), std::move(reservoirs)};
}

namespace detail {

inline std::uint64_t replica_seed(const ExperimentConfig& cfg, int s) {
  return cfg.seed + static_cast<std::uint64_t>(s);
}

}  // namespace detail

// Builds the problem instance and mixing matrix for a configuration and
// visits v(problem, mixing, instance), where instance(s) assembles the
// replica-s SeedInstance. The population law (agent means, couplings,
// directions, the problem's probe pool) is keyed by cfg.seed alone; replica
// s redraws its dataset, neighbor choice, and sampling stream from
// cfg.seed + s. `instance` is only valid during the visit and may be called
// concurrently.
template <class Visitor>
decltype(auto) with_study(const ExperimentConfig& cfg, Visitor&& v) {
  const MixingMatrix mix = build_mixing_matrix({cfg.topology.kind, cfg.topology.m});
  const ProblemBlock& pb = cfg.problem;
  const int m = cfg.topology.m;

  switch (pb.family) {
    case ProblemFamily::Quadratic: {
      if (pb.mu_x <= 0.0 || pb.mu_y <= 0.0)
        throw ConfigError("problem", "mu_x", "the quadratic family needs positive moduli");
      const DomainSpec dom{pb.d_x, pb.d_y, pb.C_x, pb.C_y};
      // support radii of the sample law, read off a unit draw
      const SyntheticQuadraticData unit =
          synthesize_quadratic_data(pb.d_x, pb.d_y, 1, 1, pb.sigma, cfg.seed, pb.mean_scale, 1);
      const QuadraticProblem prob = QuadraticProblem::synthesize(
          m, dom, pb.mu_x, pb.mu_y, pb.coupling_scale, unit.radius_b, unit.radius_c, cfg.seed);
      const auto instance = [&cfg, &pb, m](int s) {
        const std::uint64_t rseed = detail::replica_seed(cfg, s);
        SyntheticQuadraticData data =
            synthesize_quadratic_data(pb.d_x, pb.d_y, m, cfg.data.n, pb.sigma, cfg.seed,
                                      pb.mean_scale, cfg.data.reservoir_per_agent, rseed);
        SeedInstance<QuadraticProblem> inst;
        inst.train = std::move(data.train);
        auto nb = make_neighbor_stratified(inst.train, data.reservoirs, rseed, cfg.data.perturb);
        inst.neighbor = std::move(nb.first);
        inst.pert = std::move(nb.second);
        return inst;
      };
      return v(prob, mix, instance);
    }

    case ProblemFamily::Auc: {
      int dim = pb.feature_dim;
      double prior = pb.positive_prior;
      const long need = static_cast<long>(m) * (cfg.data.n + cfg.data.reservoir_per_agent);
      std::shared_ptr<const std::vector<LabeledSample>> pool;  // file-backed data, else null
      if (!pb.libsvm_path.empty()) {
        std::ifstream in(pb.libsvm_path);
        if (!in) throw ConfigError(pb.libsvm_path, "problem.libsvm_path", "cannot open file");
        std::vector<LabeledSample> samples = parse_libsvm(in);
        if (static_cast<long>(samples.size()) < need)
          throw InsufficientData("file holds " + std::to_string(samples.size()) +
                                 " samples, study needs " + std::to_string(need));
        dim = 0;
        long positives = 0;
        for (const auto& s : samples) {
          if (s.label > 0.0) ++positives;
          for (const auto& [idx, val] : s.features) dim = std::max(dim, idx);
        }
        if (dim < 1) throw InsufficientData("file data has no features");
        prior = static_cast<double>(positives) / static_cast<double>(samples.size());
        if (!(prior > 0.0) || !(prior < 1.0))
          throw InsufficientData("file data must contain both classes");
        pool = std::make_shared<const std::vector<LabeledSample>>(std::move(samples));
      }
      if (dim < 1) throw ConfigError("problem", "feature_dim", "must be >= 1");
      const DomainSpec dom{dim + 2, 1, pb.C_x, pb.C_y};
      std::vector<LabeledSample> probe =
          pool ? *pool
               : synthesize_auc_pool(512, dim, prior, pb.mean_scale, pb.sigma, cfg.seed);
      AucProblem prob(prior, dim, dom, std::move(probe));
      prob.calibrate_constants(pb.audit_trials, cfg.seed);
      const auto instance = [&cfg, &pb, m, dim, prior, need, pool](int s) {
        const std::uint64_t rseed = detail::replica_seed(cfg, s);
        SeedInstance<AucProblem> inst;
        std::vector<std::vector<LabeledSample>> reservoirs;
        if (pool) {
          std::tie(inst.train, reservoirs) =
              split_train_reservoir(*pool, m, cfg.data.n, cfg.data.reservoir_per_agent, rseed);
          inst.train.provenance = "libsvm:" + pb.libsvm_path;
        } else {
          const std::vector<LabeledSample> fresh = synthesize_auc_pool(
              static_cast<int>(need), dim, prior, pb.mean_scale, pb.sigma, rseed);
          std::tie(inst.train, reservoirs) =
              split_train_reservoir(fresh, m, cfg.data.n, cfg.data.reservoir_per_agent, rseed);
          inst.train.provenance = "synthetic-auc";
        }
        auto nb = make_neighbor_stratified(inst.train, reservoirs, rseed, cfg.data.perturb);
        inst.neighbor = std::move(nb.first);
        inst.pert = std::move(nb.second);
        return inst;
      };
      return v(prob, mix, instance);
    }

    case ProblemFamily::Sine: {
      const DomainSpec dom{pb.d_x, pb.d_y, pb.C_x, pb.C_y};
      const SineProblem prob = SineProblem::synthesize(m, dom, pb.bound, cfg.seed);
      const auto instance = [&cfg, m](int s) {
        const std::uint64_t rseed = detail::replica_seed(cfg, s);
        constexpr double two_pi = 6.283185307179586476925286766559;
        SeedInstance<SineProblem> inst;
        inst.train.m = m;
        inst.train.n = cfg.data.n;
        inst.train.partition_seed = rseed;
        inst.train.provenance = "synthetic-sine";
        inst.train.shards.assign(static_cast<std::size_t>(m), {});
        for (int i = 0; i < m; ++i) {
          auto& shard = inst.train.shards[static_cast<std::size_t>(i)];
          shard.reserve(static_cast<std::size_t>(cfg.data.n));
          for (int j = 0; j < cfg.data.n; ++j)
            shard.push_back(two_pi * rng::u01(rseed, rng::kSynthesis + 4,
                                              (static_cast<std::uint64_t>(i) << 40) + j, 0));
        }
        std::vector<double> reservoir;
        const int count = m * cfg.data.reservoir_per_agent;
        reservoir.reserve(static_cast<std::size_t>(count));
        for (int k = 0; k < count; ++k)
          reservoir.push_back(two_pi * rng::u01(rseed, rng::kSynthesis + 4,
                                                (static_cast<std::uint64_t>(m) << 40) + k, 0));
        auto nb = make_neighbor(inst.train, reservoir, rseed, cfg.data.perturb);
        inst.neighbor = std::move(nb.first);
        inst.pert = std::move(nb.second);
        return inst;
      };
      return v(prob, mix, instance);
    }
  }
  throw std::invalid_argument("unknown problem family");
}

// The coupled runs for every replica seed, with their datasets kept alive
// (each run's stored config points into `instances`).
template <MinimaxProblem P>
struct StudyRuns {
  std::vector<SeedInstance<P>> instances;
  std::vector<CoupledRun<P>> runs;
};

template <MinimaxProblem P, class InstanceFn>
StudyRuns<P> coupled_study_runs(const ExperimentConfig& cfg, const P& prob,
                                const MixingMatrix& mix, const InstanceFn& instance,
                                int workers) {
  StudyRuns<P> out;
  out.instances.resize(static_cast<std::size_t>(cfg.seeds));
  out.runs.resize(static_cast<std::size_t>(cfg.seeds));
  parallel_for(workers, cfg.seeds, [&](long s) {
    const auto idx = static_cast<std::size_t>(s);
    out.instances[idx] = instance(static_cast<int>(s));
    RunConfig<P> rc;
    rc.problem = &prob;
    rc.data = &out.instances[idx].train;
    rc.mixing = &mix;
    rc.T = cfg.T;
    rc.schedule = cfg.schedule.schedule;
    rc.seed = detail::replica_seed(cfg, static_cast<int>(s));
    rc.record_every = cfg.record_every;
    out.runs[idx] = coupled_run(rc, out.instances[idx].neighbor, out.instances[idx].pert);
  });
  return out;
}

namespace detail {

// bound_fixed = closed-form guarantee for the configured schedule shape,
// bound_exact = exact-sum evaluation. Regime selection by problem family.
inline std::pair<BoundReport, BoundReport> stability_bounds(const QuadraticProblem&,
                                                            const BoundInputs& in) {
  BoundReport exact = scsc_stability_general(in);
  if (in.schedule.kind == Schedule::Kind::Fixed) return {scsc_stability_fixed(in), std::move(exact)};
  try {
    return {scsc_stability_decaying_closed(in), std::move(exact)};
  } catch (const std::invalid_argument&) {
    // schedule outside the closed form's shape: report the exact sum twice
    return {exact, exact};
  }
}

inline std::pair<BoundReport, BoundReport> stability_bounds(const AucProblem&,
                                                            const BoundInputs& in) {
  CcStabilityReport cc = cc_stability(in);
  BoundReport closed = cc.closed ? std::move(*cc.closed) : cc.exact;
  return {std::move(closed), std::move(cc.exact)};
}

inline std::pair<BoundReport, BoundReport> stability_bounds(const SineProblem&,
                                                            const BoundInputs& in) {
  const RateMode mode =
      in.schedule.kind == Schedule::Kind::Fixed ? RateMode::Fixed : RateMode::Decaying;
  const BoundReport b = ncnc_weak_stability(in, mode);
  return {b, b};  // one closed form; no exact-sum counterpart in this regime
}

}  // namespace detail

struct StudyResult {
  int seeds = 0;
  double lambda = 0.0;
  ProblemConstants constants;
  std::vector<double> delta_final, delta_avg_iterate;
  double eps_mean = 0.0, eps_stderr = 0.0;
  double eps_avg_mean = 0.0, eps_avg_stderr = 0.0;
  double bound_fixed = 0.0;
  double bound_exact = 0.0;
  bool bound_divergent = false;
  double gap_weak = 0.0;  // sqrt(2) G eps_mean
};

template <MinimaxProblem P>
StudyResult summarize_study(const ExperimentConfig& cfg, const P& prob, const MixingMatrix& mix,
                            const std::vector<CoupledRun<P>>& runs) {
  StudyResult out;
  out.seeds = static_cast<int>(runs.size());
  out.lambda = mix.lambda;
  out.constants = prob.constants();
  out.delta_final.reserve(runs.size());
  out.delta_avg_iterate.reserve(runs.size());
  for (const auto& r : runs) {
    out.delta_final.push_back(r.delta_final);
    out.delta_avg_iterate.push_back(r.delta_avg_iterate);
  }
  std::tie(out.eps_mean, out.eps_stderr) = detail::mean_stderr(out.delta_final);
  std::tie(out.eps_avg_mean, out.eps_avg_stderr) = detail::mean_stderr(out.delta_avg_iterate);

  BoundInputs in;
  in.constants = prob.constants();
  in.n = cfg.data.n;
  in.m = cfg.topology.m;
  in.T = cfg.T;
  in.lambda = mix.lambda;
  in.schedule = cfg.schedule.schedule;
  in.C_x = prob.domain().C_x;
  in.C_y = prob.domain().C_y;
  const auto [closed, exact] = detail::stability_bounds(prob, in);
  out.bound_fixed = closed.value;
  out.bound_exact = exact.value;
  out.bound_divergent = closed.divergent || exact.divergent;
  out.gap_weak = gen_gap_from_stability(out.eps_mean, prob.constants(), GapMode::Weak);
  return out;
}

inline StudyResult run_study(const ExperimentConfig& cfg) {
  const int workers = resolve_workers(cfg);
  return with_study(cfg, [&](const auto& prob, const MixingMatrix& mix, const auto& instance) {
    const auto study = coupled_study_runs(cfg, prob, mix, instance, workers);
    return summarize_study(cfg, prob, mix, study.runs);
  });
}

struct SweepRow {
  std::vector<std::string> axis_values;  // aligned with SweepResult::axis_names
  StudyResult study;
  double runtime_seconds = 0.0;  // wall clock; deliberately kept out of the CSVs
};

struct SweepResult {
  std::vector<std::string> axis_names;
  std::vector<SweepRow> rows;
};

// Cartesian product over the configured axes in the canonical order
// topology, m, n, eta. Empty axes pin the configured value and emit no
// column. Combination studies drop trajectory recording.
inline SweepResult sweep(const ExperimentConfig& cfg) {
  const SweepAxes& ax = cfg.sweep;
  for (int mv : ax.m)
    if (mv < 1) throw ConfigError("sweep", "m", "agent counts must be >= 1");
  for (int nv : ax.n)
    if (nv < 1) throw ConfigError("sweep", "n", "per-agent sample counts must be >= 1");
  for (double ev : ax.eta)
    if (!(ev > 0.0)) throw ConfigError("sweep", "eta", "learning rates must be positive");
  if (!ax.eta.empty() && cfg.schedule.schedule.kind != Schedule::Kind::Fixed)
    throw ConfigError("sweep", "eta", "rate sweeps need a fixed schedule");

  SweepResult out;
  if (!ax.topology.empty()) out.axis_names.emplace_back("topology");
  if (!ax.m.empty()) out.axis_names.emplace_back("m");
  if (!ax.n.empty()) out.axis_names.emplace_back("n");
  if (!ax.eta.empty()) out.axis_names.emplace_back("eta");

  std::vector<std::string> topos = ax.topology;
  std::vector<int> ms = ax.m, ns = ax.n;
  std::vector<double> etas = ax.eta;
  const bool sweep_eta = !etas.empty();
  if (topos.empty()) topos.emplace_back(topology_name(cfg.topology.kind));
  if (ms.empty()) ms.push_back(cfg.topology.m);
  if (ns.empty()) ns.push_back(cfg.data.n);
  if (etas.empty()) etas.push_back(0.0);  // placeholder; schedule stays as configured

  for (const std::string& topo : topos)
    for (int mv : ms)
      for (int nv : ns)
        for (double ev : etas) {
          ExperimentConfig combo = cfg;
          combo.sweep = SweepAxes{};
          combo.record_every = 1 << 30;  // endpoints only; keeps sweeps in memory budget
          combo.topology.kind = parse_topology(topo);
          combo.topology.m = mv;
          combo.data.n = nv;
          if (sweep_eta) combo.schedule.schedule = Schedule::fixed(ev, ev);

          const std::string where = "topology=" + topo + " m=" + std::to_string(mv) + " n=" +
                                    std::to_string(nv) +
                                    (sweep_eta ? " eta=" + fmt17(ev) : std::string());
          SweepRow row;
          if (!ax.topology.empty()) row.axis_values.push_back(topo);
          if (!ax.m.empty()) row.axis_values.push_back(std::to_string(mv));
          if (!ax.n.empty()) row.axis_values.push_back(std::to_string(nv));
          if (!ax.eta.empty()) row.axis_values.push_back(fmt17(ev));

          const auto t0 = std::chrono::steady_clock::now();
          try {
            row.study = run_study(combo);
          } catch (const ConfigError& e) {
            throw ConfigError("sweep", where, e.what());
          } catch (const std::exception& e) {
            throw std::runtime_error("sweep combination " + where + ": " + e.what());
          }
          row.runtime_seconds =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          out.rows.push_back(std::move(row));
        }
  return out;
}

namespace detail {

inline std::string csv_join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  return line;
}

inline std::string sweep_table(const SweepResult& res, const std::vector<std::string>& columns,
                               const std::vector<double StudyResult::*>& fields,
                               bool with_seed_count) {
  std::vector<std::string> header = res.axis_names;
  if (with_seed_count) header.emplace_back("seed_count");
  header.insert(header.end(), columns.begin(), columns.end());
  std::string out = csv_join(header) + "\n";
  for (const auto& row : res.rows) {
    std::vector<std::string> cells = row.axis_values;
    if (with_seed_count) cells.push_back(std::to_string(row.study.seeds));
    for (const auto field : fields) cells.push_back(fmt17(row.study.*field));
    out += csv_join(cells) + "\n";
  }
  return out;
}

}  // namespace detail

inline std::string write_sweep_csv(const SweepResult& res) {
  return detail::sweep_table(
      res, {"eps_mean", "eps_stderr", "bound_fixed", "bound_exact", "gap_weak"},
      {&StudyResult::eps_mean, &StudyResult::eps_stderr, &StudyResult::bound_fixed,
       &StudyResult::bound_exact, &StudyResult::gap_weak},
      true);
}

inline std::string write_stability_csv(const SweepResult& res) {
  return detail::sweep_table(res, {"eps_mean", "eps_stderr"},
                             {&StudyResult::eps_mean, &StudyResult::eps_stderr}, true);
}

inline std::string write_bounds_csv(const SweepResult& res) {
  return detail::sweep_table(
      res, {"bound_fixed", "bound_exact", "gap_weak"},
      {&StudyResult::bound_fixed, &StudyResult::bound_exact, &StudyResult::gap_weak}, false);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

struct SweepFiles {
  SweepResult result;
  std::filesystem::path sweep_csv, stability_csv, bounds_csv;
};

inline SweepFiles run_sweep_files(const ExperimentConfig& cfg) {
  SweepFiles out;
  out.result = sweep(cfg);
  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  out.sweep_csv = dir / "sweep.csv";
  out.stability_csv = dir / "stability.csv";
  out.bounds_csv = dir / "bounds.csv";
  write_text_file(out.sweep_csv, write_sweep_csv(out.result));
  write_text_file(out.stability_csv, write_stability_csv(out.result));
  write_text_file(out.bounds_csv, write_bounds_csv(out.result));
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (const char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

inline std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                       const char* what) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  if (rows.empty()) throw SchemaMismatch(std::string(what) + " table has no header");
  for (const auto& r : rows)
    if (r.size() != rows.front().size())
      throw SchemaMismatch(std::string(what) + " table has ragged rows");
  return rows;
}

inline std::size_t column_of(const std::vector<std::string>& header, const std::string& name,
                             const char* what) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw SchemaMismatch(std::string(what) + " table lacks required column '" + name + "'");
}

inline double parse_numeric_cell(const std::string& cell, const char* what) {
  const char* b = cell.c_str();
  char* e = nullptr;
  const double v = std::strtod(b, &e);
  if (cell.empty() || e != b + cell.size())
    throw SchemaMismatch(std::string(what) + " cell '" + cell + "' is not numeric");
  return v;
}

}  // namespace detail

// Joins a measured-stability table against a bound table on their shared
// leading axis columns. Output columns: the axes, the measured eps_mean, the
// closed-form bound, ratio = bound/eps (infinite when eps is zero), and
// dominates = 1 when the bound covers the measurement. Axis and value cells
// are echoed verbatim from the inputs.
inline std::string compare_report(const std::string& stability_text,
                                  const std::string& bounds_text) {
  const auto blank = [](const std::string& text) {
    return text.find_first_not_of(" \t\r\n") == std::string::npos;
  };
  if (blank(stability_text) && blank(bounds_text)) return {};  // nothing to join

  const auto stab = detail::parse_csv(stability_text, "stability");
  const auto bnd = detail::parse_csv(bounds_text, "bounds");

  const std::size_t axes = detail::column_of(stab.front(), "seed_count", "stability");
  const std::size_t s_eps = detail::column_of(stab.front(), "eps_mean", "stability");
  const std::size_t b_fixed = detail::column_of(bnd.front(), "bound_fixed", "bounds");
  if (b_fixed != axes)
    throw SchemaMismatch("tables disagree on the number of axis columns: " +
                         std::to_string(axes) + " vs " + std::to_string(b_fixed));
  for (std::size_t i = 0; i < axes; ++i)
    if (stab.front()[i] != bnd.front()[i])
      throw SchemaMismatch("axis columns differ: '" + stab.front()[i] + "' vs '" +
                           bnd.front()[i] + "'");

  const auto key_of = [axes](const std::vector<std::string>& row) {
    std::string key;
    for (std::size_t i = 0; i < axes; ++i) {
      key += row[i];
      key += '\x1f';
    }
    return key;
  };
  std::map<std::string, const std::vector<std::string>*> bound_rows;
  for (std::size_t r = 1; r < bnd.size(); ++r) bound_rows[key_of(bnd[r])] = &bnd[r];

  std::vector<std::string> header(stab.front().begin(), stab.front().begin() + axes);
  for (const char* c : {"eps_mean", "bound_fixed", "ratio", "dominates"})
    header.emplace_back(c);
  std::string out = detail::csv_join(header) + "\n";

  for (std::size_t r = 1; r < stab.size(); ++r) {
    const auto it = bound_rows.find(key_of(stab[r]));
    if (it == bound_rows.end()) {
      std::string where;
      for (std::size_t i = 0; i < axes; ++i) where += (i ? " " : "") + stab[r][i];
      throw SchemaMismatch("no bound row for combination '" + where + "'");
    }
    const double eps = detail::parse_numeric_cell(stab[r][s_eps], "stability");
    const double bound = detail::parse_numeric_cell((*it->second)[b_fixed], "bounds");
    const double ratio = eps == 0.0 ? std::numeric_limits<double>::infinity() : bound / eps;

    std::vector<std::string> cells(stab[r].begin(), stab[r].begin() + axes);
    cells.push_back(stab[r][s_eps]);
    cells.push_back((*it->second)[b_fixed]);
    cells.push_back(fmt17(ratio));
    cells.emplace_back(bound >= eps ? "1" : "0");
    out += detail::csv_join(cells) + "\n";
  }
  return out;
}

// Recorded trajectory of the agent-averaged iterates; the saddle-distance
// column appears only when a reference saddle is supplied.
inline std::string write_trajectory_csv(const Trajectory& traj,
                                        const Eigen::VectorXd* saddle_x = nullptr,
                                        const Eigen::VectorXd* saddle_y = nullptr) {
  const bool with_saddle = saddle_x != nullptr && saddle_y != nullptr;
  std::string out = with_saddle ? "t,consensus,dist_to_saddle,avg_x_norm,avg_y_norm\n"
                                : "t,consensus,avg_x_norm,avg_y_norm\n";
  for (std::size_t r = 0; r < traj.rec_t.size(); ++r) {
    out += std::to_string(traj.rec_t[r]);
    out += ',';
    out += fmt17(traj.consensus[r]);
    if (with_saddle) {
      const double d = std::sqrt((traj.xbar_rec[r] - *saddle_x).squaredNorm() +
                                 (traj.ybar_rec[r] - *saddle_y).squaredNorm());
      out += ',';
      out += fmt17(d);
    }
    out += ',';
    out += fmt17(traj.xbar_rec[r].norm());
    out += ',';
    out += fmt17(traj.ybar_rec[r].norm());
    out += '\n';
  }
  return out;
}

// Per-seed divergence series on the recorded grid. delta_avg_iterate is the
// running rate-weighted average over recorded iterations, which matches the
// averaged-iterate divergence exactly at record stride 1.
template <MinimaxProblem P>
std::string write_stability_series_csv(const std::vector<CoupledRun<P>>& runs) {
  std::string out = "seed,t,delta,delta_avg_iterate\n";
  for (const auto& run : runs) {
    const Schedule& sched = run.cfg.schedule;
    Eigen::VectorXd xa, ya, xb, yb;
    double wx = 0.0, wy = 0.0;
    for (std::size_t r = 0; r < run.rec_t.size(); ++r) {
      const long t = run.rec_t[r];
      if (t < run.cfg.T) {
        const double ex = sched.eta_x(t), ey = sched.eta_y(t);
        if (wx == 0.0) {
          xa = ex * run.a.xbar_rec[r];
          xb = ex * run.b.xbar_rec[r];
          ya = ey * run.a.ybar_rec[r];
          yb = ey * run.b.ybar_rec[r];
        } else {
          xa += ex * run.a.xbar_rec[r];
          xb += ex * run.b.xbar_rec[r];
          ya += ey * run.a.ybar_rec[r];
          yb += ey * run.b.ybar_rec[r];
        }
        wx += ex;
        wy += ey;
      }
      const double dav = wx > 0.0 && wy > 0.0
                             ? detail::stacked_distance(xa / wx, ya / wy, xb / wx, yb / wy)
                             : 0.0;
      out += std::to_string(run.cfg.seed);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += fmt17(run.delta[r]);
      out += ',';
      out += fmt17(dav);
      out += '\n';
    }
  }
  return out;
}

}  // namespace dsgda
