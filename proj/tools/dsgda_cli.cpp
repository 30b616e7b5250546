// Command-line front end: single runs, coupled stability studies, bound
// tables, factor sweeps, and bound-vs-measurement comparisons, all driven by
// a JSON experiment config with flag overrides.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "dsgda/sweep.hpp"

namespace {

using dsgda::ConfigError;
using dsgda::ExperimentConfig;

struct CommonOpts {
  std::string config_path;
  std::string topology;
  int m = 0;
  int n = 0;
  long T = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  CLI::App* sub = nullptr;

  void attach(CLI::App* s) {
    sub = s;
    s->add_option("--config", config_path, "experiment config file (JSON)");
    s->add_option("--topology", topology, "override: gossip topology name");
    s->add_option("--m", m, "override: agent count");
    s->add_option("--n", n, "override: samples per agent");
    s->add_option("--T", T, "override: iteration count");
    s->add_option("--eta", eta, "override: fixed learning rate for both blocks");
    s->add_option("--seed", seed, "override: base seed");
  }

  ExperimentConfig resolve() const {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : dsgda::load_config(config_path);
    if (sub->count("--topology")) {
      try {
        cfg.topology.kind = dsgda::parse_topology(topology);
      } catch (const std::exception& e) {
        throw ConfigError("--topology", "", e.what());
      }
    }
    if (sub->count("--m")) {
      if (m < 1) throw ConfigError("--m", "", "agent count must be >= 1");
      cfg.topology.m = m;
    }
    if (sub->count("--n")) {
      if (n < 1) throw ConfigError("--n", "", "per-agent sample count must be >= 1");
      cfg.data.n = n;
    }
    if (sub->count("--T")) {
      if (T < 1) throw ConfigError("--T", "", "iteration count must be >= 1");
      cfg.T = T;
    }
    if (sub->count("--eta")) {
      if (!(eta > 0.0)) throw ConfigError("--eta", "", "learning rate must be positive");
      cfg.schedule.schedule = dsgda::Schedule::fixed(eta, eta);
    }
    if (sub->count("--seed")) cfg.seed = seed;
    return cfg;
  }
};

dsgda::BoundInputs bound_inputs(const ExperimentConfig& cfg, const dsgda::ProblemConstants& k,
                                const dsgda::DomainSpec& dom, double lambda) {
  dsgda::BoundInputs in;
  in.constants = k;
  in.n = cfg.data.n;
  in.m = cfg.topology.m;
  in.T = cfg.T;
  in.lambda = lambda;
  in.schedule = cfg.schedule.schedule;
  in.C_x = dom.C_x;
  in.C_y = dom.C_y;
  return in;
}

// Every closed-form guarantee applicable to the configured family and
// schedule; forms whose schedule-shape preconditions fail are omitted.
std::vector<dsgda::BoundReport> collect_bounds(const ExperimentConfig& cfg) {
  return dsgda::with_study(
      cfg, [&](const auto& prob, const dsgda::MixingMatrix& mix, const auto&) {
        using P = std::decay_t<decltype(prob)>;
        const dsgda::BoundInputs in =
            bound_inputs(cfg, prob.constants(), prob.domain(), mix.lambda);
        const bool fixed = in.schedule.kind == dsgda::Schedule::Kind::Fixed;
        std::vector<dsgda::BoundReport> out;
        const auto maybe = [&out](auto&& f) {
          try {
            out.push_back(f());
          } catch (const std::invalid_argument&) {
            // schedule shape outside this form's preconditions
          }
        };

        if constexpr (std::is_same_v<P, dsgda::QuadraticProblem>) {
          out.push_back(dsgda::scsc_stability_general(in));
          if (fixed) {
            out.push_back(dsgda::scsc_stability_fixed(in));
            out.push_back(dsgda::scsc_optimization_error(in, dsgda::RateMode::Fixed));
            out.push_back(dsgda::population_risk_bound(in, dsgda::PopulationSetting::ScscFixed));
          } else {
            maybe([&] { return dsgda::scsc_stability_decaying(in); });
            maybe([&] { return dsgda::scsc_stability_decaying_closed(in); });
            maybe([&] { return dsgda::scsc_optimization_error(in, dsgda::RateMode::Decaying); });
            maybe([&] {
              return dsgda::population_risk_bound(in, dsgda::PopulationSetting::ScscDecaying);
            });
          }
        } else if constexpr (std::is_same_v<P, dsgda::AucProblem>) {
          dsgda::CcStabilityReport cc = dsgda::cc_stability(in);
          out.push_back(cc.exact);
          if (cc.closed) out.push_back(*cc.closed);
          if (fixed) {
            out.push_back(dsgda::scsc_optimization_error(in, dsgda::RateMode::Fixed));
            out.push_back(dsgda::population_risk_bound(in, dsgda::PopulationSetting::CcFixed));
          }
        } else {
          out.push_back(dsgda::ncnc_weak_stability(
              in, fixed ? dsgda::RateMode::Fixed : dsgda::RateMode::Decaying));
        }
        return out;
      });
}

int cmd_topology(const CommonOpts& opts, double c) {
  if (!(c > 0.0) || c > 1.0)
    throw ConfigError("--c", "", "decay exponent must lie in (0,1]");
  const ExperimentConfig cfg = opts.resolve();
  const dsgda::MixingMatrix mix =
      dsgda::build_mixing_matrix({cfg.topology.kind, cfg.topology.m});
  std::cout << "topology,m,lambda,gap,c,c_lambda\n"
            << dsgda::topology_name(cfg.topology.kind) << ',' << mix.m << ','
            << dsgda::fmt17(mix.lambda) << ',' << dsgda::fmt17(mix.spectral_gap) << ','
            << dsgda::fmt17(c) << ',' << dsgda::fmt17(dsgda::detail::c_lambda_or_limit(mix.lambda, c))
            << '\n';
  return 0;
}

int cmd_run(const CommonOpts& opts) {
  const ExperimentConfig cfg = opts.resolve();
  dsgda::with_study(cfg, [&](const auto& prob, const dsgda::MixingMatrix& mix,
                             const auto& instance) {
    using P = std::decay_t<decltype(prob)>;
    const auto inst = instance(0);
    dsgda::RunConfig<P> rc;
    rc.problem = &prob;
    rc.data = &inst.train;
    rc.mixing = &mix;
    rc.T = cfg.T;
    rc.schedule = cfg.schedule.schedule;
    rc.seed = cfg.seed;
    rc.record_every = cfg.record_every;
    const dsgda::Trajectory traj = dsgda::run(rc);

    std::string csv;
    if constexpr (std::is_same_v<P, dsgda::QuadraticProblem>) {
      try {
        const auto [sx, sy] = dsgda::saddle_point(prob, inst.train);
        csv = dsgda::write_trajectory_csv(traj, &sx, &sy);
      } catch (const std::exception&) {
        csv = dsgda::write_trajectory_csv(traj);  // saddle unavailable: drop the column
      }
    } else {
      csv = dsgda::write_trajectory_csv(traj);
    }
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    const std::filesystem::path path = dir / "trajectory.csv";
    dsgda::write_text_file(path, csv);
    std::cout << path.string() << '\n';
  });
  return 0;
}

int cmd_stability(const CommonOpts& opts, int seeds_override, bool seeds_set,
                  std::string output) {
  ExperimentConfig cfg = opts.resolve();
  if (seeds_set) {
    if (seeds_override < 1) throw ConfigError("--seeds", "", "seed count must be >= 1");
    cfg.seeds = seeds_override;
  }
  dsgda::with_study(cfg, [&](const auto& prob, const dsgda::MixingMatrix& mix,
                             const auto& instance) {
    const auto study =
        dsgda::coupled_study_runs(cfg, prob, mix, instance, dsgda::resolve_workers(cfg));
    std::filesystem::path path;
    if (output.empty()) {
      const std::filesystem::path dir(cfg.output_dir);
      std::filesystem::create_directories(dir);
      path = dir / "stability.csv";
    } else {
      path = output;
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    }
    dsgda::write_text_file(path, dsgda::write_stability_series_csv(study.runs));

    const dsgda::StudyResult res = dsgda::summarize_study(cfg, prob, mix, study.runs);
    nlohmann::json j;
    j["seeds"] = res.seeds;
    j["lambda"] = res.lambda;
    j["epsilon_arg"] = res.eps_mean;
    j["epsilon_arg_stderr"] = res.eps_stderr;
    j["epsilon_avg_iterate"] = res.eps_avg_mean;
    j["epsilon_avg_iterate_stderr"] = res.eps_avg_stderr;
    j["bound_fixed"] = res.bound_fixed;
    j["bound_exact"] = res.bound_exact;
    j["bound_divergent"] = res.bound_divergent;
    j["gap_weak"] = res.gap_weak;
    j["constants"] = {{"G", res.constants.G},
                      {"L", res.constants.L},
                      {"mu_x", res.constants.mu_x},
                      {"mu_y", res.constants.mu_y}};
    j["series_csv"] = path.string();
    std::cout << j.dump(2) << '\n';
  });
  return 0;
}

int cmd_bounds(const CommonOpts& opts) {
  const ExperimentConfig cfg = opts.resolve();
  const std::vector<dsgda::BoundReport> reports = collect_bounds(cfg);
  std::string out = "bound_name,value,term,term_value\n";
  for (const auto& r : reports)
    for (const auto& t : r.decomposition)
      out += r.name + ',' + dsgda::fmt17(r.value) + ',' + t.label + ',' +
             dsgda::fmt17(t.value) + '\n';
  std::cout << out;
  return 0;
}

int cmd_sweep(const CommonOpts& opts) {
  const ExperimentConfig cfg = opts.resolve();
  if (cfg.sweep.empty())
    throw ConfigError(opts.config_path.empty() ? "config" : opts.config_path, "sweep",
                      "the sweep subcommand needs at least one nonempty sweep axis");
  const dsgda::SweepFiles files = dsgda::run_sweep_files(cfg);
  std::cout << files.sweep_csv.string() << '\n'
            << files.stability_csv.string() << '\n'
            << files.bounds_csv.string() << '\n';
  return 0;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path, "", "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int cmd_compare(const std::string& stability_path, const std::string& bounds_path) {
  std::cout << dsgda::compare_report(read_text_file(stability_path),
                                     read_text_file(bounds_path));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decentralized minimax stability laboratory"};
  app.require_subcommand(1);

  CommonOpts topo_opts;
  double c_exponent = 1.0;
  CLI::App* topo = app.add_subcommand("topology", "mixing-matrix spectrum for one topology");
  topo_opts.attach(topo);
  topo->add_option("--c", c_exponent, "decay exponent for the topology constant");

  CommonOpts run_opts;
  CLI::App* runc = app.add_subcommand("run", "one trajectory; writes trajectory.csv");
  run_opts.attach(runc);

  CommonOpts stab_opts;
  int seeds = 0;
  std::string stab_output;
  CLI::App* stab = app.add_subcommand(
      "stability", "coupled neighbor study; writes the divergence series and a JSON summary");
  stab_opts.attach(stab);
  CLI::Option* seeds_opt = stab->add_option("--seeds", seeds, "override: replica seed count");
  stab->add_option("--output", stab_output, "divergence series CSV path");

  CommonOpts bounds_opts;
  CLI::App* bnd = app.add_subcommand("bounds", "closed-form guarantee table for the config");
  bounds_opts.attach(bnd);

  CommonOpts sweep_opts;
  CLI::App* swp =
      app.add_subcommand("sweep", "factor grid; writes sweep.csv, stability.csv, bounds.csv");
  sweep_opts.attach(swp);

  std::string cmp_stability, cmp_bounds;
  CLI::App* cmp = app.add_subcommand("compare", "join a stability table against a bound table");
  cmp->add_option("stability_csv", cmp_stability, "measured stability CSV")->required();
  cmp->add_option("bounds_csv", cmp_bounds, "bound CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (topo->parsed()) return cmd_topology(topo_opts, c_exponent);
    if (runc->parsed()) return cmd_run(run_opts);
    if (stab->parsed()) return cmd_stability(stab_opts, seeds, seeds_opt->count() > 0, stab_output);
    if (bnd->parsed()) return cmd_bounds(bounds_opts);
    if (swp->parsed()) return cmd_sweep(sweep_opts);
    if (cmp->parsed()) return cmd_compare(cmp_stability, cmp_bounds);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
