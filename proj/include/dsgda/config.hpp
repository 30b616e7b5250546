#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dsgda/data.hpp"
#include "dsgda/errors.hpp"
#include "dsgda/schedule.hpp"
#include "dsgda/topology.hpp"

namespace dsgda {

enum class ProblemFamily { Quadratic, Auc, Sine };

inline std::string family_name(ProblemFamily f) {
  switch (f) {
    case ProblemFamily::Quadratic: return "quadratic";
    case ProblemFamily::Auc: return "auc";
    case ProblemFamily::Sine: return "sine";
  }
  throw std::invalid_argument("unknown problem family");
}

inline ProblemFamily parse_family(const std::string& s) {
  if (s == "quadratic") return ProblemFamily::Quadratic;
  if (s == "auc") return ProblemFamily::Auc;
  if (s == "sine") return ProblemFamily::Sine;
  throw std::invalid_argument("unknown problem family '" + s + "'");
}

struct ProblemBlock {
  ProblemFamily family = ProblemFamily::Quadratic;
  double mu_x = 1.0, mu_y = 1.0;
  int d_x = 4, d_y = 4;
  double C_x = 1.0, C_y = 1.0;
  double coupling_scale = 0.5;
  double sigma = 0.1;       // sample noise scale (synthetic families)
  double mean_scale = 0.25; // per-agent mean magnitude / class separation
  double bound = 1.0;       // loss range of the bounded nonconvex family
  double positive_prior = 0.3;
  int feature_dim = 4;
  std::string libsvm_path;  // empty = synthesize features
  double test_fraction = 0.25;
  int audit_trials = 2000;
  bool operator==(const ProblemBlock&) const = default;
};

struct DataBlock {
  int n = 100;
  PerturbSpec perturb;
  int reservoir_per_agent = 64;
  bool operator==(const DataBlock& o) const {
    return n == o.n && reservoir_per_agent == o.reservoir_per_agent &&
           perturb.kind == o.perturb.kind && perturb.fixed_index == o.perturb.fixed_index;
  }
};

struct TopologyBlock {
  Topology kind = Topology::FullyConnected;
  int m = 4;
  bool operator==(const TopologyBlock&) const = default;
};

struct ScheduleBlock {
  Schedule schedule = Schedule::fixed(0.01, 0.01);
  bool operator==(const ScheduleBlock& o) const {
    const Schedule &a = schedule, &b = o.schedule;
    return a.kind == b.kind && a.eta_x_const == b.eta_x_const &&
           a.eta_y_const == b.eta_y_const && a.mu_x_ref == b.mu_x_ref && a.c_x == b.c_x &&
           a.mu_y_ref == b.mu_y_ref && a.c_y == b.c_y;
  }
};

struct SweepAxes {
  std::vector<std::string> topology;
  std::vector<int> m;
  std::vector<int> n;
  std::vector<double> eta;
  bool empty() const { return topology.empty() && m.empty() && n.empty() && eta.empty(); }
  bool operator==(const SweepAxes&) const = default;
};

struct ExperimentConfig {
  ProblemBlock problem;
  DataBlock data;
  TopologyBlock topology;
  ScheduleBlock schedule;
  long T = 100;
  int seeds = 5;
  std::uint64_t seed = 1;
  int record_every = 1;
  std::string output_dir = "out";
  int workers = 0;  // 0 = environment variable DSGDA_WORKERS, else 1
  SweepAxes sweep;
  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                                const std::string& path, const std::string& section) {
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key))
      throw ConfigError(path, section.empty() ? key : section + "." + key, "unknown key");
}

template <class T>
T get_or(const json& obj, const std::string& key, const T& fallback, const std::string& path,
         const std::string& section) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, section.empty() ? key : section + "." + key, e.what());
  }
}

inline PerturbSpec parse_perturb(const json& v, const std::string& path) {
  PerturbSpec spec;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "last") spec.kind = PerturbSpec::Kind::Last;
    else if (s == "random") spec.kind = PerturbSpec::Kind::Random;
    else throw ConfigError(path, "data.perturb", "expected \"last\", \"random\", or an index");
  } else if (v.is_number_integer()) {
    spec.kind = PerturbSpec::Kind::Fixed;
    spec.fixed_index = v.get<int>();
    if (spec.fixed_index < 1) throw ConfigError(path, "data.perturb", "index must be >= 1");
  } else {
    throw ConfigError(path, "data.perturb", "expected \"last\", \"random\", or an index");
  }
  return spec;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::string& path) {
  using detail::get_or;
  detail::json root;
  try {
    root = detail::json::parse(text);
  } catch (const detail::json::exception& e) {
    throw ConfigError(path, "", e.what());
  }
  if (!root.is_object()) throw ConfigError(path, "", "top level must be an object");
  detail::reject_unknown_keys(root,
                              {"problem", "data", "topology", "schedule", "T", "seeds", "seed",
                               "record_every", "output_dir", "workers", "sweep"},
                              path, "");
  ExperimentConfig cfg;

  if (!root.contains("problem") || !root["problem"].is_object())
    throw ConfigError(path, "problem", "required section missing");
  {
    const auto& p = root["problem"];
    detail::reject_unknown_keys(
        p,
        {"family", "mu_x", "mu_y", "d_x", "d_y", "C_x", "C_y", "coupling_scale", "sigma",
         "mean_scale", "bound", "positive_prior", "feature_dim", "libsvm_path", "test_fraction",
         "audit_trials"},
        path, "problem");
    if (!p.contains("family")) throw ConfigError(path, "problem.family", "required key missing");
    try {
      cfg.problem.family = parse_family(p.at("family").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(path, "problem.family", e.what());
    }
    auto& b = cfg.problem;
    b.mu_x = get_or(p, "mu_x", b.mu_x, path, "problem");
    b.mu_y = get_or(p, "mu_y", b.mu_y, path, "problem");
    b.d_x = get_or(p, "d_x", b.d_x, path, "problem");
    b.d_y = get_or(p, "d_y", b.d_y, path, "problem");
    b.C_x = get_or(p, "C_x", b.C_x, path, "problem");
    b.C_y = get_or(p, "C_y", b.C_y, path, "problem");
    b.coupling_scale = get_or(p, "coupling_scale", b.coupling_scale, path, "problem");
    b.sigma = get_or(p, "sigma", b.sigma, path, "problem");
    b.mean_scale = get_or(p, "mean_scale", b.mean_scale, path, "problem");
    b.bound = get_or(p, "bound", b.bound, path, "problem");
    b.positive_prior = get_or(p, "positive_prior", b.positive_prior, path, "problem");
    b.feature_dim = get_or(p, "feature_dim", b.feature_dim, path, "problem");
    b.libsvm_path = get_or(p, "libsvm_path", b.libsvm_path, path, "problem");
    b.test_fraction = get_or(p, "test_fraction", b.test_fraction, path, "problem");
    b.audit_trials = get_or(p, "audit_trials", b.audit_trials, path, "problem");
    if (b.d_x < 1 || b.d_y < 1) throw ConfigError(path, "problem.d_x", "dimensions must be >= 1");
    if (b.C_x <= 0.0 || b.C_y <= 0.0)
      throw ConfigError(path, "problem.C_x", "domain radii must be positive");
    if (b.audit_trials < 1000)
      throw ConfigError(path, "problem.audit_trials", "constant audits need >= 1000 trials");
  }

  if (root.contains("data")) {
    const auto& d = root["data"];
    if (!d.is_object()) throw ConfigError(path, "data", "must be an object");
    detail::reject_unknown_keys(d, {"n", "perturb", "reservoir_per_agent"}, path, "data");
    cfg.data.n = get_or(d, "n", cfg.data.n, path, "data");
    if (d.contains("perturb")) cfg.data.perturb = detail::parse_perturb(d["perturb"], path);
    cfg.data.reservoir_per_agent =
        get_or(d, "reservoir_per_agent", cfg.data.reservoir_per_agent, path, "data");
    if (cfg.data.n < 1) throw ConfigError(path, "data.n", "per-agent sample count must be >= 1");
    if (cfg.data.reservoir_per_agent < 1)
      throw ConfigError(path, "data.reservoir_per_agent", "must be >= 1");
  }

  if (root.contains("topology")) {
    const auto& t = root["topology"];
    if (!t.is_object()) throw ConfigError(path, "topology", "must be an object");
    detail::reject_unknown_keys(t, {"kind", "m"}, path, "topology");
    if (t.contains("kind")) {
      try {
        cfg.topology.kind = parse_topology(t.at("kind").get<std::string>());
      } catch (const std::exception& e) {
        throw ConfigError(path, "topology.kind", e.what());
      }
    }
    cfg.topology.m = get_or(t, "m", cfg.topology.m, path, "topology");
    if (cfg.topology.m < 1) throw ConfigError(path, "topology.m", "agent count must be >= 1");
  }

  if (root.contains("schedule")) {
    const auto& s = root["schedule"];
    if (!s.is_object()) throw ConfigError(path, "schedule", "must be an object");
    detail::reject_unknown_keys(
        s, {"kind", "eta", "eta_x", "eta_y", "mu_ref", "c", "c_x", "c_y", "mu_x_ref", "mu_y_ref"},
        path, "schedule");
    const std::string kind = get_or<std::string>(s, "kind", "fixed", path, "schedule");
    try {
      if (kind == "fixed") {
        const double eta = get_or(s, "eta", 0.01, path, "schedule");
        cfg.schedule.schedule = Schedule::fixed(get_or(s, "eta_x", eta, path, "schedule"),
                                                get_or(s, "eta_y", eta, path, "schedule"));
      } else if (kind == "decaying") {
        if (s.contains("c_x") || s.contains("c_y") || s.contains("mu_x_ref") ||
            s.contains("mu_y_ref")) {
          const double mu_ref = get_or(s, "mu_ref", 1.0, path, "schedule");
          cfg.schedule.schedule = Schedule::decaying_per_block(
              get_or(s, "mu_x_ref", mu_ref, path, "schedule"),
              get_or(s, "c_x", 1.0, path, "schedule"),
              get_or(s, "mu_y_ref", mu_ref, path, "schedule"),
              get_or(s, "c_y", 1.0, path, "schedule"));
        } else {
          cfg.schedule.schedule = Schedule::decaying(get_or(s, "mu_ref", 1.0, path, "schedule"),
                                                     get_or(s, "c", 1.0, path, "schedule"));
        }
      } else {
        throw ConfigError(path, "schedule.kind", "expected \"fixed\" or \"decaying\"");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(path, "schedule", e.what());
    }
  }

  cfg.T = get_or<long>(root, "T", cfg.T, path, "");
  cfg.seeds = get_or(root, "seeds", cfg.seeds, path, "");
  cfg.seed = get_or<std::uint64_t>(root, "seed", cfg.seed, path, "");
  cfg.record_every = get_or(root, "record_every", cfg.record_every, path, "");
  cfg.output_dir = get_or(root, "output_dir", cfg.output_dir, path, "");
  cfg.workers = get_or(root, "workers", cfg.workers, path, "");
  if (cfg.T < 1) throw ConfigError(path, "T", "iteration count must be >= 1");
  if (cfg.seeds < 1) throw ConfigError(path, "seeds", "seed count must be >= 1");
  if (cfg.record_every < 0) throw ConfigError(path, "record_every", "must be >= 0");
  if (cfg.workers < 0) throw ConfigError(path, "workers", "must be >= 0");

  if (root.contains("sweep")) {
    const auto& w = root["sweep"];
    if (!w.is_object()) throw ConfigError(path, "sweep", "must be an object");
    detail::reject_unknown_keys(w, {"topology", "m", "n", "eta"}, path, "sweep");
    cfg.sweep.topology =
        get_or<std::vector<std::string>>(w, "topology", {}, path, "sweep");
    cfg.sweep.m = get_or<std::vector<int>>(w, "m", {}, path, "sweep");
    cfg.sweep.n = get_or<std::vector<int>>(w, "n", {}, path, "sweep");
    cfg.sweep.eta = get_or<std::vector<double>>(w, "eta", {}, path, "sweep");
    for (const auto& name : cfg.sweep.topology) {
      try {
        parse_topology(name);
      } catch (const std::exception& e) {
        throw ConfigError(path, "sweep.topology", e.what());
      }
    }
    if (!cfg.sweep.eta.empty() && cfg.schedule.schedule.kind != Schedule::Kind::Fixed)
      throw ConfigError(path, "sweep.eta", "rate sweeps need a fixed schedule");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, "", "cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  detail::json root;
  auto& p = root["problem"];
  p["family"] = family_name(cfg.problem.family);
  p["mu_x"] = cfg.problem.mu_x;
  p["mu_y"] = cfg.problem.mu_y;
  p["d_x"] = cfg.problem.d_x;
  p["d_y"] = cfg.problem.d_y;
  p["C_x"] = cfg.problem.C_x;
  p["C_y"] = cfg.problem.C_y;
  p["coupling_scale"] = cfg.problem.coupling_scale;
  p["sigma"] = cfg.problem.sigma;
  p["mean_scale"] = cfg.problem.mean_scale;
  p["bound"] = cfg.problem.bound;
  p["positive_prior"] = cfg.problem.positive_prior;
  p["feature_dim"] = cfg.problem.feature_dim;
  p["libsvm_path"] = cfg.problem.libsvm_path;
  p["test_fraction"] = cfg.problem.test_fraction;
  p["audit_trials"] = cfg.problem.audit_trials;

  auto& d = root["data"];
  d["n"] = cfg.data.n;
  switch (cfg.data.perturb.kind) {
    case PerturbSpec::Kind::Last: d["perturb"] = "last"; break;
    case PerturbSpec::Kind::Random: d["perturb"] = "random"; break;
    case PerturbSpec::Kind::Fixed: d["perturb"] = cfg.data.perturb.fixed_index; break;
  }
  d["reservoir_per_agent"] = cfg.data.reservoir_per_agent;

  auto& t = root["topology"];
  t["kind"] = topology_name(cfg.topology.kind);
  t["m"] = cfg.topology.m;

  auto& s = root["schedule"];
  if (cfg.schedule.schedule.kind == Schedule::Kind::Fixed) {
    s["kind"] = "fixed";
    s["eta_x"] = cfg.schedule.schedule.eta_x_const;
    s["eta_y"] = cfg.schedule.schedule.eta_y_const;
  } else {
    s["kind"] = "decaying";
    s["mu_x_ref"] = cfg.schedule.schedule.mu_x_ref;
    s["c_x"] = cfg.schedule.schedule.c_x;
    s["mu_y_ref"] = cfg.schedule.schedule.mu_y_ref;
    s["c_y"] = cfg.schedule.schedule.c_y;
  }

  root["T"] = cfg.T;
  root["seeds"] = cfg.seeds;
  root["seed"] = cfg.seed;
  root["record_every"] = cfg.record_every;
  root["output_dir"] = cfg.output_dir;
  root["workers"] = cfg.workers;
  if (!cfg.sweep.empty()) {
    auto& w = root["sweep"];
    if (!cfg.sweep.topology.empty()) w["topology"] = cfg.sweep.topology;
    if (!cfg.sweep.m.empty()) w["m"] = cfg.sweep.m;
    if (!cfg.sweep.n.empty()) w["n"] = cfg.sweep.n;
    if (!cfg.sweep.eta.empty()) w["eta"] = cfg.sweep.eta;
  }
  return root.dump(2) + "\n";
}

}  // namespace dsgda
