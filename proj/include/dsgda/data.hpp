#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdlib>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "dsgda/errors.hpp"
#include "dsgda/numeric.hpp"
#include "dsgda/rng.hpp"

namespace dsgda {

struct LabeledSample {
  double label = 0.0;
  std::vector<std::pair<int, double>> features;  // 1-based indices, strictly increasing
  bool operator==(const LabeledSample&) const = default;
};

struct QuadraticSample {
  Eigen::VectorXd b, c;
};

template <class Sample>
struct DistributedDataset {
  int m = 0;  // agents
  int n = 0;  // samples per agent
  std::vector<std::vector<Sample>> shards;
  std::string provenance;
  std::uint64_t partition_seed = 0;
  bool operator==(const DistributedDataset&) const = default;
};

template <class Sample>
struct NeighborPerturbation {
  std::vector<int> replaced_index;  // 1-based position per agent
  std::vector<Sample> replacement;
};

// Where the per-shard replacement lands. The stability proofs put the
// differing sample at the last position; that is the default.
struct PerturbSpec {
  enum class Kind { Last, Random, Fixed };
  Kind kind = Kind::Last;
  int fixed_index = 0;  // 1-based, Kind::Fixed only
};

namespace detail {

inline double parse_double_token(const std::string& tok, int line, int col, const char* what) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + tok.size() || tok.empty())
    throw ParseError(line, col, std::string("non-numeric ") + what + " '" + tok + "'");
  return v;
}

inline long parse_index_token(const std::string& tok, int line, int col) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end != begin + tok.size() || tok.empty() || v < 1)
    throw ParseError(line, col, "feature index must be a positive integer, got '" + tok + "'");
  return v;
}

}  // namespace detail

// LIBSVM text: `<label> <idx>:<val> ...`, `#` starts a comment. Labels 0 are
// mapped to -1 so {0,-1}/{1,+1} conventions both yield +-1 classes.
inline std::vector<LabeledSample> parse_libsvm(std::istream& in) {
  std::vector<LabeledSample> out;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));

    std::vector<std::pair<std::string, int>> tokens;  // text, 1-based column
    for (std::size_t i = 0; i < line.size();) {
      if (std::isspace(static_cast<unsigned char>(line[i]))) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
      tokens.emplace_back(line.substr(i, j - i), static_cast<int>(i) + 1);
      i = j;
    }
    if (tokens.empty()) continue;

    LabeledSample s;
    s.label = detail::parse_double_token(tokens[0].first, line_no, tokens[0].second, "label");
    if (s.label == 0.0) s.label = -1.0;

    long prev_idx = 0;
    for (std::size_t k = 1; k < tokens.size(); ++k) {
      const auto& [tok, col] = tokens[k];
      const std::size_t colon = tok.find(':');
      if (colon == std::string::npos) throw ParseError(line_no, col, "missing ':' in '" + tok + "'");
      const long idx = detail::parse_index_token(tok.substr(0, colon), line_no, col);
      if (idx <= prev_idx)
        throw ParseError(line_no, col, "non-increasing feature index " + std::to_string(idx));
      prev_idx = idx;
      const double val = detail::parse_double_token(tok.substr(colon + 1), line_no,
                                                    col + static_cast<int>(colon) + 1, "value");
      s.features.emplace_back(static_cast<int>(idx), val);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline void serialize_libsvm(const std::vector<LabeledSample>& samples, std::ostream& out) {
  for (const auto& s : samples) {
    out << fmt17(s.label);
    for (const auto& [idx, val] : s.features) out << ' ' << idx << ':' << fmt17(val);
    out << '\n';
  }
}

namespace detail {

inline std::vector<std::size_t> shuffled_indices(std::size_t count, std::uint64_t seed,
                                                 std::uint64_t stream) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  for (std::size_t i = count; i > 1; --i) {
    const std::size_t j = rng::index(seed, stream, i - 1, i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace detail

// Deterministic shuffle, then the first m*n samples dealt round-robin.
template <class Sample>
DistributedDataset<Sample> partition(const std::vector<Sample>& pool, int m, int n,
                                     std::uint64_t seed) {
  if (m < 1 || n < 1) throw InvalidSize("partition requires m >= 1 and n >= 1");
  const std::size_t need = static_cast<std::size_t>(m) * static_cast<std::size_t>(n);
  if (pool.size() < need)
    throw InsufficientData("pool holds " + std::to_string(pool.size()) + " samples, need " +
                           std::to_string(need));
  const auto idx = detail::shuffled_indices(pool.size(), seed, rng::kShuffle);

  DistributedDataset<Sample> ds;
  ds.m = m;
  ds.n = n;
  ds.partition_seed = seed;
  ds.shards.assign(m, {});
  for (auto& shard : ds.shards) shard.reserve(n);
  for (std::size_t k = 0; k < need; ++k) ds.shards[k % m].push_back(pool[idx[k]]);
  return ds;
}

namespace detail {

template <class Sample>
int placement_index(const PerturbSpec& spec, int agent, int n, std::uint64_t seed,
                    const DistributedDataset<Sample>&) {
  switch (spec.kind) {
    case PerturbSpec::Kind::Last:
      return n;
    case PerturbSpec::Kind::Random:
      return static_cast<int>(rng::index(seed, rng::kReplacement,
                                         (std::uint64_t{1} << 40) + agent, n)) + 1;
    case PerturbSpec::Kind::Fixed:
      if (spec.fixed_index < 1 || spec.fixed_index > n)
        throw InvalidSize("perturb index outside [1,n]");
      return spec.fixed_index;
  }
  return n;
}

}  // namespace detail

// Neighboring dataset: one sample replaced per shard, drawn from a shared
// replacement pool (without replacement when the pool allows it).
template <class Sample>
std::pair<DistributedDataset<Sample>, NeighborPerturbation<Sample>> make_neighbor(
    const DistributedDataset<Sample>& ds, const std::vector<Sample>& reservoir,
    std::uint64_t seed, const PerturbSpec& spec = {}) {
  if (reservoir.empty()) throw EmptyReservoir("replacement reservoir is empty");

  NeighborPerturbation<Sample> pert;
  pert.replaced_index.resize(ds.m);
  pert.replacement.reserve(ds.m);
  if (reservoir.size() >= static_cast<std::size_t>(ds.m)) {
    const auto idx = detail::shuffled_indices(reservoir.size(), seed, rng::kReplacement);
    for (int i = 0; i < ds.m; ++i) pert.replacement.push_back(reservoir[idx[i]]);
  } else {
    for (int i = 0; i < ds.m; ++i)
      pert.replacement.push_back(reservoir[rng::index(seed, rng::kReplacement, i, reservoir.size())]);
  }

  DistributedDataset<Sample> neighbor = ds;
  for (int i = 0; i < ds.m; ++i) {
    const int pos = detail::placement_index(spec, i, ds.n, seed, ds);
    pert.replaced_index[i] = pos;
    neighbor.shards[i][pos - 1] = pert.replacement[i];
  }
  return {std::move(neighbor), std::move(pert)};
}

// Heterogeneous variant: each shard's replacement comes from that agent's own
// reservoir, so the neighbor stays distributed per the agent's law.
template <class Sample>
std::pair<DistributedDataset<Sample>, NeighborPerturbation<Sample>> make_neighbor_stratified(
    const DistributedDataset<Sample>& ds, const std::vector<std::vector<Sample>>& reservoirs,
    std::uint64_t seed, const PerturbSpec& spec = {}) {
  if (static_cast<int>(reservoirs.size()) != ds.m)
    throw MismatchedShapes("one reservoir per agent required");

  NeighborPerturbation<Sample> pert;
  pert.replaced_index.resize(ds.m);
  pert.replacement.reserve(ds.m);
  DistributedDataset<Sample> neighbor = ds;
  for (int i = 0; i < ds.m; ++i) {
    if (reservoirs[i].empty()) throw EmptyReservoir("agent reservoir is empty");
    pert.replacement.push_back(reservoirs[i][rng::index(seed, rng::kReplacement, i,
                                                        reservoirs[i].size())]);
    const int pos = detail::placement_index(spec, i, ds.n, seed, ds);
    pert.replaced_index[i] = pos;
    neighbor.shards[i][pos - 1] = pert.replacement[i];
  }
  return {std::move(neighbor), std::move(pert)};
}

struct SyntheticQuadraticData {
  DistributedDataset<QuadraticSample> train;
  std::vector<std::vector<QuadraticSample>> reservoirs;  // fresh per-agent draws
  std::vector<Eigen::VectorXd> mean_b, mean_c;           // true per-agent means
  Eigen::VectorXd grand_mean_b, grand_mean_c;
  double radius_b = 0.0, radius_c = 0.0;  // norm bounds over the sample law support
};

// Gaussian samples (component truncation at 4 sigma keeps the support bounded
// without biasing the mean) around deterministic agent-specific means. The
// means define the population law and are keyed by `seed` alone; pass a
// distinct `draw_seed` to redraw a dataset from the same law.
inline SyntheticQuadraticData synthesize_quadratic_data(
    int d_x, int d_y, int m, int n, double sigma, std::uint64_t seed, double mean_scale = 0.25,
    int reservoir_per_agent = 64, std::optional<std::uint64_t> draw_seed = {}) {
  if (d_x < 1 || d_y < 1 || m < 1 || n < 1) throw InvalidSize("positive dimensions required");
  if (sigma < 0.0) throw std::invalid_argument("noise scale must be >= 0");

  SyntheticQuadraticData out;
  out.train.m = m;
  out.train.n = n;
  out.train.partition_seed = seed;
  out.train.provenance = "synthetic-quadratic";
  out.train.shards.assign(m, {});
  out.reservoirs.assign(m, {});
  out.grand_mean_b = Eigen::VectorXd::Zero(d_x);
  out.grand_mean_c = Eigen::VectorXd::Zero(d_y);

  const std::uint64_t mean_stream = rng::kSynthesis;
  const std::uint64_t draw_stream = rng::kSynthesis + 1;

  const auto direction = [&](int agent, int dim, std::uint64_t slot_base) {
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j)
      v[j] = rng::normal_truncated(seed, mean_stream, agent, slot_base + j, 4.0);
    const double norm = v.norm();
    return norm > 0.0 ? Eigen::VectorXd(mean_scale * v / norm)
                      : Eigen::VectorXd(Eigen::VectorXd::Zero(dim));
  };
  for (int i = 0; i < m; ++i) {
    out.mean_b.push_back(direction(i, d_x, 0));
    out.mean_c.push_back(direction(i, d_y, std::uint64_t{1} << 20));
    out.grand_mean_b += out.mean_b.back() / m;
    out.grand_mean_c += out.mean_c.back() / m;
  }

  const std::uint64_t dseed = draw_seed.value_or(seed);
  const auto draw = [&](int agent, std::uint64_t sample_id) {
    QuadraticSample s;
    s.b.resize(d_x);
    s.c.resize(d_y);
    const std::uint64_t step = (static_cast<std::uint64_t>(agent) << 40) + sample_id;
    for (int j = 0; j < d_x; ++j)
      s.b[j] = out.mean_b[agent][j] + sigma * rng::normal_truncated(dseed, draw_stream, step, j, 4.0);
    for (int j = 0; j < d_y; ++j)
      s.c[j] = out.mean_c[agent][j] +
               sigma * rng::normal_truncated(dseed, draw_stream, step, (std::uint64_t{1} << 20) + j, 4.0);
    return s;
  };
  for (int i = 0; i < m; ++i) {
    out.train.shards[i].reserve(n);
    for (int l = 0; l < n; ++l) out.train.shards[i].push_back(draw(i, l));
    out.reservoirs[i].reserve(reservoir_per_agent);
    for (int r = 0; r < reservoir_per_agent; ++r)
      out.reservoirs[i].push_back(draw(i, static_cast<std::uint64_t>(n) + r));
  }

  out.radius_b = mean_scale + 4.0 * sigma * std::sqrt(static_cast<double>(d_x));
  out.radius_c = mean_scale + 4.0 * sigma * std::sqrt(static_cast<double>(d_y));
  return out;
}

}  // namespace dsgda
