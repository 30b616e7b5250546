#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dsgda/errors.hpp"
#include "dsgda/jacobi.hpp"
#include "dsgda/numeric.hpp"

namespace dsgda {

enum class Topology { FullyConnected, Ring, Star, Grid2D, Exponential, Disconnected };

struct TopologyKind {
  Topology variant = Topology::FullyConnected;
  int m = 1;
};

inline const char* topology_name(Topology t) {
  switch (t) {
    case Topology::FullyConnected: return "full";
    case Topology::Ring: return "ring";
    case Topology::Star: return "star";
    case Topology::Grid2D: return "grid";
    case Topology::Exponential: return "exp";
    case Topology::Disconnected: return "single";
  }
  return "?";
}

inline Topology parse_topology(const std::string& s) {
  if (s == "full") return Topology::FullyConnected;
  if (s == "ring") return Topology::Ring;
  if (s == "star") return Topology::Star;
  if (s == "grid") return Topology::Grid2D;
  if (s == "exp") return Topology::Exponential;
  if (s == "single") return Topology::Disconnected;
  throw std::invalid_argument("unknown topology '" + s + "'");
}

struct MixingMatrix {
  int m = 1;
  Eigen::MatrixXd weights;
  double lambda = 0.0;        // max{|eig_2|, |eig_m|}; 0 by convention at m=1
  double spectral_gap = 1.0;  // 1 - lambda
};

// Eigenvalues of a mixing matrix, descending; rejects asymmetric input.
inline std::vector<double> spectrum(const Eigen::MatrixXd& w) {
  if (w.rows() != w.cols()) throw NotSymmetric("matrix is not square");
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) throw NotSymmetric("matrix deviates from symmetry by " + fmt17(asym));
  return jacobi_eigenvalues(w);
}

inline std::vector<double> spectrum(const MixingMatrix& w) { return spectrum(w.weights); }

namespace detail {

inline Eigen::MatrixXd metropolis_weights(int m, const std::set<std::pair<int, int>>& edges) {
  std::vector<int> degree(m, 0);
  for (const auto& [i, j] : edges) {
    ++degree[i];
    ++degree[j];
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [i, j] : edges) {
    const double wij = 1.0 / (1.0 + std::max(degree[i], degree[j]));
    w(i, j) = w(j, i) = wij;
  }
  for (int i = 0; i < m; ++i) w(i, i) = 1.0 - w.row(i).sum();
  return w;
}

}  // namespace detail

inline MixingMatrix build_mixing_matrix(TopologyKind kind) {
  const int m = kind.m;
  if (m < 1) throw InvalidSize("agent count must be >= 1");

  Eigen::MatrixXd w;
  switch (kind.variant) {
    case Topology::FullyConnected:
      w = Eigen::MatrixXd::Constant(m, m, 1.0 / m);
      break;
    case Topology::Disconnected:
      w = Eigen::MatrixXd::Identity(m, m);
      break;
    case Topology::Ring: {
      // Uniform 1/3 on self and the two ring neighbors; wraps coincide for m <= 2.
      w = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        w(i, i) += 1.0 / 3.0;
        w(i, (i + 1) % m) += 1.0 / 3.0;
        w(i, (i + m - 1) % m) += 1.0 / 3.0;
      }
      break;
    }
    case Topology::Star: {
      std::set<std::pair<int, int>> edges;
      for (int leaf = 1; leaf < m; ++leaf) edges.insert({0, leaf});
      w = detail::metropolis_weights(m, edges);
      break;
    }
    case Topology::Grid2D: {
      const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
      if (side * side != m) throw InvalidSize("grid topology requires a perfect-square m");
      std::set<std::pair<int, int>> edges;
      for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) {
          const int v = r * side + c;
          if (c + 1 < side) edges.insert({v, v + 1});
          if (r + 1 < side) edges.insert({v, v + side});
        }
      w = detail::metropolis_weights(m, edges);
      break;
    }
    case Topology::Exponential: {
      // Undirected union of the 2^k-hop edges keeps W symmetric.
      std::set<std::pair<int, int>> edges;
      for (int hop = 1; hop < m; hop *= 2)
        for (int i = 0; i < m; ++i) {
          const int j = (i + hop) % m;
          edges.insert({std::min(i, j), std::max(i, j)});
        }
      w = detail::metropolis_weights(m, edges);
      break;
    }
  }

  MixingMatrix out;
  out.m = m;
  out.weights = std::move(w);

  const double asym = (out.weights - out.weights.transpose()).cwiseAbs().maxCoeff();
  const double row_err = (out.weights.rowwise().sum() - Eigen::VectorXd::Ones(m)).cwiseAbs().maxCoeff();
  if (asym > 1e-12 || row_err > 1e-12 || out.weights.minCoeff() < 0.0)
    throw NotConverged("mixing matrix failed doubly-stochastic construction");

  if (m == 1) {
    out.lambda = 0.0;
  } else if (kind.variant == Topology::FullyConnected) {
    out.lambda = 0.0;
  } else if (kind.variant == Topology::Disconnected) {
    out.lambda = 1.0;
  } else {
    const std::vector<double> eig = jacobi_eigenvalues(out.weights);
    if (std::fabs(eig.front() - 1.0) > 1e-10)
      throw NotConverged("leading mixing eigenvalue deviates from 1");
    const double lam = std::max(std::fabs(eig[1]), std::fabs(eig.back()));
    out.lambda = std::clamp(lam, 0.0, 1.0);
  }
  out.spectral_gap = 1.0 - out.lambda;
  return out;
}

// Topology constant C_lambda for the geometric-polynomial convolution bound,
// with k the polynomial decay exponent.
inline double c_lambda(double lambda, double exponent) {
  if (lambda == 0.0 || lambda == 1.0)
    throw DegenerateSpectrum("C_lambda undefined at lambda=" + fmt17(lambda));
  if (lambda < 0.0 || lambda > 1.0) throw std::invalid_argument("lambda outside [0,1]");
  if (!(exponent > 0.0) || exponent > 1.0)
    throw std::invalid_argument("decay exponent must lie in (0,1]");
  const double k = exponent;
  const double log_inv = std::log(1.0 / lambda);
  return std::pow(k / std::exp(1.0), k) / (lambda * std::pow(log_inv, k)) +
         (2.0 / std::exp(1.0)) / (lambda * log_inv) +
         std::pow(2.0, k) / (lambda * log_inv);
}

// Exact partial sum  sum_{j=0}^{t-1} lambda^{t-1-j} / (j+1)^k.
inline double geometric_decay_sum(double lambda, double k, long t) {
  if (lambda < 0.0 || lambda >= 1.0) throw std::invalid_argument("lambda outside [0,1)");
  if (!(k > 0.0)) throw std::invalid_argument("decay exponent must be positive");
  if (t < 1) throw std::invalid_argument("t must be >= 1");
  KahanSum sum;
  double pw = 1.0;  // lambda^{t-1-j}, walking j from t-1 down to 0
  for (long j = t - 1; j >= 0; --j) {
    sum.add(pw / std::pow(static_cast<double>(j + 1), k));
    if (lambda == 0.0) break;  // only the j = t-1 term survives
    pw *= lambda;
  }
  return sum.value();
}

}  // namespace dsgda
