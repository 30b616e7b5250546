#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dsgda/errors.hpp"

namespace dsgda {

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
// Converged when the off-diagonal Frobenius norm drops below 1e-12.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const int m = static_cast<int>(a.rows());
  if (m != a.cols()) throw NotSymmetric("matrix is not square");
  if (m > 4096) throw InvalidSize("eigensolver capped at m=4096");
  if (m == 0) return {};

  const double tol = 1e-12;
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < m; ++p)
      for (int q = p + 1; q < m; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= tol) break;
    if (sweep == max_sweeps - 1) throw NotConverged("jacobi sweeps exhausted");

    for (int p = 0; p < m - 1; ++p) {
      for (int q = p + 1; q < m; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (int k = 0; k < m; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
      }
    }
  }

  std::vector<double> eig(m);
  for (int i = 0; i < m; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<double>());
  return eig;
}

// Spectral norm of a (possibly rectangular) matrix via the symmetric Gram form.
inline double spectral_norm(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  const Eigen::MatrixXd gram =
      a.rows() <= a.cols() ? Eigen::MatrixXd(a * a.transpose()) : Eigen::MatrixXd(a.transpose() * a);
  const std::vector<double> eig = jacobi_eigenvalues(gram);
  return std::sqrt(std::max(0.0, eig.front()));
}

}  // namespace dsgda
