#pragma once

#include <random>
#include <vector>

#include "qma/qform.hpp"

namespace qma {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

/// Complex antisymmetric matrix with entries uniform in the unit square.
inline Eigen::MatrixXcd random_antisymmetric(Rng& rng, int n) {
  const int dim = 2 * n;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i + 1; j < dim; ++j) {
      a(i, j) = cplx(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
      a(j, i) = -a(i, j);
    }
  return a;
}

inline QForm2 random_j_real(Rng& rng, int n) {
  return project_j_real(QForm2::mirrored(random_antisymmetric(rng, n)));
}

/// J-real form shifted along the standard form until its smallest quaternionic
/// eigenvalue lies in [min_margin, min_margin + 1].
inline QForm2 random_positive(Rng& rng, int n, double min_margin = 0.1) {
  QForm2 a = random_j_real(rng, n);
  const double shift = -min_q_eigenvalue(a) + min_margin + uniform(rng, 0.0, 1.0);
  return a + shift * QForm2::standard(n);
}

inline std::vector<double> random_reals(Rng& rng, int count, double lo, double hi) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (auto& x : out) x = uniform(rng, lo, hi);
  return out;
}

}  // namespace qma
