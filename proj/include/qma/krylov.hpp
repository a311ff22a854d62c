#pragma once

// Restarted GMRES on mean-zero fields, right-preconditioned. L_u is not
// self-adjoint in general (for n >= 3 not even with a Pfaffian weight), so a
// minimal-residual method for nonsymmetric operators is used.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "qma/errors.hpp"
#include "qma/torus.hpp"

namespace qma {

struct KrylovOptions {
  double tolerance = 1e-12;  // relative to |rhs|_2
  int max_iterations = 300;
  int restart = 60;
};

struct KrylovResult {
  ScalarField x;
  int iterations = 0;
  double relative_residual = 0.0;
};

using FieldMap = std::function<ScalarField(const ScalarField&)>;

inline double dot(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) s += a[p] * b[p];
  return s;
}

inline double norm2(const ScalarField& a) { return std::sqrt(dot(a, a)); }

/// Solves apply(x) = rhs for mean-zero x. Operator and preconditioner outputs
/// are projected back to mean zero.
inline KrylovResult krylov_solve(const FieldMap& apply, const ScalarField& rhs, const FieldMap& precond,
                                 const KrylovOptions& opts) {
  const double rhs_norm = norm2(rhs);
  const double rhs_mean = mean(rhs);
  if (std::abs(rhs_mean) > 1e-12 * std::max(1.0, sup_norm(rhs)))
    throw MalformedInput("krylov_solve: right-hand side must have zero mean (mean " + std::to_string(rhs_mean) + ")");
  KrylovResult out{ScalarField(rhs.grid), 0, 0.0};
  if (rhs_norm == 0.0) return out;

  const auto op = [&](const ScalarField& v) { return remove_mean(apply(v)); };
  const auto pc = [&](const ScalarField& v) { return remove_mean(precond(v)); };
  const int m = std::max(1, opts.restart);

  ScalarField r = remove_mean(rhs);
  double beta = norm2(r);
  while (true) {
    out.relative_residual = beta / rhs_norm;
    if (out.relative_residual <= opts.tolerance) return out;
    if (out.iterations >= opts.max_iterations) break;

    std::vector<ScalarField> basis{(1.0 / beta) * r};
    std::vector<std::vector<double>> h;  // column j has j + 2 entries
    std::vector<double> cs, sn, g{beta};
    int j = 0;
    for (; j < m && out.iterations < opts.max_iterations; ++j) {
      ScalarField w = op(pc(basis[static_cast<std::size_t>(j)]));
      std::vector<double> col(static_cast<std::size_t>(j) + 2, 0.0);
      for (int i = 0; i <= j; ++i) {
        col[static_cast<std::size_t>(i)] = dot(w, basis[static_cast<std::size_t>(i)]);
        w -= col[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(i)];
      }
      // One reorthogonalization pass keeps the basis clean at tight tolerances.
      for (int i = 0; i <= j; ++i) {
        const double c = dot(w, basis[static_cast<std::size_t>(i)]);
        col[static_cast<std::size_t>(i)] += c;
        w -= c * basis[static_cast<std::size_t>(i)];
      }
      const double wn = norm2(w);
      col[static_cast<std::size_t>(j) + 1] = wn;
      for (int i = 0; i < j; ++i) {
        const double a = col[static_cast<std::size_t>(i)];
        const double b = col[static_cast<std::size_t>(i) + 1];
        col[static_cast<std::size_t>(i)] = cs[static_cast<std::size_t>(i)] * a + sn[static_cast<std::size_t>(i)] * b;
        col[static_cast<std::size_t>(i) + 1] = -sn[static_cast<std::size_t>(i)] * a + cs[static_cast<std::size_t>(i)] * b;
      }
      const double a = col[static_cast<std::size_t>(j)];
      const double b = col[static_cast<std::size_t>(j) + 1];
      const double rho = std::hypot(a, b);
      if (rho == 0.0) throw SolverError(SolverError::Kind::LinearSolve, "krylov_solve: breakdown (singular operator)");
      cs.push_back(a / rho);
      sn.push_back(b / rho);
      col[static_cast<std::size_t>(j)] = rho;
      col[static_cast<std::size_t>(j) + 1] = 0.0;
      g.push_back(-sn.back() * g.back());
      g[static_cast<std::size_t>(j)] *= cs.back();
      h.push_back(std::move(col));
      ++out.iterations;
      const bool lucky = wn <= 1e-14 * rho;
      if (!lucky) basis.push_back((1.0 / wn) * w);
      if (std::abs(g.back()) / rhs_norm <= opts.tolerance || lucky) {
        ++j;
        break;
      }
    }
    // Back substitution for the least-squares coefficients.
    std::vector<double> y(static_cast<std::size_t>(j), 0.0);
    for (int i = j - 1; i >= 0; --i) {
      double s = g[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < j; ++k) s -= h[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(k)];
      y[static_cast<std::size_t>(i)] = s / h[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    }
    ScalarField z(rhs.grid);
    for (int i = 0; i < j; ++i) z += y[static_cast<std::size_t>(i)] * basis[static_cast<std::size_t>(i)];
    out.x += pc(z);
    r = remove_mean(rhs) - op(out.x);
    beta = norm2(r);
  }
  throw SolverError(SolverError::Kind::LinearSolve,
                    "krylov_solve: no convergence in " + std::to_string(out.iterations) +
                        " iterations (relative residual " + std::to_string(out.relative_residual) + ")");
}

}  // namespace qma
