#pragma once

// The quaternionic Monge-Ampere operator in log form:
//   log Pf(Om~(u)) - log Pf(Om) = f + b,
//   Om~(u) = Om_h + (S_1(dd_J u) Om - dd_J u) / (n-1).

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "qma/errors.hpp"
#include "qma/parallel.hpp"
#include "qma/qform.hpp"
#include "qma/torus.hpp"

namespace qma {

struct ConeReport {
  double margin = std::numeric_limits<double>::infinity();
  std::size_t worst_point = 0;
};

inline ConeReport cone_report(const Form2Field& f) {
  std::vector<double> m(f.size());
  parallel_for(f.size(), [&](std::size_t p) { m[p] = min_q_eigenvalue(f[p]); });
  ConeReport r;
  for (std::size_t p = 0; p < m.size(); ++p)
    if (m[p] < r.margin || std::isnan(m[p])) {
      r.margin = m[p];
      r.worst_point = p;
      if (std::isnan(m[p])) break;
    }
  return r;
}

inline void require_cone(const Form2Field& f, const char* what, double tol = kConeTolerance) {
  const ConeReport r = cone_report(f);
  if (!(r.margin > tol))
    throw ConeError(std::string(what) + ": form leaves the positive cone at point " + std::to_string(r.worst_point) +
                        " (margin " + std::to_string(r.margin) + ")",
                    r.worst_point, r.margin);
}

inline ScalarField log_pfaffian_field(const Form2Field& f) {
  ScalarField out(f.grid);
  parallel_for(f.size(), [&](std::size_t p) { out[p] = log_pfaffian_unchecked(f[p].matrix()).log_abs; });
  return out;
}

class OperatorContext {
 public:
  OperatorContext(Form2Field omega_h, ScalarField f) : omega_h_(std::move(omega_h)), f_(std::move(f)) {
    require_same_grid(omega_h_.grid, f_.grid, "OperatorContext");
    if (grid().n() < 2) throw MalformedInput("OperatorContext: the equation needs n >= 2");
    for (std::size_t p = 0; p < omega_h_.size(); ++p) {
      const double defect = j_reality_defect(omega_h_[p]);
      if (defect > kAlgebraicTolerance)
        throw JRealityError("OperatorContext: omega_h is not J-real at point " + std::to_string(p), defect);
    }
    require_cone(omega_h_, "OperatorContext: omega_h", 0.0);
    omega_ = QForm2::standard(grid().n());
    log_pf_omega_ = ScalarField(grid(), log_pfaffian_unchecked(omega_.matrix()).log_abs);
    log_pf_omega_h_ = log_pfaffian_field(omega_h_);
  }

  /// Constant Om_h given by its quaternionic eigenvalues in the standard frame.
  static OperatorContext diagonal(const TorusGrid& grid, std::span<const double> lambda, ScalarField f) {
    return {Form2Field::constant(grid, QForm2::diagonal(lambda)), std::move(f)};
  }

  const TorusGrid& grid() const noexcept { return f_.grid; }
  int n() const noexcept { return grid().n(); }
  const Form2Field& omega_h() const noexcept { return omega_h_; }
  const ScalarField& f() const noexcept { return f_; }
  const QForm2& omega() const noexcept { return omega_; }
  const ScalarField& log_pf_omega() const noexcept { return log_pf_omega_; }
  const ScalarField& log_pf_omega_h() const noexcept { return log_pf_omega_h_; }

  /// Same structure, new right-hand side.
  OperatorContext with_rhs(ScalarField f) const {
    OperatorContext c = *this;
    require_same_grid(grid(), f.grid, "OperatorContext::with_rhs");
    c.f_ = std::move(f);
    return c;
  }

 private:
  Form2Field omega_h_;
  ScalarField f_;
  QForm2 omega_{1};
  ScalarField log_pf_omega_;
  ScalarField log_pf_omega_h_;
};

/// (S_1(beta) Om - beta) / (n-1): the map beta -> Om~ - Om_h.
inline QForm2 trace_adjusted(const QForm2& beta) {
  const int n = beta.n();
  return (1.0 / (n - 1)) * (s1(beta) * QForm2::standard(n) - beta);
}

inline Form2Field omega_tilde(const OperatorContext& ctx, const ScalarField& u) {
  require_same_grid(ctx.grid(), u.grid, "omega_tilde");
  const Form2Field dd = ddju(u);
  Form2Field out(ctx.grid(), QForm2(ctx.n()));
  const double scale = 1.0 / (ctx.n() - 1);
  parallel_for(u.size(), [&](std::size_t p) {
    out[p] = ctx.omega_h()[p] + scale * (s1(dd[p]) * ctx.omega() - dd[p]);
  });
  return out;
}

/// Om~ with its cone margin and, when inside the cone, the log-residual.
struct Evaluation {
  Form2Field omega_tilde;
  ConeReport cone;
  ScalarField residual;
  bool inside = false;
};

inline Evaluation evaluate(const OperatorContext& ctx, const ScalarField& u, double b, double tol = kConeTolerance) {
  Evaluation e;
  e.omega_tilde = omega_tilde(ctx, u);
  e.cone = cone_report(e.omega_tilde);
  e.inside = e.cone.margin > tol;
  if (!e.inside) return e;
  e.residual = log_pfaffian_field(e.omega_tilde);
  for (std::size_t p = 0; p < u.size(); ++p) e.residual[p] -= ctx.log_pf_omega()[p] + ctx.f()[p] + b;
  return e;
}

inline ScalarField log_residual(const OperatorContext& ctx, const ScalarField& u, double b) {
  Evaluation e = evaluate(ctx, u, b);
  if (!e.inside)
    throw ConeError("log_residual: Om~ leaves the positive cone at point " + std::to_string(e.cone.worst_point) +
                        " (margin " + std::to_string(e.cone.margin) + ")",
                    e.cone.worst_point, e.cone.margin);
  return std::move(e.residual);
}

/// L_u v = (1/2) tr(Om~^{-1} dOm~(v)), the exact derivative of the log-residual
/// in u. Caches Om~^{-1} and tr(Om~^{-1} Om) so repeated applications cost one
/// Hessian each.
class Linearization {
 public:
  Linearization(const OperatorContext& ctx, const Form2Field& omega_t) : grid_(ctx.grid()), n_(ctx.n()) {
    require_cone(omega_t, "linearize");
    inverse_.resize(omega_t.size());
    trace_omega_.resize(omega_t.size());
    const Eigen::MatrixXcd om = ctx.omega().matrix();
    parallel_for(omega_t.size(), [&](std::size_t p) {
      inverse_[p] = omega_t[p].matrix().inverse();
      trace_omega_[p] = (inverse_[p] * om).trace().real();
    });
  }

  Linearization(const OperatorContext& ctx, const ScalarField& u) : Linearization(ctx, omega_tilde(ctx, u)) {}

  ScalarField apply(const ScalarField& v) const {
    require_same_grid(grid_, v.grid, "linearize_apply");
    const Form2Field dd = ddju(v);
    ScalarField out(grid_);
    const double scale = 0.5 / (n_ - 1);
    parallel_for(v.size(), [&](std::size_t p) {
      const double tr_dd = (inverse_[p] * dd[p].matrix()).trace().real();
      out[p] = scale * (s1(dd[p]) * trace_omega_[p] - tr_dd);
    });
    return out;
  }

  const Eigen::MatrixXcd& inverse_at(std::size_t p) const { return inverse_[p]; }

 private:
  TorusGrid grid_;
  int n_;
  std::vector<Eigen::MatrixXcd> inverse_;
  std::vector<double> trace_omega_;
};

inline ScalarField linearize_apply(const OperatorContext& ctx, const ScalarField& u, const ScalarField& v) {
  return Linearization(ctx, u).apply(v);
}

/// A = S_{n-1}(Om~) Om^{n-1} - Om~^{n-1}, stored by its star dual.
inline QForm2n2 ellipticity_form_at(const QForm2& omega_t) {
  const int n = omega_t.n();
  if (n < 2) throw MalformedInput("ellipticity_form: requires n >= 2");
  const double margin = min_q_eigenvalue(omega_t);
  if (!(margin > 0.0)) throw ConeError("ellipticity_form: Om~ is not strictly positive", 0, margin);
  const double s = s_m(omega_t, n - 1);
  return s * power_n1(QForm2::standard(n)) - power_n1(omega_t);
}

inline std::vector<QForm2n2> ellipticity_form(const OperatorContext& ctx, const ScalarField& u) {
  const Form2Field om = omega_tilde(ctx, u);
  require_cone(om, "ellipticity_form");
  std::vector<QForm2n2> out(om.size());
  parallel_for(om.size(), [&](std::size_t p) { out[p] = ellipticity_form_at(om[p]); });
  return out;
}

/// [inf, sup] of log Pf(Om_h) - log Pf(Om) - f; every solution's b lies inside.
inline std::pair<double, double> b_bracket(const OperatorContext& ctx) {
  const ScalarField g = ctx.log_pf_omega_h() - ctx.log_pf_omega() - ctx.f();
  return {inf(g), sup(g)};
}

/// int |d e^{-pu/2}|_g^2 / (p int e^{-pu}), with |d w|^2 = |dw|_g^2 / 2 for real w.
inline double cherrier_ratio(const ScalarField& u, double p) {
  if (!(p > 0.0)) throw MalformedInput("cherrier_ratio: p must be positive");
  ScalarField w(u.grid);
  ScalarField e(u.grid);
  for (std::size_t i = 0; i < u.size(); ++i) {
    w[i] = std::exp(-0.5 * p * u[i]);
    e[i] = w[i] * w[i];
  }
  return 0.5 * integrate(gradient_norm2(w)) / (p * integrate(e));
}

inline double cone_margin(const OperatorContext& ctx, const ScalarField& u) {
  return cone_report(omega_tilde(ctx, u)).margin;
}

}  // namespace qma
