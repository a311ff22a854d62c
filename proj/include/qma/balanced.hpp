#pragma once

// Balanced-metric reduction: Om_0 -> Om_h with (n-1)! *Om_h = Om_0^{n-1}, and
// recovery of Om_u from Om_u^{n-1} = Om_0^{n-1} + dd_J u ^ Om^{n-2}.

#include <cmath>
#include <functional>
#include <string>

#include "qma/exterior.hpp"
#include "qma/ma_operator.hpp"

namespace qma {

inline QForm2 omega_h_from_balanced(const QForm2& omega_0) {
  const double margin = min_q_eigenvalue(omega_0);
  if (!(margin > 0.0)) throw ConeError("omega_h_from_balanced: Om_0 is not strictly positive", 0, margin);
  return power_n1(omega_0).sigma();
}

inline Form2Field omega_h_from_balanced(const Form2Field& omega_0) {
  require_cone(omega_0, "omega_h_from_balanced", 0.0);
  Form2Field out(omega_0.grid, QForm2(omega_0.grid.n()));
  parallel_for(omega_0.size(), [&](std::size_t p) { out[p] = power_n1(omega_0[p]).sigma(); });
  return out;
}

/// dd_J u ^ Om^{n-2} materialized, then pulled back by the star and 1/(n-1)!.
inline QForm2 star_dual_of_ddju_wedge(const QForm2& dd) {
  const int n = dd.n();
  const ExteriorForm phi = ExteriorForm::from_qform(dd).wedge(ExteriorForm::from_qform(QForm2::standard(n)).power(n - 2));
  return (phi.star() * (1.0 / factorial(n - 1))).to_qform();
}

struct Recovery {
  Form2Field omega_u;
  Form2Field sigma;                   // star dual of Om_0^{n-1} + dd_J u ^ Om^{n-2}
  double star_identity_defect = 0.0;  // relative, max over points
};

/// Om_u for a potential u. The star dual of the right side is
/// Om_h + (S_1(dd_J u) Om - dd_J u) / (n-1), which is cross-checked against the
/// exterior expansion at every point.
inline Recovery recover_omega_u(const Form2Field& omega_0, const ScalarField& u) {
  require_same_grid(omega_0.grid, u.grid, "recover_omega_u");
  const int n = u.grid.n();
  if (n < 2) throw MalformedInput("recover_omega_u: requires n >= 2");
  const Form2Field omega_h = omega_h_from_balanced(omega_0);
  const Form2Field dd = ddju(u);
  Recovery out;
  out.sigma = Form2Field(u.grid, QForm2(n));
  std::vector<double> defect(u.size(), 0.0);
  parallel_for(u.size(), [&](std::size_t p) {
    const QForm2 adjusted = trace_adjusted(dd[p]);
    const QForm2 by_wedge = star_dual_of_ddju_wedge(dd[p]);
    defect[p] = max_abs(adjusted.matrix() - by_wedge.matrix()) / std::max(1.0, max_abs(adjusted.matrix()));
    out.sigma[p] = omega_h[p] + adjusted;
  });
  for (double d : defect) out.star_identity_defect = std::max(out.star_identity_defect, d);
  require_cone(out.sigma, "recover_omega_u: Om_0^{n-1} + dd_J u ^ Om^{n-2}", 0.0);
  out.omega_u = Form2Field(u.grid, QForm2(n));
  parallel_for(u.size(), [&](std::size_t p) { out.omega_u[p] = positive_root(QForm2n2(out.sigma[p])); });
  return out;
}

/// max over points of |Om_u^{n-1} - (Om_0^{n-1} + dd_J u ^ Om^{n-2})| / |rhs|,
/// all three expanded in the exterior algebra.
inline double rewedge_defect(const Form2Field& omega_u, const Form2Field& omega_0, const ScalarField& u) {
  const int n = u.grid.n();
  const Form2Field dd = ddju(u);
  const ExteriorForm om = ExteriorForm::from_qform(QForm2::standard(n)).power(n - 2);
  std::vector<double> defect(u.size());
  parallel_for(u.size(), [&](std::size_t p) {
    const ExteriorForm rhs =
        ExteriorForm::from_qform(omega_0[p]).power(n - 1) + ExteriorForm::from_qform(dd[p]).wedge(om);
    const ExteriorForm lhs = ExteriorForm::from_qform(omega_u[p]).power(n - 1);
    defect[p] = (lhs - rhs).max_abs() / std::max(rhs.max_abs(), 1e-300);
  });
  double worst = 0.0;
  for (double d : defect) worst = std::max(worst, d);
  return worst;
}

/// Right side and constant of the potential equation for a form-type target
/// Om_u^n = e^{f' + b'} Om^n.
struct FormTypeDictionary {
  ScalarField f;
  int n = 2;
  double b_prime(double b) const { return b / (n - 1); }
};

inline FormTypeDictionary form_type_dictionary(const ScalarField& fprime) {
  const int n = fprime.grid.n();
  if (n < 2) throw MalformedInput("form_type_dictionary: requires n >= 2");
  return {static_cast<double>(n - 1) * fprime, n};
}

/// log(Pf(Om_u) / Pf(Om)) - f' - b' at every point.
inline ScalarField form_type_residual(const Form2Field& omega_u, const ScalarField& fprime, double b_prime) {
  ScalarField out(fprime.grid);
  const double log_pf_om = log_pfaffian_unchecked(QForm2::standard(fprime.grid.n()).matrix()).log_abs;
  parallel_for(out.size(), [&](std::size_t p) {
    out[p] = log_pfaffian_unchecked(omega_u[p].matrix()).log_abs - log_pf_om - fprime[p] - b_prime;
  });
  return out;
}

}  // namespace qma
