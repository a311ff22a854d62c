#pragma once

// Seeded property harness over the pointwise and field identities the
// equation relies on. Each identity draws from its own stream, so results do
// not depend on which other identities run.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "qma/balanced.hpp"
#include "qma/exterior.hpp"
#include "qma/ma_operator.hpp"
#include "qma/random_forms.hpp"

namespace qma {

struct IdentityResult {
  std::string name;
  int n = 0;
  int cases = 0;
  double max_error = 0.0;
  double threshold = 0.0;
  bool passed = false;
};

struct IdentityReport {
  std::uint64_t seed = 0;
  int cases = 0;
  bool canary = false;
  std::vector<IdentityResult> results;

  bool all_passed() const {
    return std::all_of(results.begin(), results.end(), [](const IdentityResult& r) { return r.passed; });
  }
  const IdentityResult* find(const std::string& name, int n) const {
    for (const auto& r : results)
      if (r.name == name && r.n == n) return &r;
    return nullptr;
  }
};

inline constexpr double kExactThreshold = 1e-12;
inline constexpr double kIdentityThreshold = 1e-9;
inline constexpr double kPfDetThreshold = 1e-10;
inline constexpr double kFieldThreshold = 1e-10;

namespace detail {

inline double rel_err(cplx got, cplx want) {
  const double scale = std::max({std::abs(got), std::abs(want), 1e-300});
  return std::abs(got - want) / scale;
}

inline double rel_err(const Eigen::MatrixXcd& got, const Eigen::MatrixXcd& want) {
  const double scale = std::max({max_abs(got), max_abs(want), 1e-300});
  return max_abs(got - want) / scale;
}

inline double binomial(int n, int k) { return factorial(n) / (factorial(k) * factorial(n - k)); }

/// Random trigonometric field on grid g: modes with |k_d| <= 1 on the active dims.
inline ScalarField random_field(Rng& rng, const TorusGrid& g, int terms) {
  struct Term {
    double c, phase;
    std::vector<int> k;
  };
  std::vector<Term> ts;
  for (int i = 0; i < terms; ++i) {
    Term t{uniform(rng, -1.0, 1.0), uniform(rng, 0.0, 2.0 * std::numbers::pi), std::vector<int>(static_cast<std::size_t>(g.real_dim()), 0)};
    for (int d : g.active()) t.k[static_cast<std::size_t>(d)] = std::uniform_int_distribution<int>(-1, 1)(rng);
    ts.push_back(std::move(t));
  }
  return ScalarField::sample(g, [&](std::span<const double> x) {
    double v = 0.0;
    for (const auto& t : ts) {
      double a = t.phase;
      for (std::size_t d = 0; d < x.size(); ++d) a += 2.0 * std::numbers::pi * t.k[d] * x[d];
      v += t.c * std::cos(a);
    }
    return v;
  });
}

inline TorusGrid identity_grid(int n) {
  return TorusGrid::with_active(n, {{0, 4}, {1, 4}, {2, 4}, {3, 4}});
}

inline std::uint64_t stream_seed(std::uint64_t seed, const std::string& name, int n) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(std::hash<std::string>{}(name)), static_cast<std::uint32_t>(n)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

/// One identity: a per-case error function and its threshold.
struct IdentityCheck {
  std::string name;
  double threshold;
  std::function<double(Rng&, int n, bool canary)> error;
};

inline std::vector<IdentityCheck> identity_checks() {
  using detail::rel_err;
  std::vector<IdentityCheck> out;

  out.push_back({"pf_squared_det", kPfDetThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 a = random_j_real(rng, n);
                   const cplx pf = pfaffian(a);
                   return rel_err(pf * pf, a.matrix().determinant());
                 }});

  out.push_back({"pf_real", kExactThreshold, [](Rng& rng, int n, bool) {
                   const cplx pf = pfaffian(random_j_real(rng, n));
                   return std::abs(pf.imag()) / std::max(std::abs(pf), 1e-300);
                 }});

  out.push_back({"pf_power_n1", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 a = random_j_real(rng, n);
                   const ExteriorForm pw = ExteriorForm::from_qform(a).power(n - 1);
                   return rel_err(pfaffian_2n2(pw), std::pow(pfaffian(a), n - 1));
                 }});

  out.push_back({"pf_ratio", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 chi = random_j_real(rng, n);
                   const QForm2 eta = random_positive(rng, n, 0.2);
                   const cplx want = pfaffian(chi) / pfaffian(eta);
                   const cplx by_wedge = wedge_coefficient({{chi, n}}) / wedge_coefficient({{eta, n}});
                   const cplx starred = pfaffian(star(chi)) / pfaffian(star(eta));
                   return std::max(rel_err(by_wedge, want), rel_err(starred, want));
                 }});

  out.push_back({"s_m_eigenvalues", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 a = random_j_real(rng, n);
                   const auto mu = q_spectrum(a).mu;
                   double err = 0.0;
                   for (int m = 1; m <= n; ++m) {
                     const cplx wc = wedge_coefficient({{a, m}, {QForm2::standard(n), n - m}});
                     const cplx want = detail::binomial(n, m) * wc / factorial(n);
                     err = std::max(err, rel_err(elementary_symmetric(mu, m), want));
                   }
                   return err;
                 }});

  out.push_back({"star_roundtrip", kExactThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 b = random_j_real(rng, n);
                   const double e1 = rel_err(factorial(n - 1) * unstar(star(b)).matrix(), b.matrix());
                   const ExteriorForm x = ExteriorForm::from_qform(b);
                   const double e2 = (x.star().star() - x).max_abs() / std::max(x.max_abs(), 1e-300);
                   // Positivity is preserved both ways.
                   const QForm2 p = random_positive(rng, n, 0.05);
                   const bool pos = is_positive(unstar(star(p))).positive && is_positive(p).positive;
                   return std::max(e1, e2) + (pos ? 0.0 : 1.0);
                 }});

  out.push_back({"trace_identity", kExactThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 h = random_positive(rng, n, 0.2);
                   const QForm2 dd = random_j_real(rng, n);
                   const QForm2 om = h + trace_adjusted(dd);
                   // Relative to the operands: the right side is a difference of two larger traces.
                   const double scale = std::max({std::abs(s1(dd)), std::abs(s1(om)), std::abs(s1(h)), 1e-300});
                   return std::abs(s1(dd) - (s1(om) - s1(h))) / scale;
                 }});

  out.push_back({"reconstruction", kExactThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 h = random_positive(rng, n, 0.2);
                   const QForm2 dd = random_j_real(rng, n);
                   const QForm2 om = h + trace_adjusted(dd);
                   const QForm2 o = QForm2::standard(n);
                   const QForm2 rebuilt = (n - 1) * h - s1(h) * o + s1(om) * o - (n - 1) * om;
                   return rel_err(rebuilt.matrix(), dd.matrix());
                 }});

  out.push_back({"cancellation", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 om0 = random_positive(rng, n, 0.2);
                   const QForm2 omt = random_j_real(rng, n);
                   const QForm2 h = omega_h_from_balanced(om0);
                   const QForm2 o = QForm2::standard(n);
                   const ExteriorForm lhs =
                       ExteriorForm::from_qform(omt).wedge(ExteriorForm::from_qform(om0).power(n - 1)) * cplx(2.0 * (n - 1)) +
                       ExteriorForm::from_qform(h).wedge(ExteriorForm::from_qform(omt)).wedge(ExteriorForm::from_qform(o).power(n - 2)) *
                           cplx(2.0 * (n - 1) * (n - 1));
                   const double rhs = 2.0 * (n - 1) / n * s1(omt) * s_m(om0, n - 1) * factorial(n);
                   return std::abs(lhs.top_coefficient() - rhs) / std::max({std::abs(rhs), lhs.max_abs(), 1e-300});
                 }});

  out.push_back({"s1_balanced", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const QForm2 om0 = random_positive(rng, n, 0.2);
                   return rel_err(s1(omega_h_from_balanced(om0)), s_m(om0, n - 1));
                 }});

  out.push_back({"mu_square_identity", kExactThreshold, [](Rng& rng, int n, bool) {
                   const int m = n - 1;
                   const auto mu = random_reals(rng, m, -3.0, 3.0);
                   double sq = 0.0, cross = 0.0, diff = 0.0;
                   for (int i = 0; i < m; ++i) {
                     sq += mu[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(i)];
                     for (int j = i + 1; j < m; ++j) {
                       cross += mu[static_cast<std::size_t>(i)] * mu[static_cast<std::size_t>(j)];
                       const double d = mu[static_cast<std::size_t>(i)] - mu[static_cast<std::size_t>(j)];
                       diff += d * d;
                     }
                   }
                   const double lhs = (n - 2) * sq - 2.0 * cross;
                   return std::abs(lhs - diff) / std::max({std::abs(diff), sq, 1e-300});
                 }});

  // Inequalities report the violation; passing means strictly positive.
  out.push_back({"a_positivity", 0.0, [](Rng& rng, int n, bool) {
                   const QForm2 om = random_positive(rng, n, 0.01);
                   const double margin = is_positive(ellipticity_form_at(om).sigma()).margin;
                   return margin > 0.0 ? 0.0 : 1.0 - margin;
                 }});

  out.push_back({"quadratic_trace_nonnegative", 0.0, [](Rng& rng, int n, bool) {
                   const QForm2 om = random_positive(rng, n, 0.05);
                   const Eigen::MatrixXcd d = random_antisymmetric(rng, n);
                   const double q = quadratic_trace(om, d);
                   return q >= -kAlgebraicTolerance * max_abs(d) * max_abs(d) ? 0.0 : -q;
                 }});

  out.push_back({"s1_half_laplacian", kFieldThreshold, [](Rng& rng, int n, bool canary) {
                   const TorusGrid g = detail::identity_grid(n);
                   const ScalarField u = detail::random_field(rng, g, 6);
                   const Form2Field dd = ddju(u, canary);
                   const ScalarField half = 0.5 * laplacian(u);
                   double err = 0.0;
                   for (std::size_t p = 0; p < g.points(); ++p) err = std::max(err, std::abs(s1(dd[p]) - half[p]));
                   return err / std::max(1.0, sup_norm(half));
                 }});

  out.push_back({"ddju_j_reality", kFieldThreshold, [](Rng& rng, int n, bool canary) {
                   const TorusGrid g = detail::identity_grid(n);
                   const Form2Field dd = ddju(detail::random_field(rng, g, 6), canary);
                   double err = 0.0;
                   for (const auto& q : dd.values) err = std::max(err, j_reality_defect(q));
                   return err;
                 }});

  out.push_back({"gradient_energy", kIdentityThreshold, [](Rng& rng, int n, bool) {
                   const TorusGrid g = detail::identity_grid(n);
                   const ScalarField u = detail::random_field(rng, g, 6);
                   const Form2Field w = gradient_wedge(u);
                   const ScalarField direct = 0.25 * gradient_norm2(u);
                   const QForm2 o = QForm2::standard(n);
                   double err = 0.0;
                   // A fixed stride of sample points keeps the exterior expansion cheap.
                   for (std::size_t p = 0; p < g.points(); p += 17) {
                     const cplx lhs = static_cast<double>(n) * wedge_coefficient({{w[p], 1}, {o, n - 1}}) / factorial(n);
                     err = std::max(err, std::abs(lhs - direct[p]) / std::max(1.0, direct[p]));
                   }
                   return err;
                 }});
  return out;
}

inline IdentityReport identity_suite(std::uint64_t seed, int cases, bool canary = false,
                                     const std::vector<int>& dims = {2, 3}) {
  if (cases < 1) throw MalformedInput("identity_suite: cases must be >= 1");
  IdentityReport report{seed, cases, canary, {}};
  for (const auto& check : identity_checks()) {
    for (int n : dims) {
      Rng rng(detail::stream_seed(seed, check.name, n));
      IdentityResult r{check.name, n, cases, 0.0, check.threshold, true};
      for (int c = 0; c < cases; ++c) {
        const double e = check.error(rng, n, canary);
        if (!(e <= r.max_error)) r.max_error = std::isnan(e) ? std::numeric_limits<double>::infinity() : e;
      }
      r.passed = check.threshold == 0.0 ? r.max_error == 0.0 : r.max_error < check.threshold;
      report.results.push_back(r);
    }
  }
  return report;
}

}  // namespace qma
