#pragma once

// Dense exterior algebra of (p,0)-forms on C^{2n}, basis dz^I indexed by bit
// masks. Exact expansion, so intended for n <= 4 (256 coefficients).

#include <bit>
#include <complex>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "qma/qform.hpp"

namespace qma {

inline constexpr int kMaxExteriorDim = 8;

/// Sign of the permutation sorting the concatenation (I ascending, J ascending).
inline double wedge_sign(std::uint32_t left, std::uint32_t right) {
  int inversions = 0;
  for (std::uint32_t r = right; r != 0; r &= r - 1) {
    const int j = std::countr_zero(r);
    inversions += std::popcount(left >> (j + 1));
  }
  return (inversions % 2 == 0) ? 1.0 : -1.0;
}

class ExteriorForm {
 public:
  explicit ExteriorForm(int dim) : dim_(dim), coeff_(std::size_t{1} << dim) {
    if (dim < 0 || dim > kMaxExteriorDim) throw MalformedInput("ExteriorForm: dimension out of range");
  }

  static ExteriorForm scalar(int dim, cplx c) {
    ExteriorForm f(dim);
    f.coeff_[0] = c;
    return f;
  }

  static ExteriorForm from_qform(const QForm2& alpha) {
    ExteriorForm f(alpha.dim());
    for (int i = 0; i < alpha.dim(); ++i)
      for (int j = i + 1; j < alpha.dim(); ++j) f.coeff_[(1u << i) | (1u << j)] = alpha(i, j);
    return f;
  }

  /// (n-1)! * star(sigma), materialized.
  static ExteriorForm from_qform2n2(const QForm2n2& phi) {
    return from_qform(phi.sigma()).star() * factorial(phi.n() - 1);
  }

  int dim() const noexcept { return dim_; }
  std::uint32_t full_mask() const noexcept { return (std::uint32_t{1} << dim_) - 1; }
  cplx operator[](std::uint32_t mask) const { return coeff_[mask]; }
  cplx& operator[](std::uint32_t mask) { return coeff_[mask]; }
  cplx top_coefficient() const { return coeff_[full_mask()]; }

  ExteriorForm wedge(const ExteriorForm& o) const {
    if (o.dim_ != dim_) throw MalformedInput("ExteriorForm: dimension mismatch");
    ExteriorForm out(dim_);
    for (std::uint32_t a = 0; a < coeff_.size(); ++a) {
      if (coeff_[a] == cplx{}) continue;
      for (std::uint32_t b = 0; b < o.coeff_.size(); ++b) {
        if ((a & b) != 0 || o.coeff_[b] == cplx{}) continue;
        out.coeff_[a | b] += wedge_sign(a, b) * coeff_[a] * o.coeff_[b];
      }
    }
    return out;
  }

  ExteriorForm power(int k) const {
    ExteriorForm out = scalar(dim_, 1.0);
    for (int i = 0; i < k; ++i) out = out.wedge(*this);
    return out;
  }

  /// Antilinear star: alpha ^ *beta = <alpha, beta> vol in the flat frame.
  ExteriorForm star() const {
    ExteriorForm out(dim_);
    const std::uint32_t full = full_mask();
    for (std::uint32_t a = 0; a < coeff_.size(); ++a) {
      if (coeff_[a] == cplx{}) continue;
      out.coeff_[full ^ a] += wedge_sign(a, full ^ a) * std::conj(coeff_[a]);
    }
    return out;
  }

  /// Degree-2 part as a QForm2.
  QForm2 to_qform() const {
    QForm2 q(dim_ / 2);
    for (int i = 0; i < dim_; ++i)
      for (int j = i + 1; j < dim_; ++j) q.set(i, j, coeff_[(1u << i) | (1u << j)]);
    return q;
  }

  double max_abs() const {
    double m = 0.0;
    for (const auto& c : coeff_) m = std::max(m, std::abs(c));
    return m;
  }

  ExteriorForm& operator+=(const ExteriorForm& o) {
    for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] += o.coeff_[i];
    return *this;
  }
  ExteriorForm& operator-=(const ExteriorForm& o) {
    for (std::size_t i = 0; i < coeff_.size(); ++i) coeff_[i] -= o.coeff_[i];
    return *this;
  }
  friend ExteriorForm operator+(ExteriorForm l, const ExteriorForm& r) { return l += r; }
  friend ExteriorForm operator-(ExteriorForm l, const ExteriorForm& r) { return l -= r; }
  friend ExteriorForm operator*(ExteriorForm f, cplx s) {
    for (auto& c : f.coeff_) c *= s;
    return f;
  }
  friend ExteriorForm operator*(cplx s, ExteriorForm f) { return f * s; }

 private:
  int dim_;
  std::vector<cplx> coeff_;
};

/// Coefficient c with prod_k alpha_k^{p_k} = c dz^0 ^ ... ^ dz^{2n-1}; requires
/// sum p_k = n and n <= 4.
inline cplx wedge_coefficient(std::span<const std::pair<QForm2, int>> factors) {
  if (factors.empty()) throw MalformedInput("wedge_coefficient: no factors");
  const int n = factors.front().first.n();
  int total = 0;
  for (const auto& [form, power] : factors) {
    if (form.n() != n) throw MalformedInput("wedge_coefficient: dimension mismatch");
    if (power < 0) throw MalformedInput("wedge_coefficient: negative power");
    total += power;
  }
  if (total != n) throw MalformedInput("wedge_coefficient: powers must sum to n");
  ExteriorForm acc = ExteriorForm::scalar(2 * n, 1.0);
  for (const auto& [form, power] : factors) acc = acc.wedge(ExteriorForm::from_qform(form).power(power));
  return acc.top_coefficient();
}

inline cplx wedge_coefficient(std::initializer_list<std::pair<QForm2, int>> factors) {
  const std::vector<std::pair<QForm2, int>> v(factors);
  return wedge_coefficient(std::span<const std::pair<QForm2, int>>(v));
}

/// Pfaffian of a materialized (2n-2,0)-form: Pf((1/(n-1)!) *Phi).
inline cplx pfaffian_2n2(const ExteriorForm& phi) {
  const int n = phi.dim() / 2;
  const QForm2 dual = (phi.star() * (1.0 / factorial(n - 1))).to_qform();
  return pfaffian(dual);
}

}  // namespace qma
