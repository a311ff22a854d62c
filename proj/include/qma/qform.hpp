#pragma once

// Pointwise quaternionic exterior algebra in the flat frame.
//
// Conventions (fixed throughout the library):
//   * A (2,0)-form is alpha = sum_{i<j} a_ij dz^i ^ dz^j with a 2n x 2n complex
//     antisymmetric coefficient matrix a.
//   * J acts on (1,0)-forms by J dz^{2i} = -conj(dz^{2i+1}), J dz^{2i+1} = conj(dz^{2i}).
//     In matrix form the J-conjugate of a is  Om * conj(a) * Om^T, where Om is the
//     coefficient matrix of the standard form  Om = sum_i dz^{2i} ^ dz^{2i+1}.
//     J-real forms are the fixed points.
//   * alpha^n = n! Pf(a) dz^0 ^ ... ^ dz^{2n-1}  (matrix Pfaffian normalization).
//   * For J-real a the matrix Om^{-1} a is Hermitian and commutes with the
//     antilinear map v -> Om conj(v); its eigenvalues come in equal pairs and the
//     pair values are the quaternionic eigenvalues of alpha against Om.
//   * The star operator is antilinear: alpha ^ *beta = <alpha, beta> vol with
//     <alpha, beta> = sum_{i<j} a_ij conj(b_ij).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qma/errors.hpp"

namespace qma {

using cplx = std::complex<double>;

/// Relative tolerance for algebraic identities and input validation.
inline constexpr double kAlgebraicTolerance = 1e-10;
/// Relative gap below which two generalized eigenvalues are one quaternionic pair.
inline constexpr double kPairTolerance = 1e-8;
/// Minimum admissible positivity margin for operator evaluations.
inline constexpr double kConeTolerance = 1e-8;

inline double max_abs(const Eigen::MatrixXcd& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// Coefficient matrix of the standard form sum_i dz^{2i} ^ dz^{2i+1}.
inline Eigen::MatrixXcd standard_matrix(int n) {
  Eigen::MatrixXcd om = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    om(2 * i, 2 * i + 1) = 1.0;
    om(2 * i + 1, 2 * i) = -1.0;
  }
  return om;
}

/// Pointwise (2,0)-form. Antisymmetry is exact: the upper triangle is stored and
/// mirrored on construction.
class QForm2 {
 public:
  QForm2() = default;

  explicit QForm2(int n) : n_(n), a_(Eigen::MatrixXcd::Zero(2 * n, 2 * n)) {
    if (n < 1) throw MalformedInput("QForm2: quaternionic dimension must be >= 1");
  }

  /// Validates antisymmetry within tol (relative to the largest entry).
  static QForm2 from_matrix(const Eigen::MatrixXcd& a, double tol = kAlgebraicTolerance) {
    if (a.rows() != a.cols() || a.rows() < 2 || a.rows() % 2 != 0)
      throw MalformedInput("QForm2: coefficient matrix must be square of even size");
    const double scale = max_abs(a);
    const double defect = max_abs(a + a.transpose());
    if (defect > tol * std::max(scale, std::numeric_limits<double>::min()) && defect > 0.0)
      throw MalformedInput("QForm2: coefficient matrix is not antisymmetric (defect " +
                           std::to_string(defect) + ")");
    return mirrored(a);
  }

  /// Trusted construction from the upper triangle; the lower triangle is ignored.
  static QForm2 mirrored(const Eigen::MatrixXcd& a) {
    QForm2 q(static_cast<int>(a.rows() / 2));
    const auto dim = a.rows();
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = i + 1; j < dim; ++j) {
        q.a_(i, j) = a(i, j);
        q.a_(j, i) = -a(i, j);
      }
    return q;
  }

  static QForm2 standard(int n) { return mirrored(standard_matrix(n)); }

  /// sum_i mu_i dz^{2i} ^ dz^{2i+1}
  static QForm2 diagonal(std::span<const double> mu) {
    QForm2 q(static_cast<int>(mu.size()));
    for (std::size_t i = 0; i < mu.size(); ++i) q.set(2 * static_cast<int>(i), 2 * static_cast<int>(i) + 1, mu[i]);
    return q;
  }

  int n() const noexcept { return n_; }
  int dim() const noexcept { return 2 * n_; }
  const Eigen::MatrixXcd& matrix() const noexcept { return a_; }
  cplx operator()(int i, int j) const { return a_(i, j); }

  /// Sets a_ij and a_ji = -a_ij.
  void set(int i, int j, cplx v) {
    a_(i, j) = v;
    a_(j, i) = -v;
  }

  QForm2& operator+=(const QForm2& o) {
    check_same(o);
    a_ += o.a_;
    return *this;
  }
  QForm2& operator-=(const QForm2& o) {
    check_same(o);
    a_ -= o.a_;
    return *this;
  }
  QForm2& operator*=(double s) {
    a_ *= s;
    return *this;
  }
  friend QForm2 operator+(QForm2 l, const QForm2& r) { return l += r; }
  friend QForm2 operator-(QForm2 l, const QForm2& r) { return l -= r; }
  friend QForm2 operator*(double s, QForm2 q) { return q *= s; }
  friend QForm2 operator*(QForm2 q, double s) { return q *= s; }
  friend QForm2 operator-(QForm2 q) { return q *= -1.0; }

 private:
  void check_same(const QForm2& o) const {
    if (o.n_ != n_) throw MalformedInput("QForm2: dimension mismatch");
  }

  int n_ = 0;
  Eigen::MatrixXcd a_;
};

// ---------------------------------------------------------------------------
// J-reality

/// Om conj(a) Om^T; the identity on J-real coefficient matrices.
inline Eigen::MatrixXcd j_conjugate(const Eigen::MatrixXcd& a) {
  const auto n = static_cast<int>(a.rows() / 2);
  const Eigen::MatrixXcd om = standard_matrix(n);
  return om * a.conjugate() * om.transpose();
}

inline QForm2 j_conjugate(const QForm2& alpha) { return QForm2::mirrored(j_conjugate(alpha.matrix())); }

/// max |a - Jconj(a)| relative to max |a|; 0 for the zero form.
inline double j_reality_defect(const QForm2& alpha) {
  const double scale = max_abs(alpha.matrix());
  if (scale == 0.0) return 0.0;
  return max_abs(alpha.matrix() - j_conjugate(alpha.matrix())) / scale;
}

/// Real-linear projection onto J-real forms.
inline QForm2 project_j_real(const QForm2& alpha) {
  return QForm2::mirrored(0.5 * (alpha.matrix() + j_conjugate(alpha.matrix())));
}

/// Hermitian matrix Om^{-1} a (symmetrized against round-off).
inline Eigen::MatrixXcd hermitian_part(const QForm2& alpha) {
  const Eigen::MatrixXcd om_inv = -standard_matrix(alpha.n());
  const Eigen::MatrixXcd h = om_inv * alpha.matrix();
  return 0.5 * (h + h.adjoint());
}

/// Quaternionic structure v -> Om conj(v) on C^{2n}.
inline Eigen::VectorXcd quaternionic_partner(const Eigen::VectorXcd& v) {
  const auto dim = v.size();
  Eigen::VectorXcd w(dim);
  for (Eigen::Index i = 0; i + 1 < dim; i += 2) {
    w(i) = std::conj(v(i + 1));
    w(i + 1) = -std::conj(v(i));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Pfaffians

/// Pf = phase * exp(log_abs). A vanishing Pfaffian has log_abs = -inf, phase 0.
struct LogPfaffian {
  double log_abs = 0.0;
  cplx phase{1.0, 0.0};

  cplx value() const { return std::isinf(log_abs) && log_abs < 0 ? cplx{} : phase * std::exp(log_abs); }
};

/// Skew tridiagonalization with partial pivoting (Parlett-Reid). The input is
/// assumed antisymmetric.
inline LogPfaffian log_pfaffian_unchecked(Eigen::MatrixXcd a) {
  const Eigen::Index dim = a.rows();
  LogPfaffian r;
  if (dim % 2 != 0) return {-std::numeric_limits<double>::infinity(), cplx{}};
  for (Eigen::Index k = 0; k + 1 < dim; k += 2) {
    Eigen::Index offset = 0;
    a.col(k).tail(dim - k - 1).cwiseAbs().maxCoeff(&offset);
    const Eigen::Index kp = k + 1 + offset;
    if (kp != k + 1) {
      a.row(k + 1).swap(a.row(kp));
      a.col(k + 1).swap(a.col(kp));
      r.phase = -r.phase;
    }
    const cplx pivot = a(k, k + 1);
    if (pivot == cplx{}) return {-std::numeric_limits<double>::infinity(), cplx{}};
    const double mag = std::abs(pivot);
    r.log_abs += std::log(mag);
    r.phase *= pivot / mag;
    const Eigen::Index m = dim - k - 2;
    if (m > 0) {
      const Eigen::VectorXcd tau = a.row(k).tail(m).transpose() / pivot;
      const Eigen::VectorXcd col = a.col(k + 1).tail(m);
      a.bottomRightCorner(m, m) += tau * col.transpose() - col * tau.transpose();
    }
  }
  return r;
}

inline void require_antisymmetric(const Eigen::MatrixXcd& a, double tol = kAlgebraicTolerance) {
  if (a.rows() != a.cols()) throw MalformedInput("pfaffian: matrix must be square");
  const double scale = max_abs(a);
  const double defect = max_abs(a + a.transpose());
  if (defect > 0.0 && defect > tol * scale)
    throw MalformedInput("pfaffian: matrix is not antisymmetric (defect " + std::to_string(defect) + ")");
}

inline LogPfaffian log_pfaffian(const Eigen::MatrixXcd& a) {
  require_antisymmetric(a);
  return log_pfaffian_unchecked(a);
}

inline cplx pfaffian(const Eigen::MatrixXcd& a) { return log_pfaffian(a).value(); }
inline cplx pfaffian(const QForm2& alpha) { return log_pfaffian_unchecked(alpha.matrix()).value(); }

// ---------------------------------------------------------------------------
// Quaternionic spectrum

/// Quaternionic eigenvalues (ascending) and a frame P with
/// P^T a P = sum mu_i E_i and P^T ref P = Om, E_i the i-th standard block.
struct QSpectrum {
  std::vector<double> mu;
  Eigen::MatrixXcd basis;
};

namespace detail {

inline std::vector<double> collapse_pairs(const Eigen::VectorXd& evals) {
  const auto dim = evals.size();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) scale = std::max(scale, std::abs(evals(i)));
  scale = std::max(scale, std::numeric_limits<double>::min());
  std::vector<double> mu;
  mu.reserve(static_cast<std::size_t>(dim / 2));
  for (Eigen::Index k = 0; k + 1 < dim; k += 2) {
    const double gap = std::abs(evals(k + 1) - evals(k));
    if (gap > kPairTolerance * scale)
      throw JRealityError("q_spectrum: generalized eigenvalues do not pair (gap " + std::to_string(gap) + ")",
                          gap / scale);
    mu.push_back(0.5 * (evals(k) + evals(k + 1)));
  }
  return mu;
}

/// Re-pairs an orthonormal eigenbasis of a Hermitian matrix commuting with the
/// quaternionic structure into columns (Om conj v, v) per eigenvalue pair.
inline Eigen::MatrixXcd pair_eigenbasis(const Eigen::VectorXd& evals, const Eigen::MatrixXcd& vecs) {
  const auto dim = evals.size();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) scale = std::max(scale, std::abs(evals(i)));
  scale = std::max(scale, 1e-300);
  Eigen::MatrixXcd out(dim, dim);
  Eigen::Index filled = 0;
  Eigen::Index start = 0;
  while (start < dim) {
    Eigen::Index end = start + 1;
    while (end < dim && std::abs(evals(end) - evals(end - 1)) <= kPairTolerance * scale) ++end;
    std::vector<Eigen::VectorXcd> pool;
    for (Eigen::Index c = start; c < end; ++c) pool.emplace_back(vecs.col(c));
    std::size_t pairs = 0;
    while (!pool.empty()) {
      Eigen::VectorXcd v = pool.front();
      pool.erase(pool.begin());
      const double nv = v.norm();
      if (nv < 1e-6) continue;
      v /= nv;
      const Eigen::VectorXcd w = quaternionic_partner(v);
      if (filled + 2 > dim)
        throw JRealityError("q_spectrum: eigenspace is not quaternionic", 1.0);
      out.col(filled++) = w;
      out.col(filled++) = v;
      ++pairs;
      std::vector<Eigen::VectorXcd> next;
      for (auto x : pool) {
        x -= v * v.dot(x);
        x -= w * w.dot(x);
        for (const auto& y : next) x -= y * y.dot(x);
        const double nx = x.norm();
        if (nx > 1e-6) next.emplace_back(x / nx);
      }
      pool = std::move(next);
    }
    if (2 * static_cast<Eigen::Index>(pairs) != end - start)
      throw JRealityError("q_spectrum: eigenspace of odd quaternionic dimension", 1.0);
    start = end;
  }
  return out;
}

}  // namespace detail

/// Quaternionic eigenvalues of alpha against the standard form, no frame.
inline std::vector<double> q_eigenvalues(const QForm2& alpha) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(alpha), Eigen::EigenvaluesOnly);
  return detail::collapse_pairs(es.eigenvalues());
}

/// Smallest eigenvalue of Om^{-1} a; the positivity margin used in hot loops.
inline double min_q_eigenvalue(const QForm2& alpha) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hermitian_part(alpha), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline QSpectrum q_spectrum(const QForm2& alpha, const QForm2& reference) {
  if (alpha.n() != reference.n()) throw MalformedInput("q_spectrum: dimension mismatch");
  for (const QForm2* f : {&alpha, &reference}) {
    const double defect = j_reality_defect(*f);
    if (defect > kAlgebraicTolerance)
      throw JRealityError("q_spectrum: input is not J-real (defect " + std::to_string(defect) + ")", defect);
  }
  const Eigen::MatrixXcd h_ref = hermitian_part(reference);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ref_es(h_ref);
  const Eigen::VectorXd nu = ref_es.eigenvalues();
  if (!(nu(0) > 0.0)) throw ConeError("q_spectrum: reference form is not strictly positive", 0, nu(0));
  const Eigen::MatrixXcd inv_sqrt =
      ref_es.eigenvectors() * nu.cwiseSqrt().cwiseInverse().asDiagonal() * ref_es.eigenvectors().adjoint();
  Eigen::MatrixXcd c = inv_sqrt * hermitian_part(alpha) * inv_sqrt;
  c = 0.5 * (c + c.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(c);
  QSpectrum out;
  out.mu = detail::collapse_pairs(es.eigenvalues());
  out.basis = inv_sqrt * detail::pair_eigenbasis(es.eigenvalues(), es.eigenvectors());
  return out;
}

inline QSpectrum q_spectrum(const QForm2& alpha) { return q_spectrum(alpha, QForm2::standard(alpha.n())); }

/// e_m(values); e_0 = 1.
inline double elementary_symmetric(std::span<const double> values, int m) {
  if (m < 0 || m > static_cast<int>(values.size())) return 0.0;
  std::vector<double> e(static_cast<std::size_t>(m) + 1, 0.0);
  e[0] = 1.0;
  for (double x : values)
    for (int k = m; k >= 1; --k) e[static_cast<std::size_t>(k)] += x * e[static_cast<std::size_t>(k) - 1];
  return e[static_cast<std::size_t>(m)];
}

/// S_1 = sum_i a_{2i,2i+1}; linear, exact for any J-real input.
inline double s1(const QForm2& alpha) {
  double acc = 0.0;
  for (int i = 0; i < alpha.n(); ++i) acc += alpha(2 * i, 2 * i + 1).real();
  return acc;
}

/// S_m(alpha) = C(n,m) alpha^m ^ Om^{n-m} / Om^n = e_m of the quaternionic eigenvalues.
inline double s_m(const QForm2& alpha, int m) {
  if (m < 0 || m > alpha.n()) throw MalformedInput("s_m: order must lie in [0, n]");
  if (m == 0) return 1.0;
  const auto mu = q_spectrum(alpha).mu;
  return elementary_symmetric(mu, m);
}

struct Positivity {
  bool positive = false;
  double margin = 0.0;
};

inline Positivity is_positive(const QForm2& alpha) {
  const auto mu = q_spectrum(alpha).mu;
  const double margin = *std::min_element(mu.begin(), mu.end());
  return {margin > 0.0, margin};
}

// ---------------------------------------------------------------------------
// (2n-2,0)-forms by their star duals

/// A (2n-2,0)-form Phi stored as sigma with Phi = (n-1)! * sigma, so that
/// Pf(Phi) = Pf(sigma).
class QForm2n2 {
 public:
  QForm2n2() = default;
  explicit QForm2n2(QForm2 sigma) : sigma_(std::move(sigma)) {}

  int n() const noexcept { return sigma_.n(); }
  const QForm2& sigma() const noexcept { return sigma_; }

  QForm2n2& operator+=(const QForm2n2& o) {
    sigma_ += o.sigma_;
    return *this;
  }
  friend QForm2n2 operator+(QForm2n2 l, const QForm2n2& r) { return l += r; }
  friend QForm2n2 operator-(QForm2n2 l, const QForm2n2& r) {
    l.sigma_ -= r.sigma_;
    return l;
  }
  friend QForm2n2 operator*(double s, QForm2n2 q) {
    q.sigma_ *= s;
    return q;
  }

 private:
  QForm2 sigma_;
};

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

/// *beta as a (2n-2,0)-form.
inline QForm2n2 star(const QForm2& beta) { return QForm2n2((1.0 / factorial(beta.n() - 1)) * beta); }

/// (1/(n-1)!) *Phi.
inline QForm2 unstar(const QForm2n2& phi) { return phi.sigma(); }

inline cplx pfaffian(const QForm2n2& phi) { return pfaffian(phi.sigma()); }

/// alpha^{n-1}. Its dual is assembled from complementary sub-Pfaffians:
/// alpha^{n-1}/(n-1)! = sum_J Pf(a_J) dz^J over ordered (2n-2)-subsets J.
inline QForm2n2 power_n1(const QForm2& alpha) {
  const int dim = alpha.dim();
  QForm2 sigma(alpha.n());
  std::vector<int> keep;
  keep.reserve(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k)
    for (int l = k + 1; l < dim; ++l) {
      keep.clear();
      for (int i = 0; i < dim; ++i)
        if (i != k && i != l) keep.push_back(i);
      const auto m = static_cast<Eigen::Index>(keep.size());
      Eigen::MatrixXcd sub(m, m);
      for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = alpha(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
      const double sign = ((k + l + 1) % 2 == 0) ? 1.0 : -1.0;
      sigma.set(k, l, sign * std::conj(log_pfaffian_unchecked(sub).value()));
    }
  return QForm2n2(std::move(sigma));
}

/// The positive phi with phi^{n-1} = Phi. Requires n >= 2.
inline QForm2 positive_root(const QForm2n2& phi) {
  const int n = phi.n();
  if (n < 2) throw MalformedInput("positive_root: requires n >= 2");
  const QSpectrum spec = q_spectrum(phi.sigma());
  const double margin = spec.mu.front();
  if (!(margin > 0.0)) throw ConeError("positive_root: (2n-2,0)-form is not strictly positive", 0, margin);
  double log_prod = 0.0;
  for (double m : spec.mu) log_prod += std::log(m);
  const double root = std::exp(log_prod / (n - 1));
  std::vector<double> lambda(spec.mu.size());
  for (std::size_t i = 0; i < lambda.size(); ++i) lambda[i] = root / spec.mu[i];
  // The frame is unitary and preserves Om, so P^{-1} = P^H.
  const Eigen::MatrixXcd d = QForm2::diagonal(lambda).matrix();
  const Eigen::MatrixXcd p = spec.basis;
  return QForm2::mirrored(p.conjugate() * d * p.adjoint());
}

/// sum omega^{ik} d_{kl} omega^{lj} d'_{ji} with d' the J-conjugate partner of d
/// (the z-bar derivative when d is a z derivative of a J-real field).
inline double quadratic_trace(const QForm2& omega_t, const Eigen::MatrixXcd& d) {
  if (d.rows() != omega_t.dim() || d.cols() != omega_t.dim())
    throw MalformedInput("quadratic_trace: derivative matrix has the wrong shape");
  require_antisymmetric(d);
  const double margin = min_q_eigenvalue(omega_t);
  if (!(margin > 0.0)) throw ConeError("quadratic_trace: form is not strictly positive", 0, margin);
  const Eigen::MatrixXcd w = omega_t.matrix().inverse();
  return (w * d * w * j_conjugate(d)).trace().real();
}

}  // namespace qma
