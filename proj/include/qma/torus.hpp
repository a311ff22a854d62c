#pragma once

// Periodic sample grids on the flat torus R^{4n}/Z^{4n} with spectral
// differentiation. Coordinates t_0..t_{4n-1}; z^j = t_j + i t_{2n+j}.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qma/errors.hpp"
#include "qma/parallel.hpp"
#include "qma/qform.hpp"

namespace qma {

class TorusGrid {
 public:
  TorusGrid() = default;

  TorusGrid(int n, std::vector<int> sizes) : n_(n), sizes_(std::move(sizes)) {
    if (n < 1) throw MalformedInput("TorusGrid: n must be positive");
    if (static_cast<int>(sizes_.size()) != 4 * n) throw MalformedInput("TorusGrid: expected 4n sizes");
    total_ = 1;
    for (int d = 0; d < 4 * n; ++d) {
      const int s = sizes_[static_cast<std::size_t>(d)];
      if (s < 1) throw MalformedInput("TorusGrid: sizes must be positive");
      if (s > 1 && s % 2 != 0) throw MalformedInput("TorusGrid: active sizes must be even");
      if (s > 1) active_.push_back(d);
      total_ *= static_cast<std::size_t>(s);
    }
    strides_.assign(sizes_.size(), 1);
    for (int d = 4 * n - 2; d >= 0; --d)
      strides_[static_cast<std::size_t>(d)] = strides_[static_cast<std::size_t>(d) + 1] * static_cast<std::size_t>(sizes_[static_cast<std::size_t>(d) + 1]);
  }

  /// All dims of size 1 except the listed (dim, size) pairs.
  static TorusGrid with_active(int n, std::initializer_list<std::pair<int, int>> active) {
    std::vector<int> sizes(static_cast<std::size_t>(4 * n), 1);
    for (const auto& [d, s] : active) {
      if (d < 0 || d >= 4 * n) throw MalformedInput("TorusGrid: dim out of range");
      sizes[static_cast<std::size_t>(d)] = s;
    }
    return TorusGrid(n, std::move(sizes));
  }

  int n() const noexcept { return n_; }
  int real_dim() const noexcept { return 4 * n_; }
  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int size(int d) const { return sizes_[static_cast<std::size_t>(d)]; }
  std::size_t points() const noexcept { return total_; }
  const std::vector<int>& active() const noexcept { return active_; }
  bool is_active(int d) const { return size(d) > 1; }

  int index_along(std::size_t point, int d) const {
    return static_cast<int>((point / strides_[static_cast<std::size_t>(d)]) % static_cast<std::size_t>(size(d)));
  }
  double coordinate(std::size_t point, int d) const { return static_cast<double>(index_along(point, d)) / size(d); }

  std::vector<double> coordinates(std::size_t point) const {
    std::vector<double> t(sizes_.size());
    for (int d = 0; d < real_dim(); ++d) t[static_cast<std::size_t>(d)] = coordinate(point, d);
    return t;
  }

  /// Flat index of the point shifted by `step` samples along d (periodic).
  std::size_t shifted(std::size_t point, int d, int step) const {
    const int s = size(d);
    const int i = index_along(point, d);
    const int j = ((i + step) % s + s) % s;
    return point + (static_cast<std::size_t>(j) - static_cast<std::size_t>(i)) * strides_[static_cast<std::size_t>(d)];
  }

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) { return a.n_ == b.n_ && a.sizes_ == b.sizes_; }

 private:
  int n_ = 0;
  std::vector<int> sizes_;
  std::vector<int> active_;
  std::vector<std::size_t> strides_;
  std::size_t total_ = 0;
};

inline void require_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what) {
  if (!(a == b)) throw MalformedInput(std::string(what) + ": grid mismatch");
}

struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(TorusGrid g, double fill = 0.0) : grid(std::move(g)), values(grid.points(), fill) {}
  ScalarField(TorusGrid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (values.size() != grid.points()) throw MalformedInput("ScalarField: value count does not match grid");
  }

  /// Samples fn(t) where t holds all 4n coordinates of the point.
  static ScalarField sample(const TorusGrid& g, const std::function<double(std::span<const double>)>& fn) {
    ScalarField out(g);
    parallel_for(g.points(), [&](std::size_t p) { out.values[p] = fn(g.coordinates(p)); });
    return out;
  }

  std::size_t size() const noexcept { return values.size(); }
  double& operator[](std::size_t p) { return values[p]; }
  double operator[](std::size_t p) const { return values[p]; }

  ScalarField& operator+=(const ScalarField& o) {
    require_same_grid(grid, o.grid, "ScalarField");
    for (std::size_t p = 0; p < values.size(); ++p) values[p] += o.values[p];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    require_same_grid(grid, o.grid, "ScalarField");
    for (std::size_t p = 0; p < values.size(); ++p) values[p] -= o.values[p];
    return *this;
  }
  ScalarField& operator*=(double s) {
    for (auto& v : values) v *= s;
    return *this;
  }
  ScalarField& operator+=(double c) {
    for (auto& v : values) v += c;
    return *this;
  }
  friend ScalarField operator+(ScalarField l, const ScalarField& r) { return l += r; }
  friend ScalarField operator-(ScalarField l, const ScalarField& r) { return l -= r; }
  friend ScalarField operator*(double s, ScalarField f) { return f *= s; }
  friend ScalarField operator*(ScalarField f, double s) { return f *= s; }
  friend ScalarField operator+(ScalarField f, double c) { return f += c; }
  friend ScalarField operator-(ScalarField f, double c) { return f += -c; }
};

struct ComplexField {
  TorusGrid grid;
  std::vector<cplx> values;
};

struct Form2Field {
  TorusGrid grid;
  std::vector<QForm2> values;

  Form2Field() = default;
  Form2Field(TorusGrid g, const QForm2& fill) : grid(std::move(g)), values(grid.points(), fill) {
    if (fill.n() != grid.n()) throw MalformedInput("Form2Field: form dimension does not match grid");
  }
  static Form2Field constant(const TorusGrid& g, const QForm2& value) { return Form2Field(g, value); }

  std::size_t size() const noexcept { return values.size(); }
  const QForm2& operator[](std::size_t p) const { return values[p]; }
  QForm2& operator[](std::size_t p) { return values[p]; }
};

/// Per-point 2n x 2n complex matrices.
struct MatrixField {
  TorusGrid grid;
  std::vector<Eigen::MatrixXcd> values;
};

inline double mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return f.values.empty() ? 0.0 : s / static_cast<double>(f.values.size());
}

/// Integral over the unit-volume torus by the trapezoid (sample-mean) rule.
inline double integrate(const ScalarField& f) { return mean(f); }

inline double sup(const ScalarField& f) { return *std::max_element(f.values.begin(), f.values.end()); }
inline double inf(const ScalarField& f) { return *std::min_element(f.values.begin(), f.values.end()); }

inline double sup_norm(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

inline ScalarField remove_mean(ScalarField f) { return f - mean(f); }

// ---------------------------------------------------------------------------
// Spectral engine

/// FFT over the active dims of one grid shape. Size-1 dims do not change the
/// row-major layout, so the active dims alone describe the transform.
class Spectral {
 public:
  explicit Spectral(const TorusGrid& grid) : grid_(grid) {
    const std::size_t np = grid.points();
    for (int d : grid.active()) {
      const int s = grid.size(d);
      std::vector<double> k(np);
      std::vector<char> nyq(np);
      for (std::size_t p = 0; p < np; ++p) {
        const int i = grid.index_along(p, d);
        k[p] = (i <= s / 2) ? i : i - s;
        nyq[p] = (2 * i == s);
      }
      wave_.push_back(std::move(k));
      nyquist_.push_back(std::move(nyq));
      dims_.push_back(s);
    }
    if (!dims_.empty()) {
      std::vector<cplx> scratch(np);
      auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
      std::lock_guard<std::mutex> lock(planner_mutex());
      const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
      forward_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), buf, buf, FFTW_FORWARD, flags);
      backward_ = fftw_plan_dft(static_cast<int>(dims_.size()), dims_.data(), buf, buf, FFTW_BACKWARD, flags);
      if (forward_ == nullptr || backward_ == nullptr) throw Error("Spectral: FFT planning failed");
    }
  }

  ~Spectral() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (forward_ != nullptr) fftw_destroy_plan(forward_);
    if (backward_ != nullptr) fftw_destroy_plan(backward_);
  }

  Spectral(const Spectral&) = delete;
  Spectral& operator=(const Spectral&) = delete;

  const TorusGrid& grid() const noexcept { return grid_; }

  std::vector<cplx> forward(const std::vector<double>& values) const {
    std::vector<cplx> out(values.begin(), values.end());
    if (forward_ != nullptr) fftw_execute_dft(forward_, as_fftw(out), as_fftw(out));
    return out;
  }

  /// Inverse transform of a spectrum known to come from a real field. The
  /// imaginary part must be round-off; it is dropped.
  std::vector<double> inverse_real(std::vector<cplx> spectrum, const char* what) const {
    if (backward_ != nullptr) fftw_execute_dft(backward_, as_fftw(spectrum), as_fftw(spectrum));
    const double scale = 1.0 / static_cast<double>(spectrum.size());
    std::vector<double> out(spectrum.size());
    double max_re = 0.0;
    double max_im = 0.0;
    for (std::size_t p = 0; p < spectrum.size(); ++p) {
      out[p] = spectrum[p].real() * scale;
      max_re = std::max(max_re, std::abs(out[p]));
      max_im = std::max(max_im, std::abs(spectrum[p].imag() * scale));
    }
    if (max_im > kImagTolerance * std::max(1.0, max_re))
      throw Error(std::string(what) + ": inverse transform is not real (imaginary part " + std::to_string(max_im) + ")");
    return out;
  }

  /// Symbol of d/dt_d at point p of the spectral array. Zero on the Nyquist
  /// plane of d so that odd derivatives stay real.
  cplx first_symbol(int d, std::size_t p) const {
    const int a = slot(d);
    if (a < 0 || nyquist_[static_cast<std::size_t>(a)][p]) return {};
    return cplx(0.0, 2.0 * std::numbers::pi * wave_[static_cast<std::size_t>(a)][p]);
  }

  /// Symbol of d^2/dt_d dt_e. Pure second derivatives keep the exact Nyquist
  /// symbol; mixed ones drop it.
  cplx second_symbol(int d, int e, std::size_t p) const {
    if (d == e) {
      const int a = slot(d);
      if (a < 0) return {};
      const double w = 2.0 * std::numbers::pi * wave_[static_cast<std::size_t>(a)][p];
      return -w * w;
    }
    return first_symbol(d, p) * first_symbol(e, p);
  }

  /// Sum over dims of k_d^2 at point p.
  double wave_norm2(std::size_t p) const {
    double s = 0.0;
    for (const auto& k : wave_) s += k[p] * k[p];
    return s;
  }

  static constexpr double kImagTolerance = 1e-12;

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  static fftw_complex* as_fftw(std::vector<cplx>& v) { return reinterpret_cast<fftw_complex*>(v.data()); }

  int slot(int d) const {
    const auto& act = grid_.active();
    const auto it = std::find(act.begin(), act.end(), d);
    return it == act.end() ? -1 : static_cast<int>(it - act.begin());
  }

  TorusGrid grid_;
  std::vector<int> dims_;
  std::vector<std::vector<double>> wave_;
  std::vector<std::vector<char>> nyquist_;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// Shared engine per grid shape; planning happens once.
inline std::shared_ptr<const Spectral> spectral_for(const TorusGrid& grid) {
  static std::mutex m;
  static std::map<std::vector<int>, std::shared_ptr<const Spectral>> cache;
  std::lock_guard<std::mutex> lock(m);
  auto& slot = cache[grid.sizes()];
  if (!slot) slot = std::make_shared<const Spectral>(grid);
  return slot;
}

namespace detail {

template <class Symbol>
std::vector<double> apply_symbol(const Spectral& sp, const std::vector<cplx>& spectrum, Symbol&& symbol,
                                 const char* what) {
  std::vector<cplx> s(spectrum.size());
  for (std::size_t p = 0; p < s.size(); ++p) s[p] = spectrum[p] * symbol(p);
  return sp.inverse_real(std::move(s), what);
}

inline void check_real_dim(const TorusGrid& g, int d) {
  if (d < 0 || d >= g.real_dim()) throw MalformedInput("derivative: real dimension out of range");
}

inline void check_complex_index(const TorusGrid& g, int a) {
  if (a < 0 || a >= 2 * g.n()) throw MalformedInput("partial_z: index out of range");
}

}  // namespace detail

/// d u / d t_d.
inline ScalarField partial_t(const ScalarField& u, int d) {
  detail::check_real_dim(u.grid, d);
  if (!u.grid.is_active(d)) return ScalarField(u.grid);
  const auto sp = spectral_for(u.grid);
  const auto spec = sp->forward(u.values);
  return {u.grid, detail::apply_symbol(*sp, spec, [&](std::size_t p) { return sp->first_symbol(d, p); }, "partial_t")};
}

/// d^2 u / d t_d d t_e.
inline ScalarField partial_tt(const ScalarField& u, int d, int e) {
  detail::check_real_dim(u.grid, d);
  detail::check_real_dim(u.grid, e);
  if (!u.grid.is_active(d) || !u.grid.is_active(e)) return ScalarField(u.grid);
  const auto sp = spectral_for(u.grid);
  const auto spec = sp->forward(u.values);
  return {u.grid,
          detail::apply_symbol(*sp, spec, [&](std::size_t p) { return sp->second_symbol(d, e, p); }, "partial_tt")};
}

/// d u / d z^a = (d/dt_a - i d/dt_{2n+a}) / 2.
inline ComplexField partial_z(const ScalarField& u, int a) {
  detail::check_complex_index(u.grid, a);
  const int m = 2 * u.grid.n();
  const ScalarField x = partial_t(u, a);
  const ScalarField y = partial_t(u, m + a);
  ComplexField out{u.grid, std::vector<cplx>(u.size())};
  for (std::size_t p = 0; p < u.size(); ++p) out.values[p] = 0.5 * cplx(x[p], -y[p]);
  return out;
}

/// d u / d zbar^a = (d/dt_a + i d/dt_{2n+a}) / 2.
inline ComplexField partial_zbar(const ScalarField& u, int a) {
  ComplexField out = partial_z(u, a);
  for (auto& v : out.values) v = std::conj(v);
  return out;
}

/// Real Hessian over the active dims: entry (i, j) is d^2u/dt_{act[i]} dt_{act[j]}.
struct RealHessian {
  std::vector<int> dims;
  std::vector<std::vector<double>> entries;  // row-major over (i, j), each a grid field

  const std::vector<double>* get(int d, int e) const {
    const auto i = std::find(dims.begin(), dims.end(), d);
    const auto j = std::find(dims.begin(), dims.end(), e);
    if (i == dims.end() || j == dims.end()) return nullptr;
    return &entries[static_cast<std::size_t>((i - dims.begin()) * static_cast<std::ptrdiff_t>(dims.size()) + (j - dims.begin()))];
  }
};

inline RealHessian real_hessian(const ScalarField& u) {
  RealHessian h;
  h.dims = u.grid.active();
  const std::size_t r = h.dims.size();
  h.entries.assign(r * r, {});
  if (r == 0) return h;
  const auto sp = spectral_for(u.grid);
  const auto spec = sp->forward(u.values);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = i; j < r; ++j) {
      const int d = h.dims[i];
      const int e = h.dims[j];
      h.entries[i * r + j] =
          detail::apply_symbol(*sp, spec, [&](std::size_t p) { return sp->second_symbol(d, e, p); }, "real_hessian");
      if (j != i) h.entries[j * r + i] = h.entries[i * r + j];
    }
  return h;
}

/// u_{a bbar} = d^2 u / dz^a dzbar^b at every point; Hermitian.
inline MatrixField mixed_hessian(const ScalarField& u) {
  const int n = u.grid.n();
  const int m = 2 * n;
  const RealHessian h = real_hessian(u);
  MatrixField out{u.grid, std::vector<Eigen::MatrixXcd>(u.size(), Eigen::MatrixXcd::Zero(m, m))};
  auto entry = [&](int d, int e, std::size_t p) {
    const auto* f = h.get(d, e);
    return f == nullptr ? 0.0 : (*f)[p];
  };
  parallel_for(u.size(), [&](std::size_t p) {
    auto& mat = out.values[p];
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) {
        const double re = entry(a, b, p) + entry(m + a, m + b, p);
        const double im = entry(a, m + b, p) - entry(m + a, b, p);
        mat(a, b) = 0.25 * cplx(re, im);
      }
  });
  return out;
}

/// ddbar_J-form of a pointwise Hessian u_{a bbar}. With canary set, one sign of
/// the J action is flipped (J^{-1} dzbar^{2j+1} = +dz^{2j}); this breaks both
/// S_1 = Laplacian/2 and J-reality and exists only to exercise the checks.
inline QForm2 ddju_from_hessian(const Eigen::MatrixXcd& h, bool canary = false) {
  const int m = static_cast<int>(h.rows());
  const int n = m / 2;
  // Coefficients c_{kl} of sum_{k,l} c_{kl} dz^k ^ dz^l.
  Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(m, m);
  const double odd_sign = canary ? 1.0 : -1.0;
  for (int k = 0; k < m; ++k)
    for (int j = 0; j < n; ++j) {
      c(k, 2 * j + 1) += h(k, 2 * j);
      c(k, 2 * j) += odd_sign * h(k, 2 * j + 1);
    }
  return QForm2::mirrored(c - c.transpose());
}

inline Form2Field ddju(const ScalarField& u, bool canary = false) {
  const MatrixField h = mixed_hessian(u);
  Form2Field out(u.grid, QForm2(u.grid.n()));
  parallel_for(u.size(), [&](std::size_t p) { out.values[p] = ddju_from_hessian(h.values[p], canary); });
  return out;
}

/// Chern Laplacian of the flat hyperhermitian metric: half the Euclidean
/// Laplacian in t, so that S_1(ddbar_J u) = laplacian(u) / 2.
inline ScalarField laplacian(const ScalarField& u) {
  const auto sp = spectral_for(u.grid);
  const auto spec = sp->forward(u.values);
  const double c = -2.0 * std::numbers::pi * std::numbers::pi;
  return {u.grid, detail::apply_symbol(*sp, spec, [&](std::size_t p) { return cplx(c * sp->wave_norm2(p)); }, "laplacian")};
}

/// Mean-zero solution w of laplacian(w) / 2 = f - mean(f).
inline ScalarField inverse_half_laplacian(const ScalarField& f) {
  const auto sp = spectral_for(f.grid);
  const auto spec = sp->forward(f.values);
  const double c = -std::numbers::pi * std::numbers::pi;
  return {f.grid, detail::apply_symbol(
                      *sp, spec,
                      [&](std::size_t p) {
                        const double k2 = sp->wave_norm2(p);
                        return k2 == 0.0 ? cplx{} : cplx(1.0 / (c * k2));
                      },
                      "inverse_half_laplacian")};
}

/// |du|_g^2 with g the flat metric sum dt_d^2.
inline ScalarField gradient_norm2(const ScalarField& u) {
  ScalarField out(u.grid);
  for (int d : u.grid.active()) {
    const ScalarField g = partial_t(u, d);
    for (std::size_t p = 0; p < u.size(); ++p) out[p] += g[p] * g[p];
  }
  return out;
}

/// du ^ d_J u as a (2,0)-form field, where d_J u = J^{-1} dbar u.
inline Form2Field gradient_wedge(const ScalarField& u) {
  const int m = 2 * u.grid.n();
  std::vector<ComplexField> dz;
  for (int a = 0; a < m; ++a) dz.push_back(partial_z(u, a));
  Form2Field out(u.grid, QForm2(u.grid.n()));
  parallel_for(u.size(), [&](std::size_t p) {
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(m, m);
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < m / 2; ++j) {
        c(k, 2 * j + 1) += dz[k].values[p] * std::conj(dz[2 * j].values[p]);
        c(k, 2 * j) -= dz[k].values[p] * std::conj(dz[2 * j + 1].values[p]);
      }
    out.values[p] = QForm2::mirrored(c - c.transpose());
  });
  return out;
}

inline ScalarField pointwise(const Form2Field& f, const std::function<double(const QForm2&)>& fn) {
  ScalarField out(f.grid);
  parallel_for(f.size(), [&](std::size_t p) { out.values[p] = fn(f.values[p]); });
  return out;
}

}  // namespace qma
