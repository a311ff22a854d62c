#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "qma/exterior.hpp"
#include "qma/field_io.hpp"
#include "trig_poly.hpp"

using namespace qma;
using qma::testing::random_trig;
using qma::testing::TrigPoly;

namespace {

constexpr double pi = std::numbers::pi;

TorusGrid grid_n2(int s0, int s1, int s2 = 1, int s3 = 1) {
  return TorusGrid::with_active(2, {{0, s0}, {1, s1}, {4, s2}, {5, s3}});
}

double max_diff(const ScalarField& a, const ScalarField& b) { return sup_norm(a - b); }

// Fourth-order centered difference of d^2/dt_d dt_e on the grid.
double fd_second(const ScalarField& u, std::size_t p, int d, int e) {
  const TorusGrid& g = u.grid;
  if (d == e) {
    const double h = 1.0 / g.size(d);
    auto at = [&](int s) { return u[g.shifted(p, d, s)]; };
    return (-at(2) + 16 * at(1) - 30 * at(0) + 16 * at(-1) - at(-2)) / (12 * h * h);
  }
  const double hd = 1.0 / g.size(d);
  const double he = 1.0 / g.size(e);
  auto at = [&](int a, int b) { return u[g.shifted(g.shifted(p, d, a), e, b)]; };
  const int w[4] = {1, -8, 8, -1};
  const int s[4] = {-2, -1, 1, 2};
  double v = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) v += w[i] * w[j] * at(s[i], s[j]);
  return v / (144 * hd * he);
}

}  // namespace

TEST(TorusGrid, RejectsOddActiveSizesAndWrongCounts) {
  EXPECT_THROW(TorusGrid(2, {3, 1, 1, 1, 1, 1, 1, 1}), MalformedInput);
  EXPECT_THROW(TorusGrid(2, {4, 4}), MalformedInput);
  EXPECT_THROW(TorusGrid(2, {0, 1, 1, 1, 1, 1, 1, 1}), MalformedInput);
  const TorusGrid g = grid_n2(4, 6);
  EXPECT_EQ(g.points(), 24u);
  EXPECT_EQ(g.active(), (std::vector<int>{0, 1}));
}

TEST(TorusGrid, CoordinatesAreRowMajor) {
  const TorusGrid g = grid_n2(4, 6);
  EXPECT_DOUBLE_EQ(g.coordinate(7, 0), 1.0 / 4);
  EXPECT_DOUBLE_EQ(g.coordinate(7, 1), 1.0 / 6);
  EXPECT_EQ(g.shifted(7, 1, -2), 11u);
}

TEST(PartialZ, SineAlongRealAndImaginaryDirections) {
  const TorusGrid g = grid_n2(16, 4, 8);
  const auto u = ScalarField::sample(g, [](auto t) { return std::sin(2 * pi * t[0]); });
  const auto v = ScalarField::sample(g, [](auto t) { return std::sin(2 * pi * t[4]); });
  const ComplexField du = partial_z(u, 0);
  const ComplexField dv = partial_z(v, 0);
  for (std::size_t p = 0; p < g.points(); ++p) {
    EXPECT_NEAR(std::abs(du.values[p] - cplx(pi * std::cos(2 * pi * g.coordinate(p, 0)))), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(dv.values[p] - cplx(0, -pi * std::cos(2 * pi * g.coordinate(p, 4)))), 0.0, 1e-12);
  }
  const ComplexField dvbar = partial_zbar(v, 0);
  EXPECT_NEAR(std::abs(dvbar.values[3] - std::conj(dv.values[3])), 0.0, 1e-15);
}

TEST(PartialZ, ConstantFieldAndIndexRange) {
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  const ScalarField c(g, 3.7);
  for (int a = 0; a < 4; ++a)
    for (const auto& v : partial_z(c, a).values) EXPECT_LT(std::abs(v), 1e-13);
  EXPECT_THROW(partial_z(c, 4), MalformedInput);
  EXPECT_THROW(partial_z(c, -1), MalformedInput);
}

TEST(PartialZ, InactiveDimensionGivesZero) {
  const TorusGrid g = grid_n2(8, 1);
  const ScalarField u = ScalarField::sample(g, [](auto t) { return std::cos(2 * pi * t[0]); });
  for (double v : partial_t(u, 1).values) EXPECT_EQ(v, 0.0);
}

TEST(Spectral, ExactSymbolOnEveryResolvedMode) {
  const TorusGrid g = grid_n2(16, 1);
  for (int k = 1; k < 8; ++k) {
    const auto u = ScalarField::sample(g, [k](auto t) { return std::sin(2 * pi * k * t[0]); });
    const auto want = ScalarField::sample(g, [k](auto t) { return 2 * pi * k * std::cos(2 * pi * k * t[0]); });
    EXPECT_LT(max_diff(partial_t(u, 0), want), 1e-11 * k);
    const auto want2 = ScalarField::sample(g, [k](auto t) { return -4 * pi * pi * k * k * std::sin(2 * pi * k * t[0]); });
    EXPECT_LT(max_diff(partial_tt(u, 0, 0), want2), 1e-10 * k * k);
  }
}

TEST(Spectral, DerivativesAreLinear) {
  Rng rng(3);
  const TorusGrid g = grid_n2(8, 8, 8);
  const ScalarField a = random_trig(rng, g, 6, 1.0).sample(g);
  const ScalarField b = random_trig(rng, g, 6, 1.0).sample(g);
  EXPECT_LT(max_diff(partial_t(a + 2.5 * b, 4), partial_t(a, 4) + 2.5 * partial_t(b, 4)), 1e-12);
  EXPECT_LT(max_diff(laplacian(a + 2.5 * b), laplacian(a) + 2.5 * laplacian(b)), 1e-11);
}

TEST(MixedHessian, CosineAlongT0) {
  const TorusGrid g = grid_n2(16, 8);
  const auto u = ScalarField::sample(g, [](auto t) { return std::cos(2 * pi * t[0]); });
  const MatrixField h = mixed_hessian(u);
  for (std::size_t p = 0; p < g.points(); ++p) {
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(4, 4);
    want(0, 0) = -pi * pi * std::cos(2 * pi * g.coordinate(p, 0));
    EXPECT_LT(max_abs(h.values[p] - want), 1e-12);
  }
}

TEST(MixedHessian, HermitianAndMatchesAnalyticOracle) {
  Rng rng(11);
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  for (int c = 0; c < 5; ++c) {
    const TrigPoly poly = random_trig(rng, g, 8, 1.0);
    const MatrixField h = mixed_hessian(poly.sample(g));
    for (std::size_t p = 0; p < g.points(); p += 7) {
      EXPECT_LT(max_abs(h.values[p] - h.values[p].adjoint()), 1e-12);
      const auto t = g.coordinates(p);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const cplx want = 0.25 * cplx(poly.d2(t, a, b) + poly.d2(t, 4 + a, 4 + b),
                                        poly.d2(t, a, 4 + b) - poly.d2(t, 4 + a, b));
          EXPECT_LT(std::abs(h.values[p](a, b) - want), 1e-10);
        }
    }
  }
}

TEST(MixedHessian, FourthOrderFiniteDifferenceConvergence) {
  const auto fn = [](std::span<const double> t) {
    return std::exp(0.3 * std::sin(2 * pi * t[0])) * std::cos(2 * pi * (t[0] + t[4]));
  };
  double errs[2];
  const int sizes[2] = {16, 32};
  for (int r = 0; r < 2; ++r) {
    const TorusGrid g = grid_n2(sizes[r], 1, sizes[r]);
    const ScalarField u = ScalarField::sample(g, fn);
    const RealHessian h = real_hessian(u);
    double err = 0.0;
    for (std::size_t p = 0; p < g.points(); ++p)
      for (int d : {0, 4})
        for (int e : {0, 4}) err = std::max(err, std::abs((*h.get(d, e))[p] - fd_second(u, p, d, e)));
    errs[r] = err;
  }
  // The spectral values are exact to round-off here; the difference is the FD error.
  EXPECT_GT(errs[0] / errs[1], 12.0);
  EXPECT_LT(errs[0] / errs[1], 20.0);
}

TEST(Ddju, ConstantGivesZero) {
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  for (const auto& q : ddju(ScalarField(g, -2.0)).values) EXPECT_LT(max_abs(q.matrix()), 1e-12);
}

TEST(Ddju, SineAlongT0HasOnlyTheFirstBlock) {
  const TorusGrid g = grid_n2(16, 4, 4);
  const auto u = ScalarField::sample(g, [](auto t) { return std::sin(2 * pi * t[0]); });
  const Form2Field f = ddju(u);
  for (std::size_t p = 0; p < g.points(); ++p) {
    // u_{0 0bar} = -pi^2 sin; the (0,1) formula picks up u_{0 0bar} + u_{1 1bar}.
    Eigen::MatrixXcd want = Eigen::MatrixXcd::Zero(4, 4);
    want(0, 1) = -pi * pi * std::sin(2 * pi * g.coordinate(p, 0));
    want(1, 0) = -want(0, 1);
    EXPECT_LT(max_abs(f[p].matrix() - want), 1e-12);
  }
}

TEST(Ddju, ComponentFormulasFromAnalyticHessian) {
  Rng rng(5);
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  const TrigPoly poly = random_trig(rng, g, 8, 1.0);
  const Form2Field f = ddju(poly.sample(g));
  for (std::size_t p = 0; p < g.points(); p += 13) {
    const auto t = g.coordinates(p);
    auto h = [&](int a, int b) {
      return 0.25 * cplx(poly.d2(t, a, b) + poly.d2(t, 4 + a, 4 + b), poly.d2(t, a, 4 + b) - poly.d2(t, 4 + a, b));
    };
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        EXPECT_LT(std::abs(f[p](2 * i, 2 * j + 1) - (h(2 * i, 2 * j) + h(2 * j + 1, 2 * i + 1))), 1e-10);
        EXPECT_LT(std::abs(f[p](2 * i, 2 * j) - (h(2 * j, 2 * i + 1) - h(2 * i, 2 * j + 1))), 1e-10);
        EXPECT_LT(std::abs(f[p](2 * i + 1, 2 * j + 1) - (h(2 * i + 1, 2 * j) - h(2 * j + 1, 2 * i))), 1e-10);
      }
  }
}

TEST(Ddju, JRealAtEveryPointAndS1IsHalfLaplacian) {
  Rng rng(21);
  for (int n : {2, 3}) {
    const TorusGrid g = n == 2 ? TorusGrid::with_active(2, {{0, 6}, {1, 6}, {2, 6}, {3, 6}, {6, 4}})
                                : TorusGrid::with_active(3, {{0, 8}, {2, 8}, {7, 8}});
    for (int c = 0; c < 5; ++c) {
      const ScalarField u = random_trig(rng, g, 8, 1.0).sample(g);
      const Form2Field f = ddju(u);
      const ScalarField half_lap = 0.5 * laplacian(u);
      const double scale = std::max(1.0, sup_norm(half_lap));
      for (std::size_t p = 0; p < g.points(); ++p) {
        EXPECT_LT(j_reality_defect(f[p]), 1e-10);
        EXPECT_LT(std::abs(s1(f[p]) - half_lap[p]) / scale, 1e-10);
      }
    }
  }
}

TEST(Ddju, S1EqualsTraceOfMixedHessian) {
  Rng rng(4);
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  const ScalarField u = random_trig(rng, g, 6, 1.0).sample(g);
  const MatrixField h = mixed_hessian(u);
  const Form2Field f = ddju(u);
  for (std::size_t p = 0; p < g.points(); ++p) EXPECT_NEAR(s1(f[p]), h.values[p].trace().real(), 1e-10);
}

TEST(Ddju, CanaryBreaksBothChecks) {
  // Every z^a must vary, otherwise the blocks the canary touches vanish.
  const TorusGrid g = TorusGrid::with_active(2, {{0, 8}, {1, 8}, {2, 8}, {3, 8}});
  Rng rng(9);
  const ScalarField u = random_trig(rng, g, 8, 1.0).sample(g);
  const Form2Field f = ddju(u, true);
  const ScalarField half_lap = 0.5 * laplacian(u);
  double s1_err = 0.0;
  double defect = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    s1_err = std::max(s1_err, std::abs(s1(f[p]) - half_lap[p]));
    defect = std::max(defect, j_reality_defect(f[p]));
  }
  EXPECT_GT(s1_err, 1e-3);
  EXPECT_GT(defect, 1e-3);
}

TEST(Ddju, SmallAmplitudeStaysPositive) {
  Rng rng(31);
  const TorusGrid g = grid_n2(8, 8, 8, 8);
  // Per term with |k_d| <= 2: |u_{a bbar}| <= 16 pi^2 amp, ddju entries at most twice
  // that, and the 4x4 operator norm at most 4 times the largest entry.
  const int terms = 4;
  for (double amp : {1e-4, 1e-3}) {
    TrigPoly poly = random_trig(rng, g, terms, amp, 2);
    const Form2Field f = ddju(poly.sample(g));
    const double bound = terms * amp * 128 * pi * pi;
    for (std::size_t p = 0; p < g.points(); ++p) {
      const Positivity pos = is_positive(QForm2::standard(2) + f[p]);
      EXPECT_TRUE(pos.positive);
      EXPECT_GE(pos.margin, 1.0 - bound);
    }
  }
}

TEST(Laplacian, InverseHalfLaplacianRoundTrip) {
  Rng rng(2);
  const TorusGrid g = grid_n2(8, 16, 8);
  const ScalarField w = remove_mean(random_trig(rng, g, 8, 1.0, 4).sample(g));
  const ScalarField back = inverse_half_laplacian(0.5 * laplacian(w));
  EXPECT_LT(max_diff(back, w), 1e-12);
}

TEST(Laplacian, NyquistModeIsInvertible) {
  const TorusGrid g = grid_n2(8, 1);
  const auto u = ScalarField::sample(g, [](auto t) { return std::cos(2 * pi * 4 * t[0]); });
  EXPECT_LT(max_diff(0.5 * laplacian(u), -16 * pi * pi * u), 1e-9);
  EXPECT_LT(max_diff(inverse_half_laplacian(0.5 * laplacian(u)), u), 1e-12);
}

TEST(Integrate, ConstantsSinesAndExtremes) {
  const TorusGrid g = grid_n2(8, 4);
  EXPECT_NEAR(integrate(ScalarField(g, 2.5)), 2.5, 1e-15);
  const auto s = ScalarField::sample(g, [](auto t) { return std::sin(2 * pi * t[0]); });
  EXPECT_NEAR(integrate(s), 0.0, 1e-15);
  EXPECT_NEAR(sup(s), 1.0, 1e-15);
  EXPECT_NEAR(inf(s), -1.0, 1e-15);
  const auto c2 = ScalarField::sample(g, [](auto t) { return std::pow(std::cos(2 * pi * t[1]), 2); });
  EXPECT_NEAR(integrate(c2), 0.5, 1e-15);
}

TEST(GradientEnergy, WedgeIdentityMatchesGradientNorm) {
  Rng rng(17);
  for (int n : {2, 3}) {
    const TorusGrid g = n == 2 ? grid_n2(8, 8, 8, 8) : TorusGrid::with_active(3, {{0, 8}, {3, 8}, {6, 8}, {11, 8}});
    const ScalarField u = random_trig(rng, g, 6, 1.0).sample(g);
    const Form2Field w = gradient_wedge(u);
    const ScalarField direct = 0.25 * gradient_norm2(u);
    const QForm2 om = QForm2::standard(n);
    for (std::size_t p = 0; p < g.points(); p += 5) {
      const cplx c = wedge_coefficient({{w[p], 1}, {om, n - 1}});
      const cplx lhs = static_cast<double>(n) * c / factorial(n);
      EXPECT_LT(std::abs(lhs - direct[p]) / std::max(1.0, direct[p]), 1e-9);
    }
  }
}

TEST(FieldIo, ScalarRoundTripAndByteLayout) {
  const TorusGrid g = grid_n2(4, 2);
  ScalarField f(g);
  for (std::size_t p = 0; p < f.size(); ++p) f[p] = 0.5 * static_cast<double>(p) - 1.0;
  const std::string bytes = encode_dump(to_dump(f));
  ASSERT_EQ(bytes.size(), 4 + 4 + 8 * 4 + 8 * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "QMA1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 8);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 4);
  // 1.0 = 0x3FF0000000000000, stored little-endian: value index 4.
  const std::size_t off = 8 + 32 + 8 * 4;
  EXPECT_EQ(static_cast<unsigned char>(bytes[off + 7]), 0x3F);
  EXPECT_EQ(static_cast<unsigned char>(bytes[off + 6]), 0xF0);
  const ScalarField back = scalar_from_dump(decode_dump(bytes), g);
  EXPECT_EQ(back.values, f.values);
}

TEST(FieldIo, FormRoundTripAndErrors) {
  Rng rng(1);
  const TorusGrid g = grid_n2(2, 2);
  Form2Field f(g, QForm2(2));
  for (auto& q : f.values) q = random_j_real(rng, 2);
  const Form2Field back = form_from_dump(decode_dump(encode_dump(to_dump(f))), g);
  for (std::size_t p = 0; p < f.size(); ++p) EXPECT_EQ(back[p].matrix(), f[p].matrix());
  std::string bytes = encode_dump(to_dump(ScalarField(g)));
  EXPECT_THROW(decode_dump(bytes.substr(0, bytes.size() - 1)), IoError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_dump(bytes), IoError);
  EXPECT_THROW(scalar_from_dump(to_dump(ScalarField(grid_n2(4, 4))), g), MalformedInput);
  EXPECT_THROW(read_dump("/nonexistent/dir/x.qma"), IoError);
}
