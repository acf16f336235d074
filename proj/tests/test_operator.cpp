#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fracheat/fields.hpp"
#include "fracheat/operator.hpp"
#include "oracles.hpp"

using namespace fracheat;

namespace {

ScalarField gaussian_space(int n) {
  ScalarField u;
  u.dim = n;
  u.fn = [](std::span<const double> x, double) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    return std::exp(-r2);
  };
  u.tail = BoundedTail{1.0};
  u.smoothness_hint = kAnalytic;
  u.length_scale = 0.5;
  u.sup_bound = 1.0;
  u.spatial_support = SpatialBall{std::vector<double>(n, 0.0), 7.0};  // e^{-49} beyond
  return u;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST(SymbolOracle, Examples) {
  EXPECT_EQ(symbol_oracle(0.0, std::vector<double>{0.0}, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(symbol_oracle(1.0, std::vector<double>{0.0}, 0.5), 1.0);
  EXPECT_NEAR(symbol_oracle(0.5, std::vector<double>{1.0}, 0.5), std::sqrt(1.5), 1e-15);
  EXPECT_THROW(symbol_oracle(-1.0, std::vector<double>{0.0}, 0.5), DomainError);
}

TEST(FullyFractional, Constant) {
  const FracParams p(1, 0.5);
  const auto r = apply_fully_fractional(constant_field(1, 3.0), {{0.2}, 1.0}, p, QuadratureSpec{});
  EXPECT_LE(std::abs(r.value), r.err_est + 1e-14);
}

TEST(FullyFractional, Eigenfunctions) {
  struct Case {
    double lambda, k, s;
  };
  for (const auto& c : {Case{1, 0, 0.5}, Case{0.5, 1, 0.5}, Case{1, 1, 0.3}, Case{2, 0, 0.7}, Case{0, 2, 0.4}}) {
    const FracParams p(1, c.s);
    const auto u = exp_symbol_field(c.lambda, {c.k});
    for (double x : {-1.0, 0.3}) {
      const SpaceTimePoint pt{{x}, 0.25};
      const auto r = apply_fully_fractional(u, pt, p, QuadratureSpec{});
      const double want = symbol_oracle(c.lambda, std::vector<double>{c.k}, c.s) * u(pt);
      EXPECT_LT(rel(r.value, want), 1e-3) << c.lambda << " " << c.k << " " << c.s;
    }
  }
}

TEST(FullyFractional, EigenfunctionTwoDimensions) {
  const FracParams p(2, 0.6);
  const auto u = exp_symbol_field(0.3, {1.0, -0.5});
  const SpaceTimePoint pt{{0.1, 0.2}, 0.0};
  const auto r = apply_fully_fractional(u, pt, p, QuadratureSpec{});
  EXPECT_LT(rel(r.value, symbol_oracle(0.3, std::vector<double>{1.0, -0.5}, 0.6) * u(pt)), 1e-3);
}

TEST(FullyFractional, NotAdmissible) {
  ScalarField u = constant_field(1, 1.0);
  u.tail = BoundedTail{kInf};
  EXPECT_THROW(apply_fully_fractional(u, {{0.0}, 0.0}, FracParams(1, 0.5), QuadratureSpec{}), NotAdmissible);
  EXPECT_THROW(apply_fully_fractional(constant_field(1, 1.0), {{0.0, 0.0}, 0.0}, FracParams(1, 0.5), QuadratureSpec{}),
               DimensionMismatch);
}

TEST(FractionalLaplacian, Examples) {
  const FracParams p(1, 0.5);
  const auto one = apply_fractional_laplacian(constant_field(1, 1.0), std::vector<double>{0.3}, p, QuadratureSpec{});
  EXPECT_LE(std::abs(one.value), one.err_est);
  const auto c = exp_symbol_field(0.0, {1.0});
  for (double x : {0.0, 0.7, 2.0}) {
    const auto r = apply_fractional_laplacian(c, std::vector<double>{x}, p, QuadratureSpec{});
    EXPECT_NEAR(r.value, std::cos(x), 1e-3 * std::max(0.1, std::abs(std::cos(x))));
  }
}

TEST(FractionalLaplacian, GaussianOracle) {
  // (-Delta)^s e^{-x^2} at 0 via its Fourier transform: int |k|^{2s} e^{-k^2/4} dk / (2 sqrt(pi))
  for (double s : {0.3, 0.5, 0.8}) {
    const FracParams p(1, s);
    const double ref = oracle::integrate([&](double k) { return std::pow(k, 2 * s) * std::exp(-k * k / 4); }, 0.0, INFINITY) /
                       std::sqrt(std::numbers::pi);
    const auto r = apply_fractional_laplacian(gaussian_space(1), std::vector<double>{0.0}, p, QuadratureSpec{});
    EXPECT_NEAR(r.value, ref, 1e-4 * ref) << s;
  }
}

TEST(FractionalLaplacian, TimeConstantExtensionAgrees) {
  for (int n : {1, 2}) {
    const FracParams p(n, 0.5);
    const auto u = gaussian_space(n);
    std::vector<double> x(n, 0.3);
    const auto a = apply_fractional_laplacian(u, x, p, QuadratureSpec{});
    const auto b = apply_fully_fractional(u, {x, 0.0}, p, QuadratureSpec{});
    EXPECT_LE(std::abs(a.value - b.value), std::max(2.0 * (a.err_est + b.err_est), 1e-4 * std::abs(a.value))) << n;
  }
}

TEST(Marchaud, Examples) {
  QuadratureSpec q;
  ScalarField one;
  one.dim = 0;
  one.fn = [](std::span<const double>, double) { return 1.0; };
  one.tail = BoundedTail{1.0};
  const auto r1 = apply_marchaud(one, 0.0, 0.5, q);
  EXPECT_LE(std::abs(r1.value), r1.err_est);
  const auto e = exp_symbol_field(1.0, {});
  for (double t : {-1.0, 0.0, 1.5}) EXPECT_LT(rel(apply_marchaud(e, t, 0.5, q).value, std::exp(t)), 1e-3);
}

TEST(Marchaud, RampOracle) {
  ScalarField ramp;
  ramp.dim = 0;
  ramp.fn = [](std::span<const double>, double t) { return t > 0.0 ? t : 0.0; };
  ramp.time_lo = 0.0;
  ramp.tail = CompactTail{};
  ramp.kinks_t = {0.0};
  for (double s : {0.3, 0.5, 0.8}) {
    const double t = 1.0;
    const double cs = s / std::tgamma(1.0 - s);
    const double ref = cs * (oracle::integrate_singular([&](double tau) { return std::pow(tau, -s); }, 0.0, t) +
                             oracle::integrate([&](double tau) { return t * std::pow(tau, -1 - s); }, t, INFINITY));
    const auto r = apply_marchaud(ramp, t, s, QuadratureSpec{});
    EXPECT_NEAR(r.value, ref, 1e-6 * ref) << s;
  }
  EXPECT_NEAR(apply_marchaud(ramp, 1.0, 0.5, QuadratureSpec{}).value, 2.0 / std::sqrt(std::numbers::pi), 1e-6);
}

TEST(Marchaud, EigenConstant) {
  // C_s makes e^{lambda t} an eigenfunction with eigenvalue lambda^s
  for (double s : {0.2, 0.7}) {
    const auto e = exp_symbol_field(2.0, {});
    EXPECT_LT(rel(apply_marchaud(e, 0.0, s, QuadratureSpec{}).value, std::pow(2.0, s)), 1e-3);
  }
}

// ---------------------------------------------------------------- properties

TEST(Properties, Linearity) {
  const FracParams p(1, 0.4);
  const auto u = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto v = power_cusp(0.5, CuspDirection::space, {0.3, -0.2}, 0.7, 0.5);
  std::mt19937_64 g(3);
  std::uniform_real_distribution<double> U(-2.0, 2.0);
  for (int i = 0; i < 5; ++i) {
    const double a = U(g), b = U(g);
    const SpaceTimePoint pt{{0.3 * U(g)}, 0.2 * U(g)};
    const auto w = linear_combination(a, u, b, v);
    const QuadratureSpec q;
    const auto ru = apply_fully_fractional(u, pt, p, q);
    const auto rv = apply_fully_fractional(v, pt, p, q);
    const auto rw = apply_fully_fractional(w, pt, p, q);
    const double err = std::abs(a) * ru.err_est + std::abs(b) * rv.err_est + rw.err_est;
    EXPECT_LE(std::abs(rw.value - (a * ru.value + b * rv.value)), err);
  }
}

TEST(Properties, TranslationEquivariance) {
  const FracParams p(1, 0.5);
  const auto u = gaussian_bump({0.1, -0.2}, 1.0, 1.0);
  const SpaceTimePoint shift{{0.75}, 0.5};
  const auto ut = translate(u, shift);
  const auto a = apply_fully_fractional(ut, {{0.85}, 0.4}, p, QuadratureSpec{});
  const auto b = apply_fully_fractional(u, {{0.1}, -0.1}, p, QuadratureSpec{});
  EXPECT_NEAR(a.value, b.value, 1e-9 * std::abs(b.value) + a.err_est);
}

TEST(Properties, ParabolicScaling) {
  const FracParams p(1, 0.5);
  const auto u = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  for (double lam : {0.5, 2.0}) {
    const auto ul = parabolic_rescale(u, lam);
    const SpaceTimePoint pt{{0.2 / lam}, 0.1 / (lam * lam)};
    const auto a = apply_fully_fractional(ul, pt, p, QuadratureSpec{});
    const auto b = apply_fully_fractional(u, {{0.2}, 0.1}, p, QuadratureSpec{});
    const double want = std::pow(lam, 2 * p.s()) * b.value;
    EXPECT_NEAR(a.value, want, a.err_est + std::pow(lam, 2 * p.s()) * b.err_est + 1e-6 * std::abs(want)) << lam;
  }
}

TEST(Properties, EigenfunctionSweep) {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> L(0.0, 2.0), K(-2.0, 2.0), S(0.15, 0.85);
  for (int i = 0; i < 6; ++i) {
    const double lam = L(g), k = K(g), s = S(g);
    const FracParams p(1, s);
    const auto u = exp_symbol_field(lam, {k});
    const SpaceTimePoint pt{{0.1}, 0.0};
    if (std::abs(u(pt)) < 1e-3) continue;
    const auto r = apply_fully_fractional(u, pt, p, QuadratureSpec{});
    EXPECT_LT(rel(r.value, symbol_oracle(lam, std::vector<double>{k}, s) * u(pt)), 1e-3)
        << lam << " " << k << " " << s;
  }
}

TEST(Properties, ApproachesHeatOperator) {
  // (d_t - d_xx) u by finite differences on a smooth bump
  const auto u = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const std::vector<double> at{0.2, 0.1};
  oracle::Fn f = [&](const std::vector<double>& z) { return u(std::span<const double>(z.data(), 1), z[1]); };
  const double heat = oracle::mixed(f, at, {0, 1}, 1e-3) - oracle::mixed(f, at, {2, 0}, 1e-3);
  double prev = kInf;
  for (double s : {0.9, 0.95, 0.99}) {
    const auto r = apply_fully_fractional(u, {{at[0]}, at[1]}, FracParams(1, s), QuadratureSpec{});
    const double gap = std::abs(r.value - heat);
    EXPECT_LT(gap, prev) << s;
    prev = gap;
  }
}

TEST(Batch, MatchesSerial) {
  const FracParams p(1, 0.5);
  const auto u = exp_symbol_field(0.5, {1.0});
  std::vector<SpaceTimePoint> pts;
  for (int i = 0; i < 6; ++i) pts.push_back({{0.1 * i}, -0.05 * i});
  const auto a = apply_batch(u, pts, p, QuadratureSpec{}, 1);
  const auto b = apply_batch(u, pts, p, QuadratureSpec{}, 3);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(a[i].value, b[i].value);
}
