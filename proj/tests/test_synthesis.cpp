#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <numbers>
#include <random>

#include "fracheat/synthesis.hpp"
#include "oracles.hpp"

using namespace fracheat;

namespace {

const SpaceTimePoint kOrigin{{0.0}, 0.0};

// u(pt) by nested adaptive quadrature of f against the inverting kernel, n = 1
double brute_synthesis(const ScalarField& f, const SpaceTimePoint& pt, double s, double ylo, double yhi) {
  const FracParams p(1, s);
  return oracle::integrate_singular(
      [&](double tau) {
        const double tt = pt.t - tau;
        if (tt <= f.time_lo || tt >= f.time_hi) return 0.0;
        auto gy = [&](double y) {
          const double z = pt.x[0] - y;
          const double yy[1] = {y};
          return f(std::span<const double>(yy, 1), tt) * std::exp(-z * z / (4 * tau));
        };
        // the Gaussian is negligible beyond 12 sqrt(tau); split at its peak
        const double a = std::max(ylo, pt.x[0] - 12 * std::sqrt(tau));
        const double b = std::min(yhi, pt.x[0] + 12 * std::sqrt(tau));
        if (!(b > a)) return 0.0;
        const double m = std::clamp(pt.x[0], a, b);
        const double inner = (m > a ? oracle::integrate_gk(gy, a, m) : 0.0) + (b > m ? oracle::integrate_gk(gy, m, b) : 0.0);
        return p.c_ns_inverse() * inner * std::pow(tau, p.s() - 1.5);
      },
      0.0, pt.t - f.time_lo);
}

QuadratureSpec light() {
  QuadratureSpec q;
  q.tau_min = 1e-5;
  q.graded_nodes = 6;
  q.panel_order = 5;
  return q;
}

}  // namespace

TEST(Synthesis, ZeroData) {
  const auto b = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto zero = linear_combination(0.0, b, 0.0, b);
  const auto r = synthesize_solution(zero, {{0.2}, 0.5}, FracParams(1, 0.5), QuadratureSpec{});
  EXPECT_EQ(r.value, 0.0);
}

TEST(Synthesis, BruteForceOracle) {
  const auto f = gaussian_bump({0.1, 0.0}, 0.8, 0.6);
  for (double s : {0.3, 0.5, 0.8}) {
    for (const SpaceTimePoint& pt : {SpaceTimePoint{{0.2}, 0.1}, SpaceTimePoint{{1.5}, 1.0}}) {
      const auto r = synthesize_solution(f, pt, FracParams(1, s), QuadratureSpec{});
      const double ref = brute_synthesis(f, pt, s, -0.7, 0.9);
      EXPECT_NEAR(r.value, ref, std::max(1e-7, 5 * r.err_est)) << s;
    }
  }
}

TEST(Synthesis, SymbolData) {
  // f = e^{lambda t} cos(k x) gives u = f / (lambda + k^2)^s
  for (double s : {0.3, 0.6}) {
    const auto f = exp_symbol_field(0.5, {1.0});
    const SpaceTimePoint pt{{0.4}, 0.3};
    const auto r = synthesize_solution(f, pt, FracParams(1, s), QuadratureSpec{});
    EXPECT_NEAR(r.value, f(pt) / std::pow(1.5, s), 1e-6 * std::abs(f(pt)));
  }
  EXPECT_THROW(synthesize_solution(constant_field(1, 1.0), kOrigin, FracParams(1, 0.5), QuadratureSpec{}),
               NotAdmissible);
}

TEST(Synthesis, RoundTrip) {
  const FracParams p(1, 0.5);
  const auto f = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto u = synthesized_field(f, p, light());
  const SpaceTimePoint pt{{0.1}, 0.2};
  const auto r = apply_fully_fractional(u, pt, p, light());
  EXPECT_LE(std::abs(r.value - f(pt)), 5 * r.err_est);
  EXPECT_LT(r.err_est, 1e-2);
}

TEST(Synthesis, Monotone) {
  const FracParams p(1, 0.4);
  const auto f2 = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto f1 = linear_combination(0.5, f2, 0.5, gaussian_bump({0.3, 0.1}, 0.5, 0.4));
  // f1 <= f2 fails near the second bump's center, so compare against f2 + that bump
  const auto f3 = linear_combination(1.0, f2, 1.0, gaussian_bump({0.3, 0.1}, 0.5, 0.4));
  for (double x : {-0.5, 0.0, 0.4}) {
    const SpaceTimePoint pt{{x}, 0.3};
    const auto a = synthesize_solution(f1, pt, p, QuadratureSpec{});
    const auto b = synthesize_solution(f3, pt, p, QuadratureSpec{});
    EXPECT_LE(a.value, b.value + a.err_est + b.err_est);
    EXPECT_GE(a.value, -a.err_est);
    EXPECT_FALSE(a.negative_data);
  }
}

TEST(Synthesis, NegativeDataFlag) {
  const auto f = linear_combination(-1.0, gaussian_bump({0.0, 0.0}, 1.0, 1.0), 0.0,
                                    gaussian_bump({0.0, 0.0}, 1.0, 1.0));
  const auto r = synthesize_solution(f, {{0.0}, 0.5}, FracParams(1, 0.5), QuadratureSpec{});
  EXPECT_TRUE(r.negative_data);
  EXPECT_LT(r.value, 0.0);
}

TEST(ExternalInternal, SupportCases) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  const double r = 0.5;
  const auto inside = gaussian_bump({0.0, 0.0}, 0.2, 0.05);
  const SpaceTimePoint pt{{0.1}, 0.2};
  EXPECT_EQ(external_part(inside, kOrigin, r, pt, p, q).value, 0.0);
  const auto full = synthesize_solution(inside, pt, p, q);
  EXPECT_NEAR(internal_part(inside, kOrigin, r, pt, p, q).value, full.value, 1e-12);
  const auto outside = gaussian_bump({2.0, -0.5}, 0.5, 0.4);
  const auto e = external_part(outside, kOrigin, r, pt, p, q);
  EXPECT_NEAR(e.value, synthesize_solution(outside, pt, p, q).value, 1e-12);
  EXPECT_EQ(internal_part(outside, kOrigin, r, pt, p, q).value, 0.0);
}

TEST(ExternalInternal, Partition) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  const auto f = gaussian_bump({0.1, -0.1}, 1.0, 0.8);
  std::mt19937_64 g(1);
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  for (int i = 0; i < 5; ++i) {
    const SpaceTimePoint pt{{U(g)}, 0.25 * (U(g) - 0.5)};
    for (double r : {0.25, 0.5}) {
      const auto u = synthesize_solution(f, pt, p, q);
      const auto v = external_part(f, kOrigin, r, pt, p, q);
      const auto w = internal_part(f, kOrigin, r, pt, p, q);
      EXPECT_LE(std::abs(u.value - v.value - w.value), 5 * (u.err_est + v.err_est + w.err_est) + 1e-13);
    }
  }
  EXPECT_THROW(external_part(f, kOrigin, 1.5, kOrigin, p, q), DomainError);
}

TEST(ExternalInternal, DerivativeMatchesFiniteDifferences) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  const auto f = gaussian_bump({0.2, -0.2}, 1.0, 0.8);
  const double r = 1.0;
  const SpaceTimePoint pt{{0.1}, -0.05};
  oracle::Fn v = [&](const std::vector<double>& z) {
    return external_part(f, kOrigin, r, {{z[0]}, z[1]}, p, q).value;
  };
  struct Case {
    int a, m;
  };
  for (const auto& c : {Case{1, 0}, Case{2, 0}, Case{0, 1}, Case{1, 1}}) {
    const auto d = external_part_derivative(f, kOrigin, r, {{c.a}, c.m}, pt, p, q);
    const double fd = oracle::mixed(v, {pt.x[0], pt.t}, {c.a, c.m}, 0.02);
    EXPECT_NEAR(d.value, fd, 1e-3 * std::abs(fd) + 5 * d.err_est) << c.a << " " << c.m;
  }
}

TEST(Cutoff, Values) {
  const auto psi = make_cutoff();
  EXPECT_EQ(psi({{0.0}, 0.0}), 1.0);
  EXPECT_EQ(psi({{3.0}, 0.0}), 0.0);
  EXPECT_EQ(psi({{0.0}, 4.5}), 0.0);
  EXPECT_EQ(psi({{0.9}, -0.9}), 1.0);
  for (double x = -2.5; x <= 2.5; x += 0.01) {
    const double v = psi({{x}, 0.3 * x});
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Cutoff, DerivativesBounded) {
  const auto psi = make_cutoff();
  oracle::Fn g = [&](const std::vector<double>& z) { return psi({{z[0]}, z[1]}); };
  // spatial derivatives up to order 4 on the transition annulus, at two step sizes
  for (int k = 1; k <= 4; ++k) {
    double m1 = 0.0, m2 = 0.0;
    for (double x = 1.05; x < 1.95; x += 0.05) {
      m1 = std::max(m1, std::abs(oracle::mixed(g, {x, 0.0}, {k, 0}, 0.01)));
      m2 = std::max(m2, std::abs(oracle::mixed(g, {x, 0.0}, {k, 0}, 0.005)));
    }
    EXPECT_TRUE(std::isfinite(m1));
    EXPECT_NEAR(m1, m2, 1e-3 * m2 + 1e-9) << k;
  }
}

TEST(Decomposition, DataEqualsPolynomial) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  ParabolicPolynomial P = ParabolicPolynomial::zero(1, 2);
  P.set(MultiIndex{{0, 0}}, 1.0);
  P.set(MultiIndex{{1, 0}}, 0.5);
  const auto f = cutoff_polynomial(P);  // equals P on the unit two-sided cylinder
  const auto b = decompose_internal(f, P, 0.25, p, q);
  const SpaceTimePoint pt{{0.1}, -0.1};
  EXPECT_NEAR(b.eval(Component::S_r, pt).value, 0.0, 1e-14);
  EXPECT_NEAR(b.eval(Component::T_r, pt).value, 0.0, 1e-14);
  const auto w1 = b.eval(Component::w_1, pt), uP = b.eval(Component::u_P, pt);
  EXPECT_NEAR(w1.value, uP.value, w1.err_est + uP.err_est);
}

TEST(Decomposition, FullRadiusHasNoAnnulus) {
  const auto f = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto b = decompose_internal(f, ParabolicPolynomial::zero(1, 0), 1.0, FracParams(1, 0.5), QuadratureSpec{});
  EXPECT_EQ(b.eval(Component::T_r, {{0.2}, -0.1}).value, 0.0);
}

TEST(Decomposition, Partition) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  const auto f = gaussian_bump({0.1, -0.1}, 1.0, 0.8);
  auto P = ParabolicPolynomial::zero(1, 0);
  P.set(MultiIndex{{0, 0}}, f(kOrigin));
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (double r : {0.25, 0.5}) {
    const auto b = decompose_internal(f, P, r, p, q);
    for (int i = 0; i < 4; ++i) {
      const SpaceTimePoint pt{{0.5 * (2 * U(g) - 1)}, -0.25 * U(g)};
      const auto w1 = b.eval(Component::w_1, pt), S = b.eval(Component::S_r, pt),
                 T = b.eval(Component::T_r, pt), uP = b.eval(Component::u_P, pt);
      EXPECT_LE(std::abs(w1.value - S.value - T.value - uP.value),
                5 * (w1.err_est + S.err_est + T.err_est + uP.err_est) + 1e-13);
      const auto u = b.eval(Component::u, pt), v = b.eval(Component::v_r, pt), w = b.eval(Component::w_r, pt);
      EXPECT_LE(std::abs(u.value - v.value - w.value), 5 * (u.err_est + v.err_est + w.err_est) + 1e-13);
    }
  }
}

TEST(Decomposition, LazyFieldHandle) {
  const auto f = gaussian_bump({0.0, 0.0}, 1.0, 1.0);
  const auto b = decompose_internal(f, ParabolicPolynomial::zero(1, 0), 0.5, FracParams(1, 0.5), QuadratureSpec{});
  const auto S = b.field(Component::S_r);
  const SpaceTimePoint pt{{0.1}, -0.1};
  EXPECT_EQ(S(pt), b.eval(Component::S_r, pt).value);
}

TEST(PolynomialParts, Identity) {
  const FracParams p(1, 0.5);
  const QuadratureSpec q;
  auto P = ParabolicPolynomial::zero(1, 1);
  P.set(MultiIndex{{0, 0}}, 1.0);
  P.set(MultiIndex{{1, 0}}, 1.0);
  for (const SpaceTimePoint& pt : {SpaceTimePoint{{0.1}, -0.2}, SpaceTimePoint{{-0.3}, 0.0}}) {
    const auto V = v_P_part(P, pt, p, q), W = w_P_part(P, 1.0, pt, p, q), U = u_P_part(P, pt, p, q);
    EXPECT_LE(std::abs(V.value - W.value - U.value), 5 * (V.err_est + W.err_est + U.err_est) + 1e-13);
  }
  const auto Z = ParabolicPolynomial::zero(1, 2);
  EXPECT_EQ(u_P_part(Z, kOrigin, p, q).value, 0.0);
  EXPECT_EQ(w_P_part(Z, 0.5, kOrigin, p, q).value, 0.0);
  EXPECT_EQ(v_P_part(Z, kOrigin, p, q).value, 0.0);
}

TEST(PolynomialParts, DerivativesBoundedByNorm) {
  // finite-difference derivatives of u_P at the base point scale with ||P||
  const FracParams p(1, 0.5);
  QuadratureSpec q;
  auto P = ParabolicPolynomial::zero(1, 1);
  P.set(MultiIndex{{0, 0}}, 1.0);
  P.set(MultiIndex{{1, 0}}, -2.0);
  auto P2 = P * 3.0;
  for (int j = 1; j <= 2; ++j) {
    oracle::Fn g1 = [&](const std::vector<double>& z) { return u_P_part(P, {{z[0]}, z[1]}, p, q).value; };
    oracle::Fn g2 = [&](const std::vector<double>& z) { return u_P_part(P2, {{z[0]}, z[1]}, p, q).value; };
    const double d1 = oracle::mixed(g1, {0.0, -0.01}, {j, 0}, 0.005);
    const double d2 = oracle::mixed(g2, {0.0, -0.01}, {j, 0}, 0.005);
    EXPECT_TRUE(std::isfinite(d1));
    EXPECT_NEAR(std::abs(d2) / poly_norm(P2), std::abs(d1) / poly_norm(P), 1e-6 * std::abs(d1) + 1e-9);
  }
}

TEST(SDecay, ExactPolynomialData) {
  const FracParams p(1, 0.5);
  auto P = ParabolicPolynomial::zero(1, 0);
  P.set(MultiIndex{{0, 0}}, 2.0);
  const auto rows = s_decay_probe(cutoff_polynomial(P), P, 0, 0.5, {0.5, 0.25}, p, light(), {8, 1});
  for (const auto& r : rows) EXPECT_NEAR(r.avg_abs_S, 0.0, 1e-14);
  EXPECT_THROW(s_decay_probe(cutoff_polynomial(P), P, 0, 0.5, {0.75}, p, light()), DomainError);
}

TEST(SDecay, CuspSlope) {
  const FracParams p(1, 0.5);
  const auto f = power_cusp(0.5, CuspDirection::space, {0.0, 0.0}, 1.0, 2.0);
  const auto P = ParabolicPolynomial::zero(1, 0);
  const std::vector<double> radii{0.5, 0.25, 0.125, 0.0625};
  const auto rows = s_decay_probe(f, P, 0, 0.5, radii, p, light(), {8, 1});
  EXPECT_NEAR(decay_slope(rows), 1.5, 0.2);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LE(rows[i].normalized, 2.0 * rows[i - 1].normalized);
}

TEST(Scaling, SynthesisCovariance) {
  // f_l(x, t) = f(l x, l^2 t) gives u_l(x, t) = l^{-2s} u(l x, l^2 t)
  const FracParams p(1, 0.4);
  const QuadratureSpec q;
  const auto f = gaussian_bump({0.1, 0.0}, 1.0, 1.0);
  const double l = 0.5;
  const auto fl = parabolic_rescale(f, l);
  const SpaceTimePoint pt{{0.3}, 0.5};
  const auto a = synthesize_solution(fl, pt, p, q);
  const auto b = synthesize_solution(f, {{l * 0.3}, l * l * 0.5}, p, q);
  EXPECT_NEAR(a.value, std::pow(l, -2 * p.s()) * b.value, a.err_est + 3 * b.err_est + 1e-10);
  const auto dl = decompose_internal(fl, ParabolicPolynomial::zero(1, 0), 0.5, p, q);
  const auto d = decompose_internal(f, ParabolicPolynomial::zero(1, 0), 0.25, p, q);
  const SpaceTimePoint in{{0.2}, -0.1};
  const auto sa = dl.eval(Component::w_r, in), sb = d.eval(Component::w_r, {{l * 0.2}, l * l * -0.1});
  EXPECT_NEAR(sa.value, std::pow(l, -2 * p.s()) * sb.value, sa.err_est + 3 * sb.err_est + 1e-10);
}
