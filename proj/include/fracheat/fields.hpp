// Catalog of admissible fields and a little field algebra.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fracheat/core.hpp"

namespace fracheat {

inline constexpr int kSmooth = 1000000;  // C^infinity but not analytic

// exp(1 - 1/(1 - z^2)) on |z| < 1, zero elsewhere; equals 1 at z = 0.
inline double mollifier(double z) {
  const double a = 1.0 - z * z;
  if (a <= 0.0) return 0.0;
  return std::exp(1.0 - 1.0 / a);
}

inline ScalarField constant_field(int n, double c) {
  ScalarField f;
  f.dim = n;
  f.fn = [c](std::span<const double>, double) { return c; };
  f.tail = BoundedTail{std::abs(c)};
  f.smoothness_hint = kAnalytic;
  f.sup_bound = std::abs(c);
  return f;
}

// e^{lambda t} cos(k . x); dimension is k.size() (0 gives a purely temporal field)
inline ScalarField exp_symbol_field(double lambda, std::vector<double> k) {
  if (lambda < 0.0) throw DomainError("exp_symbol: lambda must be >= 0");
  ScalarField f;
  f.dim = static_cast<int>(k.size());
  double kk = 0.0;
  for (double v : k) kk += v * v;
  f.fn = [lambda, k](std::span<const double> x, double t) {
    double ph = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) ph += k[i] * x[i];
    return std::exp(lambda * t) * std::cos(ph);
  };
  f.tail = ExponentialSymbolTail{lambda, k};
  f.smoothness_hint = kAnalytic;
  f.length_scale = kk > 0.0 ? 1.0 / std::sqrt(kk) : kInf;
  return f;
}

// Product bump m(|x - c|/w_x) m((t - c_t)/w_t) with the mollifier m; center = (x..., t).
inline ScalarField gaussian_bump(std::vector<double> center, double width_x, double width_t) {
  if (center.size() < 2) throw DimensionMismatch("gaussian_bump: center needs (x..., t)");
  if (!(width_x > 0.0 && width_t > 0.0)) throw DomainError("gaussian_bump: widths must be > 0");
  const int n = static_cast<int>(center.size()) - 1;
  std::vector<double> cx(center.begin(), center.end() - 1);
  const double ct = center.back();
  ScalarField f;
  f.dim = n;
  f.fn = [cx, ct, width_x, width_t](std::span<const double> x, double t) {
    const double zt = (t - ct) / width_t;
    if (std::abs(zt) >= 1.0) return 0.0;
    double r2 = 0.0;
    for (std::size_t i = 0; i < cx.size(); ++i) r2 += (x[i] - cx[i]) * (x[i] - cx[i]);
    if (r2 >= width_x * width_x) return 0.0;
    return mollifier(std::sqrt(r2) / width_x) * mollifier(zt);
  };
  f.tail = CompactTail{};
  f.spatial_support = SpatialBall{cx, width_x};
  f.time_lo = ct - width_t;
  f.time_hi = ct + width_t;
  f.smoothness_hint = kSmooth;
  f.length_scale = width_x / 8.0;
  f.sup_bound = 1.0;
  return f;
}

enum class CuspDirection { space, time };

// |x - c_x|^beta * bump or |t - c_t|^beta * bump, cusp at the bump center.
inline ScalarField power_cusp(double beta, CuspDirection dir, std::vector<double> center,
                              double width_x, double width_t) {
  if (!(beta >= 0.0)) throw DomainError("power_cusp: beta must be >= 0");
  auto bump = gaussian_bump(center, width_x, width_t);
  const int n = bump.dim;
  std::vector<double> cx(center.begin(), center.end() - 1);
  const double ct = center.back();
  auto b = bump.fn;
  ScalarField f = bump;
  if (dir == CuspDirection::space) {
    f.fn = [b, cx, beta](std::span<const double> x, double t) {
      const double v = b(x, t);
      if (v == 0.0) return 0.0;
      double r2 = 0.0;
      for (std::size_t i = 0; i < cx.size(); ++i) r2 += (x[i] - cx[i]) * (x[i] - cx[i]);
      return std::pow(r2, 0.5 * beta) * v;
    };
    if (n == 1) f.kinks_x = {cx[0]};
    f.sup_bound = std::pow(width_x, beta);
  } else {
    f.fn = [b, ct, beta](std::span<const double> x, double t) {
      const double v = b(x, t);
      if (v == 0.0) return 0.0;
      return std::pow(std::abs(t - ct), beta) * v;
    };
    f.kinks_t = {ct};
    f.sup_bound = std::pow(width_t, beta);
  }
  f.smoothness_hint = 0;
  return f;
}

inline ScalarField polynomial_field(const ParabolicPolynomial& P) {
  ScalarField f;
  f.dim = P.n();
  auto pp = std::make_shared<ParabolicPolynomial>(P);
  f.fn = [pp](std::span<const double> x, double t) { return (*pp)(x, t); };
  bool constant = true;
  for (std::size_t i = 1; i < P.coeffs().size(); ++i) constant = constant && P.coeffs()[i] == 0.0;
  const double a0 = P.coeffs().empty() ? 0.0 : P.coeffs()[0];
  f.tail = BoundedTail{constant ? std::abs(a0) : kInf};
  f.sup_bound = constant ? std::abs(a0) : kInf;
  f.smoothness_hint = kAnalytic;
  return f;
}

// a f + b g with merged metadata.
inline ScalarField linear_combination(double a, const ScalarField& f, double b, const ScalarField& g) {
  require_dim(f.dim, g.dim, "linear_combination");
  ScalarField h;
  h.dim = f.dim;
  auto ff = f.fn, gf = g.fn;
  h.fn = [a, b, ff, gf](std::span<const double> x, double t) {
    return (a == 0.0 ? 0.0 : a * ff(x, t)) + (b == 0.0 ? 0.0 : b * gf(x, t));
  };
  if (f.spatial_support && g.spatial_support) {
    // bounding ball of the two supports
    const auto& s1 = *f.spatial_support;
    const auto& s2 = *g.spatial_support;
    double d = 0.0;
    for (std::size_t i = 0; i < s1.center.size(); ++i)
      d += (s1.center[i] - s2.center[i]) * (s1.center[i] - s2.center[i]);
    d = std::sqrt(d);
    if (d + s2.radius <= s1.radius) h.spatial_support = s1;
    else if (d + s1.radius <= s2.radius) h.spatial_support = s2;
    else {
      const double R = 0.5 * (d + s1.radius + s2.radius);
      std::vector<double> c(s1.center.size());
      for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = s1.center[i] + (d > 0 ? (R - s1.radius) / d * (s2.center[i] - s1.center[i]) : 0.0);
      h.spatial_support = SpatialBall{c, R};
    }
  }
  h.time_lo = std::min(f.time_lo, g.time_lo);
  h.time_hi = std::max(f.time_hi, g.time_hi);
  const bool fc = std::holds_alternative<CompactTail>(f.tail);
  const bool gc = std::holds_alternative<CompactTail>(g.tail);
  h.sup_bound = std::abs(a) * f.sup_bound + std::abs(b) * g.sup_bound;
  if (fc && gc) h.tail = CompactTail{};
  else h.tail = BoundedTail{h.sup_bound};
  if (f.smoothness_hint && g.smoothness_hint)
    h.smoothness_hint = std::min(*f.smoothness_hint, *g.smoothness_hint);
  h.length_scale = std::min(f.length_scale, g.length_scale);
  h.kinks_x = f.kinks_x;
  h.kinks_x.insert(h.kinks_x.end(), g.kinks_x.begin(), g.kinks_x.end());
  h.kinks_t = f.kinks_t;
  h.kinks_t.insert(h.kinks_t.end(), g.kinks_t.begin(), g.kinks_t.end());
  return h;
}

// f(lambda x, lambda^2 t)
inline ScalarField parabolic_rescale(const ScalarField& f, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("parabolic_rescale: lambda must be > 0");
  ScalarField h = f;
  auto ff = f.fn;
  const int n = f.dim;
  h.fn = [ff, lambda, n](std::span<const double> x, double t) {
    double y[kMaxDim];
    for (int i = 0; i < n; ++i) y[i] = lambda * x[i];
    return ff(std::span<const double>(y, n), lambda * lambda * t);
  };
  if (h.spatial_support) {
    for (auto& c : h.spatial_support->center) c /= lambda;
    h.spatial_support->radius /= lambda;
  }
  h.time_lo /= lambda * lambda;
  h.time_hi /= lambda * lambda;
  h.length_scale /= lambda;
  for (auto& k : h.kinks_x) k /= lambda;
  for (auto& k : h.kinks_t) k /= lambda * lambda;
  if (auto* e = std::get_if<ExponentialSymbolTail>(&h.tail)) {
    e->lambda *= lambda * lambda;
    for (auto& k : e->k) k *= lambda;
  }
  return h;
}

// f(x - a, t - b)
inline ScalarField translate(const ScalarField& f, const SpaceTimePoint& shift) {
  require_dim(shift.dim(), f.dim, "translate");
  if (std::holds_alternative<ExponentialSymbolTail>(f.tail))
    throw DomainError("translate: symbol fields are not closed under translation");
  ScalarField h = f;
  auto ff = f.fn;
  const auto a = shift.x;
  const double b = shift.t;
  h.fn = [ff, a, b](std::span<const double> x, double t) {
    double y[kMaxDim];
    for (std::size_t i = 0; i < a.size(); ++i) y[i] = x[i] - a[i];
    return ff(std::span<const double>(y, a.size()), t - b);
  };
  if (h.spatial_support)
    for (std::size_t i = 0; i < a.size(); ++i) h.spatial_support->center[i] += a[i];
  h.time_lo += b;
  h.time_hi += b;
  if (f.dim == 1)
    for (auto& k : h.kinks_x) k += a[0];
  for (auto& k : h.kinks_t) k += b;
  return h;
}

}  // namespace fracheat
