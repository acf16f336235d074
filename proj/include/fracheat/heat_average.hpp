// Gaussian expectation E[g(Y) 1_A(Y)], Y ~ N(x, 2 tau I_n), restricted to an
// annulus A. This is the spatial half of every substituted kernel integral.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

// {y : inner <= |y - center| < outer}; an empty center means whole space.
struct Annulus {
  std::vector<double> center;
  double inner = 0.0;
  double outer = kInf;

  bool whole() const { return center.empty() || (inner <= 0.0 && outer == kInf); }
};

struct SpatialHints {
  const SpatialBall* support = nullptr;  // g equals outside_value off this ball
  std::span<const double> kinks;         // n = 1 only
  double length_scale = kInf;
  bool analytic = false;
};

inline SpatialHints hints_for(const ScalarField& f) {
  SpatialHints h;
  if (f.spatial_support) h.support = &*f.spatial_support;
  h.kinks = f.kinks_x;
  h.length_scale = f.length_scale;
  h.analytic = f.is_analytic();
  return h;
}

struct SpatialRule {
  int hermite_order = 40;
  int panel_order = 10;
  int angular_nodes = 64;
};

inline SpatialRule spatial_rule(const QuadratureSpec& q, Level lvl) {
  if (lvl == Level::fine) return {q.hermite_order, q.panel_order, q.angular_nodes};
  return {std::max(8, q.hermite_order / 2), std::max(3, q.panel_order / 2),
          std::max(8, q.angular_nodes / 2)};
}

namespace detail {

inline constexpr double kWindow = 8.0;  // half-width of the integration window in units of sqrt(2 tau)

using Interval = std::pair<double, double>;

inline void intersect(std::vector<Interval>& v, double lo, double hi) {
  std::vector<Interval> out;
  for (auto [a, b] : v) {
    const double na = std::max(a, lo), nb = std::min(b, hi);
    if (nb > na) out.push_back({na, nb});
  }
  v.swap(out);
}

// Parameter interval where the ray p + rho d lies inside the circle (c, R).
inline bool ray_disc(std::span<const double> p, std::span<const double> d,
                     std::span<const double> c, double R, double& lo, double& hi) {
  double b = 0.0, q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    b += d[i] * (p[i] - c[i]);
    q += (p[i] - c[i]) * (p[i] - c[i]);
  }
  const double disc = b * b - q + R * R;
  if (disc <= 0.0) return false;
  const double sq = std::sqrt(disc);
  lo = -b - sq;
  hi = -b + sq;
  return true;
}

inline std::vector<Interval> subtract(const std::vector<Interval>& v, double lo, double hi) {
  std::vector<Interval> out;
  for (auto [a, b] : v) {
    if (hi <= a || lo >= b) {
      out.push_back({a, b});
      continue;
    }
    if (lo > a) out.push_back({a, lo});
    if (hi < b) out.push_back({hi, b});
  }
  return out;
}

}  // namespace detail

template <class G>
double heat_expectation(std::span<const double> x, double tau, const Annulus& A,
                        const SpatialHints& hints, const SpatialRule& rule,
                        double outside_value, G&& g) {
  const int n = static_cast<int>(x.size());
  const double sigma = std::sqrt(2.0 * tau);
  const double two_sqrt_tau = 2.0 * std::sqrt(tau);

  const double gh_spacing = two_sqrt_tau * std::numbers::pi / std::sqrt(2.0 * rule.hermite_order);
  const bool gh_ok = A.whole() && hints.support == nullptr && hints.kinks.empty() &&
                     hints.analytic && gh_spacing <= 0.5 * hints.length_scale;
  if (gh_ok || n >= 3) {
    if (!A.whole() || hints.support != nullptr)
      throw UnsupportedOrder("heat_expectation: restricted integrals need n <= 2");
    const auto& gh = gauss_hermite(rule.hermite_order);
    const int N = rule.hermite_order;
    std::vector<int> idx(n, 0);
    double y[kMaxDim];
    double sum = 0.0;
    while (true) {
      double w = 1.0;
      for (int i = 0; i < n; ++i) {
        y[i] = x[i] - two_sqrt_tau * gh.nodes[idx[i]];
        w *= gh.weights[idx[i]];
      }
      sum += w * g(std::span<const double>(y, n));
      int k = 0;
      while (k < n && ++idx[k] == N) idx[k++] = 0;
      if (k == n) break;
    }
    return sum / std::pow(std::numbers::pi, 0.5 * n);
  }

  const auto& gl = gauss_legendre(rule.panel_order);
  const double hmax = std::min(sigma, hints.length_scale);
  const double W = detail::kWindow * sigma;
  const double inv4tau = 1.0 / (4.0 * tau);
  std::vector<Panel> panels;
  double sum = 0.0;

  if (n == 1) {
    std::vector<detail::Interval> iv;
    if (A.whole()) {
      iv.push_back({x[0] - W, x[0] + W});
    } else {
      const double c = A.center[0];
      if (A.inner <= 0.0) {
        iv.push_back({c - A.outer, c + A.outer});
      } else {
        iv.push_back({c - A.outer, c - A.inner});
        iv.push_back({c + A.inner, c + A.outer});
      }
      detail::intersect(iv, x[0] - W, x[0] + W);
    }
    auto mass = [&](double a, double b) {
      return 0.5 * (std::erf((b - x[0]) / two_sqrt_tau) - std::erf((a - x[0]) / two_sqrt_tau));
    };
    std::vector<detail::Interval> inside = iv, outside;
    if (hints.support) {
      const double lo = hints.support->center[0] - hints.support->radius;
      const double hi = hints.support->center[0] + hints.support->radius;
      detail::intersect(inside, lo, hi);
      outside = detail::subtract(iv, lo, hi);
    }
    if (outside_value != 0.0)
      for (auto [a, b] : outside) sum += outside_value * mass(a, b);
    const double norm = 1.0 / std::sqrt(4.0 * std::numbers::pi * tau);
    for (auto [a, b] : inside) {
      std::vector<double> cuts{a, b};
      std::vector<char> graded{0, 0};
      if (x[0] > a && x[0] < b) {
        cuts.push_back(x[0]);
        graded.push_back(0);
      }
      for (double k : hints.kinks) {
        if (k >= a && k <= b) {
          cuts.push_back(k);
          graded.push_back(1);
        }
      }
      std::vector<std::size_t> ord(cuts.size());
      for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
      std::sort(ord.begin(), ord.end(), [&](auto i, auto j) { return cuts[i] < cuts[j]; });
      panels.clear();
      for (std::size_t i = 0; i + 1 < ord.size(); ++i) {
        const double pa = cuts[ord[i]], pb = cuts[ord[i + 1]];
        detail::add_panels(pa, pb, graded[ord[i]], graded[ord[i + 1]], hmax, panels);
      }
      for (const auto& p : panels) {
        const double c = 0.5 * (p.a + p.b), hw = 0.5 * (p.b - p.a);
        for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
          const double yv = c + hw * gl.nodes[i];
          const double d = yv - x[0];
          const double w = hw * gl.weights[i] * std::exp(-d * d * inv4tau);
          if (w == 0.0) continue;
          sum += w * norm * g(std::span<const double>(&yv, 1));
        }
      }
    }
    return sum;
  }

  // n == 2: polar rays about x, trapezoid in angle.
  const int M = rule.angular_nodes;
  const double wtheta = 1.0 / M;
  for (int j = 0; j < M; ++j) {
    const double th = 2.0 * std::numbers::pi * (j + 0.5) / M;
    const double d[2] = {std::cos(th), std::sin(th)};
    std::vector<detail::Interval> iv{{0.0, W}};
    if (!A.whole()) {
      double lo, hi;
      if (std::isfinite(A.outer)) {
        if (!detail::ray_disc(x, d, A.center, A.outer, lo, hi)) continue;
        detail::intersect(iv, lo, hi);
      }
      if (A.inner > 0.0 && detail::ray_disc(x, d, A.center, A.inner, lo, hi))
        iv = detail::subtract(iv, lo, hi);
    }
    std::vector<detail::Interval> inside = iv, outside;
    if (hints.support) {
      double lo, hi;
      if (detail::ray_disc(x, d, hints.support->center, hints.support->radius, lo, hi)) {
        detail::intersect(inside, lo, hi);
        outside = detail::subtract(iv, lo, hi);
      } else {
        inside.clear();
        outside = iv;
      }
    }
    if (outside_value != 0.0)
      for (auto [a, b] : outside)
        sum += outside_value * wtheta * (std::exp(-a * a * inv4tau) - std::exp(-b * b * inv4tau));
    panels.clear();
    for (auto [a, b] : inside) detail::add_panels(a, b, false, false, hmax, panels);
    const double norm = wtheta / (2.0 * tau);
    for (const auto& p : panels) {
      const double c = 0.5 * (p.a + p.b), hw = 0.5 * (p.b - p.a);
      for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
        const double rho = c + hw * gl.nodes[i];
        const double w = hw * gl.weights[i] * rho * std::exp(-rho * rho * inv4tau);
        if (w == 0.0) continue;
        const double yv[2] = {x[0] + rho * d[0], x[1] + rho * d[1]};
        sum += w * norm * g(std::span<const double>(yv, 2));
      }
    }
  }
  return sum;
}

}  // namespace fracheat
