// Gauss rules, the quadrature specification and the graded tau integrator.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "fracheat/core.hpp"

namespace fracheat {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

namespace detail {

inline QuadratureRule make_gauss_legendre(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1.0);
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return r;
}

// Physicists' Hermite weight e^{-w^2}.
inline QuadratureRule make_gauss_hermite(int n) {
  QuadratureRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  double z = 0.0;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0)
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1)
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2)
      z = 1.86 * z - 0.86 * r.nodes[0];
    else if (i == 3)
      z = 1.91 * z - 0.91 * r.nodes[1];
    else
      z = 2.0 * z - r.nodes[i - 2];
    double pp = 0.0;
    for (int it = 0; it < 200; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-14) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = r.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  return r;
}

}  // namespace detail

inline const QuadratureRule& gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: order must be >= 1");
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_legendre(n)).first;
  return it->second;
}

inline const QuadratureRule& gauss_hermite(int n) {
  if (n < 1) throw DomainError("gauss_hermite: order must be >= 1");
  static std::mutex mu;
  static std::map<int, QuadratureRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::make_gauss_hermite(n)).first;
  return it->second;
}

enum class TailMode { analytic_compact, analytic_symbol, bound_only };

inline std::string to_string(TailMode m) {
  switch (m) {
    case TailMode::analytic_compact: return "analytic_compact";
    case TailMode::analytic_symbol: return "analytic_symbol";
    case TailMode::bound_only: return "bound_only";
  }
  return "?";
}

struct QuadratureSpec {
  double tau_min = 1e-8;
  double tau_max = 1e4;
  int graded_nodes = 16;   // Gauss-Legendre nodes per dyadic tau band
  int hermite_order = 40;
  int panel_order = 10;    // Gauss-Legendre nodes per spatial panel
  int angular_nodes = 64;  // n = 2 polar rule
  double rho_max = 1e4;    // radial truncation of the stationary reduction
  std::optional<TailMode> tail_mode;  // empty: chosen from the field's tail class

  void validate() const {
    if (!(tau_min > 0.0 && tau_min < tau_max)) throw DomainError("quad: need 0 < tau_min < tau_max");
    if (graded_nodes < 4) throw DomainError("quad: graded_nodes must be >= 4");
    if (hermite_order < 8) throw DomainError("quad: hermite_order must be >= 8");
    if (panel_order < 4) throw DomainError("quad: panel_order must be >= 4");
    if (angular_nodes < 8) throw DomainError("quad: angular_nodes must be >= 8");
    if (!(rho_max > std::sqrt(tau_min))) throw DomainError("quad: rho_max too small");
  }
};

struct Estimate {
  double value = 0.0;
  double err_est = 0.0;
};

enum class Level { fine, coarse };

struct Panel {
  double a, b;
};

namespace detail {

// Panels of width <= hmax on [a,b], geometrically refined toward graded ends.
inline void add_panels(double a, double b, bool grade_a, bool grade_b, double hmax,
                       std::vector<Panel>& out) {
  if (!(b > a)) return;
  if (grade_a && grade_b) {
    const double m = 0.5 * (a + b);
    add_panels(a, m, true, false, hmax, out);
    add_panels(m, b, false, true, hmax, out);
    return;
  }
  constexpr double q = 0.15;
  const double len = b - a;
  if (grade_a || grade_b) {
    const double first = std::min(len, hmax);
    const int levels = static_cast<int>(std::ceil(std::log(1e-12) / std::log(q)));
    std::vector<double> pts;
    pts.push_back(0.0);
    for (int j = levels; j >= 0; --j) pts.push_back(first * std::pow(q, j));
    if (grade_a) {
      for (std::size_t i = 0; i + 1 < pts.size(); ++i) out.push_back({a + pts[i], a + pts[i + 1]});
      add_panels(a + first, b, false, false, hmax, out);
    } else {
      add_panels(a, b - first, false, false, hmax, out);
      for (std::size_t i = pts.size() - 1; i > 0; --i) out.push_back({b - pts[i], b - pts[i - 1]});
    }
    return;
  }
  const int m = std::max(1, static_cast<int>(std::ceil(len / hmax - 1e-9)));
  const double h = len / m;
  for (int i = 0; i < m; ++i) out.push_back({a + i * h, i + 1 == m ? b : a + (i + 1) * h});
}

}  // namespace detail

struct TauBreak {
  double tau;
  bool graded;
};

struct TauProblem {
  double power = 0.0;        // weight tau^power
  double tau_min = 1e-8;
  double tau_end = 1.0;
  int nodes = 16;            // fine nodes per panel; coarse uses half
  std::vector<TauBreak> breaks;
  double near_zero_power = 0.0;  // assumed h(tau) ~ tau^p near 0 when the fit fails
};

struct TauResult {
  double fine = 0.0;
  double coarse = 0.0;
  double near_zero = 0.0;
  double near_zero_err = 0.0;
  double magnitude = 0.0;  // sum of |contributions|, for the roundoff floor

  double value() const { return fine + near_zero; }
  double err_est() const {
    return std::abs(fine - coarse) + near_zero_err + 1e-14 * magnitude;
  }
};

inline std::vector<Panel> tau_panels(const TauProblem& p) {
  std::vector<double> pts;
  std::vector<char> graded;
  pts.push_back(p.tau_min);
  graded.push_back(0);
  for (double e = 2.0 * p.tau_min; e < p.tau_end; e *= 2.0) {
    pts.push_back(e);
    graded.push_back(0);
  }
  pts.push_back(p.tau_end);
  graded.push_back(0);
  for (const auto& b : p.breaks) {
    if (!(b.tau > p.tau_min && b.tau < p.tau_end)) continue;
    pts.push_back(b.tau);
    graded.push_back(b.graded ? 2 : 1);
  }
  std::vector<std::size_t> order(pts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return pts[i] < pts[j]; });
  std::vector<double> sp;
  std::vector<char> sg;
  for (auto i : order) {
    if (!sp.empty() && pts[i] - sp.back() <= 1e-14 * std::max(1.0, pts[i])) {
      sg.back() = std::max(sg.back(), graded[i]);
      continue;
    }
    sp.push_back(pts[i]);
    sg.push_back(graded[i]);
  }
  std::vector<Panel> out;
  for (std::size_t i = 0; i + 1 < sp.size(); ++i) {
    const bool ga = sg[i] == 2, gb = sg[i + 1] == 2;
    if (!ga && !gb) {
      out.push_back({sp[i], sp[i + 1]});
    } else {
      detail::add_panels(sp[i], sp[i + 1], ga, gb, sp[i + 1] - sp[i], out);
    }
  }
  return out;
}

// Integrates tau^power h(tau) over (0, tau_end]: Gauss-Legendre on a dyadic
// mesh above tau_min, a fitted power law below it.
template <class H>
TauResult integrate_tau(const TauProblem& p, H&& h) {
  TauResult r;
  if (!(p.tau_end > 0.0)) return r;
  TauProblem q = p;
  q.tau_min = std::min(p.tau_min, 0.5 * p.tau_end);
  const auto panels = tau_panels(q);
  const auto& fine = gauss_legendre(q.nodes);
  const auto& coarse = gauss_legendre(std::max(2, q.nodes / 2));
  for (const auto& pan : panels) {
    const double c = 0.5 * (pan.a + pan.b), hw = 0.5 * (pan.b - pan.a);
    for (std::size_t i = 0; i < fine.nodes.size(); ++i) {
      const double tau = c + hw * fine.nodes[i];
      const double v = hw * fine.weights[i] * std::pow(tau, q.power) * h(tau, Level::fine);
      r.fine += v;
      r.magnitude += std::abs(v);
    }
    for (std::size_t i = 0; i < coarse.nodes.size(); ++i) {
      const double tau = c + hw * coarse.nodes[i];
      r.coarse += hw * coarse.weights[i] * std::pow(tau, q.power) * h(tau, Level::coarse);
    }
  }
  const double t0 = q.tau_min;
  const double h1 = h(t0, Level::fine), h2 = h(0.5 * t0, Level::fine),
               h4 = h(0.25 * t0, Level::fine);
  // keep the fitted power strictly above the integrability limit, but below the expected one
  const double limit = -(q.power + 1.0);
  const double floor_p = limit + std::min(0.05, 0.5 * std::max(q.near_zero_power - limit, 1e-3));
  auto fit = [&](double a, double b) {
    if (a == 0.0 && b == 0.0) return q.near_zero_power;
    if (!(a / b > 0.0)) return q.near_zero_power;
    return std::clamp(std::log2(a / b), floor_p, 4.0);
  };
  auto piece = [&](double hv, double pw, double at) {
    return hv * std::pow(at, q.power + 1.0) / (q.power + 1.0 + pw);
  };
  const double p1 = fit(h1, h2), p2 = fit(h2, h4);
  r.near_zero = piece(h1, p1, t0);
  r.near_zero_err = std::abs(piece(h1, p1, t0) - piece(h1, p2, t0));
  r.magnitude += std::abs(r.near_zero);
  return r;
}

}  // namespace fracheat
