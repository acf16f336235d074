// Pointwise evaluation of the fully fractional heat operator and its
// stationary and space-independent reductions.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "fracheat/core.hpp"
#include "fracheat/heat_average.hpp"
#include "fracheat/parallel.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

inline double symbol_oracle(double lambda, std::span<const double> k, double s) {
  if (lambda < 0.0) throw DomainError("symbol_oracle: lambda must be >= 0");
  double mu = lambda;
  for (double v : k) mu += v * v;
  return std::pow(mu, s);
}

inline double symbol_oracle(double lambda, const std::vector<double>& k, double s) {
  return symbol_oracle(lambda, std::span<const double>(k), s);
}

namespace detail {

// int_T^inf tau^{-1-s} (1 - e^{-mu tau}) d tau
inline double symbol_increment_tail(double mu, double T, double s) {
  if (mu <= 0.0) return 0.0;
  const double x = mu * T;
  return (std::pow(T, -s) * -std::expm1(-x) + std::pow(mu, s) * boost::math::tgamma(1.0 - s, x)) /
         s;
}

inline TailMode resolve_tail(const ScalarField& u, const QuadratureSpec& q) {
  const bool causal = std::isfinite(u.time_lo);
  const bool symbol = std::holds_alternative<ExponentialSymbolTail>(u.tail);
  if (!q.tail_mode) {
    if (causal) return TailMode::analytic_compact;
    if (symbol) return TailMode::analytic_symbol;
    return TailMode::bound_only;
  }
  if (*q.tail_mode == TailMode::analytic_compact && !causal)
    throw DomainError("tail_mode analytic_compact needs a field with bounded past support");
  if (*q.tail_mode == TailMode::analytic_symbol && !symbol)
    throw DomainError("tail_mode analytic_symbol needs an exponential_symbol field");
  return *q.tail_mode;
}

// sup |u| over times <= t_cap, from the tail metadata
inline double past_bound(const ScalarField& u, double t_cap) {
  if (const auto* e = std::get_if<ExponentialSymbolTail>(&u.tail))
    return std::exp(e->lambda * t_cap);
  if (const auto* b = std::get_if<BoundedTail>(&u.tail)) return b->bound;
  return u.sup_bound;
}

inline double mu_of(const ExponentialSymbolTail& e) {
  double mu = e.lambda;
  for (double v : e.k) mu += v * v;
  return mu;
}

}  // namespace detail

// (d_t - Delta)^s u at pt, in the form
// |Gamma(-s)|^{-1} int_0^inf tau^{-1-s} (u(pt) - E[u(x - sqrt(2 tau) xi, t - tau)]) d tau.
inline Estimate apply_fully_fractional(const ScalarField& u, const SpaceTimePoint& pt,
                                       const FracParams& p, const QuadratureSpec& q) {
  q.validate();
  require_dim(pt.dim(), p.n(), "apply_fully_fractional");
  require_dim(u.dim, p.n(), "apply_fully_fractional");
  if (!check_slowly_increasing(u, p, pt.t))
    throw NotAdmissible("apply_fully_fractional: field is not slowly increasing");
  const double s = p.s();
  const double c0 = u(pt);
  const TailMode mode = detail::resolve_tail(u, q);
  const double tau_star = pt.t - u.time_lo;
  if (tau_star <= 0.0) return {0.0, 0.0};

  const auto hints = hints_for(u);
  const Annulus whole;
  auto h = [&](double tau, Level lvl) {
    const double tt = pt.t - tau;
    const auto rule = spatial_rule(q, lvl);
    const double e = heat_expectation(pt.x, tau, whole, hints, rule, c0,
                                      [&](std::span<const double> y) { return c0 - u(y, tt); });
    return e;
  };
  TauProblem tp;
  tp.power = -1.0 - s;
  tp.tau_min = q.tau_min;
  tp.tau_end = std::min(tau_star, q.tau_max);
  tp.nodes = q.graded_nodes;
  tp.near_zero_power = 1.0;
  if (std::isfinite(u.time_hi) && pt.t - u.time_hi > 0.0) tp.breaks.push_back({pt.t - u.time_hi, false});
  for (double k : u.kinks_t)
    if (pt.t - k > 0.0) tp.breaks.push_back({pt.t - k, true});
  const auto r = integrate_tau(tp, h);

  double tail = 0.0, tail_err = 0.0;
  if (tau_star <= q.tau_max) {
    tail = c0 * std::pow(tau_star, -s) / s;
  } else if (mode == TailMode::analytic_symbol) {
    const auto& e = std::get<ExponentialSymbolTail>(u.tail);
    tail = c0 * detail::symbol_increment_tail(detail::mu_of(e), q.tau_max, s);
  } else {
    tail = c0 * std::pow(q.tau_max, -s) / s;
    tail_err = detail::past_bound(u, pt.t - q.tau_max) * std::pow(q.tau_max, -s) / s;
  }
  const double scale = 1.0 / p.abs_gamma_neg_s();
  const double value = scale * (r.value() + tail);
  const double err = scale * (r.err_est() + tail_err) + 1e-14 * std::abs(value);
  return {value, err};
}

// (-Delta)^s u at x with c_{n,s} = 4^s Gamma(n/2+s) / (pi^{n/2} |Gamma(-s)|), in
// symmetrized polar form int (2u(x) - u(x+rho th) - u(x-rho th)) rho^{-1-2s}.
inline Estimate apply_fractional_laplacian(const ScalarField& u, std::span<const double> x,
                                           const FracParams& p, const QuadratureSpec& q) {
  q.validate();
  const int n = p.n();
  require_dim(static_cast<int>(x.size()), n, "apply_fractional_laplacian");
  require_dim(u.dim, n, "apply_fractional_laplacian");
  if (n > 2) throw UnsupportedOrder("apply_fractional_laplacian: n <= 2 supported");
  const double s = p.s();
  const double cns = std::pow(4.0, s) * std::tgamma(0.5 * n + s) /
                     (std::pow(std::numbers::pi, 0.5 * n) * p.abs_gamma_neg_s());
  const double t0 = 0.0;
  const double ux = u(x, t0);
  const double h = std::min(u.length_scale, 1.0);
  const int dirs = n == 1 ? 1 : q.angular_nodes / 2;
  // symmetric pairs of directions over a half circle
  auto radial = [&](double rho, int order_dirs) {
    double sum = 0.0;
    for (int j = 0; j < order_dirs; ++j) {
      double d[2] = {1.0, 0.0};
      if (n == 2) {
        const double th = std::numbers::pi * (j + 0.5) / order_dirs;
        d[0] = std::cos(th);
        d[1] = std::sin(th);
      }
      double yp[2], ym[2];
      for (int i = 0; i < n; ++i) {
        yp[i] = x[i] + rho * d[i];
        ym[i] = x[i] - rho * d[i];
      }
      sum += 2.0 * ux - u(std::span<const double>(yp, n), t0) - u(std::span<const double>(ym, n), t0);
    }
    return sum * (n == 1 ? 1.0 : std::numbers::pi / order_dirs);
  };
  const double rho_min = std::sqrt(q.tau_min);
  // graded radial mesh: dyadic bands, each split into panels no wider than h
  std::vector<Panel> panels;
  for (double a = rho_min; a < q.rho_max; a *= 2.0) {
    const double b = std::min(2.0 * a, q.rho_max);
    detail::add_panels(a, b, false, false, std::max(h, 1e-300), panels);
  }
  const auto& gf = gauss_legendre(q.panel_order);
  const auto& gc = gauss_legendre(std::max(3, q.panel_order / 2));
  const int dirs_c = n == 1 ? 1 : std::max(4, dirs / 2);
  double fine = 0.0, coarse = 0.0, mag = 0.0;
  for (const auto& pan : panels) {
    const double c = 0.5 * (pan.a + pan.b), hw = 0.5 * (pan.b - pan.a);
    for (std::size_t i = 0; i < gf.nodes.size(); ++i) {
      const double rho = c + hw * gf.nodes[i];
      const double v = hw * gf.weights[i] * std::pow(rho, -1.0 - 2.0 * s) * radial(rho, dirs);
      fine += v;
      mag += std::abs(v);
    }
    for (std::size_t i = 0; i < gc.nodes.size(); ++i) {
      const double rho = c + hw * gc.nodes[i];
      coarse += hw * gc.weights[i] * std::pow(rho, -1.0 - 2.0 * s) * radial(rho, dirs_c);
    }
  }
  // [0, rho_min]: D(rho) ~ rho^p fitted from two samples
  const double d1 = radial(rho_min, dirs), d2 = radial(0.5 * rho_min, dirs);
  double pw = 2.0;
  if (d1 != 0.0 && d2 != 0.0 && d1 / d2 > 0.0) pw = std::clamp(std::log2(d1 / d2), 2.0 * s + 0.05, 4.0);
  const double near = d1 * std::pow(rho_min, -2.0 * s) / (pw - 2.0 * s);
  // tail: the 2u(x) part exactly, the rest bounded by sup |u|
  const double sphere = n == 1 ? 1.0 : std::numbers::pi;
  const double tail = sphere * 2.0 * ux * std::pow(q.rho_max, -2.0 * s) / (2.0 * s);
  const double M = detail::past_bound(u, 0.0);
  const double tail_err = sphere * 2.0 * M * std::pow(q.rho_max, -2.0 * s) / (2.0 * s);
  const double value = cns * (fine + near + tail);
  const double err = cns * (std::abs(fine - coarse) + tail_err + 1e-14 * mag) + 1e-14 * std::abs(value);
  return {value, err};
}

// Marchaud derivative C_s int_0^inf (u(t) - u(t - tau)) tau^{-1-s} d tau, C_s = s / Gamma(1-s).
// u is read at x = () when dim 0, otherwise at the origin.
inline Estimate apply_marchaud(const ScalarField& u, double t, double s, const QuadratureSpec& q) {
  q.validate();
  if (!(s > 0.0 && s < 1.0)) throw DomainError("apply_marchaud: s must lie in (0,1)");
  const std::vector<double> x0(u.dim, 0.0);
  auto at = [&](double tt) { return u(std::span<const double>(x0), tt); };
  const double c0 = at(t);
  const double tau_star = t - u.time_lo;
  if (tau_star <= 0.0) return {0.0, 0.0};
  TauProblem tp;
  tp.power = -1.0 - s;
  tp.tau_min = q.tau_min;
  tp.tau_end = std::min(tau_star, q.tau_max);
  tp.nodes = q.graded_nodes;
  tp.near_zero_power = 1.0;
  if (std::isfinite(u.time_hi) && t - u.time_hi > 0.0) tp.breaks.push_back({t - u.time_hi, false});
  for (double k : u.kinks_t)
    if (t - k > 0.0) tp.breaks.push_back({t - k, true});
  const auto r = integrate_tau(tp, [&](double tau, Level) { return c0 - at(t - tau); });
  double tail = 0.0, tail_err = 0.0;
  if (tau_star <= q.tau_max) {
    tail = c0 * std::pow(tau_star, -s) / s;
  } else if (const auto* e = std::get_if<ExponentialSymbolTail>(&u.tail)) {
    tail = c0 * detail::symbol_increment_tail(e->lambda, q.tau_max, s);
  } else {
    tail = c0 * std::pow(q.tau_max, -s) / s;
    tail_err = detail::past_bound(u, t - q.tau_max) * std::pow(q.tau_max, -s) / s;
  }
  const double cs = s / std::tgamma(1.0 - s);
  const double value = cs * (r.value() + tail);
  return {value, cs * (r.err_est() + tail_err) + 1e-14 * std::abs(value)};
}

inline std::vector<Estimate> apply_batch(const ScalarField& u, const std::vector<SpaceTimePoint>& pts,
                                         const FracParams& p, const QuadratureSpec& q,
                                         int threads = 1) {
  std::vector<Estimate> out(pts.size());
  parallel_for(pts.size(), threads,
               [&](std::size_t i) { out[i] = apply_fully_fractional(u, pts[i], p, q); });
  return out;
}

}  // namespace fracheat
