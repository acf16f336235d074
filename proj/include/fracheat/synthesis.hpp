// Solutions from data through the kernel integral, and the pieces of the
// internal/external decomposition about a base point.
#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "fracheat/core.hpp"
#include "fracheat/fields.hpp"
#include "fracheat/heat_average.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/operator.hpp"
#include "fracheat/parallel.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

// ---------------------------------------------------------------- regions

// Times in (t_lo, t_hi], spatial annulus inner <= |y - center| < outer.
struct RegionPiece {
  double t_lo = -kInf;
  double t_hi = kInf;
  double inner = 0.0;
  double outer = kInf;
};

struct Region {
  std::vector<double> center;
  std::vector<RegionPiece> pieces;  // disjoint in time, increasing

  const RegionPiece* at(double t) const {
    for (const auto& p : pieces)
      if (t > p.t_lo && t <= p.t_hi) return &p;
    return nullptr;
  }
  double past_limit() const { return pieces.empty() ? kInf : pieces.front().t_lo; }
  double future_limit() const { return pieces.empty() ? -kInf : pieces.back().t_hi; }
  std::vector<double> time_breaks() const {
    std::vector<double> b;
    for (const auto& p : pieces) {
      if (std::isfinite(p.t_lo)) b.push_back(p.t_lo);
      if (std::isfinite(p.t_hi)) b.push_back(p.t_hi);
    }
    return b;
  }
};

inline Region everywhere(int n) {
  return Region{std::vector<double>(n, 0.0), {RegionPiece{}}};
}

inline Region cylinder_region(const SpaceTimePoint& c, double r, Sided sided) {
  if (!(r > 0.0)) throw DomainError("cylinder: radius must be > 0");
  const double hi = sided == Sided::past ? c.t : c.t + r * r;
  return Region{c.x, {RegionPiece{c.t - r * r, hi, 0.0, r}}};
}

inline Region cylinder_complement(const SpaceTimePoint& c, double r, Sided sided) {
  if (!(r > 0.0)) throw DomainError("cylinder: radius must be > 0");
  const double lo = c.t - r * r;
  const double hi = sided == Sided::past ? c.t : c.t + r * r;
  return Region{c.x, {RegionPiece{-kInf, lo, 0.0, kInf}, RegionPiece{lo, hi, r, kInf},
                      RegionPiece{hi, kInf, 0.0, kInf}}};
}

// Q_R \ Q_r, both past cylinders about c.
inline Region cylinder_difference(const SpaceTimePoint& c, double R, double r) {
  if (!(r > 0.0 && R >= r)) throw DomainError("cylinder_difference: need 0 < r <= R");
  Region g{c.x, {}};
  if (R == r) return g;
  g.pieces.push_back({c.t - R * R, c.t - r * r, 0.0, R});
  g.pieces.push_back({c.t - r * r, c.t, r, R});
  return g;
}

// ---------------------------------------------------------------- kernel integrals

struct KernelIntegral {
  double value = 0.0;
  double err_est = 0.0;
  bool negative_data = false;  // some sampled data value was < 0
};

// int int_{region} g(y, t') D G(x - y, t - t') dy dt' with D = identity when deriv is null.
// G is the kernel with the constant c_ns_inverse(), so that the operator inverts it.
inline KernelIntegral kernel_integral(const ScalarField& g, const Region& region,
                                      const SpaceTimePoint& pt, const FracParams& p,
                                      const QuadratureSpec& q,
                                      const KernelDerivative* deriv = nullptr) {
  q.validate();
  require_dim(pt.dim(), p.n(), "kernel_integral");
  require_dim(g.dim, p.n(), "kernel_integral");
  const double s = p.s();
  const double lo = std::max(g.time_lo, region.past_limit());
  const double hi = std::min(g.time_hi, region.future_limit());
  KernelIntegral out;
  if (!(pt.t > lo) || !(hi > lo)) return out;
  const double tau_star = pt.t - lo;

  double tail = 0.0;
  double tau_end = tau_star;
  if (tau_star > q.tau_max) {
    const auto* e = std::get_if<ExponentialSymbolTail>(&g.tail);
    const RegionPiece* far = region.at(pt.t - q.tau_max);
    const bool whole_far = far && far->inner <= 0.0 && far->outer == kInf &&
                           far->t_lo == -kInf;
    if (!e || deriv || !whole_far || detail::mu_of(*e) <= 0.0)
      throw NotAdmissible("kernel_integral: data needs bounded past support or a decaying symbol tail");
    const double mu = detail::mu_of(*e);
    // int_T^inf tau^{s-1} e^{-mu tau} = mu^{-s} Gamma(s, mu T)
    tail = g(pt) * std::pow(mu, -s) * boost::math::tgamma(s, mu * q.tau_max);
    tau_end = q.tau_max;
  }

  const auto hints = hints_for(g);
  bool negative = false;
  const int n = p.n();
  auto h = [&](double tau, Level lvl) {
    const double tt = pt.t - tau;
    if (!(tt > lo) || tt > hi) return 0.0;
    const RegionPiece* piece = region.at(tt);
    if (!piece) return 0.0;
    const Annulus A{region.center, piece->inner, piece->outer};
    return heat_expectation(pt.x, tau, A, hints, spatial_rule(q, lvl), 0.0,
                            [&](std::span<const double> y) {
                              const double v = g(y, tt);
                              if (v < 0.0) negative = true;
                              if (!deriv || v == 0.0) return v;
                              double z[kMaxDim];
                              for (int i = 0; i < n; ++i) z[i] = pt.x[i] - y[i];
                              return v * deriv->factor(std::span<const double>(z, n), tau);
                            });
  };
  TauProblem tp;
  tp.power = s - 1.0;
  tp.tau_min = q.tau_min;
  tp.tau_end = tau_end;
  tp.nodes = q.graded_nodes;
  tp.near_zero_power = 0.0;
  for (double b : region.time_breaks()) tp.breaks.push_back({pt.t - b, false});
  if (std::isfinite(g.time_hi)) tp.breaks.push_back({pt.t - g.time_hi, false});
  if (std::isfinite(g.time_lo)) tp.breaks.push_back({pt.t - g.time_lo, false});
  for (double k : g.kinks_t) tp.breaks.push_back({pt.t - k, true});
  const auto r = integrate_tau(tp, h);
  const double scale = 1.0 / std::tgamma(s);
  out.value = scale * (r.value() + tail);
  out.err_est = scale * r.err_est() + 1e-14 * std::abs(out.value);
  out.negative_data = negative;
  return out;
}

// u(pt) = int int f(y, t') G(x - y, t - t') dy dt'.
inline KernelIntegral synthesize_solution(const ScalarField& f, const SpaceTimePoint& pt,
                                          const FracParams& p, const QuadratureSpec& q) {
  return kernel_integral(f, everywhere(p.n()), pt, p, q);
}

// v_r: data outside the two-sided cylinder of radius r about center.
inline KernelIntegral external_part(const ScalarField& f, const SpaceTimePoint& center, double r,
                                    const SpaceTimePoint& pt, const FracParams& p,
                                    const QuadratureSpec& q) {
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("external_part: need 0 < r <= 1");
  return kernel_integral(f, cylinder_complement(center, r, Sided::two_sided), pt, p, q);
}

// w_r: data inside it.
inline KernelIntegral internal_part(const ScalarField& f, const SpaceTimePoint& center, double r,
                                    const SpaceTimePoint& pt, const FracParams& p,
                                    const QuadratureSpec& q) {
  if (!(r > 0.0 && r <= 1.0)) throw DomainError("internal_part: need 0 < r <= 1");
  return kernel_integral(f, cylinder_region(center, r, Sided::two_sided), pt, p, q);
}

// D v_r(pt) through the differentiated kernel.
inline KernelIntegral external_part_derivative(const ScalarField& f, const SpaceTimePoint& center,
                                               double r, const KernelDerivOrder& order,
                                               const SpaceTimePoint& pt, const FracParams& p,
                                               const QuadratureSpec& q) {
  const KernelDerivative d(p, order);
  return kernel_integral(f, cylinder_complement(center, r, Sided::two_sided), pt, p, q, &d);
}

// The synthesized solution as a field; every evaluation runs the quadrature.
inline ScalarField synthesized_field(const ScalarField& f, const FracParams& p,
                                     const QuadratureSpec& q) {
  ScalarField u;
  u.dim = f.dim;
  auto fp = std::make_shared<const ScalarField>(f);
  u.fn = [fp, p, q](std::span<const double> x, double t) {
    return synthesize_solution(*fp, SpaceTimePoint{{x.begin(), x.end()}, t}, p, q).value;
  };
  u.time_lo = f.time_lo;
  u.kinks_x = f.kinks_x;
  u.kinks_t = f.kinks_t;
  u.length_scale = f.length_scale;
  if (const auto* e = std::get_if<ExponentialSymbolTail>(&f.tail)) {
    u.tail = *e;
    u.smoothness_hint = f.smoothness_hint;
  } else {
    // |u| <= sup|f| int_0^{L} tau^{s-1} / Gamma(s) = sup|f| L^s / Gamma(1+s)
    const double L = f.time_hi - f.time_lo;
    const double M = f.sup_bound * std::pow(L, p.s()) / std::tgamma(1.0 + p.s());
    u.tail = BoundedTail{M};
    u.sup_bound = M;
    u.smoothness_hint = f.smoothness_hint ? std::optional<int>(std::max(*f.smoothness_hint, 1))
                                          : std::nullopt;
    if (u.smoothness_hint && *u.smoothness_hint == kAnalytic) u.smoothness_hint = kSmooth;
  }
  return u;
}

// ---------------------------------------------------------------- cutoff and J = P psi

// Smooth step: 1 on [0,1], 0 on [2, inf).
inline double smooth_step(double rho) {
  auto phi = [](double z) { return z > 0.0 ? std::exp(-1.0 / z) : 0.0; };
  const double a = phi(2.0 - rho), b = phi(rho - 1.0);
  return a / (a + b);
}

// psi(x, t) = eta(|x - x0|) eta(sqrt|t - t0|): 1 on the unit two-sided cylinder, 0 off the radius-2 one.
struct Cutoff {
  SpaceTimePoint center;
  double inner_radius = 1.0;
  double outer_radius = 2.0;

  double operator()(std::span<const double> x, double t) const {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center.x[i]) * (x[i] - center.x[i]);
    return smooth_step(std::sqrt(r2)) * smooth_step(std::sqrt(std::abs(t - center.t)));
  }
  double operator()(const SpaceTimePoint& p) const { return (*this)(p.x, p.t); }
};

inline Cutoff make_cutoff(int n = 1) { return Cutoff{SpaceTimePoint{std::vector<double>(n, 0.0), 0.0}}; }
inline Cutoff make_cutoff(const SpaceTimePoint& center) { return Cutoff{center}; }

// J = P psi, psi centered at the base point of P.
inline ScalarField cutoff_polynomial(const ParabolicPolynomial& P) {
  const Cutoff psi = make_cutoff(P.base());
  auto pp = std::make_shared<ParabolicPolynomial>(P);
  ScalarField J;
  J.dim = P.n();
  J.fn = [pp, psi](std::span<const double> x, double t) {
    const double c = psi(x, t);
    return c == 0.0 ? 0.0 : c * (*pp)(x, t);
  };
  J.tail = CompactTail{};
  J.spatial_support = SpatialBall{P.base().x, 2.0};
  J.time_lo = P.base().t - 4.0;
  J.time_hi = P.base().t + 4.0;
  J.smoothness_hint = kSmooth;
  J.length_scale = 1.0 / 8.0;
  // |P| on the radius-2 cylinder from the coefficients
  double bound = 0.0;
  for (std::size_t i = 0; i < P.indices().size(); ++i) {
    const auto& m = P.indices()[i];
    bound += std::abs(P.coeffs()[i]) / m.factorial() * std::pow(2.0, m.spatial_degree()) *
             std::pow(4.0, m.time_order());
  }
  J.sup_bound = bound;
  return J;
}

inline KernelIntegral u_P_part(const ParabolicPolynomial& P, const SpaceTimePoint& pt,
                               const FracParams& p, const QuadratureSpec& q) {
  return kernel_integral(cutoff_polynomial(P), cylinder_region(P.base(), 1.0, Sided::past), pt, p, q);
}

// W_{P,r}: J outside the past cylinder of radius r.
inline KernelIntegral w_P_part(const ParabolicPolynomial& P, double r, const SpaceTimePoint& pt,
                               const FracParams& p, const QuadratureSpec& q) {
  return kernel_integral(cutoff_polynomial(P), cylinder_complement(P.base(), r, Sided::past), pt, p, q);
}

inline KernelIntegral v_P_part(const ParabolicPolynomial& P, const SpaceTimePoint& pt,
                               const FracParams& p, const QuadratureSpec& q) {
  return kernel_integral(cutoff_polynomial(P), everywhere(P.n()), pt, p, q);
}

// ---------------------------------------------------------------- decomposition

enum class Component { u, v_r, w_r, w_1, S_r, T_r, u_P };

class DecompositionBundle {
 public:
  DecompositionBundle(ScalarField f, ParabolicPolynomial P, double r, FracParams p, QuadratureSpec q)
      : f_(std::make_shared<const ScalarField>(std::move(f))),
        P_(std::move(P)),
        r_(r),
        p_(p),
        q_(std::move(q)) {
    if (!(r_ > 0.0 && r_ <= 1.0)) throw DomainError("decompose: need 0 < r <= 1");
    require_dim(P_.n(), p_.n(), "decompose");
    require_dim(f_->dim, p_.n(), "decompose");
    J_ = std::make_shared<const ScalarField>(cutoff_polynomial(P_));
    f_minus_J_ = std::make_shared<const ScalarField>(linear_combination(1.0, *f_, -1.0, *J_));
  }

  double r() const { return r_; }
  const ParabolicPolynomial& P() const { return P_; }
  const SpaceTimePoint& center() const { return P_.base(); }
  const ScalarField& J() const { return *J_; }

  KernelIntegral eval(Component c, const SpaceTimePoint& pt, const KernelDerivative* d = nullptr) const {
    const auto& o = center();
    switch (c) {
      case Component::u: return kernel_integral(*f_, everywhere(p_.n()), pt, p_, q_, d);
      case Component::v_r:
        return kernel_integral(*f_, cylinder_complement(o, r_, Sided::two_sided), pt, p_, q_, d);
      case Component::w_r:
        return kernel_integral(*f_, cylinder_region(o, r_, Sided::two_sided), pt, p_, q_, d);
      case Component::w_1:
        return kernel_integral(*f_, cylinder_region(o, 1.0, Sided::two_sided), pt, p_, q_, d);
      case Component::S_r:
        return kernel_integral(*f_minus_J_, cylinder_region(o, r_, Sided::past), pt, p_, q_, d);
      case Component::T_r:
        return kernel_integral(*f_minus_J_, cylinder_difference(o, 1.0, r_), pt, p_, q_, d);
      case Component::u_P:
        return kernel_integral(*J_, cylinder_region(o, 1.0, Sided::past), pt, p_, q_, d);
    }
    return {};
  }

  KernelIntegral derivative(Component c, const KernelDerivOrder& order, const SpaceTimePoint& pt) const {
    const KernelDerivative d(p_, order);
    return eval(c, pt, &d);
  }

  // Lazily evaluated handle; each call runs the quadrature.
  ScalarField field(Component c) const {
    ScalarField g;
    g.dim = p_.n();
    auto self = std::make_shared<const DecompositionBundle>(*this);
    g.fn = [self, c](std::span<const double> x, double t) {
      return self->eval(c, SpaceTimePoint{{x.begin(), x.end()}, t}).value;
    };
    g.tail = BoundedTail{kInf};
    g.length_scale = f_->length_scale;
    return g;
  }

 private:
  std::shared_ptr<const ScalarField> f_;
  ParabolicPolynomial P_;
  double r_;
  FracParams p_;
  QuadratureSpec q_;
  std::shared_ptr<const ScalarField> J_;
  std::shared_ptr<const ScalarField> f_minus_J_;
};

inline DecompositionBundle decompose_internal(const ScalarField& f, const ParabolicPolynomial& P,
                                              double r, const FracParams& p, const QuadratureSpec& q) {
  return DecompositionBundle(f, P, r, p, q);
}

// ---------------------------------------------------------------- cylinder averages

struct GridAverage {
  double value = 0.0;
  double err_est = 0.0;
};

struct GridNode {
  SpaceTimePoint pt;
  int parity;  // checkerboard colour
};

// Midpoint nodes of an m x m grid over the past cylinder Q_r(c): tensor grid for
// n = 1, square grid clipped to the disc for n = 2. With spatial_only the time
// coordinate is fixed at c.t and only the spatial grid is produced.
inline std::vector<GridNode> cylinder_nodes(const SpaceTimePoint& c, double r, int m,
                                            bool spatial_only = false) {
  const int n = c.dim();
  if (n > 2) throw UnsupportedOrder("cylinder grid: n <= 2 supported");
  if (m < 2) throw DomainError("cylinder grid: need at least 2 nodes per axis");
  std::vector<GridNode> nodes;
  const int mt = spatial_only ? 1 : m;
  for (int j = 0; j < mt; ++j) {
    const double t = spatial_only ? c.t : c.t - r * r * (j + 0.5) / m;
    if (n == 1) {
      for (int i = 0; i < m; ++i)
        nodes.push_back({SpaceTimePoint{{c.x[0] + r * (-1.0 + (2.0 * i + 1.0) / m)}, t}, (i + j) & 1});
    } else {
      for (int i = 0; i < m; ++i)
        for (int k = 0; k < m; ++k) {
          const double a = -1.0 + (2.0 * i + 1.0) / m, b = -1.0 + (2.0 * k + 1.0) / m;
          if (a * a + b * b >= 1.0) continue;
          nodes.push_back({SpaceTimePoint{{c.x[0] + r * a, c.x[1] + r * b}, t}, (i + j + k) & 1});
        }
    }
  }
  return nodes;
}

// Midpoint average of |g| over the past cylinder Q_r(c). The spread between the
// two checkerboard halves is the discretization indicator.
template <class G>
GridAverage cylinder_average(const SpaceTimePoint& c, double r, int m, int threads, G&& g) {
  const auto nodes = cylinder_nodes(c, r, m);
  std::vector<double> vals(nodes.size()), errs(nodes.size());
  parallel_for(nodes.size(), threads, [&](std::size_t i) {
    const auto e = g(nodes[i].pt);
    vals[i] = std::abs(e.value);
    errs[i] = e.err_est;
  });
  double sum[2] = {0.0, 0.0}, err = 0.0;
  std::size_t cnt[2] = {0, 0};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    sum[nodes[i].parity] += vals[i];
    ++cnt[nodes[i].parity];
    err += errs[i];
  }
  GridAverage out;
  const std::size_t N = cnt[0] + cnt[1];
  if (N == 0) return out;
  out.value = (sum[0] + sum[1]) / N;
  const double a0 = cnt[0] ? sum[0] / cnt[0] : out.value, a1 = cnt[1] ? sum[1] / cnt[1] : out.value;
  out.err_est = 0.5 * std::abs(a0 - a1) + err / N;
  return out;
}

struct DecayRow {
  double r = 0.0;
  double avg_abs_S = 0.0;
  double err_est = 0.0;
  double normalized = 0.0;  // avg / r^{k + alpha + 2s}
};

struct DecayProbeOptions {
  int grid = 16;
  int threads = 1;
};

inline std::vector<DecayRow> s_decay_probe(const ScalarField& f, const ParabolicPolynomial& P, int k,
                                           double alpha, const std::vector<double>& radii,
                                           const FracParams& p, const QuadratureSpec& q,
                                           const DecayProbeOptions& opt = {}) {
  std::vector<DecayRow> rows;
  const double expo = k + alpha + 2.0 * p.s();
  for (double r : radii) {
    if (!(r > 0.0 && r <= 0.5)) throw DomainError("s_decay_probe: radii must lie in (0, 1/2]");
    const DecompositionBundle b(f, P, r, p, q);
    const auto avg = cylinder_average(P.base(), r, opt.grid, opt.threads,
                                      [&](const SpaceTimePoint& pt) {
                                        const auto e = b.eval(Component::S_r, pt);
                                        return Estimate{e.value, e.err_est};
                                      });
    rows.push_back({r, avg.value, avg.err_est, avg.value / std::pow(r, expo)});
  }
  return rows;
}

// Least-squares slope of log(avg) against log(r) over rows with positive averages.
inline double decay_slope(const std::vector<DecayRow>& rows) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (const auto& row : rows) {
    if (!(row.avg_abs_S > 0.0)) continue;
    const double x = std::log(row.r), y = std::log(row.avg_abs_S);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) return std::numeric_limits<double>::quiet_NaN();
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

}  // namespace fracheat
