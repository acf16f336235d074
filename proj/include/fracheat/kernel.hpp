// Fractional heat kernel K_{-s}, its derivatives, its mass and the sampled
// verifiers for the global, local and translation bounds.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fracheat/core.hpp"
#include "fracheat/quadrature.hpp"

namespace fracheat {

inline double x_sq(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double log_kernel(const FracParams& p, std::span<const double> x, double t) {
  if (!(t > 0.0)) throw DomainError("kernel: t must be > 0");
  require_dim(static_cast<int>(x.size()), p.n(), "kernel");
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  return std::log(p.c_ns()) - r2 / (4.0 * t) - (0.5 * p.n() + 1.0 - p.s()) * std::log(t);
}

inline double eval_kernel(const FracParams& p, std::span<const double> x, double t) {
  return std::exp(log_kernel(p, x, t));
}

inline double eval_kernel(const FracParams& p, const std::vector<double>& x, double t) {
  return eval_kernel(p, std::span<const double>(x), t);
}

struct KernelDerivOrder {
  std::vector<int> spatial;  // alpha, length n
  int time_order = 0;        // m

  int parabolic_order() const {
    int k = 2 * time_order;
    for (int a : spatial) k += a;
    return k;
  }
};

inline void check_supported(const KernelDerivOrder& o) {
  int sp = 0;
  for (int a : o.spatial) {
    if (a < 0) throw DomainError("kernel derivative: negative order");
    sp += a;
  }
  if (o.time_order < 0) throw DomainError("kernel derivative: negative order");
  if (sp > 4 || o.time_order > 2 || sp + 2 * o.time_order > 4)
    throw UnsupportedOrder("kernel derivative: supported orders are |alpha| + 2m <= 4");
}

// D^alpha d_t^m K = K * sum_j c_j x^{beta_j} t^{-q_j}.
class KernelDerivative {
 public:
  struct Term {
    std::vector<int> beta;
    int q;
    double c;
  };

  KernelDerivative(const FracParams& p, KernelDerivOrder o) : n_(p.n()), order_(std::move(o)) {
    require_dim(static_cast<int>(order_.spatial.size()), n_, "kernel derivative");
    check_supported(order_);
    const double pw = 0.5 * n_ + 1.0 - p.s();
    std::map<std::pair<std::vector<int>, int>, double> terms;
    terms[{std::vector<int>(n_, 0), 0}] = 1.0;
    auto dx = [&](int i) {
      std::map<std::pair<std::vector<int>, int>, double> next;
      for (const auto& [key, c] : terms) {
        const auto& [beta, q] = key;
        if (beta[i] > 0) {
          auto b = beta;
          b[i] -= 1;
          next[{b, q}] += c * beta[i];
        }
        auto b = beta;
        b[i] += 1;
        next[{b, q + 1}] += -0.5 * c;
      }
      terms.swap(next);
    };
    auto dt = [&]() {
      std::map<std::pair<std::vector<int>, int>, double> next;
      for (const auto& [key, c] : terms) {
        const auto& [beta, q] = key;
        next[{beta, q + 1}] += -c * (q + pw);
        for (int j = 0; j < n_; ++j) {
          auto b = beta;
          b[j] += 2;
          next[{b, q + 2}] += 0.25 * c;
        }
      }
      terms.swap(next);
    };
    for (int i = 0; i < n_; ++i)
      for (int a = 0; a < order_.spatial[i]; ++a) dx(i);
    for (int m = 0; m < order_.time_order; ++m) dt();
    for (const auto& [key, c] : terms)
      if (c != 0.0) terms_.push_back({key.first, key.second, c});
  }

  // D K / K at (x, t).
  double factor(std::span<const double> x, double t) const {
    double sum = 0.0;
    for (const auto& tm : terms_) {
      double v = tm.c * std::pow(t, -tm.q);
      for (int i = 0; i < n_; ++i)
        for (int e = 0; e < tm.beta[i]; ++e) v *= x[i];
      sum += v;
    }
    return sum;
  }

  const KernelDerivOrder& order() const { return order_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  int n_;
  KernelDerivOrder order_;
  std::vector<Term> terms_;
};

inline double eval_kernel_derivative(const FracParams& p, const KernelDerivOrder& o,
                                     std::span<const double> x, double t) {
  const KernelDerivative d(p, o);
  return eval_kernel(p, x, t) * d.factor(x, t);
}

// Spatial integral of K(., t) by tensor Gauss-Hermite in x = 2 sqrt(t) w.
inline double kernel_spatial_mass(const FracParams& p, double t, int hermite_order) {
  if (!(t > 0.0)) throw DomainError("kernel: t must be > 0");
  const auto& r = gauss_hermite(hermite_order);
  const int n = p.n();
  std::vector<double> x(n, 0.0);
  std::vector<std::size_t> idx(n, 0);
  const double scale = 2.0 * std::sqrt(t);
  double sum = 0.0;
  while (true) {
    double w = 1.0, w2 = 0.0;
    for (int i = 0; i < n; ++i) {
      x[i] = scale * r.nodes[idx[i]];
      w *= r.weights[idx[i]];
      w2 += r.nodes[idx[i]] * r.nodes[idx[i]];
    }
    sum += w * std::exp(log_kernel(p, x, t) + w2 + n * std::log(scale));
    int k = 0;
    while (k < n && ++idx[k] == r.nodes.size()) idx[k++] = 0;
    if (k == n) break;
  }
  return sum;
}

// Space-time mass of K over R^n x (0, T].
inline Estimate kernel_mass(const FracParams& p, double T, const QuadratureSpec& q) {
  q.validate();
  if (!(T > 0.0)) return {0.0, 0.0};
  const int coarse_order = std::max(8, q.hermite_order / 2);
  auto h = [&](double tau, Level lvl) {
    const int order = lvl == Level::fine ? q.hermite_order : coarse_order;
    return kernel_spatial_mass(p, tau, order) / std::pow(tau, p.s() - 1.0);
  };
  TauProblem tp;
  tp.power = p.s() - 1.0;
  tp.tau_min = std::min(q.tau_min, 1e-8 * T);
  tp.tau_end = T;
  tp.nodes = q.graded_nodes;
  const auto r = integrate_tau(tp, h);
  return {r.value(), r.err_est()};
}

// ---------------------------------------------------------------- verifiers

struct SamplePlan {
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  double t_decades = 4.0;   // |t| in [r^2 10^-d, r^2 10^d]
  double x_span = 100.0;    // |x| up to x_span * r
  double x_floor = 1e-4;    // smallest nonzero |x| / r
};

struct SamplePoint {
  std::vector<double> x;
  double t;
};

struct BoundReport {
  std::string lemma;
  std::map<std::string, double> params;
  double empirical_C = 0.0;   // at the full sample count
  double coarse_C = 0.0;      // at one tenth of it
  double relative_change = 0.0;
  bool refinement_stable = false;
  SamplePoint worst_point;
  std::size_t samples = 0;
};

namespace detail {

inline double uniform01(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * (1.0 / 9007199254740992.0);
}

inline double normal01(std::mt19937_64& g) {
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

enum class SampleDomain { outside, annulus };

// Samples (x, t) with t > 0 standing for |t| (every bound only sees |t|).
// outside: complement of the two-sided cylinder of radius r.
// annulus: twice-radius cylinder minus the unit one.
inline std::vector<SamplePoint> sample_domain(int n, double r, SampleDomain dom,
                                              std::size_t count, const SamplePlan& plan) {
  std::mt19937_64 gen(plan.seed);
  std::vector<SamplePoint> out;
  const double r2 = r * r;
  double ltlo, lthi;
  if (dom == SampleDomain::outside) {
    ltlo = std::log(r2) - plan.t_decades * std::log(10.0);
    lthi = std::log(r2) + plan.t_decades * std::log(10.0);
  } else {
    ltlo = std::log(r2) - plan.t_decades * std::log(10.0);
    lthi = std::log(4.0 * r2);
  }
  auto x_range = [&](double t, double& lo, double& hi, bool& zero_ok) {
    if (dom == SampleDomain::outside) {
      zero_ok = t >= r2;
      lo = zero_ok ? plan.x_floor * r : r;
      hi = plan.x_span * r;
    } else {
      zero_ok = t >= r2;
      lo = zero_ok ? plan.x_floor * r : r;
      hi = 2.0 * r;
    }
  };
  auto direction = [&](std::vector<double>& d) {
    double nn = 0.0;
    for (auto& v : d) {
      v = normal01(gen);
      nn += v * v;
    }
    nn = std::sqrt(nn);
    for (auto& v : d) v /= nn;
  };
  // stratified jittered grid in (log|t|, log|x|)
  const std::size_t K = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(count))));
  std::vector<double> d(n);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = 0; j < K; ++j) {
      const double lt = ltlo + (i + uniform01(gen)) / K * (lthi - ltlo);
      const double t = std::exp(lt);
      double lo, hi;
      bool z;
      x_range(t, lo, hi, z);
      const double lx = std::log(lo) + (j + uniform01(gen)) / K * (std::log(hi) - std::log(lo));
      direction(d);
      SamplePoint p{std::vector<double>(n), t};
      for (int k = 0; k < n; ++k) p.x[k] = std::exp(lx) * d[k];
      out.push_back(std::move(p));
    }
  }
  // adversarial rays: axes and orthant diagonals, on a closed deterministic lattice
  std::vector<std::vector<double>> dirs;
  for (int k = 0; k < n; ++k)
    for (double sg : {1.0, -1.0}) {
      std::vector<double> e(n, 0.0);
      e[k] = sg;
      dirs.push_back(e);
    }
  if (n > 1) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      std::vector<double> e(n);
      for (int k = 0; k < n; ++k) e[k] = ((mask >> k) & 1 ? -1.0 : 1.0) / std::sqrt(double(n));
      dirs.push_back(e);
    }
  }
  const int L = 48;
  for (const auto& e : dirs) {
    for (int i = 0; i <= L; ++i) {
      const double t = std::exp(ltlo + (lthi - ltlo) * i / L);
      double lo, hi;
      bool z;
      x_range(t, lo, hi, z);
      for (int j = 0; j <= L; ++j) {
        const double rad = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * j / L);
        SamplePoint p{std::vector<double>(n), t};
        for (int k = 0; k < n; ++k) p.x[k] = rad * e[k];
        out.push_back(std::move(p));
      }
      if (z) out.push_back(SamplePoint{std::vector<double>(n, 0.0), t});
    }
  }
  // cylinder boundary: |x| = r and |t| = r^2 edges
  for (int i = 0; i <= L; ++i) {
    const double t = std::exp(ltlo + (std::log(r2) - ltlo) * i / L);
    SamplePoint p{std::vector<double>(n, 0.0), t};
    p.x[0] = r;
    out.push_back(p);
    if (dom == SampleDomain::annulus) {
      p.x[0] = 2.0 * r;
      out.push_back(p);
    }
  }
  return out;
}

template <class Ratio>
BoundReport run_bound(std::string lemma, int n, double r, SampleDomain dom,
                      const SamplePlan& plan, Ratio&& log_ratio) {
  BoundReport rep;
  rep.lemma = std::move(lemma);
  auto sweep = [&](std::size_t count, SamplePoint* worst) {
    const auto pts = sample_domain(n, r, dom, count, plan);
    double best = -kInf;
    for (const auto& p : pts) {
      const double v = log_ratio(p);
      if (v > best) {
        best = v;
        if (worst) *worst = p;
      }
    }
    return std::exp(best);
  };
  rep.samples = plan.samples;
  rep.coarse_C = sweep(std::max<std::size_t>(1, plan.samples / 10), nullptr);
  rep.empirical_C = sweep(plan.samples, &rep.worst_point);
  rep.relative_change = rep.empirical_C > 0.0
                            ? std::abs(rep.empirical_C - rep.coarse_C) / rep.empirical_C
                            : 0.0;
  rep.refinement_stable = std::isfinite(rep.empirical_C) && rep.relative_change < 0.05;
  return rep;
}

inline double log_power(double v, double e) {
  if (e == 0.0) return 0.0;
  return e * std::log(v);
}

}  // namespace detail

// max over samples of |x|^{2a} |t|^{-b} e^{-A |x|^2/|t|} / r^{2(a-b)} outside the cylinder
inline BoundReport verify_global_bound(double a, double b, double A, double r,
                                       const SamplePlan& plan, int n = 1) {
  if (!(a >= 0.0 && a <= b && A > 0.0 && r > 0.0))
    throw DomainError("verify_global_bound: need 0 <= a <= b, A > 0, r > 0");
  auto rep = detail::run_bound("global", n, r, detail::SampleDomain::outside, plan,
                               [&](const SamplePoint& p) {
                                 const double x2 = x_sq(p.x);
                                 return detail::log_power(x2, a) - b * std::log(p.t) -
                                        A * x2 / p.t - 2.0 * (a - b) * std::log(r);
                               });
  rep.params = {{"a", a}, {"b", b}, {"A", A}, {"r", r}, {"n", n}};
  return rep;
}

// same ratio on the annulus between the radius-r and radius-2r cylinders
inline BoundReport verify_local_bound(double a, double b, double A, double r,
                                      const SamplePlan& plan, int n = 1) {
  if (!(a >= 0.0 && b >= 0.0 && A > 0.0 && r > 0.0))
    throw DomainError("verify_local_bound: need a, b >= 0, A > 0, r > 0");
  auto rep = detail::run_bound("local", n, r, detail::SampleDomain::annulus, plan,
                               [&](const SamplePoint& p) {
                                 const double x2 = x_sq(p.x);
                                 return detail::log_power(x2, a) - b * std::log(p.t) -
                                        A * x2 / p.t - 2.0 * (a - b) * std::log(r);
                               });
  rep.params = {{"a", a}, {"b", b}, {"A", A}, {"r", r}, {"n", n}};
  return rep;
}

// The 2^n points with componentwise magnitude r/n; -eta_j lies in orthant j.
inline std::vector<std::vector<double>> translation_points(int n, double r) {
  std::vector<std::vector<double>> pts;
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<double> e(n);
    for (int k = 0; k < n; ++k) e[k] = ((mask >> k) & 1 ? 1.0 : -1.0) * r / n;
    pts.push_back(e);
  }
  return pts;
}

namespace detail {
inline double log_translation_rhs(const FracParams& p, const std::vector<std::vector<double>>& eta,
                                  std::span<const double> x, double t, double r) {
  std::vector<double> logs;
  std::vector<double> y(x.size());
  for (const auto& e : eta) {
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + e[k];
    logs.push_back(log_kernel(p, y, t));
  }
  logs.push_back(log_kernel(p, x, t + r * r / p.n()));
  const double mx = *std::max_element(logs.begin(), logs.end());
  double s = 0.0;
  for (double l : logs) s += std::exp(l - mx);
  return mx + std::log(s);
}
}  // namespace detail

inline BoundReport verify_translation_bound(const FracParams& p, double r, double m, double l,
                                            const SamplePlan& plan) {
  if (!(m >= 0.0 && m <= l)) throw DomainError("verify_translation_bound: need 0 <= m <= l");
  if (!(r > 0.0)) throw DomainError("verify_translation_bound: r must be > 0");
  const auto eta = translation_points(p.n(), r);
  auto rep = detail::run_bound(
      "translation", p.n(), r, detail::SampleDomain::outside, plan, [&](const SamplePoint& q) {
        const double x2 = x_sq(q.x);
        const double lhs = detail::log_power(x2, 0.5 * m) - l * std::log(q.t) +
                           log_kernel(p, q.x, q.t);
        return lhs - (m - 2.0 * l) * std::log(r) - detail::log_translation_rhs(p, eta, q.x, q.t, r);
      });
  rep.params = {{"n", p.n()}, {"s", p.s()}, {"r", r}, {"m", m}, {"l", l}};
  return rep;
}

// Derivative variant: sum over parabolic order k of |D K| against r^{-k} times the same sum.
inline BoundReport verify_translation_derivative_bound(const FracParams& p, double r, int k,
                                                       const SamplePlan& plan) {
  if (k < 0 || k > 4) throw UnsupportedOrder("translation derivative bound: k must be in [0,4]");
  const auto eta = translation_points(p.n(), r);
  std::vector<KernelDerivative> ds;
  for (int m = 0; 2 * m <= k; ++m) {
    std::vector<std::vector<int>> sp;
    std::vector<int> cur(p.n(), 0);
    detail::enumerate_spatial(p.n(), k - 2 * m, 0, cur, sp);
    for (auto& a : sp) ds.emplace_back(p, KernelDerivOrder{a, m});
  }
  auto rep = detail::run_bound(
      "translation_derivative", p.n(), r, detail::SampleDomain::outside, plan,
      [&](const SamplePoint& q) {
        double f = 0.0;
        for (const auto& d : ds) f += std::abs(d.factor(q.x, q.t));
        if (f == 0.0) return -kInf;
        return std::log(f) + log_kernel(p, q.x, q.t) + k * std::log(r) -
               detail::log_translation_rhs(p, eta, q.x, q.t, r);
      });
  rep.params = {{"n", p.n()}, {"s", p.s()}, {"r", r}, {"k", k}};
  return rep;
}

}  // namespace fracheat
