// Pointwise regularity: nu profiles, polynomial fits, dyadic-sum classification,
// exponent estimates, the quotient g and the Taylor-jet iteration.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fracheat/core.hpp"
#include "fracheat/fields.hpp"
#include "fracheat/kernel.hpp"
#include "fracheat/parallel.hpp"
#include "fracheat/quadrature.hpp"
#include "fracheat/synthesis.hpp"

namespace fracheat {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Value plus error indicator at a point; lets quadrature-backed functions report their error.
using PointEvaluator = std::function<Estimate(const SpaceTimePoint&)>;

inline PointEvaluator evaluator(const ScalarField& f) {
  auto fp = std::make_shared<const ScalarField>(f);
  return [fp](const SpaceTimePoint& pt) { return Estimate{(*fp)(pt), 0.0}; };
}

// u = synthesize(f) with its quadrature error.
inline PointEvaluator solution_evaluator(const ScalarField& f, const FracParams& p,
                                         const QuadratureSpec& q) {
  auto fp = std::make_shared<const ScalarField>(f);
  return [fp, p, q](const SpaceTimePoint& pt) {
    const auto r = synthesize_solution(*fp, pt, p, q);
    return Estimate{r.value, r.err_est};
  };
}

// ---------------------------------------------------------------- least squares

namespace detail {

struct LinearFit {
  std::vector<double> coef;
  double rss = 0.0;
  int rank = 0;
};

inline LinearFit lstsq(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  LinearFit f;
  f.rank = static_cast<int>(qr.rank());
  const Eigen::VectorXd c = qr.solve(y);
  f.coef.assign(c.data(), c.data() + c.size());
  f.rss = (A * c - y).squaredNorm();
  return f;
}

// y = c0 + c1 x
inline LinearFit line_fit(const std::vector<double>& x, const std::vector<double>& y) {
  Eigen::MatrixXd A(x.size(), 2);
  Eigen::VectorXd b(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    b(i) = y[i];
  }
  return lstsq(A, b);
}

}  // namespace detail

// ---------------------------------------------------------------- nu profiles

enum class NormMode { L1_average, sup };

inline std::string to_string(NormMode m) { return m == NormMode::sup ? "sup" : "L1_average"; }

struct NuRow {
  double r = 0.0;
  double nu = 0.0;       // running sup over the listed radii <= r
  double err_est = 0.0;
  double raw = 0.0;      // the average (or max) on Q_r itself
};

struct NuProfile {
  SpaceTimePoint base_point;
  ParabolicPolynomial P;
  NormMode norm_mode = NormMode::L1_average;
  bool spatial_offsets = false;  // sampled at t = t0 over the ball only
  std::vector<NuRow> rows;       // radii strictly decreasing
};

struct NuOptions {
  int grid = 16;
  int threads = 1;
  bool spatial_offsets = false;
};

// r0, r0 q, r0 q^2, ...
inline std::vector<double> geometric_radii(double r0, int count, double ratio = 0.5) {
  if (!(r0 > 0.0) || count < 1 || !(ratio > 0.0 && ratio < 1.0))
    throw DomainError("geometric_radii: need r0 > 0, count >= 1, ratio in (0,1)");
  std::vector<double> r(count);
  for (int i = 0; i < count; ++i) r[i] = r0 * std::pow(ratio, i);
  return r;
}

inline void check_radii(const std::vector<double>& radii, const char* what) {
  if (radii.empty()) throw DomainError(std::string(what) + ": empty radius list");
  for (std::size_t i = 0; i < radii.size(); ++i) {
    if (!(radii[i] > 0.0)) throw DomainError(std::string(what) + ": radii must be > 0");
    if (i > 0 && !(radii[i] < radii[i - 1]))
      throw DomainError(std::string(what) + ": radii must be strictly decreasing");
  }
}

// Builds a profile from precomputed (r, raw) pairs, enforcing the running sup.
inline NuProfile profile_from_values(const SpaceTimePoint& base, const ParabolicPolynomial& P,
                                     const std::vector<double>& radii,
                                     const std::vector<double>& raw,
                                     const std::vector<double>& err, NormMode mode) {
  check_radii(radii, "nu_profile");
  if (raw.size() != radii.size() || (!err.empty() && err.size() != radii.size()))
    throw DimensionMismatch("nu_profile: value and radius lists differ in length");
  NuProfile prof{base, P, mode, false, {}};
  prof.rows.resize(radii.size());
  double best = 0.0, best_err = 0.0;
  for (std::size_t j = radii.size(); j-- > 0;) {
    if (!(raw[j] >= 0.0)) throw DomainError("nu_profile: values must be >= 0");
    const double e = err.empty() ? 0.0 : err[j];
    if (raw[j] >= best) {
      best = raw[j];
      best_err = e;
    }
    prof.rows[j] = {radii[j], best, best_err, raw[j]};
  }
  return prof;
}

// nu(R) = sup over listed r <= R of avg_{Q_r}|f - P| (or of the grid max in sup mode).
inline NuProfile nu_profile(const PointEvaluator& f, const SpaceTimePoint& base,
                            const ParabolicPolynomial& P, const std::vector<double>& radii,
                            NormMode mode, const NuOptions& opt = {}) {
  check_radii(radii, "nu_profile");
  require_dim(P.n(), base.dim(), "nu_profile");
  std::vector<std::vector<GridNode>> grids;
  std::vector<std::pair<std::size_t, std::size_t>> flat;
  for (std::size_t j = 0; j < radii.size(); ++j) {
    grids.push_back(cylinder_nodes(base, radii[j], opt.grid, opt.spatial_offsets));
    for (std::size_t i = 0; i < grids.back().size(); ++i) flat.push_back({j, i});
  }
  std::vector<std::vector<double>> dev(radii.size()), errs(radii.size());
  for (std::size_t j = 0; j < radii.size(); ++j) {
    dev[j].resize(grids[j].size());
    errs[j].resize(grids[j].size());
  }
  std::vector<std::string> failures(radii.size());
  std::mutex fail_mu;
  parallel_for(flat.size(), opt.threads, [&](std::size_t idx) {
    const auto [j, i] = flat[idx];
    const auto& pt = grids[j][i].pt;
    try {
      const auto e = f(pt);
      dev[j][i] = std::abs(e.value - P(pt.x, pt.t));
      errs[j][i] = e.err_est;
      if (!std::isfinite(dev[j][i])) throw DomainError("non-finite value");
    } catch (const std::exception& ex) {
      std::lock_guard<std::mutex> lock(fail_mu);
      if (failures[j].empty()) failures[j] = ex.what();
    }
  });
  for (std::size_t j = 0; j < radii.size(); ++j)
    if (!failures[j].empty())
      throw DomainError("nu_profile: evaluation failed at r = " + std::to_string(radii[j]) + ": " +
                        failures[j]);

  std::vector<double> raw(radii.size()), err(radii.size());
  for (std::size_t j = 0; j < radii.size(); ++j) {
    const auto& g = grids[j];
    double sum[2] = {0, 0}, mx[2] = {0, 0}, esum = 0.0, emax = 0.0;
    std::size_t cnt[2] = {0, 0};
    for (std::size_t i = 0; i < g.size(); ++i) {
      const int c = g[i].parity;
      sum[c] += dev[j][i];
      mx[c] = std::max(mx[c], dev[j][i]);
      ++cnt[c];
      esum += errs[j][i];
      emax = std::max(emax, errs[j][i]);
    }
    const double N = static_cast<double>(cnt[0] + cnt[1]);
    if (mode == NormMode::L1_average) {
      raw[j] = (sum[0] + sum[1]) / N;
      const double a0 = cnt[0] ? sum[0] / cnt[0] : raw[j], a1 = cnt[1] ? sum[1] / cnt[1] : raw[j];
      err[j] = 0.5 * std::abs(a0 - a1) + esum / N;
    } else {
      raw[j] = std::max(mx[0], mx[1]);
      err[j] = std::abs(mx[0] - mx[1]) + emax;
    }
  }
  auto prof = profile_from_values(base, P, radii, raw, err, mode);
  prof.spatial_offsets = opt.spatial_offsets;
  return prof;
}

inline NuProfile nu_profile(const ScalarField& f, const SpaceTimePoint& base,
                            const ParabolicPolynomial& P, const std::vector<double>& radii,
                            NormMode mode, const NuOptions& opt = {}) {
  require_dim(f.dim, base.dim(), "nu_profile");
  return nu_profile(evaluator(f), base, P, radii, mode, opt);
}

// ---------------------------------------------------------------- polynomial fits

struct FitOptions {
  int grid = 12;    // nodes per axis in each shell
  int shells = 4;   // Q_R, Q_{R/2}, ...
  int threads = 1;
};

// Weighted least squares over the grids of Q_{R 2^-j}, j < shells; shell j carries
// weight 2^{j(k+1)}. Columns are monomials scaled to the fit radius.
inline ParabolicPolynomial fit_polynomial(const PointEvaluator& f, const SpaceTimePoint& base, int k,
                                          double fit_radius, NormMode mode,
                                          const FitOptions& opt = {}) {
  (void)mode;  // least squares in both modes; the mode only selects how nu is measured later
  if (k < 0) throw DomainError("fit_polynomial: k must be >= 0");
  if (!(fit_radius > 0.0)) throw DomainError("fit_polynomial: fit_radius must be > 0");
  if (opt.shells < 1) throw DomainError("fit_polynomial: need at least one shell");
  ParabolicPolynomial P(k, base);
  const auto& idx = P.indices();
  std::vector<GridNode> nodes;
  std::vector<double> w;
  for (int j = 0; j < opt.shells; ++j) {
    const double R = fit_radius * std::pow(0.5, j);
    auto g = cylinder_nodes(base, R, opt.grid);
    const double wj = std::sqrt(std::pow(2.0, j * (k + 1.0)) / g.size());
    for (auto& nd : g) {
      nodes.push_back(std::move(nd));
      w.push_back(wj);
    }
  }
  std::vector<double> vals(nodes.size());
  parallel_for(nodes.size(), opt.threads, [&](std::size_t i) { vals[i] = f(nodes[i].pt).value; });
  const int n = base.dim();
  Eigen::MatrixXd A(nodes.size(), idx.size());
  Eigen::VectorXd y(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& pt = nodes[i].pt;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const auto& sg = idx[c].sigma;
      double m = 1.0 / idx[c].factorial();
      for (int d = 0; d < n; ++d) m *= std::pow((pt.x[d] - base.x[d]) / fit_radius, sg[d]);
      m *= std::pow((pt.t - base.t) / (fit_radius * fit_radius), sg.back());
      A(i, c) = w[i] * m;
    }
    y(i) = w[i] * vals[i];
  }
  const auto fit = detail::lstsq(A, y);
  if (fit.rank < static_cast<int>(idx.size()))
    throw DomainError("fit_polynomial: rank-deficient system (grid too coarse for degree " +
                      std::to_string(k) + ")");
  for (std::size_t c = 0; c < idx.size(); ++c)
    P.coeffs()[c] = fit.coef[c] / std::pow(fit_radius, idx[c].parabolic_degree());
  return P;
}

inline ParabolicPolynomial fit_polynomial(const ScalarField& f, const SpaceTimePoint& base, int k,
                                          double fit_radius, NormMode mode,
                                          const FitOptions& opt = {}) {
  require_dim(f.dim, base.dim(), "fit_polynomial");
  return fit_polynomial(evaluator(f), base, k, fit_radius, mode, opt);
}

struct FitSweep {
  std::vector<double> radii;
  std::vector<ParabolicPolynomial> fits;
  // drift[j][i]: sum over degree-j coefficients of |a(R_i) - a(R_{i+1})|
  std::vector<std::vector<double>> drift;
  std::vector<double> drift_exponent;  // log-log slope of drift[j] against R; NaN when it vanishes
  bool stable = true;
};

// Fits at each radius and checks that degree-j coefficients settle faster than R^{k-j}.
inline FitSweep fit_stability(const PointEvaluator& f, const SpaceTimePoint& base, int k,
                              const std::vector<double>& radii, NormMode mode,
                              const FitOptions& opt = {}, double margin = 0.1) {
  check_radii(radii, "fit_stability");
  if (radii.size() < 3) throw DomainError("fit_stability: need at least 3 radii");
  FitSweep sw;
  sw.radii = radii;
  for (double R : radii) sw.fits.push_back(fit_polynomial(f, base, k, R, mode, opt));
  const auto& idx = sw.fits.front().indices();
  sw.drift.assign(k + 1, std::vector<double>(radii.size() - 1, 0.0));
  double scale = 0.0;
  for (const auto& P : sw.fits)
    for (double a : P.coeffs()) scale = std::max(scale, std::abs(a));
  for (std::size_t i = 0; i + 1 < radii.size(); ++i)
    for (std::size_t c = 0; c < idx.size(); ++c)
      sw.drift[idx[c].parabolic_degree()][i] +=
          std::abs(sw.fits[i].coeffs()[c] - sw.fits[i + 1].coeffs()[c]);
  for (int j = 0; j <= k; ++j) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i + 1 < radii.size(); ++i)
      if (sw.drift[j][i] > 1e-12 * std::max(scale, 1e-300)) {
        x.push_back(std::log(radii[i]));
        y.push_back(std::log(sw.drift[j][i]));
      }
    if (x.size() < 2) {
      sw.drift_exponent.push_back(kNaN);
      continue;
    }
    const double beta = detail::line_fit(x, y).coef[1];
    sw.drift_exponent.push_back(beta);
    if (!(beta > k - j + margin)) sw.stable = false;
  }
  return sw;
}

// ---------------------------------------------------------------- classification

enum class RegularityClass { holder, log, x_log, dini, unclassified };

struct ClassLabel {
  RegularityClass kind = RegularityClass::unclassified;
  int k = 0;
  double alpha = 0.0;

  std::string str() const {
    auto num = [](double v) {
      std::string s = std::to_string(v);
      s.erase(s.find_last_not_of('0') + 1);
      if (!s.empty() && s.back() == '.') s.pop_back();
      return s;
    };
    switch (kind) {
      case RegularityClass::holder: return "holder(" + std::to_string(k) + ", " + num(alpha) + ")";
      case RegularityClass::dini: return "dini(" + std::to_string(k) + ", " + num(alpha) + ")";
      case RegularityClass::log: return "log(" + std::to_string(k) + ")";
      case RegularityClass::x_log: return "x_log(" + std::to_string(k) + ")";
      case RegularityClass::unclassified: return "unclassified";
    }
    return "?";
  }
};

// Dini and plain Hoelder both give membership in the Hoelder class.
inline bool in_holder_class(const ClassLabel& l) {
  return l.kind == RegularityClass::holder || l.kind == RegularityClass::dini;
}

struct RegularityReport {
  ClassLabel label;
  double fitted_exponent = kNaN;
  bool log_correction = false;
  std::vector<double> dyadic_sums;
  std::optional<ParabolicPolynomial> jet;
  std::map<std::string, double> diagnostics;
  std::string note;
};

struct ClassifyOptions {
  double log_improvement = 0.25;  // quadratic must cut the linear residual by this fraction
  double tie_band = 0.10;         // bounded must beat linear by more than this
  double growth_tolerance = 0.05; // exponent deficit that counts as geometric growth
  double saturation = 0.5;        // bounded fit: allowed remaining growth relative to S_M
  double flat = 0.02;             // linear growth over the window below this fraction is bounded
};

namespace detail {

// nu at radius rr by log-log interpolation between rows (linear where nu vanishes).
inline double interpolate_nu(const NuProfile& prof, double rr) {
  const auto& rows = prof.rows;
  const double tol = 1e-9;
  for (const auto& row : rows)
    if (std::abs(row.r - rr) <= tol * rr) return row.nu;
  if (rr > rows.front().r || rr < rows.back().r) throw DomainError("nu outside the profile range");
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    const auto& a = rows[i];
    const auto& b = rows[i + 1];
    if (rr <= a.r && rr >= b.r) {
      const double w = std::log(a.r / rr) / std::log(a.r / b.r);
      if (a.nu > 0.0 && b.nu > 0.0) return std::exp((1.0 - w) * std::log(a.nu) + w * std::log(b.nu));
      return (1.0 - w) * a.nu + w * b.nu;
    }
  }
  return rows.back().nu;
}

// min over q in (0,1) of the residual of S_m = a + b q^m.
inline std::tuple<double, double, double, double> bounded_fit(const std::vector<double>& m,
                                                              const std::vector<double>& S) {
  auto rss_at = [&](double q) {
    std::vector<double> x(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) x[i] = std::pow(q, m[i]);
    const auto f = line_fit(x, S);
    return std::tuple<double, double, double>{f.rss, f.coef[0], f.coef[1]};
  };
  double best_q = 0.5, best = kInf;
  for (int i = 1; i < 400; ++i) {
    const double q = i / 400.0;
    const double v = std::get<0>(rss_at(q));
    if (v < best) {
      best = v;
      best_q = q;
    }
  }
  double lo = std::max(1e-4, best_q - 1.0 / 400), hi = std::min(0.9999, best_q + 1.0 / 400);
  for (int it = 0; it < 60; ++it) {
    const double a = lo + (hi - lo) * 0.382, b = lo + (hi - lo) * 0.618;
    if (std::get<0>(rss_at(a)) < std::get<0>(rss_at(b))) hi = b;
    else lo = a;
  }
  best_q = 0.5 * (lo + hi);
  const auto [rss, a, b] = rss_at(best_q);
  return {rss, a, b, best_q};
}

}  // namespace detail

struct ExponentFit {
  double exponent = kNaN;
  bool log_correction = false;
  double rss_power = kNaN;
  double rss_log = kNaN;
  double exponent_power = kNaN;
  double exponent_log = kNaN;
  int rows_used = 0;
  std::string note;
};

// Slope of log nu against log r; with try_log also the model
// log nu - log|log r| = beta log r + c, chosen when it cuts the residual by 25%.
inline ExponentFit estimate_exponent(const NuProfile& prof, bool try_log_factor,
                                     double improvement = 0.25) {
  std::vector<double> x, y, ylog;
  int zero = 0, near_one = 0;
  for (const auto& row : prof.rows) {
    if (!(row.nu > 0.0)) {
      ++zero;
      continue;
    }
    if (try_log_factor && row.r >= 0.9) {
      ++near_one;
      continue;
    }
    x.push_back(std::log(row.r));
    y.push_back(std::log(row.nu));
    ylog.push_back(std::log(row.nu) - std::log(std::abs(std::log(row.r))));
  }
  if (x.size() < 4) throw DomainError("estimate_exponent: fewer than 4 positive rows");
  ExponentFit out;
  out.rows_used = static_cast<int>(x.size());
  if (zero) out.note += std::to_string(zero) + " zero rows excluded; ";
  if (near_one) out.note += std::to_string(near_one) + " rows with r >= 0.9 excluded; ";
  const auto pw = detail::line_fit(x, y);
  out.exponent_power = pw.coef[1];
  out.rss_power = pw.rss;
  out.exponent = pw.coef[1];
  if (try_log_factor) {
    const auto lg = detail::line_fit(x, ylog);
    out.exponent_log = lg.coef[1];
    out.rss_log = lg.rss;
    if (lg.rss <= (1.0 - improvement) * pw.rss) {
      out.log_correction = true;
      out.exponent = lg.coef[1];
    }
  }
  return out;
}

// Dyadic partial sums S_m = sum_{i<m} r^{-i(k+alpha)} nu(r0 r^i) / r0^{k+alpha}; their growth
// in m (bounded, linear, quadratic) gives dini, holder or log.
inline RegularityReport classify_pointwise(const NuProfile& prof, int k, double alpha, double r,
                                           const ClassifyOptions& opt = {}) {
  if (!(r >= 0.25 - 1e-12 && r <= 0.5 + 1e-12)) throw DomainError("classify: r must lie in [1/4, 1/2]");
  if (k < 0 || !(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("classify: need k >= 0, alpha in [0,1]");
  if (prof.rows.size() < 8) throw DomainError("classify: profile too shallow (need >= 8 rows)");
  RegularityReport rep;
  rep.label = {RegularityClass::unclassified, k, alpha};
  const double e = k + alpha;
  const double r0 = prof.rows.front().r, rmin = prof.rows.back().r;
  const int M = static_cast<int>(std::floor(std::log(rmin / r0) / std::log(r) + 1e-9)) + 1;
  if (M < 4) throw DomainError("classify: profile too shallow for this r");
  std::vector<double> terms(M), S(M), ms(M);
  double acc = 0.0;
  for (int i = 0; i < M; ++i) {
    terms[i] = std::pow(r, -i * e) * detail::interpolate_nu(prof, r0 * std::pow(r, i)) / std::pow(r0, e);
    acc += terms[i];
    S[i] = acc;
    ms[i] = i + 1.0;
  }
  rep.dyadic_sums = S;
  rep.diagnostics["depth"] = M;
  try {
    rep.fitted_exponent = estimate_exponent(prof, false).exponent;
  } catch (const DomainError&) {
  }

  if (S.back() == 0.0) {
    rep.label.kind = RegularityClass::dini;
    rep.diagnostics["C"] = 0.0;
    rep.note = "nu vanishes";
    return rep;
  }

  // raw averages that grow toward the base point: not even bounded at this order
  {
    std::vector<double> x, y;
    for (const auto& row : prof.rows)
      if (row.raw > 0.0) {
        x.push_back(std::log(row.r));
        y.push_back(std::log(row.raw));
      }
    if (x.size() >= 3) {
      const double slope = detail::line_fit(x, y).coef[1];
      rep.diagnostics["raw_slope"] = slope;
      if (slope < -opt.growth_tolerance) {
        rep.note = "averages grow toward the base point";
        return rep;
      }
    }
  }

  // geometric growth of the terms: log t_i = a + b i + c log i
  {
    std::vector<double> ii, lt;
    for (int i = 1; i < M; ++i)
      if (terms[i] > 0.0) {
        ii.push_back(i);
        lt.push_back(std::log(terms[i]));
      }
    if (ii.size() >= 3) {
      Eigen::MatrixXd A(ii.size(), 3);
      Eigen::VectorXd b(ii.size());
      for (std::size_t j = 0; j < ii.size(); ++j) {
        A(j, 0) = 1.0;
        A(j, 1) = ii[j];
        A(j, 2) = std::log(ii[j]);
        b(j) = lt[j];
      }
      const auto f = detail::lstsq(A, b);
      const double deficit = f.coef[1] / std::abs(std::log(r));
      rep.diagnostics["growth_deficit"] = deficit;
      rep.diagnostics["growth_power"] = f.coef[2];
      if (deficit > opt.growth_tolerance) {
        rep.note = "dyadic terms grow geometrically";
        return rep;
      }
    }
  }

  const double norm = S.back() * S.back();
  const auto lin = detail::line_fit(ms, S);
  Eigen::MatrixXd Aq(M, 3);
  Eigen::VectorXd bq(M);
  for (int i = 0; i < M; ++i) {
    Aq(i, 0) = 1.0;
    Aq(i, 1) = ms[i];
    Aq(i, 2) = ms[i] * ms[i];
    bq(i) = S[i];
  }
  const auto quad = detail::lstsq(Aq, bq);
  const auto [rss_b, a_b, b_b, q_b] = detail::bounded_fit(ms, S);
  const double rl = lin.rss / norm, rq = quad.rss / norm, rb = rss_b / norm;
  rep.diagnostics["rss_linear"] = rl;
  rep.diagnostics["rss_quadratic"] = rq;
  rep.diagnostics["rss_bounded"] = rb;
  rep.diagnostics["bounded_q"] = q_b;
  rep.diagnostics["slope"] = lin.coef[1];
  rep.diagnostics["curvature"] = quad.coef[2];

  const double mM = M;
  const bool quad_significant = quad.coef[2] > 0.0 && quad.coef[2] * mM * mM >= 0.05 * S.back();
  if (rl > 1e-14 && rq < (1.0 - opt.log_improvement) * rl && quad_significant) {
    rep.label.kind = RegularityClass::log;
    rep.log_correction = true;
    rep.diagnostics["C"] = quad.coef[2];
    return rep;
  }
  const bool flat = lin.coef[1] * (mM - 1.0) <= opt.flat * S.back();
  const bool saturates = b_b < 0.0 && a_b - S.back() <= opt.saturation * S.back();
  if (flat || (saturates && rb < (1.0 - opt.tie_band) * rl)) {
    rep.label.kind = RegularityClass::dini;
    rep.diagnostics["C"] = flat ? S.back() : a_b;
    return rep;
  }
  rep.label.kind = RegularityClass::holder;
  rep.diagnostics["C"] = lin.coef[1];
  return rep;
}

// ---------------------------------------------------------------- the quotient g

struct ReducedField {
  ScalarField g;
  std::shared_ptr<std::atomic<long>> base_hits;  // evaluations exactly at the base point
};

// g = (f - P) / (|x - x0|^2 + |t - t0|)^{(k+alpha)/2}, set to 0 at the base point.
inline ReducedField reduce_to_g(const ScalarField& f, const SpaceTimePoint& base,
                                const ParabolicPolynomial& P, int k, double alpha) {
  require_dim(f.dim, base.dim(), "reduce_to_g");
  require_dim(P.n(), base.dim(), "reduce_to_g");
  if (k < 0 || !(alpha >= 0.0)) throw DomainError("reduce_to_g: need k >= 0, alpha >= 0");
  ReducedField out;
  out.base_hits = std::make_shared<std::atomic<long>>(0);
  auto hits = out.base_hits;
  auto ff = f.fn;
  auto pp = std::make_shared<const ParabolicPolynomial>(P);
  const double e = 0.5 * (k + alpha);
  const auto b = base;
  out.g.dim = f.dim;
  out.g.fn = [ff, pp, e, b, hits](std::span<const double> x, double t) {
    double d = std::abs(t - b.t);
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - b.x[i]) * (x[i] - b.x[i]);
    if (d == 0.0) {
      hits->fetch_add(1);
      return 0.0;
    }
    return (ff(x, t) - (*pp)(x, t)) / std::pow(d, e);
  };
  out.g.tail = BoundedTail{kInf};
  out.g.smoothness_hint = 0;
  out.g.kinks_x = f.dim == 1 ? std::vector<double>{base.x[0]} : std::vector<double>{};
  out.g.kinks_t = {base.t};
  return out;
}

struct DualReport {
  RegularityReport f_report;
  RegularityReport g_report;
  bool agree = false;
};

// Classifies f with P at order k + alpha and g with 0 at order 0; the two must
// agree on membership in the Hoelder class.
inline DualReport dual_classify(const ScalarField& f, const SpaceTimePoint& base,
                                const ParabolicPolynomial& P, int k, double alpha,
                                const std::vector<double>& radii, double r,
                                const NuOptions& opt = {}) {
  DualReport d;
  d.f_report = classify_pointwise(nu_profile(f, base, P, radii, NormMode::L1_average, opt), k, alpha, r);
  const auto g = reduce_to_g(f, base, P, k, alpha);
  const auto zero = ParabolicPolynomial(0, base);
  d.g_report = classify_pointwise(nu_profile(g.g, base, zero, radii, NormMode::L1_average, opt), 0, 0.0, r);
  d.agree = in_holder_class(d.f_report.label) == in_holder_class(d.g_report.label);
  return d;
}

// ---------------------------------------------------------------- jets

struct JetSequence {
  double eta = 0.5;
  int gamma = 0;
  bool integer_case = false;
  int degree = 0;  // gamma, or gamma - 1 in the integer case
  std::vector<ParabolicPolynomial> polys;         // P_1 .. P_depth
  std::vector<double> err_est;                    // largest quadrature error per P_i
  std::vector<std::vector<double>> differences;   // [j][i] sum_{|sigma|=j} |D P_{i+1} - D P_i|
  std::vector<double> rates;                      // per j, fitted in log_eta scale; NaN if vanishing
  std::vector<bool> cauchy;                       // per j
  std::optional<ParabolicPolynomial> limits;      // a_sigma, when every degree is Cauchy
};

struct JetOptions {
  int threads = 1;
  double cauchy_ratio = 0.1;  // last increment below this fraction of the first
};

// P_i = Taylor polynomial at the base of T_{eta^{i-1}}, the kernel integral of f - J over
// Q_1 \ Q_{eta^{i-1}}, with derivatives through the differentiated kernel.
inline JetSequence extract_jet(const ScalarField& f, const ParabolicPolynomial& P_f, int k, double alpha,
                               const FracParams& p, double eta, int depth, const QuadratureSpec& q,
                               const JetOptions& opt = {}) {
  if (!(eta >= 0.25 - 1e-12 && eta <= 0.5 + 1e-12)) throw DomainError("extract_jet: eta must lie in [1/4, 1/2]");
  if (depth < 3) throw DomainError("extract_jet: depth must be >= 3");
  if (k < 0 || !(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("extract_jet: need k >= 0, alpha in [0,1]");
  require_dim(f.dim, p.n(), "extract_jet");
  require_dim(P_f.n(), p.n(), "extract_jet");
  JetSequence js;
  js.eta = eta;
  const double frac = alpha + 2.0 * p.s();
  js.gamma = k + static_cast<int>(std::floor(frac + 1e-12));
  js.integer_case = std::abs(frac - std::round(frac)) < 1e-12;
  js.degree = js.integer_case ? js.gamma - 1 : js.gamma;
  if (js.degree > 4) throw UnsupportedOrder("extract_jet: derivative orders above 4 are not implemented");
  const auto& base = P_f.base();
  const auto J = cutoff_polynomial(P_f);
  const auto g = linear_combination(1.0, f, -1.0, J);
  const ParabolicPolynomial shape(js.degree, base);
  const auto& idx = shape.indices();
  const int n = p.n();
  std::vector<std::unique_ptr<KernelDerivative>> derivs(idx.size());
  for (std::size_t c = 0; c < idx.size(); ++c)
    if (idx[c].parabolic_degree() > 0)
      derivs[c] = std::make_unique<KernelDerivative>(
          p, KernelDerivOrder{std::vector<int>(idx[c].sigma.begin(), idx[c].sigma.begin() + n),
                              idx[c].time_order()});
  std::vector<double> val(depth * idx.size()), err(depth * idx.size());
  parallel_for(val.size(), opt.threads, [&](std::size_t job) {
    const int i = static_cast<int>(job / idx.size()) + 1;
    const std::size_t c = job % idx.size();
    const double rho = std::pow(eta, i - 1);
    const auto e = kernel_integral(g, cylinder_difference(base, 1.0, rho), base, p, q, derivs[c].get());
    val[job] = e.value;
    err[job] = e.err_est;
  });
  for (int i = 0; i < depth; ++i) {
    auto P = shape;
    double emax = 0.0;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      P.coeffs()[c] = val[i * idx.size() + c];
      emax = std::max(emax, err[i * idx.size() + c]);
    }
    js.polys.push_back(std::move(P));
    js.err_est.push_back(emax);
  }
  js.differences.assign(js.degree + 1, std::vector<double>(depth - 1, 0.0));
  double scale = 0.0;
  for (const auto& P : js.polys)
    for (double a : P.coeffs()) scale = std::max(scale, std::abs(a));
  for (int i = 0; i + 1 < depth; ++i)
    for (std::size_t c = 0; c < idx.size(); ++c)
      js.differences[idx[c].parabolic_degree()][i] +=
          std::abs(js.polys[i + 1].coeffs()[c] - js.polys[i].coeffs()[c]);
  // increments within the quadrature error of their two ends count as zero
  auto resolved = [&](int i, double v) {
    return v > std::max(js.err_est[i] + js.err_est[i + 1], 1e-13 * std::max(scale, 1e-300));
  };
  bool all_cauchy = true;
  for (int j = 0; j <= js.degree; ++j) {
    const auto& d = js.differences[j];
    std::vector<double> x, y;
    for (int i = 0; i + 1 < depth; ++i)
      if (resolved(i, d[i])) {
        // difference i compares P_{i+2} and P_{i+1}; in the paper's indexing it is step i+1
        const double step = i + 1.0;
        x.push_back(step * std::log(eta));
        y.push_back(std::log(d[i]) + j * step * std::log(eta));
      }
    js.rates.push_back(x.size() >= 3 ? detail::line_fit(x, y).coef[1] : kNaN);
    double first = 0.0;
    for (int i = 0; i + 1 < depth; ++i)
      if (resolved(i, d[i])) {
        first = d[i];
        break;
      }
    const bool c = first == 0.0 || !resolved(depth - 2, d.back()) || d.back() < opt.cauchy_ratio * first;
    js.cauchy.push_back(c);
    all_cauchy = all_cauchy && c;
  }
  if (all_cauchy) {
    // geometric extrapolation of each coefficient from its last two increments
    auto lim = js.polys.back();
    for (std::size_t c = 0; c < idx.size(); ++c) {
      const double d1 = js.polys[depth - 1].coeffs()[c] - js.polys[depth - 2].coeffs()[c];
      const double d0 = js.polys[depth - 2].coeffs()[c] - js.polys[depth - 3].coeffs()[c];
      if (d0 != 0.0) {
        const double ratio = d1 / d0;
        if (std::abs(ratio) < 0.9) lim.coeffs()[c] += d1 * ratio / (1.0 - ratio);
      }
    }
    js.limits = std::move(lim);
  }
  return js;
}

}  // namespace fracheat
