// Shared value types: parameters, parabolic geometry, multi-indices,
// parabolic polynomials and the evaluable field abstraction.
#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace fracheat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr int kMaxDim = 8;

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NotAdmissible : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnsupportedOrder : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// |Gamma(-s)| for s in (0,1), through Gamma(1-s)/s.
inline double abs_gamma_neg(double s) { return std::tgamma(1.0 - s) / s; }

class FracParams {
 public:
  FracParams(int n, double s) : n_(n), s_(s) {
    if (n < 1) throw DomainError("FracParams: n must be >= 1");
    if (!(s > 0.0 && s < 1.0)) throw DomainError("FracParams: s must lie in (0,1)");
    abs_gamma_ = abs_gamma_neg(s);
    c_ns_ = 1.0 / (std::pow(4.0 * std::numbers::pi, 0.5 * n) * abs_gamma_);
    c_inv_ = 1.0 / (std::pow(4.0 * std::numbers::pi, 0.5 * n) * std::tgamma(s));
  }

  int n() const { return n_; }
  double s() const { return s_; }
  double c_ns() const { return c_ns_; }
  double abs_gamma_neg_s() const { return abs_gamma_; }
  // Constant of the kernel that inverts the operator exactly: 1 / ((4 pi)^{n/2} Gamma(s)).
  double c_ns_inverse() const { return c_inv_; }
  // c_ns_inverse / c_ns = |Gamma(-s)| / Gamma(s)
  double inverse_ratio() const { return abs_gamma_ / std::tgamma(s_); }

 private:
  int n_;
  double s_;
  double c_ns_;
  double c_inv_;
  double abs_gamma_;
};

struct SpaceTimePoint {
  std::vector<double> x;
  double t = 0.0;

  int dim() const { return static_cast<int>(x.size()); }
};

inline void require_dim(int got, int want, const char* what) {
  if (got != want)
    throw DimensionMismatch(std::string(what) + ": dimension " + std::to_string(got) +
                            " != " + std::to_string(want));
}

inline double parabolic_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
  require_dim(a.dim(), b.dim(), "parabolic_distance");
  double r2 = 0.0;
  for (int i = 0; i < a.dim(); ++i) r2 += (a.x[i] - b.x[i]) * (a.x[i] - b.x[i]);
  return std::sqrt(r2 + std::abs(a.t - b.t));
}

enum class Sided { past, two_sided };

struct ParabolicCylinder {
  SpaceTimePoint center;
  double radius = 1.0;
  Sided sided = Sided::past;

  bool contains(std::span<const double> x, double t) const {
    double r2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - center.x[i]) * (x[i] - center.x[i]);
    if (!(r2 < radius * radius)) return false;
    const double lo = center.t - radius * radius;
    if (sided == Sided::past) return t > lo && t <= center.t;
    return t > lo && t < center.t + radius * radius;
  }
  bool contains(const SpaceTimePoint& p) const {
    require_dim(p.dim(), center.dim(), "ParabolicCylinder::contains");
    return contains(p.x, p.t);
  }
};

// Multi-index of length n+1; the last entry is the time order.
struct MultiIndex {
  std::vector<int> sigma;

  int n() const { return static_cast<int>(sigma.size()) - 1; }
  int time_order() const { return sigma.back(); }
  int spatial_degree() const {
    int d = 0;
    for (int i = 0; i + 1 < static_cast<int>(sigma.size()); ++i) d += sigma[i];
    return d;
  }
  int parabolic_degree() const { return spatial_degree() + 2 * time_order(); }
  double factorial() const {
    double f = 1.0;
    for (int v : sigma)
      for (int j = 2; j <= v; ++j) f *= j;
    return f;
  }
  auto operator<=>(const MultiIndex&) const = default;
};

namespace detail {
inline void enumerate_spatial(int n, int total, int pos, std::vector<int>& cur,
                              std::vector<std::vector<int>>& out) {
  if (pos == n - 1) {
    cur[pos] = total;
    out.push_back(cur);
    return;
  }
  for (int v = 0; v <= total; ++v) {
    cur[pos] = v;
    enumerate_spatial(n, total - v, pos + 1, cur, out);
  }
}
}  // namespace detail

// All multi-indices with parabolic degree <= k, ordered by
// (parabolic degree, spatial entries, time order).
inline std::vector<MultiIndex> enumerate_multi_indices(int n, int k) {
  std::vector<MultiIndex> out;
  for (int d = 0; d <= k; ++d) {
    std::vector<MultiIndex> level;
    for (int m = 0; 2 * m <= d; ++m) {
      std::vector<std::vector<int>> sp;
      std::vector<int> cur(n, 0);
      detail::enumerate_spatial(n, d - 2 * m, 0, cur, sp);
      for (auto& v : sp) {
        v.push_back(m);
        level.push_back(MultiIndex{v});
      }
    }
    std::sort(level.begin(), level.end());
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

class ParabolicPolynomial {
 public:
  ParabolicPolynomial() = default;
  ParabolicPolynomial(int k, SpaceTimePoint base) : k_(k), base_(std::move(base)) {
    if (k < 0) throw DomainError("ParabolicPolynomial: degree bound must be >= 0");
    indices_ = enumerate_multi_indices(base_.dim(), k_);
    coeffs_.assign(indices_.size(), 0.0);
  }

  static ParabolicPolynomial zero(int n, int k) {
    return ParabolicPolynomial(k, SpaceTimePoint{std::vector<double>(n, 0.0), 0.0});
  }

  int n() const { return base_.dim(); }
  int degree_bound() const { return k_; }
  const SpaceTimePoint& base() const { return base_; }
  const std::vector<MultiIndex>& indices() const { return indices_; }
  const std::vector<double>& coeffs() const { return coeffs_; }
  std::vector<double>& coeffs() { return coeffs_; }

  // a_sigma = D^sigma P(base)
  double coefficient(const MultiIndex& s) const {
    const auto i = find(s);
    return i < 0 ? 0.0 : coeffs_[i];
  }
  void set(const MultiIndex& s, double a) {
    const auto i = find(s);
    if (i < 0) throw DomainError("ParabolicPolynomial::set: index exceeds degree bound");
    coeffs_[i] = a;
  }

  double operator()(std::span<const double> x, double t) const {
    if (static_cast<int>(x.size()) != n()) throw DimensionMismatch("poly_eval: dimension mismatch");
    double dx[kMaxDim];
    for (int i = 0; i < n(); ++i) dx[i] = x[i] - base_.x[i];
    const double dt = t - base_.t;
    double sum = 0.0;
    for (std::size_t j = 0; j < indices_.size(); ++j) {
      if (coeffs_[j] == 0.0) continue;
      const auto& sg = indices_[j].sigma;
      double term = coeffs_[j] / indices_[j].factorial();
      for (int i = 0; i < n(); ++i) term *= ipow(dx[i], sg[i]);
      term *= ipow(dt, sg.back());
      sum += term;
    }
    return sum;
  }

  // D^sigma P at an arbitrary point.
  double derivative_at(const MultiIndex& d, const SpaceTimePoint& p) const {
    require_dim(p.dim(), n(), "derivative_at");
    double sum = 0.0;
    for (std::size_t j = 0; j < indices_.size(); ++j) {
      const auto& sg = indices_[j].sigma;
      bool ok = true;
      for (std::size_t i = 0; i < sg.size(); ++i) ok = ok && sg[i] >= d.sigma[i];
      if (!ok || coeffs_[j] == 0.0) continue;
      double term = coeffs_[j];
      for (std::size_t i = 0; i < sg.size(); ++i) {
        const int e = sg[i] - d.sigma[i];
        const double h = i + 1 < sg.size() ? p.x[i] - base_.x[i] : p.t - base_.t;
        double f = 1.0;
        for (int q = 2; q <= e; ++q) f *= q;
        term *= ipow(h, e) / f;
      }
      sum += term;
    }
    return sum;
  }

  ParabolicPolynomial operator+(const ParabolicPolynomial& o) const {
    check_compatible(o);
    auto r = *this;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) r.coeffs_[i] += o.coeffs_[i];
    return r;
  }
  ParabolicPolynomial operator-(const ParabolicPolynomial& o) const {
    check_compatible(o);
    auto r = *this;
    for (std::size_t i = 0; i < coeffs_.size(); ++i) r.coeffs_[i] -= o.coeffs_[i];
    return r;
  }
  ParabolicPolynomial operator*(double c) const {
    auto r = *this;
    for (auto& a : r.coeffs_) a *= c;
    return r;
  }

 private:
  static double ipow(double b, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= b;
    return r;
  }
  long find(const MultiIndex& s) const {
    for (std::size_t i = 0; i < indices_.size(); ++i)
      if (indices_[i] == s) return static_cast<long>(i);
    return -1;
  }
  void check_compatible(const ParabolicPolynomial& o) const {
    if (o.k_ != k_ || o.n() != n()) throw DimensionMismatch("polynomial shapes differ");
    for (int i = 0; i < n(); ++i)
      if (o.base_.x[i] != base_.x[i]) throw DomainError("polynomial bases differ");
    if (o.base_.t != base_.t) throw DomainError("polynomial bases differ");
  }

  int k_ = 0;
  SpaceTimePoint base_;
  std::vector<MultiIndex> indices_;
  std::vector<double> coeffs_;
};

inline double poly_eval(const ParabolicPolynomial& p, const SpaceTimePoint& pt) {
  require_dim(pt.dim(), p.n(), "poly_eval");
  return p(pt.x, pt.t);
}

// ||P|| at its base: sum of |a_sigma|.
inline double poly_norm(const ParabolicPolynomial& p) {
  double s = 0.0;
  for (double a : p.coeffs()) s += std::abs(a);
  return s;
}

struct CompactTail {};
struct ExponentialSymbolTail {
  double lambda = 0.0;
  std::vector<double> k;
};
struct BoundedTail {
  double bound = kInf;
};
using TailClass = std::variant<CompactTail, ExponentialSymbolTail, BoundedTail>;

struct SpatialBall {
  std::vector<double> center;
  double radius = kInf;
};

inline constexpr int kAnalytic = std::numeric_limits<int>::max();

// Evaluable space-time function plus the metadata the quadratures rely on.
// A field vanishes outside spatial_support and outside [time_lo, time_hi].
struct ScalarField {
  int dim = 1;
  std::function<double(std::span<const double>, double)> fn;
  TailClass tail = BoundedTail{};
  std::optional<SpatialBall> spatial_support;
  double time_lo = -kInf;
  double time_hi = kInf;
  std::optional<int> smoothness_hint;
  double length_scale = kInf;
  double sup_bound = kInf;
  // non-smooth loci: x = kinks_x[i] (n=1 only) and t = kinks_t[i]
  std::vector<double> kinks_x;
  std::vector<double> kinks_t;

  double operator()(std::span<const double> x, double t) const { return fn(x, t); }
  double operator()(const SpaceTimePoint& p) const {
    require_dim(p.dim(), dim, "ScalarField");
    return fn(p.x, p.t);
  }

  bool is_compact() const {
    return spatial_support.has_value() && std::isfinite(time_lo) && std::isfinite(time_hi);
  }
  bool is_analytic() const { return smoothness_hint && *smoothness_hint == kAnalytic; }

  // Smallest cylinder of the two-sided kind containing the support.
  std::optional<ParabolicCylinder> support() const {
    if (!is_compact()) return std::nullopt;
    const double tc = 0.5 * (time_lo + time_hi);
    const double r = std::max(spatial_support->radius, std::sqrt(0.5 * (time_hi - time_lo)));
    return ParabolicCylinder{SpaceTimePoint{spatial_support->center, tc}, r * (1.0 + 1e-12),
                             Sided::two_sided};
  }
};

// Membership in the slowly increasing class, decided from the tail metadata.
inline bool check_slowly_increasing(const ScalarField& u, const FracParams&, double) {
  return std::visit(
      [&](const auto& tc) -> bool {
        using T = std::decay_t<decltype(tc)>;
        if constexpr (std::is_same_v<T, CompactTail>) {
          return u.is_compact() || std::isfinite(u.time_lo);
        } else if constexpr (std::is_same_v<T, ExponentialSymbolTail>) {
          return tc.lambda >= 0.0;
        } else {
          return std::isfinite(tc.bound) && tc.bound >= 0.0;
        }
      },
      u.tail);
}

}  // namespace fracheat
