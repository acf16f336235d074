// Independent reference computations for the test suites.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

namespace oracle {

using Fn = std::function<double(const std::vector<double>&)>;

// Sixth-order central first derivative along coordinate i.
inline double d1(const Fn& f, std::vector<double> p, int i, double h) {
  static constexpr std::array<double, 3> c{3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0};
  const double x0 = p[i];
  double s = 0.0;
  for (int k = 1; k <= 3; ++k) {
    p[i] = x0 + k * h;
    const double fp = f(p);
    p[i] = x0 - k * h;
    s += c[k - 1] * (fp - f(p));
  }
  return s / h;
}

// Mixed derivative by nesting first-derivative stencils; orders[i] per coordinate.
inline double mixed(const Fn& f, const std::vector<double>& p, std::vector<int> orders, double h) {
  int i = 0;
  while (i < static_cast<int>(orders.size()) && orders[i] == 0) ++i;
  if (i == static_cast<int>(orders.size())) return f(p);
  orders[i] -= 1;
  Fn inner = [&f, orders, h](const std::vector<double>& q) { return mixed(f, q, orders, h); };
  return d1(inner, p, i, h);
}

inline double integrate(const std::function<double(double)>& g, double a, double b) {
  if (std::isinf(b)) {
    boost::math::quadrature::exp_sinh<double> es;
    return es.integrate([&](double u) { return g(a + u); }, 0.0, INFINITY);
  }
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(g, a, b);
}

// int_a^b g with an integrable endpoint singularity at a, through tau = a + (b - a) e^{-v}
inline double integrate_singular(const std::function<double(double)>& g, double a, double b) {
  boost::math::quadrature::exp_sinh<double> es;
  return es.integrate(
      [&](double v) {
        const double w = (b - a) * std::exp(-v);
        return w > 0.0 ? w * g(a + w) : 0.0;
      },
      0.0, INFINITY);
}

inline double integrate_gk(const std::function<double(double)>& g, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, a, b, 15, 1e-12);
}

}  // namespace oracle
