#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gpcond::quad {

/// Number of Gauss-Legendre nodes used for fixed-order rules. Exact for
/// polynomials up to degree 39.
inline constexpr unsigned kOrder = 20;

/// Calls fn(x, w) for every node of the kOrder-point Gauss-Legendre rule on
/// [a, b]. Lets callers integrate several integrands over the same nodes.
template <class Fn>
void for_each_node(double a, double b, Fn&& fn) {
  using rule = boost::math::quadrature::gauss<double, kOrder>;
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const auto& xs = rule::abscissa();
  const auto& ws = rule::weights();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i] == 0.0) {
      fn(mid, ws[i] * half);
      continue;
    }
    fn(mid - half * xs[i], ws[i] * half);
    fn(mid + half * xs[i], ws[i] * half);
  }
}

template <class Fn>
double gauss(Fn&& fn, double a, double b) {
  if (!(b > a)) return 0.0;
  double sum = 0.0;
  for_each_node(a, b, [&](double x, double w) { sum += w * fn(x); });
  return sum;
}

/// Adaptive Gauss-Kronrod for integrands that are only piecewise smooth.
template <class Fn>
double adaptive(Fn&& fn, double a, double b, double tol = 1e-13) {
  if (!(b > a)) return 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(fn, a, b, 20, tol);
}

}  // namespace gpcond::quad
