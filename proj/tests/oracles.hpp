#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's integration code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

inline double trapezoid(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
  const double h = (hi - lo) / static_cast<double>(n);
  double s = 0.5 * (f(lo) + f(hi));
  for (std::size_t k = 1; k < n; ++k) s += f(lo + h * static_cast<double>(k));
  return s * h;
}

// Composite Simpson, n even.
inline double simpson(const std::function<double(double)>& f, double lo, double hi, std::size_t n) {
  if (n % 2) ++n;
  const double h = (hi - lo) / static_cast<double>(n);
  double s = f(lo) + f(hi);
  for (std::size_t k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f(lo + h * static_cast<double>(k));
  return s * h / 3.0;
}

// Double integral of f over [a1,b1] x [a2,b2] by a tensor midpoint rule.
inline double midpoint2(const std::function<double(double, double)>& f, double a1, double b1, double a2, double b2,
                        std::size_t n) {
  const double h1 = (b1 - a1) / static_cast<double>(n);
  const double h2 = (b2 - a2) / static_cast<double>(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = a1 + h1 * (static_cast<double>(i) + 0.5);
    for (std::size_t j = 0; j < n; ++j) s += f(x, a2 + h2 * (static_cast<double>(j) + 0.5));
  }
  return s * h1 * h2;
}

inline double zabb_cov(double s, double t) {
  return std::min(s, t) - s * t - 3.0 * (s - s * s) * (t - t * t);
}

inline double bridge_cov(double s, double t) { return std::min(s, t) - s * t; }

// Sample covariance and the standard error of the mean of centered products.
struct Est {
  double value;
  double se;
};
inline Est cov(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double p = (x[i] - mx) * (y[i] - my);
    s += p;
    s2 += p * p;
  }
  const double m = s / n;
  return {s / (n - 1), std::sqrt((s2 / n - m * m) / n)};
}

// Exact covariance of a linear recursion z_{k+1} = A_k z_k + b_k dW_k with
// Var(dW_k) = var_k and z_0 = 0. Returns Cov of the first component at the
// requested step indices (sorted ascending).
struct LinearRecursion {
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;
  std::vector<double> var;

  Eigen::MatrixXd cov_at(const std::vector<std::size_t>& idx) const {
    const auto d = b.front().size();
    const auto m = static_cast<Eigen::Index>(idx.size());
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
    // lag[r] = Cov(z_k, z_{idx[r]}) once step idx[r] has been passed
    std::vector<Eigen::MatrixXd> lag(idx.size());
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m, m);
    auto visit = [&](std::size_t k) {
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] == k) lag[r] = S;
        if (idx[r] <= k)
          for (std::size_t q = 0; q < idx.size(); ++q)
            if (idx[q] == k) {
              const auto ri = static_cast<Eigen::Index>(r), qi = static_cast<Eigen::Index>(q);
              out(ri, qi) = out(qi, ri) = lag[r](0, 0);
            }
      }
    };
    visit(0);
    for (std::size_t k = 0; k < A.size(); ++k) {
      S = A[k] * S * A[k].transpose() + var[k] * b[k] * b[k].transpose();
      for (std::size_t r = 0; r < idx.size(); ++r)
        if (idx[r] <= k) lag[r] = A[k] * lag[r];
      visit(k + 1);
    }
    return out;
  }
};

}  // namespace oracle
