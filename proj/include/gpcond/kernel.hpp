#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gpcond/conditions.hpp"
#include "gpcond/path.hpp"

namespace gpcond {

/// Raised when a numeric procedure (factorization, solve) cannot proceed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// scale * exp(rate * x)
struct Exponential {
  double scale = 1.0;
  double rate = 0.0;
};

/// One factor of a Markovian covariance R(s,t) = f(min(s,t)) g(max(s,t)).
class Factor {
 public:
  Factor(PiecewisePoly p) : rep_(std::move(p)) {}  // NOLINT(google-explicit-constructor)
  Factor(Exponential e) : rep_(e) {}               // NOLINT(google-explicit-constructor)

  double operator()(double x) const;
  double derivative(double x) const;
  /// Integral of factor * polynomial over [lo, hi].
  double integrate_against(const poly::Coeffs& density, double lo, double hi) const;

  const PiecewisePoly* as_poly() const { return std::get_if<PiecewisePoly>(&rep_); }
  std::vector<double> breakpoints() const;

 private:
  std::variant<PiecewisePoly, Exponential> rep_;
};

struct MarkovFactors {
  Factor f;
  Factor g;
};

/// Covariance of a centered continuous base process on [0, T].
///
/// Markov kernels carry the factorization R(s,t) = f(s^t) g(s v t) with
/// h = f/g non-negative and non-decreasing, which gives exact sampling through
/// X_s = g(s) W_{h(s)} and closed-form kernel integrals. Kernels built from an
/// arbitrary covariance function fall back to adaptive quadrature and dense
/// Cholesky sampling.
class Kernel {
 public:
  using CovFn = std::function<double(double, double)>;

  static Kernel brownian(double horizon);
  /// R(s,t) = exp(-rate |s - t|), unit stationary variance.
  static Kernel ornstein_uhlenbeck(double horizon, double rate);
  static Kernel custom_fg(double horizon, PiecewisePoly f, PiecewisePoly g, double alpha);
  static Kernel from_factors(std::string name, double horizon, MarkovFactors factors, double alpha);
  /// Kernel given only by its covariance function. Integrals split at the
  /// diagonal and use adaptive quadrature.
  static Kernel from_function(std::string name, double horizon, CovFn cov);

  const std::string& name() const { return name_; }
  double horizon() const { return horizon_; }
  double cov(double s, double t) const;

  bool is_markov() const { return factors_.has_value(); }
  const MarkovFactors& factors() const;
  /// True when both f and g are piecewise polynomials.
  bool is_polynomial() const;
  double f(double s) const { return factors().f(s); }
  double g(double s) const { return factors().g(s); }
  /// f/g with 0/0 = 0.
  double h(double s) const;
  double alpha() const { return alpha_; }
  /// Breakpoints of f and g (empty for non-Markov kernels).
  std::vector<double> breakpoints() const;

 private:
  Kernel() = default;
  void validate_markov() const;

  std::string name_;
  double horizon_ = 1.0;
  std::optional<MarkovFactors> factors_;
  CovFn cov_fn_;
  double alpha_ = 1.0;
};

/// (u u* c)(s) = integral of R(s, x) c(dx).
double kernel_apply(const Kernel& k, const Condition& c, double s);

/// s -> kernel_apply(k, c, s) as an exact piecewise polynomial on [0, T];
/// only available for polynomial Markov kernels.
std::optional<PiecewisePoly> kernel_apply_poly(const Kernel& k, const Condition& c);

/// Cov(c1(X), c2(X)) = double integral of R against c1 x c2.
double kernel_double_apply(const Kernel& k, const Condition& c1, const Condition& c2);

/// Draws one path of the base process on `grid` from the given seed.
/// Markov kernels use independent increments of the time-changed Brownian
/// motion; other kernels use a dense Cholesky factor (at most 4096 points).
Path sample_base_path(const Kernel& k, std::span<const double> grid, std::uint64_t seed);

/// Lower Cholesky factor with one retry at +1e-12 on the diagonal. Throws
/// NumericError naming the first leading minor that is not positive.
std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n);

}  // namespace gpcond
