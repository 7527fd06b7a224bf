#pragma once

// Linear functionals on C([0,T]) represented as signed measures: point atoms
// plus a piecewise-polynomial density. Every integral against grid paths and
// piecewise polynomials is evaluated in closed form.

#include <functional>
#include <span>
#include <vector>

namespace gpcond {

struct Path;

namespace poly {

/// Coefficients in ascending degree.
using Coeffs = std::vector<double>;

double eval(const Coeffs& c, double x);
Coeffs add(const Coeffs& a, const Coeffs& b);
Coeffs scale(const Coeffs& a, double s);
Coeffs multiply(const Coeffs& a, const Coeffs& b);
/// Antiderivative vanishing at 0.
Coeffs antiderivative(const Coeffs& c);
Coeffs derivative(const Coeffs& c);
double integrate(const Coeffs& c, double lo, double hi);
/// Integral of a*b over [lo, hi]; Gauss-Legendre when the degree allows it,
/// which avoids cancellation on short intervals.
double integrate_product(const Coeffs& a, const Coeffs& b, double lo, double hi);
int degree(const Coeffs& c);

}  // namespace poly

struct PolyPiece {
  double lo = 0.0;
  double hi = 0.0;
  poly::Coeffs coeffs;
};

/// A function on [lo_0, hi_last] given by polynomials on contiguous pieces.
/// Pieces are right-closed, so an interior boundary evaluates with the lower
/// piece; the first piece also owns its left endpoint.
class PiecewisePoly {
 public:
  PiecewisePoly() = default;
  explicit PiecewisePoly(std::vector<PolyPiece> pieces);

  static PiecewisePoly constant(double lo, double hi, double value);
  static PiecewisePoly polynomial(double lo, double hi, poly::Coeffs coeffs);

  double operator()(double x) const;
  double derivative(double x) const;

  const std::vector<PolyPiece>& pieces() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }
  double lo() const;
  double hi() const;
  std::vector<double> breakpoints() const;
  int max_degree() const;

  /// Index of the piece that owns x under the right-closed convention.
  std::size_t locate(double x) const;

  /// Same function on a partition refined by the given points.
  PiecewisePoly refined(std::span<const double> points) const;

  PiecewisePoly scaled(double s) const;
  /// this + s * other over the common support.
  PiecewisePoly axpy(double s, const PiecewisePoly& other) const;

  double integral(double lo, double hi) const;

 private:
  std::vector<PolyPiece> pieces_;
};

struct Atom {
  double t = 0.0;
  double w = 0.0;
};

struct DensityPiece {
  double lo = 0.0;
  double hi = 0.0;
  poly::Coeffs coeffs;
};

/// Signed finite measure on [0, T]: atoms plus a piecewise-polynomial density
/// with pairwise-disjoint interiors. Immutable after construction.
class Condition {
 public:
  Condition(double horizon, std::vector<Atom> atoms, std::vector<DensityPiece> density);

  /// w * delta_t
  static Condition point(double horizon, double t, double w = 1.0);
  /// weight * Lebesgue on [lo, hi]
  static Condition uniform(double horizon, double lo, double hi, double weight = 1.0);

  /// Linear combination sum_k weights[k] * terms[k]. Atoms at equal times are
  /// merged and density pieces are split on the union of their endpoints.
  static Condition combine(std::span<const double> weights, std::span<const Condition> terms);

  double horizon() const { return horizon_; }
  const std::vector<Atom>& atoms() const { return atoms_; }
  const std::vector<DensityPiece>& density() const { return density_; }

  Condition scaled(double s) const;
  double total_variation() const;
  /// Atom times and density endpoints, sorted and unique.
  std::vector<double> breakpoints() const;
  bool is_null() const { return atoms_.empty() && density_.empty(); }

  /// Density value at x (0 outside pieces); boundary values use the lower piece.
  double density_at(double x) const;

 private:
  double horizon_;
  std::vector<Atom> atoms_;
  std::vector<DensityPiece> density_;
};

/// c(p) for the piecewise-linear interpolant of the path. Throws
/// std::domain_error if an atom lies outside the grid span.
double apply(const Condition& c, const Path& p);

/// Integral of q against c restricted to (lo, hi]; atoms at lo are excluded.
double apply_poly(const Condition& c, const PiecewisePoly& q, double lo, double hi);

/// Integral of an arbitrary function against c restricted to (lo, hi]. The
/// density part uses Gauss-Legendre on sub-intervals split at c's breakpoints
/// and at `breaks`, so it is exact whenever fn is a polynomial of degree < 40
/// between consecutive breakpoints.
double apply_fn(const Condition& c, const std::function<double(double)>& fn, double lo, double hi,
                std::span<const double> breaks = {});

/// c([x, T]).
double tail_mass(const Condition& c, double x);

/// Per-cell contributions of c to the integral of a piecewise-linear path on
/// `grid`: cell k covers (grid[k], grid[k+1]] and contributes
/// left[k] * v[k] + right[k] * v[k+1]. An atom exactly at grid[0] goes to
/// `initial`.
struct CellWeights {
  double initial = 0.0;
  std::vector<double> left;
  std::vector<double> right;
};
CellWeights cell_weights(const Condition& c, std::span<const double> grid);

/// Weight vector w with apply(c, p) == dot(w, p.values) for every path on grid.
std::vector<double> grid_weights(const Condition& c, std::span<const double> grid);

/// Restriction of c to [0, s], atoms at s included.
Condition restrict_upto(const Condition& c, double s);

/// Weights for the restriction of c to [0, s] (atoms at s included).
std::vector<double> grid_weights_upto(const Condition& c, std::span<const double> grid, double s);

}  // namespace gpcond
