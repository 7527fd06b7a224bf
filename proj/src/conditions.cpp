#include "gpcond/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gpcond/path.hpp"
#include "gpcond/quadrature.hpp"

namespace gpcond {

namespace {

constexpr double kBoundaryTol = 1e-12;

bool close_to(double a, double b, double scale) {
  return std::abs(a - b) <= kBoundaryTol * std::max(1.0, std::abs(scale));
}

std::vector<double> sorted_unique(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

using poly::integrate_product;

}  // namespace

// ---------------------------------------------------------------------------
// poly

namespace poly {

double eval(const Coeffs& c, double x) {
  double r = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) r = r * x + *it;
  return r;
}

Coeffs add(const Coeffs& a, const Coeffs& b) {
  Coeffs r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] += b[i];
  return r;
}

Coeffs scale(const Coeffs& a, double s) {
  Coeffs r(a);
  for (double& v : r) v *= s;
  return r;
}

Coeffs multiply(const Coeffs& a, const Coeffs& b) {
  if (a.empty() || b.empty()) return {};
  Coeffs r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Coeffs antiderivative(const Coeffs& c) {
  Coeffs r(c.size() + 1, 0.0);
  for (std::size_t i = 0; i < c.size(); ++i) r[i + 1] = c[i] / static_cast<double>(i + 1);
  return r;
}

Coeffs derivative(const Coeffs& c) {
  if (c.size() <= 1) return {0.0};
  Coeffs r(c.size() - 1, 0.0);
  for (std::size_t i = 1; i < c.size(); ++i) r[i - 1] = c[i] * static_cast<double>(i);
  return r;
}

double integrate(const Coeffs& c, double lo, double hi) {
  const Coeffs a = antiderivative(c);
  return eval(a, hi) - eval(a, lo);
}

double integrate_product(const Coeffs& a, const Coeffs& b, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  if (degree(a) + degree(b) < 2 * static_cast<int>(quad::kOrder))
    return quad::gauss([&](double x) { return eval(a, x) * eval(b, x); }, lo, hi);
  return integrate(multiply(a, b), lo, hi);
}

int degree(const Coeffs& c) {
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i)
    if (c[static_cast<std::size_t>(i)] != 0.0) return i;
  return 0;
}

}  // namespace poly

// ---------------------------------------------------------------------------
// Path

double Path::at(double t) const {
  if (grid.empty() || t < grid.front() || t > grid.back())
    throw std::domain_error("time " + std::to_string(t) + " outside path grid");
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  const auto j = static_cast<std::size_t>(it - grid.begin());
  if (grid[j] == t) return values[j];
  const double theta = (t - grid[j - 1]) / (grid[j] - grid[j - 1]);
  return (1.0 - theta) * values[j - 1] + theta * values[j];
}

void validate(const Path& p) {
  if (p.grid.empty()) throw std::invalid_argument("path grid is empty");
  if (p.grid.size() != p.values.size()) throw std::invalid_argument("path grid/values length mismatch");
  if (p.grid.front() != 0.0) throw std::invalid_argument("path grid must start at 0");
  for (std::size_t k = 1; k < p.grid.size(); ++k)
    if (!(p.grid[k] > p.grid[k - 1])) throw std::invalid_argument("path grid must be strictly increasing");
}

std::vector<double> uniform_grid(double horizon, std::size_t n) {
  if (n < 2) throw std::invalid_argument("uniform grid needs at least 2 points");
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = horizon * static_cast<double>(k) / static_cast<double>(n - 1);
  g.back() = horizon;
  return g;
}

// ---------------------------------------------------------------------------
// PiecewisePoly

PiecewisePoly::PiecewisePoly(std::vector<PolyPiece> pieces) : pieces_(std::move(pieces)) {
  for (std::size_t k = 0; k < pieces_.size(); ++k) {
    const auto& p = pieces_[k];
    if (!(p.hi > p.lo)) throw std::invalid_argument("piecewise polynomial piece needs lo < hi");
    if (p.coeffs.empty()) throw std::invalid_argument("piecewise polynomial piece has no coefficients");
    if (k > 0 && !close_to(pieces_[k - 1].hi, p.lo, p.lo))
      throw std::invalid_argument("piecewise polynomial pieces must be ordered and contiguous");
    if (k > 0) pieces_[k].lo = pieces_[k - 1].hi;
  }
}

PiecewisePoly PiecewisePoly::constant(double lo, double hi, double value) {
  return PiecewisePoly({PolyPiece{lo, hi, {value}}});
}

PiecewisePoly PiecewisePoly::polynomial(double lo, double hi, poly::Coeffs coeffs) {
  return PiecewisePoly({PolyPiece{lo, hi, std::move(coeffs)}});
}

double PiecewisePoly::lo() const { return pieces_.empty() ? 0.0 : pieces_.front().lo; }
double PiecewisePoly::hi() const { return pieces_.empty() ? 0.0 : pieces_.back().hi; }

std::size_t PiecewisePoly::locate(double x) const {
  if (pieces_.empty()) throw std::domain_error("empty piecewise polynomial");
  const double span = hi() - lo();
  if (x < lo() - kBoundaryTol * span || x > hi() + kBoundaryTol * span)
    throw std::domain_error("x = " + std::to_string(x) + " outside piecewise polynomial support");
  auto it = std::lower_bound(pieces_.begin(), pieces_.end(), x,
                             [](const PolyPiece& p, double v) { return p.hi < v; });
  if (it == pieces_.end()) --it;
  return static_cast<std::size_t>(it - pieces_.begin());
}

double PiecewisePoly::operator()(double x) const { return poly::eval(pieces_[locate(x)].coeffs, x); }

double PiecewisePoly::derivative(double x) const {
  return poly::eval(poly::derivative(pieces_[locate(x)].coeffs), x);
}

std::vector<double> PiecewisePoly::breakpoints() const {
  std::vector<double> b;
  for (const auto& p : pieces_) b.push_back(p.lo);
  if (!pieces_.empty()) b.push_back(pieces_.back().hi);
  return b;
}

int PiecewisePoly::max_degree() const {
  int d = 0;
  for (const auto& p : pieces_) d = std::max(d, poly::degree(p.coeffs));
  return d;
}

PiecewisePoly PiecewisePoly::refined(std::span<const double> points) const {
  std::vector<double> cuts(points.begin(), points.end());
  cuts = sorted_unique(std::move(cuts));
  std::vector<PolyPiece> out;
  for (const auto& p : pieces_) {
    double start = p.lo;
    for (double c : cuts) {
      if (c > start && c < p.hi) {
        out.push_back({start, c, p.coeffs});
        start = c;
      }
    }
    out.push_back({start, p.hi, p.coeffs});
  }
  return PiecewisePoly(std::move(out));
}

PiecewisePoly PiecewisePoly::scaled(double s) const {
  std::vector<PolyPiece> out(pieces_);
  for (auto& p : out) p.coeffs = poly::scale(p.coeffs, s);
  return PiecewisePoly(std::move(out));
}

PiecewisePoly PiecewisePoly::axpy(double s, const PiecewisePoly& other) const {
  if (pieces_.empty()) return other.scaled(s);
  if (other.pieces_.empty()) return *this;
  if (!close_to(lo(), other.lo(), hi()) || !close_to(hi(), other.hi(), hi()))
    throw std::invalid_argument("axpy requires piecewise polynomials with equal support");
  const auto mine = breakpoints();
  const auto theirs = other.breakpoints();
  std::vector<double> all(mine);
  all.insert(all.end(), theirs.begin(), theirs.end());
  const PiecewisePoly a = refined(all);
  std::vector<PolyPiece> out;
  out.reserve(a.pieces_.size());
  for (const auto& p : a.pieces_) {
    const auto& q = other.pieces_[other.locate(0.5 * (p.lo + p.hi))];
    out.push_back({p.lo, p.hi, poly::add(p.coeffs, poly::scale(q.coeffs, s))});
  }
  return PiecewisePoly(std::move(out));
}

double PiecewisePoly::integral(double a, double b) const {
  double sum = 0.0;
  for (const auto& p : pieces_) {
    const double lo = std::max(a, p.lo);
    const double hi = std::min(b, p.hi);
    if (hi > lo) sum += integrate_product(p.coeffs, {1.0}, lo, hi);
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Condition

Condition::Condition(double horizon, std::vector<Atom> atoms, std::vector<DensityPiece> density)
    : horizon_(horizon), atoms_(std::move(atoms)), density_(std::move(density)) {
  if (!(horizon_ > 0.0) || !std::isfinite(horizon_)) throw std::invalid_argument("condition horizon must be positive");
  for (const auto& a : atoms_) {
    if (!std::isfinite(a.t) || !std::isfinite(a.w)) throw std::invalid_argument("condition atom is not finite");
    if (a.t < 0.0 || a.t > horizon_) throw std::invalid_argument("condition atom time outside [0, T]");
  }
  std::sort(atoms_.begin(), atoms_.end(), [](const Atom& x, const Atom& y) { return x.t < y.t; });
  for (const auto& d : density_) {
    if (!(d.hi > d.lo)) throw std::invalid_argument("density piece needs lo < hi");
    if (d.lo < 0.0 || d.hi > horizon_) throw std::invalid_argument("density piece outside [0, T]");
    if (d.coeffs.empty()) throw std::invalid_argument("density piece has no coefficients");
    for (double c : d.coeffs)
      if (!std::isfinite(c)) throw std::invalid_argument("density coefficient is not finite");
  }
  std::sort(density_.begin(), density_.end(), [](const auto& x, const auto& y) { return x.lo < y.lo; });
  for (std::size_t k = 1; k < density_.size(); ++k)
    if (density_[k].lo < density_[k - 1].hi) throw std::invalid_argument("density pieces overlap");
}

Condition Condition::point(double horizon, double t, double w) { return Condition(horizon, {{t, w}}, {}); }

Condition Condition::uniform(double horizon, double lo, double hi, double weight) {
  return Condition(horizon, {}, {{lo, hi, {weight}}});
}

Condition Condition::combine(std::span<const double> weights, std::span<const Condition> terms) {
  if (weights.size() != terms.size()) throw std::invalid_argument("combine: weights/terms size mismatch");
  if (terms.empty()) throw std::invalid_argument("combine: no terms");
  const double horizon = terms.front().horizon();

  std::vector<Atom> atoms;
  std::vector<double> cuts;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (terms[k].horizon() != horizon) throw std::invalid_argument("combine: horizons differ");
    for (const auto& a : terms[k].atoms()) atoms.push_back({a.t, weights[k] * a.w});
    for (const auto& d : terms[k].density()) {
      cuts.push_back(d.lo);
      cuts.push_back(d.hi);
    }
  }
  std::sort(atoms.begin(), atoms.end(), [](const Atom& x, const Atom& y) { return x.t < y.t; });
  std::vector<Atom> merged;
  for (const auto& a : atoms) {
    if (!merged.empty() && merged.back().t == a.t)
      merged.back().w += a.w;
    else
      merged.push_back(a);
  }
  std::erase_if(merged, [](const Atom& a) { return a.w == 0.0; });

  cuts = sorted_unique(std::move(cuts));
  std::vector<DensityPiece> density;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    poly::Coeffs sum;
    bool covered = false;
    for (std::size_t k = 0; k < terms.size(); ++k) {
      for (const auto& d : terms[k].density()) {
        if (d.lo < mid && mid < d.hi) {
          sum = poly::add(sum, poly::scale(d.coeffs, weights[k]));
          covered = true;
        }
      }
    }
    if (covered && std::any_of(sum.begin(), sum.end(), [](double c) { return c != 0.0; }))
      density.push_back({cuts[i], cuts[i + 1], std::move(sum)});
  }
  return Condition(horizon, std::move(merged), std::move(density));
}

Condition Condition::scaled(double s) const {
  std::vector<Atom> atoms(atoms_);
  for (auto& a : atoms) a.w *= s;
  std::vector<DensityPiece> density(density_);
  for (auto& d : density) d.coeffs = poly::scale(d.coeffs, s);
  return Condition(horizon_, std::move(atoms), std::move(density));
}

double Condition::total_variation() const {
  double tv = 0.0;
  for (const auto& a : atoms_) tv += std::abs(a.w);
  for (const auto& d : density_) {
    // |density| is smooth between its real roots; split there via a dense
    // subdivision, which is exact enough for the low degrees used here.
    constexpr int kSub = 64;
    const double h = (d.hi - d.lo) / kSub;
    for (int i = 0; i < kSub; ++i) {
      const double a = d.lo + i * h;
      tv += quad::adaptive([&](double x) { return std::abs(poly::eval(d.coeffs, x)); }, a, a + h, 1e-12);
    }
  }
  return tv;
}

std::vector<double> Condition::breakpoints() const {
  std::vector<double> b;
  for (const auto& a : atoms_) b.push_back(a.t);
  for (const auto& d : density_) {
    b.push_back(d.lo);
    b.push_back(d.hi);
  }
  return sorted_unique(std::move(b));
}

double Condition::density_at(double x) const {
  for (const auto& d : density_)
    if (x >= d.lo && x <= d.hi) return poly::eval(d.coeffs, x);
  return 0.0;
}

// ---------------------------------------------------------------------------
// integration against conditions

CellWeights cell_weights(const Condition& c, std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("cell_weights: empty grid");
  const std::size_t cells = grid.size() - 1;
  CellWeights cw;
  cw.left.assign(cells, 0.0);
  cw.right.assign(cells, 0.0);

  const double g0 = grid.front();
  const double g1 = grid.back();
  for (const auto& a : c.atoms()) {
    if (a.t < g0 || a.t > g1)
      throw std::domain_error("condition atom at t = " + std::to_string(a.t) + " outside path grid span");
    if (a.t == g0) {
      cw.initial += a.w;
      continue;
    }
    const auto j = static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), a.t) - grid.begin());
    const std::size_t k = j - 1;
    const double theta = (a.t - grid[k]) / (grid[k + 1] - grid[k]);
    cw.left[k] += a.w * (1.0 - theta);
    cw.right[k] += a.w * theta;
  }

  for (const auto& d : c.density()) {
    if (d.lo < g0 - kBoundaryTol || d.hi > g1 + kBoundaryTol)
      throw std::domain_error("condition density outside path grid span");
    auto first = std::upper_bound(grid.begin(), grid.end(), d.lo);
    std::size_t k = first == grid.begin() ? 0 : static_cast<std::size_t>(first - grid.begin()) - 1;
    for (; k < cells && grid[k] < d.hi; ++k) {
      const double xl = grid[k];
      const double xr = grid[k + 1];
      const double lo = std::max(d.lo, xl);
      const double hi = std::min(d.hi, xr);
      if (!(hi > lo)) continue;
      const double h = xr - xl;
      double wl = 0.0;
      double wr = 0.0;
      quad::for_each_node(lo, hi, [&](double x, double w) {
        const double rho = poly::eval(d.coeffs, x) * w;
        wl += rho * (xr - x) / h;
        wr += rho * (x - xl) / h;
      });
      cw.left[k] += wl;
      cw.right[k] += wr;
    }
  }
  return cw;
}

std::vector<double> grid_weights(const Condition& c, std::span<const double> grid) {
  const CellWeights cw = cell_weights(c, grid);
  std::vector<double> w(grid.size(), 0.0);
  w[0] = cw.initial;
  for (std::size_t k = 0; k < cw.left.size(); ++k) {
    w[k] += cw.left[k];
    w[k + 1] += cw.right[k];
  }
  return w;
}

Condition restrict_upto(const Condition& c, double s) {
  std::vector<Atom> atoms;
  for (const auto& a : c.atoms())
    if (a.t <= s) atoms.push_back(a);
  std::vector<DensityPiece> density;
  for (const auto& d : c.density())
    if (d.lo < s) density.push_back({d.lo, std::min(d.hi, s), d.coeffs});
  return Condition(c.horizon(), std::move(atoms), std::move(density));
}

std::vector<double> grid_weights_upto(const Condition& c, std::span<const double> grid, double s) {
  return grid_weights(restrict_upto(c, s), grid);
}

double apply(const Condition& c, const Path& p) {
  validate(p);
  const auto w = grid_weights(c, p.grid);
  double sum = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) sum += w[k] * p.values[k];
  return sum;
}

double apply_poly(const Condition& c, const PiecewisePoly& q, double lo, double hi) {
  const double T = c.horizon();
  if (lo < -kBoundaryTol * T || hi > T * (1.0 + kBoundaryTol) || hi < lo)
    throw std::domain_error("apply_poly: [lo, hi] must lie within [0, T]");
  double sum = 0.0;
  for (const auto& a : c.atoms())
    if (a.t > lo && a.t <= hi) sum += a.w * q(a.t);
  for (const auto& d : c.density()) {
    const double a = std::max(lo, d.lo);
    const double b = std::min(hi, d.hi);
    if (!(b > a)) continue;
    for (const auto& piece : q.pieces()) {
      const double pa = std::max(a, piece.lo);
      const double pb = std::min(b, piece.hi);
      if (pb > pa) sum += integrate_product(d.coeffs, piece.coeffs, pa, pb);
    }
  }
  return sum;
}

double apply_fn(const Condition& c, const std::function<double(double)>& fn, double lo, double hi,
                std::span<const double> breaks) {
  double sum = 0.0;
  for (const auto& a : c.atoms())
    if (a.t > lo && a.t <= hi) sum += a.w * fn(a.t);
  std::vector<double> cuts(breaks.begin(), breaks.end());
  for (const auto& d : c.density()) {
    const double a = std::max(lo, d.lo);
    const double b = std::min(hi, d.hi);
    if (!(b > a)) continue;
    std::vector<double> pts{a, b};
    for (double x : cuts)
      if (x > a && x < b) pts.push_back(x);
    pts = sorted_unique(std::move(pts));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      sum += quad::gauss([&](double x) { return poly::eval(d.coeffs, x) * fn(x); }, pts[i], pts[i + 1]);
  }
  return sum;
}

double tail_mass(const Condition& c, double x) {
  double sum = 0.0;
  for (const auto& a : c.atoms())
    if (a.t >= x) sum += a.w;
  for (const auto& d : c.density()) {
    const double lo = std::max(x, d.lo);
    if (d.hi > lo) sum += integrate_product(d.coeffs, {1.0}, lo, d.hi);
  }
  return sum;
}

}  // namespace gpcond
