#include "gpcond/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "gpcond/quadrature.hpp"
#include "gpcond/rng.hpp"

namespace gpcond {

namespace {

std::vector<double> sorted_unique(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

// Points where x -> kernel_apply(k, c, x) may lose smoothness.
std::vector<double> smoothness_breaks(const Kernel& k, const Condition& c) {
  std::vector<double> b = c.breakpoints();
  const auto kb = k.breakpoints();
  b.insert(b.end(), kb.begin(), kb.end());
  b.push_back(0.0);
  b.push_back(k.horizon());
  return sorted_unique(std::move(b));
}

const poly::Coeffs& piece_on(const PiecewisePoly& p, double lo, double hi) {
  return p.pieces()[p.locate(0.5 * (lo + hi))].coeffs;
}

poly::Coeffs density_on(const Condition& c, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  for (const auto& d : c.density())
    if (d.lo < mid && mid < d.hi) return d.coeffs;
  return {0.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// Factor

double Factor::operator()(double x) const {
  if (const auto* p = as_poly()) return (*p)(x);
  const auto& e = std::get<Exponential>(rep_);
  return e.scale * std::exp(e.rate * x);
}

double Factor::derivative(double x) const {
  if (const auto* p = as_poly()) return p->derivative(x);
  const auto& e = std::get<Exponential>(rep_);
  return e.scale * e.rate * std::exp(e.rate * x);
}

double Factor::integrate_against(const poly::Coeffs& density, double lo, double hi) const {
  if (!(hi > lo)) return 0.0;
  if (const auto* p = as_poly()) {
    double sum = 0.0;
    for (const auto& piece : p->pieces()) {
      const double a = std::max(lo, piece.lo);
      const double b = std::min(hi, piece.hi);
      if (b > a) sum += poly::integrate_product(piece.coeffs, density, a, b);
    }
    return sum;
  }
  // exp(rate x) * poly: 20-point Gauss-Legendre on sub-intervals with
  // |rate| * width <= 2 is accurate to rounding.
  const auto& e = std::get<Exponential>(rep_);
  const int parts = std::max(1, static_cast<int>(std::ceil(std::abs(e.rate) * (hi - lo) / 2.0)));
  const double w = (hi - lo) / parts;
  double sum = 0.0;
  for (int i = 0; i < parts; ++i) {
    const double a = lo + i * w;
    const double b = (i + 1 == parts) ? hi : a + w;
    sum += quad::gauss([&](double x) { return e.scale * std::exp(e.rate * x) * poly::eval(density, x); }, a, b);
  }
  return sum;
}

std::vector<double> Factor::breakpoints() const {
  if (const auto* p = as_poly()) return p->breakpoints();
  return {};
}

// ---------------------------------------------------------------------------
// Kernel

Kernel Kernel::brownian(double horizon) {
  return from_factors("bm", horizon,
                      MarkovFactors{PiecewisePoly::polynomial(0.0, horizon, {0.0, 1.0}),
                                    PiecewisePoly::constant(0.0, horizon, 1.0)},
                      1.0);
}

Kernel Kernel::ornstein_uhlenbeck(double horizon, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("OU rate must be positive");
  return from_factors("ou", horizon, MarkovFactors{Exponential{1.0, rate}, Exponential{1.0, -rate}},
                      std::sqrt(2.0 * rate));
}

Kernel Kernel::custom_fg(double horizon, PiecewisePoly f, PiecewisePoly g, double alpha) {
  for (const PiecewisePoly* p : {&f, &g}) {
    if (p->empty() || std::abs(p->lo()) > 1e-12 || std::abs(p->hi() - horizon) > 1e-12 * horizon)
      throw std::invalid_argument("custom-fg factors must cover [0, T]");
  }
  return from_factors("custom-fg", horizon, MarkovFactors{std::move(f), std::move(g)}, alpha);
}

Kernel Kernel::from_factors(std::string name, double horizon, MarkovFactors factors, double alpha) {
  if (!(horizon > 0.0)) throw std::invalid_argument("kernel horizon must be positive");
  Kernel k;
  k.name_ = std::move(name);
  k.horizon_ = horizon;
  k.factors_ = std::move(factors);
  k.alpha_ = alpha;
  k.validate_markov();
  return k;
}

Kernel Kernel::from_function(std::string name, double horizon, CovFn cov) {
  if (!(horizon > 0.0)) throw std::invalid_argument("kernel horizon must be positive");
  Kernel k;
  k.name_ = std::move(name);
  k.horizon_ = horizon;
  k.cov_fn_ = std::move(cov);
  return k;
}

const MarkovFactors& Kernel::factors() const {
  if (!factors_) throw std::logic_error("kernel '" + name_ + "' has no Markov factorization");
  return *factors_;
}

bool Kernel::is_polynomial() const {
  return factors_ && factors_->f.as_poly() != nullptr && factors_->g.as_poly() != nullptr;
}

double Kernel::cov(double s, double t) const {
  if (factors_) return factors_->f(std::min(s, t)) * factors_->g(std::max(s, t));
  return cov_fn_(s, t);
}

double Kernel::h(double s) const {
  const double fv = f(s);
  const double gv = g(s);
  if (fv == 0.0 && gv == 0.0) return 0.0;
  if (gv == 0.0) throw std::domain_error("kernel factor g vanishes where f does not");
  return fv / gv;
}

std::vector<double> Kernel::breakpoints() const {
  if (!factors_) return {};
  auto b = factors_->f.breakpoints();
  auto gb = factors_->g.breakpoints();
  b.insert(b.end(), gb.begin(), gb.end());
  return sorted_unique(std::move(b));
}

void Kernel::validate_markov() const {
  constexpr int kPoints = 1024;
  double prev_h = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double s = horizon_ * i / (kPoints - 1);
    const double hs = h(s);
    if (hs < -1e-12) throw std::invalid_argument("kernel '" + name_ + "': h = f/g is negative");
    if (i > 0 && hs < prev_h - 1e-12 * std::max(1.0, std::abs(prev_h)))
      throw std::invalid_argument("kernel '" + name_ + "': h = f/g is not non-decreasing");
    if (i > 0 && i + 1 < kPoints && !(cov(s, s) > 0.0))
      throw std::invalid_argument("kernel '" + name_ + "': variance vanishes inside (0, T)");
    prev_h = hs;
  }
}

// ---------------------------------------------------------------------------
// kernel integrals

double kernel_apply(const Kernel& k, const Condition& c, double s) {
  if (!k.is_markov()) {
    double sum = 0.0;
    for (const auto& a : c.atoms()) sum += a.w * k.cov(s, a.t);
    for (const auto& d : c.density()) {
      auto integrand = [&](double x) { return k.cov(s, x) * poly::eval(d.coeffs, x); };
      if (s > d.lo && s < d.hi)
        sum += quad::adaptive(integrand, d.lo, s) + quad::adaptive(integrand, s, d.hi);
      else
        sum += quad::adaptive(integrand, d.lo, d.hi);
    }
    return sum;
  }
  const auto& [f, g] = k.factors();
  double lower = 0.0;  // integral of f over [0, s]
  double upper = 0.0;  // integral of g over (s, T]
  for (const auto& a : c.atoms()) {
    if (a.t <= s)
      lower += a.w * f(a.t);
    else
      upper += a.w * g(a.t);
  }
  for (const auto& d : c.density()) {
    lower += f.integrate_against(d.coeffs, d.lo, std::min(s, d.hi));
    upper += g.integrate_against(d.coeffs, std::max(s, d.lo), d.hi);
  }
  return g(s) * lower + f(s) * upper;
}

std::optional<PiecewisePoly> kernel_apply_poly(const Kernel& k, const Condition& c) {
  if (!k.is_polynomial()) return std::nullopt;
  const PiecewisePoly& f = *k.factors().f.as_poly();
  const PiecewisePoly& g = *k.factors().g.as_poly();
  const auto breaks = smoothness_breaks(k, c);

  // lower = int_[0,s] f dc, upper = int_(s,T] g dc, tracked at cell starts.
  double lower = 0.0;
  double upper = 0.0;
  for (const auto& a : c.atoms()) {
    if (a.t <= breaks.front())
      lower += a.w * f(a.t);
    else
      upper += a.w * g(a.t);
  }
  for (const auto& d : c.density()) upper += k.factors().g.integrate_against(d.coeffs, d.lo, d.hi);

  std::vector<PolyPiece> pieces;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = breaks[i];
    const double hi = breaks[i + 1];
    const poly::Coeffs& fp = piece_on(f, lo, hi);
    const poly::Coeffs& gp = piece_on(g, lo, hi);
    const poly::Coeffs rho = density_on(c, lo, hi);
    const poly::Coeffs fa = poly::antiderivative(poly::multiply(fp, rho));
    const poly::Coeffs ga = poly::antiderivative(poly::multiply(gp, rho));
    // lower(s) = lower + fa(s) - fa(lo); upper(s) = upper - ga(s) + ga(lo)
    const poly::Coeffs low_s = poly::add(fa, {lower - poly::eval(fa, lo)});
    const poly::Coeffs up_s = poly::add(poly::scale(ga, -1.0), {upper + poly::eval(ga, lo)});
    pieces.push_back({lo, hi, poly::add(poly::multiply(gp, low_s), poly::multiply(fp, up_s))});

    const double fmass = poly::integrate_product(fp, rho, lo, hi);
    const double gmass = poly::integrate_product(gp, rho, lo, hi);
    lower += fmass;
    upper -= gmass;
    for (const auto& a : c.atoms()) {
      if (a.t == hi) {
        lower += a.w * f(a.t);
        upper -= a.w * g(a.t);
      }
    }
  }
  return PiecewisePoly(std::move(pieces));
}

double kernel_double_apply(const Kernel& k, const Condition& c1, const Condition& c2) {
  double sum = 0.0;
  for (const auto& a : c1.atoms()) sum += a.w * kernel_apply(k, c2, a.t);
  const auto breaks = smoothness_breaks(k, c2);
  auto inner = [&](double x) { return kernel_apply(k, c2, x); };
  for (const auto& d : c1.density()) {
    std::vector<double> pts{d.lo, d.hi};
    for (double b : breaks)
      if (b > d.lo && b < d.hi) pts.push_back(b);
    pts = sorted_unique(std::move(pts));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      auto integrand = [&](double x) { return poly::eval(d.coeffs, x) * inner(x); };
      sum += k.is_markov() ? quad::gauss(integrand, pts[i], pts[i + 1])
                           : quad::adaptive(integrand, pts[i], pts[i + 1]);
    }
  }
  return sum;
}

// ---------------------------------------------------------------------------
// sampling

std::vector<double> cholesky_lower(std::vector<double> a, std::size_t n) {
  std::size_t bad = 0;
  auto factor = [&](std::vector<double>& m) -> bool {
    for (std::size_t j = 0; j < n; ++j) {
      double d = m[j * n + j];
      for (std::size_t p = 0; p < j; ++p) d -= m[j * n + p] * m[j * n + p];
      if (!(d > 0.0)) {
        bad = j;
        return false;
      }
      const double ljj = std::sqrt(d);
      m[j * n + j] = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double v = m[i * n + j];
        for (std::size_t p = 0; p < j; ++p) v -= m[i * n + p] * m[j * n + p];
        m[i * n + j] = v / ljj;
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = 0.0;
    return true;
  };
  std::vector<double> work = a;
  if (factor(work)) return work;
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += 1e-12;
  if (factor(a)) return a;
  throw NumericError("Cholesky failed: leading minor of order " + std::to_string(bad + 1) +
                     " is not positive definite (after 1e-12 diagonal jitter)");
}

Path sample_base_path(const Kernel& k, std::span<const double> grid, std::uint64_t seed) {
  Path p{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(grid.size(), 0.0)};
  validate(p);
  if (p.grid.back() > k.horizon() * (1.0 + 1e-12)) throw std::invalid_argument("grid extends beyond kernel horizon");
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  if (k.is_markov()) {
    double w = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double hs = k.h(grid[i]);
      const double var = std::max(0.0, hs - prev);
      w += std::sqrt(var) * normal(rng);
      prev = std::max(prev, hs);
      p.values[i] = k.g(grid[i]) * w;
    }
    return p;
  }

  const std::size_t n = grid.size();
  if (n > 4096) throw std::invalid_argument("dense Cholesky sampling is limited to 4096 grid points");
  std::vector<double> gram(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) gram[i * n + j] = k.cov(grid[i], grid[j]);
  const auto l = cholesky_lower(std::move(gram), n);
  std::vector<double> z(n);
  for (auto& v : z) v = normal(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j <= i; ++j) v += l[i * n + j] * z[j];
    p.values[i] = v;
  }
  return p;
}

}  // namespace gpcond
