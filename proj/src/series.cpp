#include "gpcond/series.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "gpcond/rng.hpp"

namespace gpcond {

namespace {

double trig_term(std::size_t j, double tau, double length) {
  if (j == 0) return tau / std::sqrt(length);
  const double n = static_cast<double>(j);
  return std::sqrt(2.0 * length) * std::sin(std::numbers::pi * n * tau / length) / (std::numbers::pi * n);
}

}  // namespace

SeriesBasis::SeriesBasis(const ConditionedModel& m, std::size_t n_terms) : model_(&m), n_terms_(n_terms) {
  const Kernel& k = m.kernel();
  if (!k.is_markov()) throw std::invalid_argument("series sampling needs a Markov kernel");
  if (n_terms < m.rank())
    throw std::invalid_argument("n_terms (" + std::to_string(n_terms) + ") is below the condition rank (" +
                                std::to_string(m.rank()) + ")");
  const double T = k.horizon();
  length_ = k.h(T);
  if (!(length_ > 0.0)) throw std::invalid_argument("series sampling needs h(T) > 0");

  // Oscillations per unit s are at most n * max h' / L; pick pieces so each
  // carries about two half-periods, well inside what 20-point Gauss resolves.
  constexpr int kProbe = 1024;
  double stretch = 1.0;
  for (int i = 0; i < kProbe; ++i) {
    const double a = T * i / kProbe;
    const double b = T * (i + 1) / kProbe;
    stretch = std::max(stretch, (k.h(b) - k.h(a)) / (b - a) * T / length_);
  }
  stretch *= 1.1;

  const auto& conds = m.basis().conditions();
  const auto nc = static_cast<Eigen::Index>(conds.size());
  q_.resize(nc, static_cast<Eigen::Index>(n_terms));
  for (std::size_t j = 0; j < n_terms; ++j) {
    const auto pieces = static_cast<std::size_t>(1 + std::ceil(static_cast<double>(j) * stretch / 2.0));
    std::vector<double> breaks(m.basis().breakpoints());
    for (std::size_t p = 1; p < pieces; ++p) breaks.push_back(T * static_cast<double>(p) / static_cast<double>(pieces));
    auto fn = [&](double s) { return uh(j, s); };
    for (Eigen::Index c = 0; c < nc; ++c) {
      double v = apply_fn(conds[static_cast<std::size_t>(c)], fn, 0.0, T, breaks);
      for (const auto& a : conds[static_cast<std::size_t>(c)].atoms())
        if (a.t == 0.0) v += a.w * fn(0.0);
      q_(c, static_cast<Eigen::Index>(j)) = v;
    }
  }
  p_ = m.basis().coeffs() * q_;
  e_ = q_ - m.basis().cross() * p_;
}

double SeriesBasis::uh(std::size_t j, double s) const {
  const Kernel& k = model_->kernel();
  return k.g(s) * trig_term(j, k.h(s), length_);
}

Eigen::MatrixXd SeriesBasis::deflated(std::span<const double> grid) const {
  const auto n = static_cast<Eigen::Index>(grid.size());
  Eigen::MatrixXd d(n, static_cast<Eigen::Index>(n_terms_));
  for (Eigen::Index r = 0; r < n; ++r)
    for (std::size_t j = 0; j < n_terms_; ++j) d(r, static_cast<Eigen::Index>(j)) = uh(j, grid[static_cast<std::size_t>(r)]);
  if (model_->rank() > 0) d.noalias() -= model_->basis().ue_on(grid).transpose() * p_;
  return d;
}

ConditionedPath series_path(const SeriesBasis& sb, const Eigen::MatrixXd& deflated, std::span<const double> grid,
                            const Eigen::VectorXd& omega) {
  ConditionedPath out;
  const Eigen::VectorXd v = deflated * omega;
  out.path = Path{std::vector<double>(grid.begin(), grid.end()), std::vector<double>(v.data(), v.data() + v.size())};
  out.xi = sb.detached_coords() * omega;
  const Eigen::VectorXd res = sb.deflated_functionals() * omega;
  out.residuals.assign(res.data(), res.data() + res.size());
  return out;
}

ConditionedPath sample_series(const SeriesBasis& sb, const ConditionedModel& /*m*/, std::span<const double> grid,
                              std::uint64_t seed) {
  Engine rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd omega(static_cast<Eigen::Index>(sb.n_terms()));
  for (Eigen::Index j = 0; j < omega.size(); ++j) omega(j) = normal(rng);
  return series_path(sb, sb.deflated(grid), grid, omega);
}

double series_truncation_error(const SeriesBasis& sb, const ConditionedModel& m, std::span<const double> grid) {
  const Eigen::MatrixXd d = sb.deflated(grid);
  double worst = 0.0;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    const double var = d.row(static_cast<Eigen::Index>(r)).squaredNorm();
    worst = std::max(worst, std::abs(m.cond_cov(grid[r], grid[r]) - var));
  }
  return worst;
}

}  // namespace gpcond
