#include "gpcond/detached.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gpcond {

Eigen::MatrixXd gram(const Kernel& k, std::span<const Condition> conditions) {
  const auto n = static_cast<Eigen::Index>(conditions.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel_double_apply(k, conditions[i], conditions[j]);
      g(i, j) = v;
      g(j, i) = v;
    }
  }
  return g;
}

DetachedBasis::DetachedBasis(Kernel kernel, std::vector<Condition> conditions)
    : kernel_(std::move(kernel)), conditions_(std::move(conditions)) {
  for (const auto& c : conditions_) {
    if (std::abs(c.horizon() - kernel_.horizon()) > 1e-12 * kernel_.horizon())
      throw std::invalid_argument("condition horizon differs from kernel horizon");
  }
  gram_ = gpcond::gram(kernel_, conditions_);
  const auto n = static_cast<Eigen::Index>(conditions_.size());

  double max_diag = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) max_diag = std::max(max_diag, gram_(i, i));
  if (n > 0 && !(max_diag > 0.0)) throw std::invalid_argument("no effective conditions");

  // Modified Gram-Schmidt in coefficient space, with one re-orthogonalization pass.
  std::vector<Eigen::VectorXd> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = Eigen::VectorXd::Unit(n, i);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& r : rows) v -= (r.dot(gram_ * v)) * r;
    }
    const double var = v.dot(gram_ * v);
    if (!(var > kDropTolerance * max_diag)) {
      dropped_.push_back(static_cast<std::size_t>(i));
      continue;
    }
    kept_.push_back(static_cast<std::size_t>(i));
    rows.push_back(v / std::sqrt(var));
  }

  coeffs_.resize(static_cast<Eigen::Index>(rows.size()), n);
  for (std::size_t r = 0; r < rows.size(); ++r) coeffs_.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();

  for (const auto& r : rows) {
    elements_.push_back(Condition::combine(std::span<const double>(r.data(), static_cast<std::size_t>(r.size())),
                                           conditions_));
    exact_.push_back(kernel_apply_poly(kernel_, elements_.back()));
  }

  breaks_ = {0.0, kernel_.horizon()};
  for (const auto& c : conditions_) {
    const auto b = c.breakpoints();
    breaks_.insert(breaks_.end(), b.begin(), b.end());
  }
  const auto kb = kernel_.breakpoints();
  breaks_.insert(breaks_.end(), kb.begin(), kb.end());
  std::sort(breaks_.begin(), breaks_.end());
  breaks_.erase(std::unique(breaks_.begin(), breaks_.end()), breaks_.end());

  cross_.resize(n, static_cast<Eigen::Index>(rank()));
  for (Eigen::Index j = 0; j < n; ++j)
    for (std::size_t i = 0; i < rank(); ++i)
      cross_(j, static_cast<Eigen::Index>(i)) = apply_ue_upto(*this, i, conditions_[static_cast<std::size_t>(j)], kernel_.horizon());
}

double DetachedBasis::ue(std::size_t i, double s) const {
  if (exact_[i]) return (*exact_[i])(s);
  return kernel_apply(kernel_, elements_[i], s);
}

Eigen::MatrixXd DetachedBasis::ue_on(std::span<const double> grid) const {
  Eigen::MatrixXd u(static_cast<Eigen::Index>(rank()), static_cast<Eigen::Index>(grid.size()));
  for (std::size_t i = 0; i < rank(); ++i)
    for (std::size_t k = 0; k < grid.size(); ++k) u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = ue(i, grid[k]);
  return u;
}

double apply_ue(const DetachedBasis& b, std::size_t i, const Condition& c, double lo, double hi) {
  if (const auto& q = b.ue_exact(i)) return apply_poly(c, *q, lo, hi);
  return apply_fn(c, [&](double x) { return b.ue(i, x); }, lo, hi, b.breakpoints());
}

double apply_ue_upto(const DetachedBasis& b, std::size_t i, const Condition& c, double s) {
  double at0 = 0.0;
  for (const auto& a : c.atoms())
    if (a.t == 0.0) at0 += a.w;
  return apply_ue(b, i, c, 0.0, s) + (at0 != 0.0 ? at0 * b.ue(i, 0.0) : 0.0);
}

double residual_check(const DetachedBasis& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < b.rank(); ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      const double ip = kernel_double_apply(b.kernel(), b.element(i), b.element(j));
      worst = std::max(worst, std::abs(ip - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

}  // namespace gpcond
