#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpcond/conditions.hpp"
#include "gpcond/kernel.hpp"

namespace gpcond {

/// G_ij = double integral of R against a_i x a_j.
Eigen::MatrixXd gram(const Kernel& k, std::span<const Condition> conditions);

/// Orthonormalized conditions and the functions s -> (u e_i)(s) spanning the
/// detached subspace.
///
/// Coefficients are stored as a rank x N matrix C with e_i = sum_l C_il a_l.
/// Conditions are processed in their given order and one whose residual
/// variance falls below 1e-10 of the largest Gram diagonal is dropped, so C is
/// lower triangular in the columns that were kept.
class DetachedBasis {
 public:
  static constexpr double kDropTolerance = 1e-10;

  DetachedBasis(Kernel kernel, std::vector<Condition> conditions);

  const Kernel& kernel() const { return kernel_; }
  const std::vector<Condition>& conditions() const { return conditions_; }
  std::size_t size() const { return conditions_.size(); }
  std::size_t rank() const { return kept_.size(); }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::MatrixXd& coeffs() const { return coeffs_; }
  const std::vector<std::size_t>& kept() const { return kept_; }
  const std::vector<std::size_t>& dropped() const { return dropped_; }

  /// e_i as a single measure.
  const Condition& element(std::size_t i) const { return elements_[i]; }

  double ue(std::size_t i, double s) const;
  /// Exact piecewise-polynomial form of u e_i, when the kernel allows it.
  const std::optional<PiecewisePoly>& ue_exact(std::size_t i) const { return exact_[i]; }
  /// Rank x n matrix of u e_i on the grid.
  Eigen::MatrixXd ue_on(std::span<const double> grid) const;

  /// Union of condition and kernel breakpoints with 0 and T; the u e_i are
  /// smooth between consecutive entries.
  const std::vector<double>& breakpoints() const { return breaks_; }

  /// a_j(u e_i) for every condition j and basis element i (N x rank);
  /// equals G C^T.
  const Eigen::MatrixXd& cross() const { return cross_; }

 private:
  Kernel kernel_;
  std::vector<Condition> conditions_;
  Eigen::MatrixXd gram_;
  Eigen::MatrixXd coeffs_;
  std::vector<std::size_t> kept_;
  std::vector<std::size_t> dropped_;
  std::vector<Condition> elements_;
  std::vector<std::optional<PiecewisePoly>> exact_;
  std::vector<double> breaks_;
  Eigen::MatrixXd cross_;
};

/// Integral of u e_i against c over (lo, hi]. Exact for polynomial kernels.
double apply_ue(const DetachedBasis& b, std::size_t i, const Condition& c, double lo, double hi);
/// Same over [0, s], atoms at 0 included.
double apply_ue_upto(const DetachedBasis& b, std::size_t i, const Condition& c, double s);

/// max |<e_i, e_j> - delta_ij|, with the inner products recomputed from the
/// kernel rather than from the stored Gram matrix. Zero for rank 0.
double residual_check(const DetachedBasis& b);

}  // namespace gpcond
