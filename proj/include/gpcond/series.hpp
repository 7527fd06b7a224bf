#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "gpcond/conditioning.hpp"

namespace gpcond {

/// Truncated trigonometric expansion of a Markov base process, projected onto
/// the reduced space. For Brownian motion on [0, L] the terms are
/// uh_0 = t / sqrt(L) and uh_n = sqrt(2L) sin(pi n t / L) / (pi n); other
/// Markov kernels use uh_j(s) = g(s) uh_j(h(s)) with L = h(T).
class SeriesBasis {
 public:
  SeriesBasis(const ConditionedModel& m, std::size_t n_terms);

  std::size_t n_terms() const { return n_terms_; }
  double uh(std::size_t j, double s) const;

  /// Q_kj = a_k(uh_j), N x n_terms.
  const Eigen::MatrixXd& functionals() const { return q_; }
  /// P = C Q, the detached coordinates of each term (rank x n_terms).
  const Eigen::MatrixXd& detached_coords() const { return p_; }
  /// a_k of each deflated term; zero up to rounding (N x n_terms).
  const Eigen::MatrixXd& deflated_functionals() const { return e_; }

  /// n x n_terms matrix of deflated terms uh_j - sum_i P_ij u e_i on the grid.
  Eigen::MatrixXd deflated(std::span<const double> grid) const;

 private:
  const ConditionedModel* model_;
  std::size_t n_terms_;
  double length_ = 1.0;
  Eigen::MatrixXd q_;
  Eigen::MatrixXd p_;
  Eigen::MatrixXd e_;
};

/// One path of the truncated series on the grid. `xi` holds P omega and the
/// residuals are a_j of the truncated sum.
ConditionedPath sample_series(const SeriesBasis& sb, const ConditionedModel& m, std::span<const double> grid,
                              std::uint64_t seed);

/// Same, from a precomputed deflated matrix and a caller-supplied omega.
ConditionedPath series_path(const SeriesBasis& sb, const Eigen::MatrixXd& deflated, std::span<const double> grid,
                            const Eigen::VectorXd& omega);

/// sup over the grid of |cond_cov(s, s) - sum_j (deflated uh_j)(s)^2|.
double series_truncation_error(const SeriesBasis& sb, const ConditionedModel& m, std::span<const double> grid);

}  // namespace gpcond
