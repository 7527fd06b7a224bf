#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpcond/detached.hpp"
#include "gpcond/path.hpp"

namespace gpcond {

/// B_ji = a_j(u e_i) over the kept conditions j.
Eigen::MatrixXd build_B(const DetachedBasis& basis);

/// The base process conditioned on a(X) = 0 for every a in the condition set.
class ConditionedModel {
 public:
  ConditionedModel(Kernel kernel, std::vector<Condition> conditions);

  const Kernel& kernel() const { return basis_.kernel(); }
  const DetachedBasis& basis() const { return basis_; }
  std::size_t rank() const { return basis_.rank(); }
  double horizon() const { return kernel().horizon(); }

  const Eigen::MatrixXd& B() const { return B_; }
  double B_condition_number() const { return B_cond_; }
  /// xi = B^-1 b for b indexed by kept condition.
  Eigen::VectorXd solve_B(const Eigen::VectorXd& b) const;

  double cond_cov(double s, double t) const;

 private:
  DetachedBasis basis_;
  Eigen::MatrixXd B_;
  Eigen::PartialPivLU<Eigen::MatrixXd> B_lu_;
  double B_cond_ = 1.0;
};

/// A conditioned path: grid values of the function interp(base) - sum xi_i u e_i.
/// `residuals` holds a_j of that function for every condition j, computed
/// without discretizing the smooth part.
struct ConditionedPath {
  Path path;
  Eigen::VectorXd xi;
  std::vector<double> residuals;
};

/// xi = B^-1 b(p) with b_j = apply(a_j, p) over the kept conditions.
Eigen::VectorXd anticipative_coefficients(const ConditionedModel& m, const Path& p);

ConditionedPath anticipative_transform(const ConditionedModel& m, const Path& p);

/// Transforming an already conditioned path uses its exact residuals as b,
/// so the result equals the input up to rounding.
ConditionedPath anticipative_transform(const ConditionedModel& m, const ConditionedPath& p);

/// Everything the transform needs on one fixed grid, precomputed so that each
/// path costs a few dense products. Readouts are linear functionals of the
/// output function of the form w . base - c . xi.
class GridTransform {
 public:
  GridTransform(const ConditionedModel& m, std::span<const double> grid);

  const ConditionedModel& model() const { return *model_; }
  std::span<const double> grid() const { return grid_; }
  /// Adds a readout of the output value at grid index k.
  void add_point(std::size_t k);
  /// Adds a readout of the output integrated against c over [0, s].
  void add_partial_integral(const Condition& c, double s);
  std::size_t readouts() const { return static_cast<std::size_t>(read_w_.rows()); }

  /// Computes xi, the readouts and the exact residuals for one base path.
  void apply(std::span<const double> base, Eigen::VectorXd& xi, Eigen::Ref<Eigen::VectorXd> readout,
             Eigen::Ref<Eigen::VectorXd> residual) const;

  /// Full output values on the grid.
  std::vector<double> output(std::span<const double> base, const Eigen::VectorXd& xi) const;

 private:
  const ConditionedModel* model_;
  std::vector<double> grid_;
  Eigen::MatrixXd cond_w_;   // N x n, apply(a_j, .) as grid weights
  Eigen::MatrixXd cross_;    // N x rank, a_j(u e_i)
  Eigen::MatrixXd ue_;       // rank x n
  Eigen::MatrixXd read_w_;   // M x n
  Eigen::MatrixXd read_c_;   // M x rank
};

}  // namespace gpcond
