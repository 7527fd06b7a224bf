#include "gpcond/conditioning.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace gpcond {

Eigen::MatrixXd build_B(const DetachedBasis& basis) {
  const auto r = static_cast<Eigen::Index>(basis.rank());
  Eigen::MatrixXd b(r, r);
  for (Eigen::Index j = 0; j < r; ++j) {
    const Condition& a = basis.conditions()[basis.kept()[static_cast<std::size_t>(j)]];
    for (Eigen::Index i = 0; i < r; ++i) {
      b(j, i) = apply_ue_upto(basis, static_cast<std::size_t>(i), a, basis.kernel().horizon());
    }
  }
  return b;
}

ConditionedModel::ConditionedModel(Kernel kernel, std::vector<Condition> conditions)
    : basis_(std::move(kernel), std::move(conditions)) {
  B_ = build_B(basis_);
  if (rank() == 0) return;
  B_lu_.compute(B_);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(B_);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) throw NumericError("B is singular");
  B_cond_ = sv(0) / smin;
  if (B_cond_ > 1e8) std::cerr << "warning: condition number of B is " << B_cond_ << "\n";
}

Eigen::VectorXd ConditionedModel::solve_B(const Eigen::VectorXd& b) const {
  if (rank() == 0) return Eigen::VectorXd();
  return B_lu_.solve(b);
}

double ConditionedModel::cond_cov(double s, double t) const {
  double v = kernel().cov(s, t);
  for (std::size_t i = 0; i < rank(); ++i) v -= basis_.ue(i, s) * basis_.ue(i, t);
  return v;
}

Eigen::VectorXd anticipative_coefficients(const ConditionedModel& m, const Path& p) {
  const auto& kept = m.basis().kept();
  Eigen::VectorXd b(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) b(static_cast<Eigen::Index>(j)) = apply(m.basis().conditions()[kept[j]], p);
  return m.solve_B(b);
}

ConditionedPath anticipative_transform(const ConditionedModel& m, const Path& p) {
  validate(p);
  GridTransform gt(m, p.grid);
  ConditionedPath out;
  Eigen::VectorXd none(0);
  Eigen::VectorXd res(static_cast<Eigen::Index>(m.basis().size()));
  gt.apply(p.values, out.xi, none, res);
  out.path = Path{p.grid, gt.output(p.values, out.xi)};
  out.residuals.assign(res.data(), res.data() + res.size());
  return out;
}

ConditionedPath anticipative_transform(const ConditionedModel& m, const ConditionedPath& p) {
  const auto& kept = m.basis().kept();
  if (p.residuals.size() != m.basis().size())
    throw std::invalid_argument("conditioned path does not match the model's condition count");
  Eigen::VectorXd b(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) b(static_cast<Eigen::Index>(j)) = p.residuals[kept[j]];
  const Eigen::VectorXd dxi = m.solve_B(b);
  const Eigen::MatrixXd ue = m.basis().ue_on(p.path.grid);
  const Eigen::MatrixXd& cross = m.basis().cross();

  ConditionedPath out;
  out.path = p.path;
  for (std::size_t k = 0; k < out.path.size(); ++k)
    for (Eigen::Index i = 0; i < dxi.size(); ++i) out.path.values[k] -= dxi(i) * ue(i, static_cast<Eigen::Index>(k));
  out.xi = p.xi.size() == dxi.size() ? Eigen::VectorXd(p.xi + dxi) : dxi;
  const Eigen::VectorXd res = Eigen::Map<const Eigen::VectorXd>(p.residuals.data(), static_cast<Eigen::Index>(p.residuals.size())) -
                              cross * dxi;
  out.residuals.assign(res.data(), res.data() + res.size());
  return out;
}

// ---------------------------------------------------------------------------

GridTransform::GridTransform(const ConditionedModel& m, std::span<const double> grid)
    : model_(&m), grid_(grid.begin(), grid.end()) {
  validate(Path{grid_, std::vector<double>(grid_.size(), 0.0)});
  const auto& basis = m.basis();
  const auto n = static_cast<Eigen::Index>(grid_.size());
  cond_w_.resize(static_cast<Eigen::Index>(basis.size()), n);
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const auto w = grid_weights(basis.conditions()[j], grid_);
    cond_w_.row(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::RowVectorXd>(w.data(), n);
  }
  cross_ = basis.cross();
  ue_ = basis.ue_on(grid_);
  read_w_.resize(0, n);
  read_c_.resize(0, static_cast<Eigen::Index>(basis.rank()));
}

void GridTransform::add_point(std::size_t k) {
  if (k >= grid_.size()) throw std::out_of_range("readout index beyond grid");
  const Eigen::Index m = read_w_.rows();
  read_w_.conservativeResize(m + 1, Eigen::NoChange);
  read_c_.conservativeResize(m + 1, Eigen::NoChange);
  read_w_.row(m).setZero();
  read_w_(m, static_cast<Eigen::Index>(k)) = 1.0;
  read_c_.row(m) = ue_.col(static_cast<Eigen::Index>(k)).transpose();
}

void GridTransform::add_partial_integral(const Condition& c, double s) {
  const auto& basis = model_->basis();
  const Eigen::Index m = read_w_.rows();
  read_w_.conservativeResize(m + 1, Eigen::NoChange);
  read_c_.conservativeResize(m + 1, Eigen::NoChange);
  const auto w = grid_weights_upto(c, grid_, s);
  read_w_.row(m) = Eigen::Map<const Eigen::RowVectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < basis.rank(); ++i) {
    read_c_(m, static_cast<Eigen::Index>(i)) = apply_ue_upto(basis, i, c, s);
  }
}

void GridTransform::apply(std::span<const double> base, Eigen::VectorXd& xi, Eigen::Ref<Eigen::VectorXd> readout,
                          Eigen::Ref<Eigen::VectorXd> residual) const {
  const Eigen::Map<const Eigen::VectorXd> p(base.data(), static_cast<Eigen::Index>(base.size()));
  const Eigen::VectorXd b_all = cond_w_ * p;
  const auto& kept = model_->basis().kept();
  Eigen::VectorXd b(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t j = 0; j < kept.size(); ++j) b(static_cast<Eigen::Index>(j)) = b_all(static_cast<Eigen::Index>(kept[j]));
  xi = model_->solve_B(b);
  if (readout.size() > 0) readout.noalias() = read_w_ * p - read_c_ * xi;
  if (residual.size() > 0) residual.noalias() = b_all - cross_ * xi;
}

std::vector<double> GridTransform::output(std::span<const double> base, const Eigen::VectorXd& xi) const {
  std::vector<double> out(base.begin(), base.end());
  for (std::size_t k = 0; k < out.size(); ++k)
    for (Eigen::Index i = 0; i < xi.size(); ++i) out[k] -= xi(i) * ue_(i, static_cast<Eigen::Index>(k));
  return out;
}

}  // namespace gpcond
