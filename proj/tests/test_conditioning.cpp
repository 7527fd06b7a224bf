#include <cmath>
#include <random>

#include <doctest.h>

#include "gpcond/batch.hpp"
#include "gpcond/conditioning.hpp"
#include "gpcond/rng.hpp"
#include "gpcond/verify.hpp"
#include "oracles.hpp"

using namespace gpcond;

namespace {

ConditionedModel zabb() {
  return ConditionedModel(Kernel::brownian(1.0), {Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 1.0)});
}

ConditionedModel bridge() { return ConditionedModel(Kernel::brownian(1.0), {Condition::point(1.0, 1.0)}); }

double trapezoid_path(const Path& p) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < p.size(); ++k)
    s += 0.5 * (p.values[k] + p.values[k + 1]) * (p.grid[k + 1] - p.grid[k]);
  return s;
}

}  // namespace

TEST_CASE("conditioned covariance examples") {
  const auto m = zabb();
  CHECK(m.cond_cov(0.5, 0.5) == doctest::Approx(0.0625).epsilon(1e-13));
  CHECK(m.cond_cov(0.3, 0.7) == doctest::Approx(-0.0423).epsilon(1e-13));
  CHECK(bridge().cond_cov(0.5, 0.5) == doctest::Approx(0.25).epsilon(1e-14));
  for (double s = 0.0; s <= 1.0; s += 0.125)
    for (double t = 0.0; t <= 1.0; t += 0.125) {
      CHECK(std::abs(m.cond_cov(s, t) - oracle::zabb_cov(s, t)) < 1e-12);
      CHECK(std::abs(m.cond_cov(s, t) - m.cond_cov(t, s)) < 1e-15);
    }
}

TEST_CASE("conditioned covariance is PSD on a grid") {
  const ConditionedModel m(Kernel::ornstein_uhlenbeck(1.0, 1.0),
                           {Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 0.6)});
  const auto grid = uniform_grid(1.0, 64);
  Eigen::MatrixXd K(64, 64);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) K(i, j) = m.cond_cov(grid[static_cast<std::size_t>(i)], grid[static_cast<std::size_t>(j)]);
  CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().minCoeff() >= -1e-8);
}

TEST_CASE("conditioned functionals have zero variance") {
  const auto m = zabb();
  // cond_cov is a polynomial on each side of the diagonal, so nested Simpson
  // over the lower triangle is exact
  const double ii = 2.0 * oracle::simpson(
                              [&](double y) {
                                return oracle::simpson([&](double x) { return m.cond_cov(x, y); }, 0.0, y, 20);
                              },
                              0.0, 1.0, 20);
  CHECK(std::abs(ii) < 1e-9);
  const double pi = oracle::simpson([&](double x) { return m.cond_cov(1.0, x); }, 0, 1, 200);
  CHECK(std::abs(pi) < 1e-12);
}

TEST_CASE("B matrix") {
  const auto B = zabb().B();
  CHECK(std::abs(B(0, 0) - 1.0) < 1e-12);
  CHECK(std::abs(B(0, 1)) < 1e-12);
  CHECK(std::abs(B(1, 0) - 0.5) < 1e-12);
  CHECK(std::abs(B(1, 1) - 1.0 / (2.0 * std::sqrt(3.0))) < 1e-12);
  CHECK(bridge().B()(0, 0) == doctest::Approx(1.0));
  CHECK(zabb().B_condition_number() < 1e8);
}

TEST_CASE("ZABB anticipative coefficients in closed form") {
  const auto m = zabb();
  const auto grid = uniform_grid(1.0, 257);
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Path w = sample_base_path(m.kernel(), grid, derive_seed(17, i));
    const double W1 = w.values.back();
    const double I1 = trapezoid_path(w);
    const auto cp = anticipative_transform(m, w);
    CHECK(std::abs(cp.xi(0) - W1) < 1e-10);
    CHECK(std::abs(cp.xi(1) - std::sqrt(3.0) * (2.0 * I1 - W1)) < 1e-10);
    for (std::size_t k = 0; k < grid.size(); k += 32) {
      const double s = grid[k];
      const double M = w.values[k] - s * (3.0 * s - 2.0) * W1 - 6.0 * s * (1.0 - s) * I1;
      CHECK(std::abs(cp.path.values[k] - M) < 1e-10);
    }
    for (double r : cp.residuals) CHECK(std::abs(r) < 1e-9);
  }
}

TEST_CASE("bridge transform is W_s - s W_1") {
  const auto m = bridge();
  const auto grid = uniform_grid(1.0, 101);
  const Path w = sample_base_path(m.kernel(), grid, 3);
  const auto cp = anticipative_transform(m, w);
  for (std::size_t k = 0; k < grid.size(); ++k)
    CHECK(std::abs(cp.path.values[k] - (w.values[k] - grid[k] * w.values.back())) < 1e-13);
}

TEST_CASE("annihilation, idempotence and paths that already satisfy the conditions") {
  const ConditionedModel m(Kernel::brownian(1.0), {Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 1.0),
                                                   Condition(1.0, {{0.3, 1.0}}, {{0.5, 0.8, {0.0, 0.0, 1.0}}})});
  const auto grid = uniform_grid(1.0, 200);
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto cp = anticipative_transform(m, sample_base_path(m.kernel(), grid, derive_seed(2, i)));
    double worst = 0.0;
    for (double r : cp.residuals) worst = std::max(worst, std::abs(r));
    CHECK(worst < 1e-9);
    const auto twice = anticipative_transform(m, cp);
    CHECK((twice.xi - cp.xi).cwiseAbs().maxCoeff() < 1e-10);
    for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(twice.path.values[k] - cp.path.values[k]) < 1e-10);
  }
  // a grid path with zero functionals: 0 at 1 and zero area, is left alone
  Path zero{uniform_grid(1.0, 5), {0.0, 1.0, 0.0, -1.0, 0.0}};
  const ConditionedModel z = zabb();
  const auto out = anticipative_transform(z, zero);
  CHECK(out.xi.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("scaled conditions give the same transformed path") {
  const auto m = zabb();
  const ConditionedModel s(Kernel::brownian(1.0), {Condition::point(1.0, 1.0, 2.0), Condition::uniform(1.0, 0.0, 1.0, 2.0)});
  const auto grid = uniform_grid(1.0, 129);
  const Path w = sample_base_path(m.kernel(), grid, 8);
  const auto a = anticipative_transform(m, w);
  const auto b = anticipative_transform(s, w);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(a.path.values[k] - b.path.values[k]) < 1e-10);
}

TEST_CASE("GridTransform agrees with the path transform") {
  const auto m = zabb();
  const auto grid = uniform_grid(1.0, 65);
  GridTransform gt(m, grid);
  gt.add_point(16);
  gt.add_point(48);
  gt.add_partial_integral(Condition::uniform(1.0, 0.0, 1.0), 0.5);
  const Path w = sample_base_path(m.kernel(), grid, 11);
  Eigen::VectorXd xi;
  Eigen::VectorXd readout(3), residual(2);
  gt.apply(w.values, xi, readout, residual);
  const auto cp = anticipative_transform(m, w);
  CHECK((xi - cp.xi).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(readout(0) - cp.path.values[16]) < 1e-12);
  CHECK(std::abs(readout(1) - cp.path.values[48]) < 1e-12);
  // integral over [0, 1/2] of interp(w) - xi_1 s - xi_2 sqrt(3)(s - s^2)
  double base_half = 0.0;
  for (std::size_t k = 0; k < 32; ++k) base_half += 0.5 * (w.values[k] + w.values[k + 1]) / 64.0;
  const double smooth = cp.xi(0) * 0.125 + cp.xi(1) * std::sqrt(3.0) * (0.125 - 1.0 / 24.0);
  CHECK(std::abs(readout(2) - (base_half - smooth)) < 1e-12);
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-9);
  const auto out = gt.output(w.values, xi);
  for (std::size_t k = 0; k < grid.size(); ++k) CHECK(std::abs(out[k] - cp.path.values[k]) < 1e-12);
}

TEST_CASE("anticipative covariance matches cond_cov") {
  const auto m = zabb();
  const auto grid = uniform_grid(1.0, 101);
  GridTransform gt(m, grid);
  const std::vector<double> times{0.1, 0.3, 0.5, 0.7, 0.9};
  for (std::size_t k : {10, 30, 50, 70, 90}) gt.add_point(k);
  const auto r = run_anticipative(gt, 40000, 123, Exec::Parallel);
  const auto rep = cov_report("anticipative", m, r.values, times);
  CHECK(rep.max_abs_z < 4.0);
  CHECK(r.max_abs_residual.maxCoeff() < 1e-9);
}
