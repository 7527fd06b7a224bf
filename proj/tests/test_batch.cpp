#include <doctest.h>

#include "gpcond/batch.hpp"

using namespace gpcond;

namespace {

ConditionedModel zabb() {
  return ConditionedModel(Kernel::brownian(1.0), {Condition::point(1.0, 1.0), Condition::uniform(1.0, 0.0, 1.0)});
}

}  // namespace

// The OpenMP drivers must reproduce the serial reference bit for bit.

TEST_CASE("anticipative batch: serial and parallel are identical") {
  const auto m = zabb();
  const auto grid = uniform_grid(1.0, 257);
  GridTransform gt(m, grid);
  for (std::size_t k : {32, 128, 200}) gt.add_point(k);
  gt.add_partial_integral(m.basis().conditions()[1], 0.5);
  const auto a = run_anticipative(gt, 3001, 9, Exec::Serial);
  const auto b = run_anticipative(gt, 3001, 9, Exec::Parallel);
  CHECK(a.values == b.values);
  CHECK(a.max_abs_residual == b.max_abs_residual);
  // path i depends only on (seed, i)
  const auto c = run_anticipative(gt, 10, 9, Exec::Parallel);
  CHECK(c.values == a.values.topRows(10));
}

TEST_CASE("series batch: serial and parallel are identical") {
  const auto m = zabb();
  const SeriesBasis sb(m, 300);
  const std::vector<double> t{0.1, 0.5, 0.9};
  const auto rows = sb.deflated(t);
  const auto a = run_series(sb, rows, 1000, 5, Exec::Serial);
  const auto b = run_series(sb, rows, 1000, 5, Exec::Parallel);
  CHECK(a.values == b.values);
}

TEST_CASE("SDE batch: serial and parallel are identical") {
  const auto m = zabb();
  const DriftEvaluator de(m, {.closed_form = zabb_drift(), .closed_form_name = "zabb"});
  const std::vector<double> t{0.2, 0.6};
  const auto a = run_sde_coupled(de, 0.01, 1e-3, t, 2000, 3, Exec::Serial);
  const auto b = run_sde_coupled(de, 0.01, 1e-3, t, 2000, 3, Exec::Parallel);
  CHECK(a.fine == b.fine);
  CHECK(a.coarse == b.coarse);
  CHECK(a.mean_abs_end == b.mean_abs_end);
  CHECK(a.times == std::vector<double>{0.2, 0.6});
}

TEST_CASE("base batch: serial and parallel are identical") {
  const auto k = Kernel::ornstein_uhlenbeck(1.0, 2.0);
  const auto grid = uniform_grid(1.0, 65);
  const std::vector<std::size_t> rec{0, 10, 64};
  CHECK(run_base(k, grid, rec, 500, 1, Exec::Serial) == run_base(k, grid, rec, 500, 1, Exec::Parallel));
}

TEST_CASE("thread count does not change results") {
  const auto m = zabb();
  const auto grid = uniform_grid(1.0, 129);
  GridTransform gt(m, grid);
  gt.add_point(64);
  set_threads(1);
  const auto a = run_anticipative(gt, 777, 2, Exec::Parallel);
  set_threads(3);
  const auto b = run_anticipative(gt, 777, 2, Exec::Parallel);
  set_threads(0);
  CHECK(a.values == b.values);
}

TEST_CASE("errors inside parallel regions propagate") {
  const auto m = zabb();
  const SeriesBasis sb(m, 10);
  const Eigen::MatrixXd wrong(2, 5);
  CHECK_THROWS_AS(run_series(sb, wrong, 100, 1, Exec::Parallel), std::invalid_argument);
  const DriftEvaluator de(m, {.closed_form = zabb_drift(), .closed_form_name = "zabb"});
  const std::vector<double> t{0.5};
  CHECK_THROWS_AS(run_sde_coupled(de, -0.1, 1e-3, t, 10, 1, Exec::Parallel), std::invalid_argument);
}
