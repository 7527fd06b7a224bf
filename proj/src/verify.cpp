#include "gpcond/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gpcond/batch.hpp"
#include "gpcond/series.hpp"

namespace gpcond {

namespace {

using Index = Eigen::Index;

nlohmann::json matrix_json(const Eigen::MatrixXd& a) {
  auto rows = nlohmann::json::array();
  for (Index i = 0; i < a.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Index j = 0; j < a.cols(); ++j) row.push_back(a(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

CovEstimate empirical_cov(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("empirical_cov: sample sizes differ");
  const std::size_t n = xs.size();
  if (n < 100) throw std::invalid_argument("empirical_cov needs at least 100 paths, got " + std::to_string(n));
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (xs[i] - mx) * (ys[i] - my);
    sum += p;
    sum_sq += p * p;
  }
  const double nd = static_cast<double>(n);
  const double mean_p = sum / nd;
  const double var_p = std::max(0.0, (sum_sq - nd * mean_p * mean_p) / (nd - 1.0));
  return {sum / (nd - 1.0), std::sqrt(var_p / nd)};
}

CovReport cov_report(std::string label, const ConditionedModel& m, const Eigen::MatrixXd& values,
                     std::span<const double> times) {
  const auto k = static_cast<Index>(times.size());
  if (values.cols() != k) throw std::invalid_argument("cov_report: column count differs from lattice size");
  CovReport r;
  r.label = std::move(label);
  r.times.assign(times.begin(), times.end());
  r.n_paths = static_cast<std::size_t>(values.rows());
  r.analytic.resize(k, k);
  r.empirical.resize(k, k);
  r.se.resize(k, k);
  r.z.resize(k, k);
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(k));
  for (Index j = 0; j < k; ++j) cols[static_cast<std::size_t>(j)] = to_vector(values.col(j));
  double sq = 0.0;
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < k; ++j) {
      const auto est = empirical_cov(cols[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
      const double exact = m.cond_cov(times[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)]);
      const double diff = est.value - exact;
      r.analytic(i, j) = exact;
      r.empirical(i, j) = est.value;
      r.se(i, j) = est.se;
      r.z(i, j) = est.se > 0.0 ? diff / est.se
                               : (diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff));
      r.max_abs_z = std::max(r.max_abs_z, std::abs(r.z(i, j)));
      sq += diff * diff;
    }
  }
  r.rmse = k > 0 ? std::sqrt(sq / static_cast<double>(k * k)) : 0.0;
  return r;
}

std::vector<double> condition_residuals(const ConditionedModel& m, std::span<const Path> paths) {
  const auto& conds = m.basis().conditions();
  std::vector<double> worst(conds.size(), 0.0);
  for (const auto& p : paths)
    for (std::size_t j = 0; j < conds.size(); ++j) worst[j] = std::max(worst[j], std::abs(apply(conds[j], p)));
  return worst;
}

std::vector<double> condition_residuals(const ConditionedModel& m, std::span<const ConditionedPath> paths) {
  std::vector<double> worst(m.basis().size(), 0.0);
  for (const auto& p : paths) {
    if (p.residuals.size() != worst.size()) throw std::invalid_argument("residual count differs from condition count");
    for (std::size_t j = 0; j < worst.size(); ++j) worst[j] = std::max(worst[j], std::abs(p.residuals[j]));
  }
  return worst;
}

CrossMethodReport cross_method_report(const ConditionedModel& m, const DriftEvaluator& de, const VerifyConfig& cfg) {
  const double T = m.horizon();
  const Exec exec = cfg.parallel ? Exec::Parallel : Exec::Serial;
  CrossMethodReport rep;
  rep.orthonormality = residual_check(m.basis());

  // Anticipative transform on a grid that contains the lattice.
  const auto grid = uniform_grid(T, cfg.grid_points);
  GridTransform gt(m, grid);
  std::vector<double> times;
  for (double f : cfg.lattice) {
    const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(cfg.grid_points - 1)));
    if (k >= grid.size()) throw std::invalid_argument("lattice point outside [0, T]");
    gt.add_point(k);
    times.push_back(grid[k]);
  }
  const Readouts ant = run_anticipative(gt, cfg.anticipative_paths, cfg.seed, exec);
  rep.anticipative = cov_report("anticipative", m, ant.values, times);
  rep.anticipative_residual = to_vector(ant.max_abs_residual);
  double scale = 1.0;
  for (const auto& c : m.basis().conditions()) scale = std::max(scale, c.total_variation());
  const bool ant_exact = std::all_of(rep.anticipative_residual.begin(), rep.anticipative_residual.end(),
                                     [&](double r) { return r < 1e-9 * scale; });
  rep.anticipative_pass = rep.anticipative.max_abs_z < cfg.z_threshold && ant_exact;

  // Truncated series, read out directly at the lattice times.
  const SeriesBasis sb(m, cfg.series_terms);
  const Readouts ser = run_series(sb, sb.deflated(times), cfg.series_paths, cfg.seed + 1, exec);
  rep.series = cov_report("series", m, ser.values, times);
  rep.series_residual = to_vector(ser.max_abs_residual);
  rep.series_deficit = series_truncation_error(sb, m, uniform_grid(T, 257));
  const double series_bound = std::max(rep.series_deficit, 1e-9 * scale);
  const bool ser_ok = std::all_of(rep.series_residual.begin(), rep.series_residual.end(),
                                  [&](double r) { return r < series_bound; });
  rep.series_pass = rep.series.max_abs_z < cfg.z_threshold && ser_ok;

  // Euler-Maruyama at dt and 2 dt on shared increments.
  std::vector<double> sde_times;
  for (double f : cfg.lattice) sde_times.push_back(f * T);
  const SdeBatch sde = run_sde_coupled(de, cfg.sde_dt * T, cfg.eps_end * T, sde_times, cfg.sde_paths, cfg.seed + 2, exec);
  rep.sde = cov_report("sde", m, sde.fine, sde.times);
  rep.sde_coarse = cov_report("sde_coarse", m, sde.coarse, sde.times);
  rep.sde_mean_abs_end = to_vector(sde.mean_abs_end);
  const double t_end = T * (1.0 - cfg.eps_end);
  rep.sde_end_sd = std::sqrt(std::max(0.0, m.cond_cov(t_end, t_end)));
  rep.sde_pass = std::isfinite(rep.sde.rmse) && rep.sde.rmse < rep.sde_coarse.rmse;

  rep.pass = rep.anticipative_pass && rep.series_pass && rep.sde_pass;
  return rep;
}

nlohmann::json to_json(const CovReport& r) {
  return {{"label", r.label},       {"n_paths", r.n_paths},          {"times", r.times},
          {"analytic", matrix_json(r.analytic)}, {"empirical", matrix_json(r.empirical)},
          {"std_error", matrix_json(r.se)},       {"z", matrix_json(r.z)},
          {"max_abs_z", r.max_abs_z},   {"rmse", r.rmse}};
}

nlohmann::json to_json(const CrossMethodReport& r) {
  nlohmann::json j;
  j["result"] = r.pass ? "PASS" : "FAIL";
  j["orthonormality_residual"] = r.orthonormality;
  j["anticipative"] = to_json(r.anticipative);
  j["anticipative"]["max_condition_residual"] = r.anticipative_residual;
  j["anticipative"]["pass"] = r.anticipative_pass;
  j["series"] = to_json(r.series);
  j["series"]["max_condition_residual"] = r.series_residual;
  j["series"]["variance_deficit"] = r.series_deficit;
  j["series"]["pass"] = r.series_pass;
  j["sde"] = to_json(r.sde);
  j["sde"]["coarse"] = to_json(r.sde_coarse);
  j["sde"]["rmse_decreases"] = r.sde.rmse < r.sde_coarse.rmse;
  j["sde"]["mean_abs_end"] = r.sde_mean_abs_end;
  j["sde"]["end_sd"] = r.sde_end_sd;
  j["sde"]["pass"] = r.sde_pass;
  return j;
}

}  // namespace gpcond
