#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "gpcond/conditioning.hpp"
#include "gpcond/markov_sde.hpp"

namespace gpcond {

struct CovEstimate {
  double value = 0.0;
  double se = 0.0;
};

/// Unbiased sample covariance with the standard error of the mean of the
/// centered products. Needs at least 100 samples.
CovEstimate empirical_cov(std::span<const double> xs, std::span<const double> ys);

/// Empirical against analytic covariance on a lattice of times.
struct CovReport {
  std::string label;
  std::vector<double> times;
  Eigen::MatrixXd analytic;
  Eigen::MatrixXd empirical;
  Eigen::MatrixXd se;
  Eigen::MatrixXd z;
  double max_abs_z = 0.0;
  double rmse = 0.0;
  std::size_t n_paths = 0;
};

/// `values` holds one path per row, one column per lattice time.
CovReport cov_report(std::string label, const ConditionedModel& m, const Eigen::MatrixXd& values,
                     std::span<const double> times);

/// Per condition, max |a_j(path)| over the batch, using apply() on each
/// path's piecewise-linear interpolant.
std::vector<double> condition_residuals(const ConditionedModel& m, std::span<const Path> paths);
/// Same for conditioned paths, from their exact residuals.
std::vector<double> condition_residuals(const ConditionedModel& m, std::span<const ConditionedPath> paths);

struct VerifyConfig {
  std::vector<double> lattice{0.1, 0.3, 0.5, 0.7, 0.9};  // fractions of T
  std::size_t anticipative_paths = 20000;
  std::size_t grid_points = 1001;
  std::size_t series_paths = 20000;
  std::size_t series_terms = 1024;
  // Euler bias must dominate Monte Carlo noise for the dt-halving test to
  // mean anything, so the default is a coarse step with many paths.
  std::size_t sde_paths = 100000;
  double sde_dt = 5e-3;  // the coupled comparison run uses 2 * sde_dt
  double eps_end = 1e-3;  // fraction of T
  double z_threshold = 5.0;
  std::uint64_t seed = 20240101;
  bool parallel = true;
};

struct CrossMethodReport {
  CovReport anticipative;
  CovReport series;
  CovReport sde;         // step sde_dt
  CovReport sde_coarse;  // step 2 sde_dt, same Brownian paths
  std::vector<double> anticipative_residual;
  std::vector<double> series_residual;
  double series_deficit = 0.0;
  double orthonormality = 0.0;
  std::vector<double> sde_mean_abs_end;  // |x|, |I^1|, .. at T - eps_end
  double sde_end_sd = 0.0;               // sqrt(cond_cov) at T - eps_end
  bool anticipative_pass = false;
  bool series_pass = false;
  bool sde_pass = false;
  bool pass = false;
};

/// Samples the model three ways and compares each covariance table with
/// cond_cov. PASS needs max |z| below the threshold for the anticipative and
/// series samplers, condition residuals within their bounds, and a smaller SDE
/// RMSE at dt than at 2 dt. SDE z-scores are reported but carry Euler bias.
CrossMethodReport cross_method_report(const ConditionedModel& m, const DriftEvaluator& de, const VerifyConfig& cfg);

nlohmann::json to_json(const CovReport& r);
nlohmann::json to_json(const CrossMethodReport& r);

}  // namespace gpcond
