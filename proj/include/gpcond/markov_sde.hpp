#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gpcond/conditioning.hpp"

namespace gpcond {

/// (s, X_s, I^1_s .. I^N_s) with I^j_s the integral of the path against a_j
/// restricted to [0, s], atoms at s included. One entry per condition,
/// including dropped ones.
struct AugmentedState {
  double s = 0.0;
  double x = 0.0;
  std::vector<double> ivals;
};

struct AugmentedPath {
  std::vector<double> grid;
  std::vector<double> x;
  /// ivals[j][k] = I^j at grid[k].
  std::vector<std::vector<double>> ivals;
};

/// Drift coefficients c(s) with drift = c_0 x + sum_j c_{j+1} I^j.
using DriftCoefficients = std::function<Eigen::VectorXd(double s)>;

struct DriftOptions {
  /// Relative finite-difference step: h = deriv_step * (T - s).
  double deriv_step = 1e-2;
  /// Analytic drift, checked against the generic one at construction.
  DriftCoefficients closed_form;
  std::string closed_form_name;
  /// Flips the drift sign (negative control for the verification suite).
  bool negate = false;
};

/// Conditional expectations and drift of the conditioned process over the
/// augmented Markov state. Requires a Markov kernel.
///
/// E[X_t | F_s] = phi(t) . D_s^-1 d_s with phi = (g, u e_1, .., u e_r),
/// row 0 of D_s equal to phi(s), row j the integrals of phi against a_j over
/// (s, T], and d_s = (x, -I^1, .., -I^r) over the kept conditions.
class DriftEvaluator {
 public:
  explicit DriftEvaluator(const ConditionedModel& m, DriftOptions opts = {});

  const ConditionedModel& model() const { return *model_; }
  double alpha() const { return model_->kernel().alpha(); }
  bool has_closed_form() const { return static_cast<bool>(opts_.closed_form); }
  const std::string& closed_form_name() const { return opts_.closed_form_name; }
  /// Largest |closed form - generic| seen on the validation lattice.
  double closed_form_gap() const { return closed_form_gap_; }

  std::vector<double> phi(double t) const;
  Eigen::MatrixXd D(double s) const;
  /// xi = D_s^-1 d_s. Throws NumericError when D_s is numerically singular.
  Eigen::VectorXd solve(const AugmentedState& st) const;

  double expected_future(const AugmentedState& st, double t) const;

  /// Coefficients from D_s and finite differences of phi, length N + 1.
  Eigen::VectorXd generic_coefficients(double s) const;
  /// Closed form when registered, generic otherwise; sign-flipped if negated.
  Eigen::VectorXd coefficients(double s) const;

  double drift(const AugmentedState& st) const;
  double generic_drift(const AugmentedState& st) const;

 private:
  Eigen::VectorXd phi_derivative(double s) const;
  Eigen::VectorXd d_vector(const AugmentedState& st) const;

  const ConditionedModel* model_;
  DriftOptions opts_;
  double closed_form_gap_ = 0.0;
};

/// Closed-form drift coefficients of the two built-in examples on [0, 1]:
/// zero-area bridge (conditions delta_1, unit density) and Brownian bridge.
DriftCoefficients zabb_drift();
DriftCoefficients bridge_drift();

/// Time grid 0, dt, 2dt, ... ending exactly at T - eps_end.
std::vector<double> sde_grid(double horizon, double dt, double eps_end);

/// Per-step quantities shared by every path on one grid.
struct SdePlan {
  std::vector<double> grid;
  Eigen::MatrixXd coeffs;          // steps x (N + 1)
  std::vector<CellWeights> cells;  // one per condition
  double alpha = 1.0;
  double initial_sd = 0.0;         // sd of X_0 under the conditioned law
};

SdePlan make_sde_plan(const DriftEvaluator& de, std::span<const double> grid, bool zero_noise = false);

/// Euler-Maruyama state advanced one plan step with Brownian increment dw.
struct SdeState {
  double x = 0.0;
  std::vector<double> ivals;
};
SdeState sde_initial(const SdePlan& plan, double z0);
void sde_step(const SdePlan& plan, std::size_t k, double dw, SdeState& st);

/// Integrates dX = alpha dW + drift ds on [0, T - eps_end]. The I^j are
/// accumulated exactly for the piecewise-linear interpolant of the iterates.
AugmentedPath integrate_sde(const DriftEvaluator& de, double dt, std::uint64_t seed, double eps_end,
                            bool zero_noise = false);

struct MarkovCheckConfig {
  double s = 0.4;
  double t = 0.7;
  std::vector<double> us{0.1, 0.2, 0.3};
  std::size_t n_paths = 100000;
  std::size_t grid_points = 1001;
  std::uint64_t seed = 1;
  bool parallel = true;
};

struct MarkovCheckReport {
  double s = 0.0;
  double t = 0.0;
  std::vector<double> us;
  std::size_t n_paths = 0;
  double mean_residual = 0.0;
  double mean_z = 0.0;
  std::vector<double> corr;
  std::vector<double> corr_z;
  double max_abs_z = 0.0;
  bool pass = false;
};

/// Samples conditioned paths with the anticipative transform and checks that
/// X_t - E[X_t | state at s] has mean zero and is uncorrelated with X_u for
/// each u < s. Passes when every z-score is below 4.
MarkovCheckReport markov_consistency_check(const DriftEvaluator& de, const MarkovCheckConfig& cfg);

}  // namespace gpcond
