#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gpcond/conditioning.hpp"
#include "gpcond/markov_sde.hpp"
#include "gpcond/series.hpp"

namespace gpcond {

// Batch samplers. Path i always draws from the stream derive_seed(seed, i),
// so the serial and OpenMP drivers return identical results.

enum class Exec { Serial, Parallel };

/// Caps OpenMP worker threads; 0 keeps the runtime default.
void set_threads(int n);

struct Readouts {
  Eigen::MatrixXd values;            // n_paths x readouts
  Eigen::VectorXd max_abs_residual;  // per condition
};

/// Base paths transformed on the GridTransform's grid.
Readouts run_anticipative(const GridTransform& gt, std::size_t n_paths, std::uint64_t seed, Exec exec);

/// Truncated series; `rows` are the deflated terms at the readout points
/// (readouts x n_terms).
Readouts run_series(const SeriesBasis& sb, const Eigen::MatrixXd& rows, std::size_t n_paths, std::uint64_t seed,
                    Exec exec);

/// Base process values at the given grid indices.
Eigen::MatrixXd run_base(const Kernel& k, std::span<const double> grid, std::span<const std::size_t> record,
                         std::size_t n_paths, std::uint64_t seed, Exec exec);

struct SdeBatch {
  std::vector<double> times;   // recorded times (on both grids)
  Eigen::MatrixXd fine;        // n_paths x times, step dt
  Eigen::MatrixXd coarse;      // n_paths x times, step 2 dt, same Brownian path
  Eigen::VectorXd mean_abs_end;  // fine run at T - eps_end: |x|, |I^1|, ..
};

/// Euler-Maruyama at dt and 2 dt driven by the same Brownian increments.
/// Record times are snapped to the nearest point of the coarse grid.
SdeBatch run_sde_coupled(const DriftEvaluator& de, double dt, double eps_end, std::span<const double> record_times,
                         std::size_t n_paths, std::uint64_t seed, Exec exec);

}  // namespace gpcond
