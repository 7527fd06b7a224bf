#pragma once

#include <vector>

namespace gpcond {

/// Grid-sampled trajectory, interpreted as the piecewise-linear interpolant of
/// its values.
struct Path {
  std::vector<double> grid;
  std::vector<double> values;

  std::size_t size() const { return grid.size(); }
  /// Linear interpolation; throws std::domain_error outside the grid span.
  double at(double t) const;
};

/// Checks the grid is non-empty, strictly increasing and starts at 0, and that
/// values match it in length. Throws std::invalid_argument.
void validate(const Path& p);

/// n equally spaced points on [0, horizon], both ends included.
std::vector<double> uniform_grid(double horizon, std::size_t n);

}  // namespace gpcond
