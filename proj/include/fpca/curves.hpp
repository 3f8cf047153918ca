#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fpca {

// One subject's irregularly spaced observations. `times` is strictly
// increasing and paired one-to-one with `values`. `group` is empty for
// ungrouped data.
struct LongitudinalSample {
  std::string subject_id;
  std::vector<double> times;
  std::vector<double> values;
  std::string group;

  int n_obs() const { return static_cast<int>(times.size()); }
};

// Throws std::invalid_argument when the sample violates its invariants
// (empty, length mismatch, non-finite or non-increasing times).
void validate_sample(const LongitudinalSample& sample);

// Common evaluation grid over [t_min, t_max] with trapezoid quadrature
// weights. Weights sum to the domain length.
struct TimeGrid {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;

  int size() const { return static_cast<int>(points.size()); }
  double t_min() const { return points(0); }
  double t_max() const { return points(points.size() - 1); }
  double span() const { return t_max() - t_min(); }
  double spacing() const { return span() / (size() - 1); }
};

// Equally spaced grid covering the observed time range of `samples`.
TimeGrid build_grid(const std::vector<LongitudinalSample>& samples, int n_points);

// Equally spaced grid over an explicit [t_min, t_max].
TimeGrid build_grid_bounds(double t_min, double t_max, int n_points);

// Grid with the given points; weights from the trapezoid rule.
TimeGrid grid_from_points(Eigen::VectorXd points);

// Trapezoid approximation of the squared L2 norm, sum_m w_m f_m^2.
double norm_sq(const Eigen::VectorXd& curve, const TimeGrid& grid);

// Index of the grid point closest to t; ties go to the smaller index.
// Times within 1e-9 of the domain are clamped, anything further throws.
int nearest_grid_index(double t, const TimeGrid& grid);

// Linear interpolation of a gridded curve at time t, with the same
// domain tolerance as nearest_grid_index.
double interpolate(const Eigen::VectorXd& curve_on_grid, const TimeGrid& grid, double t);

// N curves evaluated on a common grid, one subject per row.
struct CurveMatrix {
  TimeGrid grid;
  Eigen::MatrixXd rows;  // N x M
  std::vector<std::string> subject_ids;
  std::vector<std::string> groups;

  int n_curves() const { return static_cast<int>(rows.rows()); }
};

}  // namespace fpca
