#pragma once

#include "fpca/curves.hpp"

#include <cstdint>
#include <vector>

namespace fpca {

struct ScatterPoint1D {
  double x;
  double y;
  double w;
};

struct ScatterPoint2D {
  double s;
  double t;
  double c;
  double w;
};

// Kernel bandwidth: a fixed value in time units, or data-driven selection
// by cross-validation.
struct Bandwidth {
  static Bandwidth fixed(double h);
  static Bandwidth automatic() { return Bandwidth{}; }

  bool is_auto = true;
  double value = 0.0;  // meaningful only when !is_auto
};

struct BandwidthChoice {
  double h = 0.0;
  // set when there were too few points for cross-validation and the
  // rule-of-thumb span/4 was used instead
  bool fallback = false;
};

// Bandwidth minimizing 5-fold cross-validated weighted squared prediction
// error over a geometric ladder of 10 candidates in
// [grid spacing, span/2]. Ties resolve to the smaller bandwidth.
BandwidthChoice select_bandwidth_1d(const std::vector<ScatterPoint1D>& points,
                                    const TimeGrid& grid, std::uint64_t seed);
BandwidthChoice select_bandwidth_2d(const std::vector<ScatterPoint2D>& points,
                                    const TimeGrid& grid, std::uint64_t seed);

// Local linear fit with Epanechnikov kernel, evaluated at each grid point.
// Windows holding fewer than 2 distinct x are enlarged symmetrically until
// they cover 2. An auto bandwidth is resolved by select_bandwidth_1d with
// cv_seed first.
Eigen::VectorXd local_linear_1d(const std::vector<ScatterPoint1D>& points,
                                const Bandwidth& bandwidth, const TimeGrid& grid,
                                std::uint64_t cv_seed = 0);

// Local plane fit with the product Epanechnikov kernel on the grid x grid
// surface, symmetrized as (S + S^T)/2.
Eigen::MatrixXd local_linear_2d(const std::vector<ScatterPoint2D>& points,
                                const Bandwidth& bandwidth, const TimeGrid& grid,
                                std::uint64_t cv_seed = 0);

// Single-point evaluations; used by the cross-validation loop and handy
// in tests. h must be a resolved (fixed) bandwidth.
double local_linear_1d_at(const std::vector<ScatterPoint1D>& points, double h, double x0,
                          double domain_span);
double local_linear_2d_at(const std::vector<ScatterPoint2D>& points, double h, double s0,
                          double t0, double domain_span);

}  // namespace fpca
