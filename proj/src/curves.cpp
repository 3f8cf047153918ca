#include "fpca/curves.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fpca {

namespace {
constexpr double kDomainTol = 1e-9;
}

void validate_sample(const LongitudinalSample& sample) {
  if (sample.times.empty()) {
    throw std::invalid_argument("sample '" + sample.subject_id + "' has no observations");
  }
  if (sample.times.size() != sample.values.size()) {
    throw std::invalid_argument("sample '" + sample.subject_id +
                                "': times and values differ in length");
  }
  for (std::size_t j = 0; j < sample.times.size(); ++j) {
    if (!std::isfinite(sample.times[j]) || !std::isfinite(sample.values[j])) {
      throw std::invalid_argument("sample '" + sample.subject_id + "': non-finite entry");
    }
    if (j > 0 && !(sample.times[j] > sample.times[j - 1])) {
      throw std::invalid_argument("sample '" + sample.subject_id +
                                  "': times not strictly increasing");
    }
  }
}

TimeGrid grid_from_points(Eigen::VectorXd points) {
  const int m = static_cast<int>(points.size());
  if (m < 2) throw std::invalid_argument("grid needs at least 2 points");
  for (int i = 1; i < m; ++i) {
    if (!(points(i) > points(i - 1))) {
      throw std::invalid_argument("grid points not strictly increasing");
    }
  }
  Eigen::VectorXd weights(m);
  weights(0) = (points(1) - points(0)) / 2.0;
  weights(m - 1) = (points(m - 1) - points(m - 2)) / 2.0;
  for (int i = 1; i < m - 1; ++i) weights(i) = (points(i + 1) - points(i - 1)) / 2.0;
  return TimeGrid{std::move(points), std::move(weights)};
}

TimeGrid build_grid_bounds(double t_min, double t_max, int n_points) {
  if (n_points < 3) throw std::invalid_argument("need at least 3 grid points");
  if (!std::isfinite(t_min) || !std::isfinite(t_max) || !(t_max > t_min)) {
    throw std::invalid_argument("degenerate time domain");
  }
  Eigen::VectorXd points(n_points);
  for (int i = 0; i < n_points; ++i) {
    points(i) = t_min + (t_max - t_min) * static_cast<double>(i) / (n_points - 1);
  }
  points(n_points - 1) = t_max;  // avoid rounding past the endpoint
  return grid_from_points(std::move(points));
}

TimeGrid build_grid(const std::vector<LongitudinalSample>& samples, int n_points) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  double t_min = std::numeric_limits<double>::infinity();
  double t_max = -std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    validate_sample(s);
    t_min = std::min(t_min, s.times.front());
    t_max = std::max(t_max, s.times.back());
  }
  if (!(t_max > t_min)) throw std::invalid_argument("degenerate time domain");
  return build_grid_bounds(t_min, t_max, n_points);
}

double norm_sq(const Eigen::VectorXd& curve, const TimeGrid& grid) {
  if (curve.size() != grid.points.size()) {
    throw std::invalid_argument("curve length does not match grid");
  }
  return grid.weights.dot(curve.cwiseProduct(curve));
}

namespace {

double clamp_to_domain(double t, const TimeGrid& grid) {
  if (t < grid.t_min()) {
    if (grid.t_min() - t > kDomainTol) throw std::invalid_argument("time out of domain");
    return grid.t_min();
  }
  if (t > grid.t_max()) {
    if (t - grid.t_max() > kDomainTol) throw std::invalid_argument("time out of domain");
    return grid.t_max();
  }
  return t;
}

}  // namespace

int nearest_grid_index(double t, const TimeGrid& grid) {
  const double tc = clamp_to_domain(t, grid);
  const double* begin = grid.points.data();
  const double* end = begin + grid.points.size();
  const double* it = std::lower_bound(begin, end, tc);
  if (it == begin) return 0;
  if (it == end) return grid.size() - 1;
  const int hi = static_cast<int>(it - begin);
  const int lo = hi - 1;
  // tie between lo and hi resolves to lo
  return (tc - grid.points(lo) <= grid.points(hi) - tc) ? lo : hi;
}

double interpolate(const Eigen::VectorXd& curve_on_grid, const TimeGrid& grid, double t) {
  if (curve_on_grid.size() != grid.points.size()) {
    throw std::invalid_argument("curve length does not match grid");
  }
  const double tc = clamp_to_domain(t, grid);
  const double* begin = grid.points.data();
  const double* end = begin + grid.points.size();
  const double* it = std::lower_bound(begin, end, tc);
  if (it == begin) return curve_on_grid(0);
  if (it == end) return curve_on_grid(grid.size() - 1);
  const int hi = static_cast<int>(it - begin);
  const int lo = hi - 1;
  const double u = (tc - grid.points(lo)) / (grid.points(hi) - grid.points(lo));
  return (1.0 - u) * curve_on_grid(lo) + u * curve_on_grid(hi);
}

}  // namespace fpca
