#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fpca/curves.hpp"
#include "fpca/random.hpp"

using namespace fpca;

namespace {

LongitudinalSample make_sample(const std::string& id, std::vector<double> times,
                               std::vector<double> values, std::string group = "") {
  LongitudinalSample s;
  s.subject_id = id;
  s.times = std::move(times);
  s.values = std::move(values);
  s.group = std::move(group);
  return s;
}

}  // namespace

TEST_CASE("build_grid spans the observed range with trapezoid weights") {
  std::vector<LongitudinalSample> samples = {
      make_sample("a", {0.0, 4.0}, {1.0, 1.0}),
      make_sample("b", {2.0, 10.0}, {1.0, 1.0}),
  };
  const TimeGrid grid = build_grid(samples, 11);
  REQUIRE(grid.size() == 11);
  for (int i = 0; i < 11; ++i) {
    CHECK(grid.points(i) == doctest::Approx(i).epsilon(1e-12));
  }
  CHECK(grid.weights(0) == doctest::Approx(0.5));
  CHECK(grid.weights(10) == doctest::Approx(0.5));
  for (int i = 1; i < 10; ++i) CHECK(grid.weights(i) == doctest::Approx(1.0));
  CHECK(grid.weights.sum() == doctest::Approx(grid.span()));
}

TEST_CASE("build_grid on a single two-point sample") {
  std::vector<LongitudinalSample> samples = {make_sample("a", {0.0, 1.0}, {0.0, 0.0})};
  const TimeGrid grid = build_grid(samples, 3);
  CHECK(grid.points(0) == 0.0);
  CHECK(grid.points(1) == doctest::Approx(0.5));
  CHECK(grid.points(2) == 1.0);
}

TEST_CASE("build_grid rejects bad input") {
  CHECK_THROWS_WITH_AS(build_grid({}, 11), "no samples", std::invalid_argument);
  std::vector<LongitudinalSample> flat = {make_sample("a", {2.0}, {1.0}),
                                          make_sample("b", {2.0}, {3.0})};
  CHECK_THROWS_WITH_AS(build_grid(flat, 11), "degenerate time domain", std::invalid_argument);
}

TEST_CASE("norm_sq basics") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 21);
  CHECK(norm_sq(Eigen::VectorXd::Ones(21), grid) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(norm_sq(Eigen::VectorXd::Zero(21), grid) == 0.0);
  CHECK_THROWS_AS(norm_sq(Eigen::VectorXd::Zero(20), grid), std::invalid_argument);
}

TEST_CASE("norm_sq of f(t)=t approximates the analytic integral") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 101);
  Eigen::VectorXd f = grid.points;
  // exact value is 1/3; trapezoid error at this resolution is ~1.7e-5
  CHECK(norm_sq(f, grid) == doctest::Approx(1.0 / 3.0).epsilon(1e-3));
}

TEST_CASE("norm_sq scaling and positivity over random curves") {
  auto rng = make_rng(7101);
  std::uniform_real_distribution<double> unif(-10.0, 10.0);
  const TimeGrid grid = build_grid_bounds(-3.0, 8.0, 33);
  for (int rep = 0; rep < 120; ++rep) {
    Eigen::VectorXd f(33);
    for (int i = 0; i < 33; ++i) f(i) = unif(rng);
    const double a = unif(rng);
    const double base = norm_sq(f, grid);
    CHECK(base >= 0.0);
    CHECK(norm_sq(a * f, grid) == doctest::Approx(a * a * base).epsilon(1e-12));
    CHECK(norm_sq(f - f, grid) == 0.0);
  }
}

TEST_CASE("nearest_grid_index ties and clamping") {
  const TimeGrid grid = build_grid_bounds(0.0, 10.0, 11);
  CHECK(nearest_grid_index(3.0, grid) == 3);
  CHECK(nearest_grid_index(3.4, grid) == 3);
  CHECK(nearest_grid_index(3.5, grid) == 3);  // midpoint goes to the smaller index
  CHECK(nearest_grid_index(3.51, grid) == 4);
  CHECK(nearest_grid_index(-0.5e-9, grid) == 0);
  CHECK(nearest_grid_index(10.0 + 0.5e-9, grid) == 10);
  CHECK_THROWS_WITH_AS(nearest_grid_index(-0.1, grid), "time out of domain",
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(nearest_grid_index(10.1, grid), "time out of domain",
                       std::invalid_argument);
}

TEST_CASE("nearest_grid_index round-trips every grid point") {
  const TimeGrid grid = build_grid_bounds(-2.0, 5.0, 57);
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(nearest_grid_index(grid.points(i), grid) == i);
  }
}

TEST_CASE("interpolate reproduces linear curves exactly") {
  const TimeGrid grid = build_grid_bounds(0.0, 10.0, 21);
  Eigen::VectorXd f = 3.0 * grid.points.array() - 1.5;
  auto rng = make_rng(99);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int rep = 0; rep < 200; ++rep) {
    const double t = unif(rng);
    CHECK(interpolate(f, grid, t) == doctest::Approx(3.0 * t - 1.5).epsilon(1e-12));
  }
  CHECK(interpolate(f, grid, 0.0) == doctest::Approx(-1.5));
  CHECK(interpolate(f, grid, 10.0) == doctest::Approx(28.5));
}

TEST_CASE("grid_from_points computes trapezoid weights on uneven spacing") {
  Eigen::VectorXd pts(4);
  pts << 0.0, 1.0, 3.0, 7.0;
  const TimeGrid grid = grid_from_points(pts);
  CHECK(grid.weights(0) == doctest::Approx(0.5));
  CHECK(grid.weights(1) == doctest::Approx(1.5));
  CHECK(grid.weights(2) == doctest::Approx(3.0));
  CHECK(grid.weights(3) == doctest::Approx(2.0));
  CHECK(grid.weights.sum() == doctest::Approx(7.0));
}

TEST_CASE("validate_sample rejects malformed samples") {
  CHECK_THROWS_AS(validate_sample(make_sample("a", {}, {})), std::invalid_argument);
  CHECK_THROWS_AS(validate_sample(make_sample("a", {0.0, 1.0}, {1.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_sample(make_sample("a", {1.0, 1.0}, {0.0, 0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_sample(make_sample("a", {2.0, 1.0}, {0.0, 0.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      validate_sample(make_sample("a", {0.0, std::nan("")}, {0.0, 0.0})),
      std::invalid_argument);
  CHECK_NOTHROW(validate_sample(make_sample("a", {0.5}, {1.0})));
}

TEST_CASE("derive_seed separates streams") {
  // distinct indexes give distinct streams, and the map is stable
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(123, 45) == derive_seed(123, 45));
}
