#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "fpca/random.hpp"
#include "fpca/smooth.hpp"

using namespace fpca;

namespace {

std::vector<ScatterPoint1D> linspace_points(int n, double a, double b,
                                            double (*f)(double)) {
  std::vector<ScatterPoint1D> pts(n);
  for (int i = 0; i < n; ++i) {
    const double x = a + (b - a) * i / (n - 1);
    pts[i] = {x, f(x), 1.0};
  }
  return pts;
}

}  // namespace

TEST_CASE("local_linear_1d reproduces constants") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 11);
  auto pts = linspace_points(40, 0.0, 1.0, [](double) { return 5.0; });
  for (double h : {0.05, 0.3, 2.0}) {
    const Eigen::VectorXd fit = local_linear_1d(pts, Bandwidth::fixed(h), grid);
    for (int i = 0; i < grid.size(); ++i) CHECK(fit(i) == doctest::Approx(5.0).epsilon(1e-12));
  }
}

TEST_CASE("local_linear_1d reproduces lines") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 11);
  auto pts = linspace_points(40, 0.0, 1.0, [](double x) { return 2.0 * x + 1.0; });
  for (double h : {0.11, 0.5, 3.0}) {
    const Eigen::VectorXd fit = local_linear_1d(pts, Bandwidth::fixed(h), grid);
    for (int i = 0; i < grid.size(); ++i) {
      CHECK(std::abs(fit(i) - (2.0 * grid.points(i) + 1.0)) < 1e-8);
    }
  }
}

TEST_CASE("local_linear_1d rejects a single design point") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 11);
  std::vector<ScatterPoint1D> pts = {{0.5, 1.0, 1.0}, {0.5, 2.0, 1.0}, {0.5, 3.0, 1.0}};
  CHECK_THROWS_WITH_AS(local_linear_1d(pts, Bandwidth::fixed(0.2), grid),
                       "degenerate design", std::runtime_error);
}

TEST_CASE("sparse windows are enlarged instead of failing") {
  const TimeGrid grid = build_grid_bounds(0.0, 10.0, 11);
  // two far-apart points and a bandwidth much smaller than their gap
  std::vector<ScatterPoint1D> pts = {{0.0, 1.0, 1.0}, {10.0, 3.0, 1.0}};
  const Eigen::VectorXd fit = local_linear_1d(pts, Bandwidth::fixed(0.1), grid);
  for (int i = 0; i < grid.size(); ++i) {
    CHECK(fit(i) == doctest::Approx(1.0 + 0.2 * grid.points(i)).epsilon(1e-8));
  }
}

TEST_CASE("epanechnikov weighting matches a direct weighted fit") {
  // three points inside the window at x0=0: solve the 2x2 normal equations by
  // hand and compare the intercept
  std::vector<ScatterPoint1D> pts = {{-0.5, 1.0, 1.0}, {0.1, 2.0, 1.0}, {0.4, 0.5, 1.0}};
  const double h = 1.0;
  double s0 = 0, s1 = 0, s2 = 0, b0 = 0, b1 = 0;
  for (const auto& p : pts) {
    const double u = p.x / h;
    const double k = 0.75 * (1.0 - u * u);
    s0 += k;
    s1 += k * p.x;
    s2 += k * p.x * p.x;
    b0 += k * p.y;
    b1 += k * p.x * p.y;
  }
  const double expected = (s2 * b0 - s1 * b1) / (s0 * s2 - s1 * s1);
  CHECK(local_linear_1d_at(pts, h, 0.0, 1.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero-weight points do not influence the fit") {
  std::vector<ScatterPoint1D> pts = {
      {0.0, 1.0, 1.0}, {0.5, 2.0, 1.0}, {1.0, 3.0, 1.0}, {0.6, 500.0, 0.0}};
  std::vector<ScatterPoint1D> clean(pts.begin(), pts.end() - 1);
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 5);
  const Eigen::VectorXd with = local_linear_1d(pts, Bandwidth::fixed(0.8), grid);
  const Eigen::VectorXd without = local_linear_1d(clean, Bandwidth::fixed(0.8), grid);
  for (int i = 0; i < grid.size(); ++i) CHECK(with(i) == doctest::Approx(without(i)));
}

TEST_CASE("noisy sine recovered within tolerance by the auto bandwidth") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 101);
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> ux(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<ScatterPoint1D> pts(500);
    for (auto& p : pts) {
      p.x = ux(rng);
      p.y = std::sin(2.0 * M_PI * p.x) + noise(rng);
      p.w = 1.0;
    }
    const Eigen::VectorXd fit = local_linear_1d(pts, Bandwidth::automatic(), grid, seed);
    double worst = 0.0;
    for (int i = 5; i <= 95; ++i) {
      worst = std::max(worst, std::abs(fit(i) - std::sin(2.0 * M_PI * grid.points(i))));
    }
    ok += worst < 0.15;
  }
  CHECK(ok >= 19);
}

TEST_CASE("select_bandwidth_1d falls back below 10 points") {
  const TimeGrid grid = build_grid_bounds(0.0, 8.0, 11);
  std::vector<ScatterPoint1D> pts;
  for (int i = 0; i < 8; ++i) pts.push_back({i * 1.0, 1.0 + i, 1.0});
  const BandwidthChoice choice = select_bandwidth_1d(pts, grid, 1);
  CHECK(choice.fallback);
  CHECK(choice.h == doctest::Approx(2.0));  // span / 4
}

TEST_CASE("pure linear data selects the smallest candidate") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 21);
  auto pts = linspace_points(60, 0.0, 1.0, [](double x) { return 4.0 * x - 2.0; });
  const BandwidthChoice choice = select_bandwidth_1d(pts, grid, 3);
  CHECK_FALSE(choice.fallback);
  CHECK(choice.h == doctest::Approx(grid.spacing()));  // ladder starts at the grid step
}

TEST_CASE("selected bandwidth scales with the domain") {
  auto run = [](double scale, std::uint64_t seed) {
    const TimeGrid grid = build_grid_bounds(0.0, scale, 51);
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> ux(0.0, scale);
    std::normal_distribution<double> noise(0.0, 0.2);
    std::vector<ScatterPoint1D> pts(400);
    for (auto& p : pts) {
      p.x = ux(rng);
      p.y = std::sin(2.0 * M_PI * p.x / scale) + noise(rng);
      p.w = 1.0;
    }
    return select_bandwidth_1d(pts, grid, seed).h;
  };
  int smaller = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    smaller += run(1.0, seed) < run(10.0, seed);
  }
  CHECK(smaller == 5);
}

TEST_CASE("select_bandwidth is deterministic in the seed") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 21);
  auto rng = make_rng(5150);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  std::vector<ScatterPoint1D> pts(80);
  for (auto& p : pts) {
    p.x = ux(rng);
    p.y = p.x * p.x + noise(rng);
    p.w = 1.0;
  }
  const BandwidthChoice a = select_bandwidth_1d(pts, grid, 11);
  const BandwidthChoice b = select_bandwidth_1d(pts, grid, 11);
  CHECK(a.h == b.h);
  CHECK(a.fallback == b.fallback);
}

TEST_CASE("both smoothers are linear in the response") {
  const TimeGrid grid = build_grid_bounds(0.0, 2.0, 15);
  auto rng = make_rng(4242);
  std::uniform_real_distribution<double> ux(0.0, 2.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<ScatterPoint1D> y1(30), y2(30);
    for (int i = 0; i < 30; ++i) {
      const double x = ux(rng);
      y1[i] = {x, gauss(rng), 1.0};
      y2[i] = {x, gauss(rng), 1.0};
    }
    const double a = gauss(rng), b = gauss(rng);
    std::vector<ScatterPoint1D> combo = y1;
    for (int i = 0; i < 30; ++i) combo[i].y = a * y1[i].y + b * y2[i].y;
    const Bandwidth h = Bandwidth::fixed(0.7);
    const Eigen::VectorXd fit = local_linear_1d(combo, h, grid);
    const Eigen::VectorXd expect =
        a * local_linear_1d(y1, h, grid) + b * local_linear_1d(y2, h, grid);
    for (int i = 0; i < grid.size(); ++i) {
      CHECK(fit(i) == doctest::Approx(expect(i)).epsilon(1e-9));
    }
  }
}

TEST_CASE("local_linear_2d reproduces constants and planes") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 9);
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::vector<ScatterPoint2D> flat, plane;
  for (int i = 0; i < 200; ++i) {
    const double s = ux(rng), t = ux(rng);
    if (s == t) continue;
    flat.push_back({s, t, 3.0, 1.0});
    plane.push_back({s, t, s + t, 1.0});
  }
  const Eigen::MatrixXd cflat = local_linear_2d(flat, Bandwidth::fixed(0.4), grid);
  const Eigen::MatrixXd cplane = local_linear_2d(plane, Bandwidth::fixed(0.4), grid);
  for (int a = 0; a < grid.size(); ++a) {
    for (int b = 0; b < grid.size(); ++b) {
      CHECK(cflat(a, b) == doctest::Approx(3.0).epsilon(1e-10));
      CHECK(std::abs(cplane(a, b) - (grid.points(a) + grid.points(b))) < 1e-8);
    }
  }
}

TEST_CASE("local_linear_2d output is exactly symmetric") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 9);
  auto rng = make_rng(77);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<ScatterPoint2D> pts;
  for (int i = 0; i < 300; ++i) {
    const double s = ux(rng), t = ux(rng);
    if (s == t) continue;
    pts.push_back({s, t, gauss(rng), 1.0});
  }
  const Eigen::MatrixXd c = local_linear_2d(pts, Bandwidth::fixed(0.3), grid);
  CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("min(s,t) surface recovered from noisy products") {
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 21);
  auto rng = make_rng(2024);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<ScatterPoint2D> pts;
  while (static_cast<int>(pts.size()) < 2000) {
    const double s = ux(rng), t = ux(rng);
    if (s == t) continue;
    pts.push_back({s, t, std::min(s, t) + noise(rng), 1.0});
  }
  const Eigen::MatrixXd c = local_linear_2d(pts, Bandwidth::automatic(), grid, 9);
  double sq = 0.0;
  for (int a = 0; a < grid.size(); ++a) {
    for (int b = 0; b < grid.size(); ++b) {
      const double d = c(a, b) - std::min(grid.points(a), grid.points(b));
      sq += d * d;
    }
  }
  CHECK(std::sqrt(sq / (grid.size() * grid.size())) < 0.08);
}

TEST_CASE("select_bandwidth_2d keeps mirrored points in one fold") {
  // a raw covariance cloud carries each product twice, at (s,t) and (t,s);
  // if the twins were split across folds the held-out error would be driven
  // to zero at tiny bandwidths. Selection on mirrored noise must therefore
  // not pick the absolute bottom of the ladder.
  const TimeGrid grid = build_grid_bounds(0.0, 1.0, 21);
  auto rng = make_rng(404);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<ScatterPoint2D> pts;
  for (int i = 0; i < 400; ++i) {
    const double s = ux(rng), t = ux(rng);
    if (s == t) continue;
    const double c = noise(rng);  // pure noise surface
    pts.push_back({s, t, c, 1.0});
    pts.push_back({t, s, c, 1.0});
  }
  const BandwidthChoice choice = select_bandwidth_2d(pts, grid, 12);
  CHECK_FALSE(choice.fallback);
  CHECK(choice.h > grid.spacing() * 1.5);
}

TEST_CASE("fixed bandwidth must be positive") {
  CHECK_THROWS_AS(Bandwidth::fixed(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Bandwidth::fixed(-1.0), std::invalid_argument);
}
