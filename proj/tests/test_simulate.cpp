#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "fpca/simulate.hpp"

using namespace fpca;

namespace {

KlSpec flat_spec() {
  KlSpec spec;
  spec.t_min = 0.0;
  spec.t_max = 10.0;
  spec.mean = [](double t) { return 7.0 - 0.5 * t; };
  spec.components = {{1.0, legendre_shape(0, 0.0, 10.0)}};
  spec.sigma2 = 0.0;
  return spec;
}

double trapezoid_inner(const ShapeFn& f, const ShapeFn& g, double a, double b, int n) {
  const TimeGrid grid = build_grid_bounds(a, b, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    total += grid.weights(i) * f(grid.points(i)) * g(grid.points(i));
  }
  return total;
}

}  // namespace

TEST_CASE("noiseless zero-variance subjects observe the mean exactly") {
  KlSpec spec = flat_spec();
  spec.components[0].eigenvalue = 1e-300;  // smallest positive; contributes nothing visible
  const SimulatedCohort cohort = simulate_cohort(spec, 20, 5);
  for (const auto& s : cohort.samples) {
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      CHECK(s.values[j] == doctest::Approx(7.0 - 0.5 * s.times[j]).epsilon(1e-12));
    }
  }
}

TEST_CASE("score sample variance matches the eigenvalue at large n") {
  const SimulatedCohort cohort = simulate_cohort(flat_spec(), 10000, 99);
  const Eigen::VectorXd xi = cohort.scores.col(0);
  const double mean = xi.mean();
  const double var = (xi.array() - mean).square().sum() / (xi.size() - 1);
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("same seed reproduces the cohort bitwise") {
  const SimulatedCohort a = simulate_cohort(default_oracle_spec(), 50, 31);
  const SimulatedCohort b = simulate_cohort(default_oracle_spec(), 50, 31);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].subject_id == b.samples[i].subject_id);
    CHECK(a.samples[i].times == b.samples[i].times);
    CHECK(a.samples[i].values == b.samples[i].values);
  }
  CHECK(a.scores == b.scores);
  const SimulatedCohort c = simulate_cohort(default_oracle_spec(), 50, 32);
  CHECK(a.samples[0].values != c.samples[0].values);
}

TEST_CASE("observation counts and times respect the spec") {
  KlSpec spec = default_oracle_spec();
  spec.obs_min = 3;
  spec.obs_max = 5;
  const SimulatedCohort cohort = simulate_cohort(spec, 200, 8);
  std::set<int> seen;
  for (const auto& s : cohort.samples) {
    const int m = s.n_obs();
    CHECK(m >= 3);
    CHECK(m <= 5);
    seen.insert(m);
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      CHECK(s.times[j] >= spec.t_min);
      CHECK(s.times[j] <= spec.t_max);
      if (j > 0) CHECK(s.times[j] > s.times[j - 1]);
    }
    CHECK_NOTHROW(validate_sample(s));
  }
  CHECK(seen.size() == 3);  // all counts show up across 200 subjects
}

TEST_CASE("validate_spec rejects broken specs") {
  KlSpec spec = flat_spec();
  spec.components.push_back({0.5, legendre_shape(0, 0.0, 10.0)});  // duplicate shape
  CHECK_THROWS_WITH_AS(validate_spec(spec), "eigenfunctions not orthonormal",
                       std::invalid_argument);

  spec = flat_spec();
  spec.components[0].eigenvalue = -1.0;
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = flat_spec();
  spec.components = {{1.0, legendre_shape(0, 0.0, 10.0)},
                     {2.0, legendre_shape(1, 0.0, 10.0)}};  // increasing eigenvalues
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = flat_spec();
  spec.t_max = spec.t_min;
  CHECK_THROWS_WITH_AS(validate_spec(spec), "degenerate time domain", std::invalid_argument);

  spec = flat_spec();
  spec.obs_min = 5;
  spec.obs_max = 3;
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);
}

TEST_CASE("shape families are orthonormal under quadrature") {
  const double a = -2.0, b = 13.0;
  std::vector<ShapeFn> shapes = {legendre_shape(0, a, b), legendre_shape(1, a, b),
                                 legendre_shape(2, a, b), legendre_shape(3, a, b),
                                 fourier_sine_shape(1, a, b), fourier_sine_shape(2, a, b)};
  // legendre x legendre and sine x sine blocks are orthonormal families
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i; j < 4; ++j) {
      const double ip = trapezoid_inner(shapes[i], shapes[j], a, b, 801);
      CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-4));
    }
  }
  CHECK(trapezoid_inner(shapes[4], shapes[4], a, b, 801) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(trapezoid_inner(shapes[4], shapes[5], a, b, 801) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("tabulated shapes interpolate and clamp") {
  const ShapeFn f = tabulated_shape({0.0, 1.0, 3.0}, {1.0, 3.0, -1.0});
  CHECK(f(0.0) == 1.0);
  CHECK(f(0.5) == doctest::Approx(2.0));
  CHECK(f(2.0) == doctest::Approx(1.0));
  CHECK(f(-5.0) == 1.0);
  CHECK(f(9.0) == -1.0);
  CHECK_THROWS_AS(tabulated_shape({0.0, 0.0}, {1.0, 2.0}), std::invalid_argument);
  CHECK_THROWS_AS(tabulated_shape({0.0, 1.0}, {1.0}), std::invalid_argument);
}

TEST_CASE("latent covariance of simulated scores converges to the spec") {
  const KlSpec spec = default_oracle_spec();
  const int n = 2000;
  const SimulatedCohort cohort = simulate_cohort(spec, n, 17);
  const TimeGrid grid = build_grid_bounds(spec.t_min, spec.t_max, 51);

  // latent trajectories from the drawn scores, no noise
  Eigen::MatrixXd shapes(2, grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    shapes(0, i) = spec.components[0].shape(grid.points(i));
    shapes(1, i) = spec.components[1].shape(grid.points(i));
  }
  const Eigen::MatrixXd centered = cohort.scores * shapes;  // n x M deviations
  const Eigen::MatrixXd emp = centered.transpose() * centered / double(n - 1);

  Eigen::MatrixXd truth = Eigen::MatrixXd::Zero(grid.size(), grid.size());
  truth += 9.0 * shapes.row(0).transpose() * shapes.row(0);
  truth += 4.0 * shapes.row(1).transpose() * shapes.row(1);

  double num = 0.0, den = 0.0;
  for (int a = 0; a < grid.size(); ++a) {
    for (int b = 0; b < grid.size(); ++b) {
      const double w = grid.weights(a) * grid.weights(b);
      num += w * (emp(a, b) - truth(a, b)) * (emp(a, b) - truth(a, b));
      den += w * truth(a, b) * truth(a, b);
    }
  }
  CHECK(std::sqrt(num / den) < 0.10);
}

TEST_CASE("single-spec groups equal a labeled plain cohort") {
  KlSpec spec = default_oracle_spec();
  const SimulatedCohort grouped = simulate_groups({{"ctrl", 25, spec}}, 77);
  const SimulatedCohort plain = simulate_cohort(spec, 25, 77, "ctrl");
  REQUIRE(grouped.samples.size() == plain.samples.size());
  for (std::size_t i = 0; i < plain.samples.size(); ++i) {
    CHECK(grouped.samples[i].subject_id == plain.samples[i].subject_id);
    CHECK(grouped.samples[i].times == plain.samples[i].times);
    CHECK(grouped.samples[i].values == plain.samples[i].values);
    CHECK(grouped.samples[i].group == "ctrl");
  }
  CHECK(grouped.scores == plain.scores);
}

TEST_CASE("group simulation labels, sizes, and errors") {
  KlSpec spec = default_oracle_spec();
  const SimulatedCohort two = simulate_groups({{"a", 10, spec}, {"b", 15, spec}}, 5);
  REQUIRE(two.samples.size() == 25);
  int count_a = 0;
  for (const auto& s : two.samples) count_a += s.group == "a";
  CHECK(count_a == 10);
  CHECK(two.samples[0].group == "a");
  CHECK(two.samples[10].group == "b");
  CHECK(two.samples[10].subject_id == "b_1");

  CHECK_THROWS_AS(simulate_groups({{"a", 10, spec}, {"a", 5, spec}}, 5),
                  std::invalid_argument);
  CHECK_THROWS_AS(simulate_groups({}, 5), std::invalid_argument);
}

TEST_CASE("a constant mean offset shows up in group sample means") {
  KlSpec base = default_oracle_spec();
  KlSpec shifted = default_oracle_spec();
  shifted.mean = [](double t) { return 50.0 - 2.0 * t + 1.0; };
  const SimulatedCohort cohort =
      simulate_groups({{"a", 4000, base}, {"b", 4000, shifted}}, 23);
  double sum_a = 0.0, sum_b = 0.0;
  long n_a = 0, n_b = 0;
  for (const auto& s : cohort.samples) {
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      const double centered = s.values[j] - (50.0 - 2.0 * s.times[j]);
      if (s.group == "a") {
        sum_a += centered;
        ++n_a;
      } else {
        sum_b += centered;
        ++n_b;
      }
    }
  }
  CHECK(sum_b / n_b - sum_a / n_a == doctest::Approx(1.0).epsilon(0.10));
}
