#include "fpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <set>
#include <stdexcept>

#include "fpca/random.hpp"

namespace fpca {

namespace {

double legendre_poly(int degree, double x) {
  if (degree == 0) return 1.0;
  double prev = 1.0;
  double cur = x;
  for (int n = 1; n < degree; ++n) {
    const double next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

// Sorted times without duplicates; the whole batch is redrawn on a tie so
// the draw count stays data independent only in distribution, not in count.
std::vector<double> draw_times(int m, double t_min, double t_max, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(t_min, t_max);
  std::vector<double> times(m);
  while (true) {
    for (int j = 0; j < m; ++j) times[j] = unif(rng);
    std::sort(times.begin(), times.end());
    if (std::adjacent_find(times.begin(), times.end()) == times.end()) return times;
  }
}

LongitudinalSample simulate_subject(const KlSpec& spec, const std::string& id,
                                    std::uint64_t subject_seed, Eigen::VectorXd& scores_out) {
  auto rng = make_rng(subject_seed);
  std::uniform_int_distribution<int> count(spec.obs_min, spec.obs_max);
  const int m = count(rng);
  LongitudinalSample sample;
  sample.subject_id = id;
  sample.times = draw_times(m, spec.t_min, spec.t_max, rng);

  const int k = static_cast<int>(spec.components.size());
  scores_out.resize(k);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int j = 0; j < k; ++j) {
    scores_out(j) = std::sqrt(spec.components[j].eigenvalue) * gauss(rng);
  }
  const double noise_sd = std::sqrt(spec.sigma2);
  sample.values.resize(m);
  for (int i = 0; i < m; ++i) {
    double y = spec.mean(sample.times[i]);
    for (int j = 0; j < k; ++j) y += scores_out(j) * spec.components[j].shape(sample.times[i]);
    sample.values[i] = y + noise_sd * gauss(rng);
  }
  return sample;
}

}  // namespace

void validate_spec(const KlSpec& spec) {
  if (!std::isfinite(spec.t_min) || !std::isfinite(spec.t_max) || !(spec.t_max > spec.t_min)) {
    throw std::invalid_argument("degenerate time domain");
  }
  if (!spec.mean) throw std::invalid_argument("spec has no mean function");
  if (spec.components.empty()) throw std::invalid_argument("spec has no components");
  if (!(spec.sigma2 >= 0.0) || !std::isfinite(spec.sigma2)) {
    throw std::invalid_argument("noise variance must be non-negative");
  }
  if (spec.obs_min < 1 || spec.obs_max < spec.obs_min) {
    throw std::invalid_argument("invalid observation count range");
  }
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& c : spec.components) {
    if (!c.shape) throw std::invalid_argument("component has no shape");
    if (!(c.eigenvalue > 0.0) || c.eigenvalue > prev) {
      throw std::invalid_argument("eigenvalues must be positive and non-increasing");
    }
    prev = c.eigenvalue;
  }

  const int quad = 201;
  const TimeGrid grid = build_grid_bounds(spec.t_min, spec.t_max, quad);
  const int k = static_cast<int>(spec.components.size());
  Eigen::MatrixXd values(quad, k);
  for (int j = 0; j < k; ++j) {
    for (int q = 0; q < quad; ++q) values(q, j) = spec.components[j].shape(grid.points(q));
  }
  for (int a = 0; a < k; ++a) {
    for (int b = a; b < k; ++b) {
      const double inner = (values.col(a).array() * values.col(b).array() *
                            grid.weights.array())
                               .sum();
      const double target = a == b ? 1.0 : 0.0;
      if (std::abs(inner - target) > 1e-3) {
        throw std::invalid_argument("eigenfunctions not orthonormal");
      }
    }
  }
}

SimulatedCohort simulate_cohort(const KlSpec& spec, int n, std::uint64_t seed,
                                const std::string& id_prefix) {
  validate_spec(spec);
  if (n < 1) throw std::invalid_argument("need at least one subject");
  SimulatedCohort cohort;
  cohort.samples.reserve(n);
  cohort.scores.resize(n, static_cast<int>(spec.components.size()));
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd scores;
    const std::string id = id_prefix + "_" + std::to_string(i + 1);
    cohort.samples.push_back(
        simulate_subject(spec, id, derive_seed(seed, static_cast<std::uint64_t>(i)), scores));
    cohort.scores.row(i) = scores.transpose();
  }
  return cohort;
}

SimulatedCohort simulate_groups(const std::vector<GroupSpec>& groups, std::uint64_t seed) {
  if (groups.empty()) throw std::invalid_argument("need at least one group");
  std::set<std::string> labels;
  int total = 0;
  int max_k = 0;
  for (const auto& g : groups) {
    validate_spec(g.spec);
    if (g.label.empty()) throw std::invalid_argument("group label must not be empty");
    if (!labels.insert(g.label).second) {
      throw std::invalid_argument("duplicate group label: " + g.label);
    }
    if (g.n < 1) throw std::invalid_argument("need at least one subject");
    total += g.n;
    max_k = std::max(max_k, static_cast<int>(g.spec.components.size()));
  }

  SimulatedCohort cohort;
  cohort.samples.reserve(total);
  cohort.scores = Eigen::MatrixXd::Zero(total, max_k);
  int row = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    // A single-spec call reproduces simulate_cohort(spec, n, seed) exactly;
    // with several groups each gets its own derived stream.
    const std::uint64_t group_seed =
        groups.size() == 1 ? seed : derive_seed(seed, static_cast<std::uint64_t>(g));
    for (int i = 0; i < group.n; ++i) {
      Eigen::VectorXd scores;
      const std::string id = group.label + "_" + std::to_string(i + 1);
      LongitudinalSample sample = simulate_subject(
          group.spec, id, derive_seed(group_seed, static_cast<std::uint64_t>(i)), scores);
      sample.group = group.label;
      cohort.samples.push_back(std::move(sample));
      cohort.scores.row(row).head(scores.size()) = scores.transpose();
      ++row;
    }
  }
  return cohort;
}

ShapeFn legendre_shape(int degree, double t_min, double t_max) {
  if (degree < 0) throw std::invalid_argument("degree must be non-negative");
  if (!(t_max > t_min)) throw std::invalid_argument("degenerate time domain");
  const double length = t_max - t_min;
  const double scale = std::sqrt((2.0 * degree + 1.0) / length);
  return [=](double t) {
    const double x = 2.0 * (t - t_min) / length - 1.0;
    return scale * legendre_poly(degree, x);
  };
}

ShapeFn fourier_sine_shape(int k, double t_min, double t_max) {
  if (k < 1) throw std::invalid_argument("frequency must be positive");
  if (!(t_max > t_min)) throw std::invalid_argument("degenerate time domain");
  const double length = t_max - t_min;
  const double scale = std::sqrt(2.0 / length);
  const double omega = k * M_PI / length;
  return [=](double t) { return scale * std::sin(omega * (t - t_min)); };
}

ShapeFn tabulated_shape(std::vector<double> times, std::vector<double> values) {
  if (times.size() != values.size() || times.size() < 2) {
    throw std::invalid_argument("tabulated shape needs matching times and values");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("tabulated times must be strictly increasing");
    }
  }
  auto shared_times = std::make_shared<std::vector<double>>(std::move(times));
  auto shared_values = std::make_shared<std::vector<double>>(std::move(values));
  return [shared_times, shared_values](double t) {
    const auto& ts = *shared_times;
    const auto& vs = *shared_values;
    if (t <= ts.front()) return vs.front();
    if (t >= ts.back()) return vs.back();
    const auto it = std::upper_bound(ts.begin(), ts.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - ts.begin());
    const std::size_t lo = hi - 1;
    const double frac = (t - ts[lo]) / (ts[hi] - ts[lo]);
    return vs[lo] + frac * (vs[hi] - vs[lo]);
  };
}

KlSpec default_oracle_spec() {
  KlSpec spec;
  spec.t_min = 0.0;
  spec.t_max = 15.0;
  spec.mean = [](double t) { return 50.0 - 2.0 * t; };
  spec.components = {{9.0, legendre_shape(0, 0.0, 15.0)},
                     {4.0, legendre_shape(1, 0.0, 15.0)}};
  spec.sigma2 = 4.0;
  spec.obs_min = 2;
  spec.obs_max = 8;
  return spec;
}

}  // namespace fpca
