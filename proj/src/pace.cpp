#include "fpca/pace.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fpca/random.hpp"

namespace fpca {

namespace {

std::vector<ScatterPoint1D> pooled_observations(const std::vector<LongitudinalSample>& samples) {
  std::vector<ScatterPoint1D> points;
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      points.push_back({s.times[j], s.values[j], 1.0});
    }
  }
  return points;
}

BandwidthChoice resolve_1d(const std::vector<ScatterPoint1D>& points, const Bandwidth& bw,
                           const TimeGrid& grid, std::uint64_t cv_seed) {
  if (bw.is_auto) return select_bandwidth_1d(points, grid, cv_seed);
  return {bw.value, false};
}

BandwidthChoice resolve_2d(const std::vector<ScatterPoint2D>& points, const Bandwidth& bw,
                           const TimeGrid& grid, std::uint64_t cv_seed) {
  if (bw.is_auto) return select_bandwidth_2d(points, grid, cv_seed);
  return {bw.value, false};
}

}  // namespace

Eigen::VectorXd estimate_mean(const std::vector<LongitudinalSample>& samples,
                              const TimeGrid& grid, const FitConfig& config) {
  if (samples.size() < 2) throw std::invalid_argument("need at least 2 subjects");
  const auto points = pooled_observations(samples);
  const BandwidthChoice bw =
      resolve_1d(points, config.bandwidth_mean, grid, derive_seed(config.bandwidth_seed, 0));
  return local_linear_1d(points, Bandwidth::fixed(bw.h), grid);
}

std::vector<ScatterPoint2D> raw_covariances(const std::vector<LongitudinalSample>& samples,
                                            const Eigen::VectorXd& mean, const TimeGrid& grid) {
  std::vector<ScatterPoint2D> points;
  for (const auto& s : samples) {
    const std::size_t m = s.times.size();
    if (m < 2) continue;
    std::vector<double> resid(m);
    for (std::size_t j = 0; j < m; ++j) {
      resid[j] = s.values[j] - interpolate(mean, grid, s.times[j]);
    }
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 0; l < m; ++l) {
        if (j == l) continue;
        points.push_back({s.times[j], s.times[l], resid[j] * resid[l], 1.0});
      }
    }
  }
  return points;
}

double estimate_sigma2(const std::vector<LongitudinalSample>& samples,
                       const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_surface,
                       const TimeGrid& grid, const FitConfig& config) {
  std::vector<ScatterPoint1D> diag_products;
  for (const auto& s : samples) {
    for (std::size_t j = 0; j < s.times.size(); ++j) {
      const double r = s.values[j] - interpolate(mean, grid, s.times[j]);
      diag_products.push_back({s.times[j], r * r, 1.0});
    }
  }
  const BandwidthChoice bw = resolve_1d(diag_products, config.bandwidth_mean, grid,
                                        derive_seed(config.bandwidth_seed, 2));
  const Eigen::VectorXd v_hat =
      local_linear_1d(diag_products, Bandwidth::fixed(bw.h), grid);

  const int m = grid.size();
  const int lo = static_cast<int>(std::ceil(0.25 * (m - 1)));
  const int hi = static_cast<int>(std::floor(0.75 * (m - 1)));
  double gap = 0.0;
  for (int i = lo; i <= hi; ++i) gap += v_hat(i) - cov_surface(i, i);
  gap /= hi - lo + 1;
  return std::max(0.0, gap);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> eigendecompose(const Eigen::MatrixXd& cov,
                                                           const TimeGrid& grid) {
  const int m = grid.size();
  if (cov.rows() != m || cov.cols() != m) {
    throw std::invalid_argument("covariance size does not match grid");
  }
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("covariance not symmetric");
  }

  const Eigen::VectorXd sqrt_w = grid.weights.cwiseSqrt();
  Eigen::MatrixXd weighted = sqrt_w.asDiagonal() * cov * sqrt_w.asDiagonal();
  weighted = 0.5 * (weighted + weighted.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");

  const Eigen::VectorXd& raw_values = solver.eigenvalues();
  const double lambda_max = raw_values(m - 1);
  const double keep = lambda_max * 1e-12;
  int count = 0;
  for (int i = m - 1; i >= 0 && raw_values(i) > keep && raw_values(i) > 0.0; --i) ++count;

  Eigen::VectorXd values(count);
  Eigen::MatrixXd functions(count, m);
  const double sign_tol = 1e-10 * std::sqrt(grid.span());
  for (int k = 0; k < count; ++k) {
    const int src = m - 1 - k;
    values(k) = raw_values(src);
    Eigen::VectorXd phi = solver.eigenvectors().col(src).cwiseQuotient(sqrt_w);
    double integral = 0.0;
    for (int i = 0; i < m; ++i) integral += grid.weights(i) * phi(i);
    bool flip = integral < -sign_tol;
    if (std::abs(integral) <= sign_tol) {
      const double entry_tol = 1e-12 * phi.cwiseAbs().maxCoeff();
      for (int i = 0; i < m; ++i) {
        if (std::abs(phi(i)) > entry_tol) {
          flip = phi(i) < 0.0;
          break;
        }
      }
    }
    if (flip) phi = -phi;
    functions.row(k) = phi.transpose();
  }
  return {std::move(values), std::move(functions)};
}

int select_k(const Eigen::VectorXd& eigenvalues, double threshold, int max_components) {
  if (!(threshold > 0.0) || threshold > 1.0) {
    throw std::invalid_argument("fve threshold must be in (0, 1]");
  }
  double total = 0.0;
  for (int i = 0; i < eigenvalues.size(); ++i) {
    if (eigenvalues(i) > 0.0) total += eigenvalues(i);
  }
  if (!(total > 0.0)) throw std::runtime_error("degenerate covariance");
  double cum = 0.0;
  int k = static_cast<int>(eigenvalues.size());
  for (int i = 0; i < eigenvalues.size(); ++i) {
    cum += eigenvalues(i);
    if (cum / total >= threshold) {
      k = i + 1;
      break;
    }
  }
  return std::min(k, max_components);
}

Eigen::VectorXd estimate_scores(const LongitudinalSample& sample, const FpcaModel& model) {
  const int m = static_cast<int>(sample.times.size());
  const int k = model.k;
  Eigen::VectorXd resid(m);
  Eigen::MatrixXd phi(m, k);
  for (int j = 0; j < m; ++j) {
    resid(j) = sample.values[j] - interpolate(model.mean, model.grid, sample.times[j]);
    for (int c = 0; c < k; ++c) {
      phi(j, c) = interpolate(model.eigenfunctions.row(c).transpose(), model.grid,
                              sample.times[j]);
    }
  }
  Eigen::MatrixXd subject_cov =
      phi * model.eigenvalues.head(k).asDiagonal() * phi.transpose();
  subject_cov.diagonal().array() += model.sigma2 + model.score_ridge;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(subject_cov);
  if (ldlt.info() != Eigen::Success) throw std::runtime_error("singular subject covariance");
  const Eigen::VectorXd alpha = ldlt.solve(resid);
  if (!alpha.allFinite()) throw std::runtime_error("singular subject covariance");
  return model.eigenvalues.head(k).asDiagonal() * (phi.transpose() * alpha);
}

Eigen::VectorXd fitted_trajectory(const FpcaModel& model, const Eigen::VectorXd& scores) {
  if (scores.size() != model.k) {
    throw std::invalid_argument("score length does not match model");
  }
  return model.mean + model.eigenfunctions.transpose() * scores;
}

FpcaModel fit(const std::vector<LongitudinalSample>& samples, const FitConfig& config) {
  if (samples.size() < 2) throw std::invalid_argument("need at least 2 subjects");
  for (const auto& s : samples) validate_sample(s);

  FpcaModel model;
  if (config.domain) {
    model.grid =
        build_grid_bounds(config.domain->first, config.domain->second, config.grid_points);
    for (const auto& s : samples) {
      if (s.times.front() < model.grid.t_min() - 1e-9 ||
          s.times.back() > model.grid.t_max() + 1e-9) {
        throw std::invalid_argument("time out of domain: subject " + s.subject_id);
      }
    }
  } else {
    model.grid = build_grid(samples, config.grid_points);
  }

  const auto pooled = pooled_observations(samples);
  model.mean_bandwidth = resolve_1d(pooled, config.bandwidth_mean, model.grid,
                                    derive_seed(config.bandwidth_seed, 0));
  model.mean = local_linear_1d(pooled, Bandwidth::fixed(model.mean_bandwidth.h), model.grid);

  const auto raw = raw_covariances(samples, model.mean, model.grid);
  if (raw.empty()) throw std::runtime_error("insufficient pairs");
  model.cov_bandwidth = resolve_2d(raw, config.bandwidth_cov, model.grid,
                                   derive_seed(config.bandwidth_seed, 1));
  model.cov = local_linear_2d(raw, Bandwidth::fixed(model.cov_bandwidth.h), model.grid);

  model.sigma2 = estimate_sigma2(samples, model.mean, model.cov, model.grid, config);

  auto [values, functions] = eigendecompose(model.cov, model.grid);
  model.k = select_k(values, config.fve_threshold, config.max_components);

  const double total = values.sum();
  model.fve.resize(model.k);
  double cum = 0.0;
  for (int i = 0; i < model.k; ++i) {
    cum += values(i);
    model.fve(i) = cum / total;
  }
  model.eigenvalues = values.head(model.k);
  model.eigenfunctions = functions.topRows(model.k);
  model.score_ridge = config.ridge * model.eigenvalues(0);

  const int n = static_cast<int>(samples.size());
  model.scores.resize(n, model.k);
  model.subject_ids.resize(n);
  model.groups.resize(n);
  for (int i = 0; i < n; ++i) {
    model.scores.row(i) = estimate_scores(samples[i], model).transpose();
    model.subject_ids[i] = samples[i].subject_id;
    model.groups[i] = samples[i].group;
  }
  return model;
}

Eigen::VectorXd predict_trajectory(const FpcaModel& model, const LongitudinalSample& sample) {
  return fitted_trajectory(model, estimate_scores(sample, model));
}

CurveMatrix fitted_curves(const FpcaModel& model) {
  CurveMatrix curves;
  curves.grid = model.grid;
  curves.subject_ids = model.subject_ids;
  curves.groups = model.groups;
  const int n = static_cast<int>(model.scores.rows());
  curves.rows.resize(n, model.grid.size());
  for (int i = 0; i < n; ++i) {
    curves.rows.row(i) = fitted_trajectory(model, model.scores.row(i).transpose()).transpose();
  }
  return curves;
}

}  // namespace fpca
