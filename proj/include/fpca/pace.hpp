#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fpca/curves.hpp"
#include "fpca/smooth.hpp"

namespace fpca {

struct FitConfig {
  int grid_points = 51;
  double fve_threshold = 0.95;
  int max_components = 20;
  Bandwidth bandwidth_mean = Bandwidth::automatic();
  Bandwidth bandwidth_cov = Bandwidth::automatic();
  // Relative ridge: the score covariance diagonal gets ridge * lambda_1.
  double ridge = 1e-8;
  // Seed for the bandwidth cross-validation folds; fitting has no other
  // random element.
  std::uint64_t bandwidth_seed = 20250901;
  // Optional explicit domain; by default the grid spans the observed times.
  // Needed when models fitted on subsets must share a common grid.
  std::optional<std::pair<double, double>> domain;
};

struct FpcaModel {
  TimeGrid grid;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double sigma2 = 0.0;
  Eigen::VectorXd eigenvalues;
  // One row per component, evaluated on the grid.
  Eigen::MatrixXd eigenfunctions;
  Eigen::VectorXd fve;
  int k = 0;
  Eigen::MatrixXd scores;
  std::vector<std::string> subject_ids;
  std::vector<std::string> groups;
  // Absolute ridge actually applied to subject covariances (ridge * lambda_1).
  double score_ridge = 0.0;
  // Resolved bandwidths, kept for reporting.
  BandwidthChoice mean_bandwidth{0.0, false};
  BandwidthChoice cov_bandwidth{0.0, false};
};

Eigen::VectorXd estimate_mean(const std::vector<LongitudinalSample>& samples,
                              const TimeGrid& grid, const FitConfig& config);

// One point per ordered off-diagonal pair (j, l) per subject; the diagonal is
// left out because it carries the measurement-error inflation.
std::vector<ScatterPoint2D> raw_covariances(const std::vector<LongitudinalSample>& samples,
                                            const Eigen::VectorXd& mean, const TimeGrid& grid);

double estimate_sigma2(const std::vector<LongitudinalSample>& samples,
                       const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov_surface,
                       const TimeGrid& grid, const FitConfig& config);

// Quadrature-weighted eigenproblem; returns all strictly positive eigenpairs,
// eigenvalues descending, eigenfunctions (rows) orthonormal under the grid
// weights with sign fixed so the integral of each is nonnegative.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> eigendecompose(const Eigen::MatrixXd& cov,
                                                           const TimeGrid& grid);

int select_k(const Eigen::VectorXd& eigenvalues, double threshold, int max_components);

Eigen::VectorXd estimate_scores(const LongitudinalSample& sample, const FpcaModel& model);

Eigen::VectorXd fitted_trajectory(const FpcaModel& model, const Eigen::VectorXd& scores);

FpcaModel fit(const std::vector<LongitudinalSample>& samples, const FitConfig& config);

Eigen::VectorXd predict_trajectory(const FpcaModel& model, const LongitudinalSample& sample);

// Fitted trajectories of the training subjects as a curve matrix.
CurveMatrix fitted_curves(const FpcaModel& model);

}  // namespace fpca
