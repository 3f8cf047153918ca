#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fpca/curves.hpp"
#include "fpca/pace.hpp"

namespace fpca {

struct PairResult {
  std::string group_u;
  std::string group_v;
  double statistic = 0.0;
  double p_value = 1.0;
};

struct PermutationTestResult {
  double statistic = 0.0;
  double p_global = 1.0;
  std::vector<PairResult> pairwise;
  int replicates = 0;
  std::uint64_t seed = 0;
};

// Rows centered by their group mean and scaled by the square root of the
// full-model covariance diagonal.
struct StandardizedCurves {
  CurveMatrix curves;
};

// One-way functional ANOVA ratio on fitted trajectories:
//   [(1/(G-1)) sum_g n_g ||mean_g - mean||^2] /
//   [(1/(N-G)) sum_g sum_i ||row_gi - mean_g||^2]
double fp_statistic(const CurveMatrix& curves);

PermutationTestResult mean_permutation_test(const CurveMatrix& curves, int replicates,
                                            std::uint64_t seed);

StandardizedCurves standardize_trajectories(const CurveMatrix& curves,
                                            const FpcaModel& full_model);

// Hilbert-Schmidt distance between PSD matrix square roots, discretized with
// the grid quadrature weights. Negative eigenvalues are clipped to zero
// before the root.
double sqrt_distance(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                     const TimeGrid& grid);

// Pairwise square-root distances between group covariances of standardized
// rows, with paired permutations per pair and a max-T nonparametric
// combination for the global p-value. All pairs share one relabeling stream
// per replicate.
PermutationTestResult covariance_permutation_test(const StandardizedCurves& standardized,
                                                  int replicates, std::uint64_t seed);

}  // namespace fpca
