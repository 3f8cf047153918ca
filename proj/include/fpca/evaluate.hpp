#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fpca/curves.hpp"
#include "fpca/pace.hpp"

namespace fpca {

struct FoldAssignment {
  // Fold index per sample position, 0..k-1.
  std::vector<int> fold;
  int k = 0;
  std::uint64_t seed = 0;
};

// What gets trained and which subjects are scored:
//   full_on_all    train on every training subject, score every test subject
//   full_on_group  train on every training subject, score one group
//   group_on_group train and score within one group
struct ModelScope {
  enum class Kind { full_on_all, full_on_group, group_on_group };
  Kind kind = Kind::full_on_all;
  std::string group;

  static ModelScope full() { return {Kind::full_on_all, ""}; }
  static ModelScope full_on(std::string g) { return {Kind::full_on_group, std::move(g)}; }
  static ModelScope group_on(std::string g) { return {Kind::group_on_group, std::move(g)}; }
};

struct GofResult {
  std::vector<std::string> group_labels;
  // One entry per repeat.
  std::vector<double> full_on_all;
  // repeats x groups, indexed [repeat][group].
  std::vector<std::vector<double>> full_on_group;
  std::vector<std::vector<double>> group_on_group;
  int repeats = 0;
  int folds = 0;
  std::uint64_t seed = 0;
};

struct FutureAccuracy {
  std::vector<std::string> group_labels;
  double full_on_all = 0.0;
  std::vector<double> full_on_group;
  std::vector<double> group_on_group;
  int evaluated_subjects = 0;
  int excluded_subjects = 0;
};

FoldAssignment stratified_folds(const std::vector<LongitudinalSample>& samples, int k,
                                std::uint64_t seed);

// Mean squared residual between each observation and the predicted curve at
// the nearest grid point.
double acse(const LongitudinalSample& sample, const Eigen::VectorXd& predicted,
            const TimeGrid& grid);

double root_macse(const std::vector<LongitudinalSample>& samples, const ModelScope& scope,
                  const FoldAssignment& folds, const FitConfig& config);

// sqrt of the mean of per-fold MACSE values.
double root_macse_from_folds(const std::vector<double>& macse_per_fold);

// sqrt of the mean squared residual.
double root_mse(const std::vector<double>& residuals);

GofResult gof_compare(const std::vector<LongitudinalSample>& samples, int repeats, int k,
                      std::uint64_t seed, const FitConfig& config);

// Hold out each subject's latest observation, refit, and score the held-out
// value at its nearest grid point. Subjects with a single observation are
// excluded and tallied.
FutureAccuracy future_prediction_rmse(const std::vector<LongitudinalSample>& samples,
                                      const FitConfig& config);

}  // namespace fpca
