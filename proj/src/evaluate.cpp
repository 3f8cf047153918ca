#include "fpca/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>

#include "fpca/random.hpp"

namespace fpca {

namespace {

std::vector<std::string> labels_in_order(const std::vector<LongitudinalSample>& samples) {
  std::vector<std::string> labels;
  std::map<std::string, int> seen;
  for (const auto& s : samples) {
    if (seen.insert({s.group, 0}).second) labels.push_back(s.group);
  }
  return labels;
}

// Grids of fold-level fits must share one domain, otherwise held-out times
// can fall outside a training split's observed range.
FitConfig with_cohort_domain(const FitConfig& config,
                             const std::vector<LongitudinalSample>& samples) {
  if (config.domain) return config;
  if (samples.empty()) throw std::invalid_argument("no samples");
  double t_min = samples.front().times.front();
  double t_max = t_min;
  for (const auto& s : samples) {
    validate_sample(s);
    t_min = std::min(t_min, s.times.front());
    t_max = std::max(t_max, s.times.back());
  }
  FitConfig out = config;
  out.domain = {t_min, t_max};
  return out;
}

// Per-fold MACSE for several scopes over one fold assignment, fitting each
// needed model once per fold.
std::vector<std::vector<double>> fold_macse_table(
    const std::vector<LongitudinalSample>& samples, const std::vector<ModelScope>& scopes,
    const FoldAssignment& folds, const FitConfig& config) {
  const int n = static_cast<int>(samples.size());
  if (static_cast<int>(folds.fold.size()) != n) {
    throw std::invalid_argument("fold assignment does not match samples");
  }
  const FitConfig resolved = with_cohort_domain(config, samples);

  std::vector<std::vector<double>> table(scopes.size());
  for (int d = 0; d < folds.k; ++d) {
    std::vector<LongitudinalSample> train_all;
    std::vector<int> test_idx;
    for (int i = 0; i < n; ++i) {
      if (folds.fold[i] == d) {
        test_idx.push_back(i);
      } else {
        train_all.push_back(samples[i]);
      }
    }

    std::optional<FpcaModel> full_model;
    std::map<std::string, FpcaModel> group_models;
    for (std::size_t s = 0; s < scopes.size(); ++s) {
      const ModelScope& scope = scopes[s];
      const FpcaModel* model = nullptr;
      if (scope.kind == ModelScope::Kind::group_on_group) {
        auto it = group_models.find(scope.group);
        if (it == group_models.end()) {
          std::vector<LongitudinalSample> train_group;
          for (const auto& sample : train_all) {
            if (sample.group == scope.group) train_group.push_back(sample);
          }
          it = group_models.emplace(scope.group, fit(train_group, resolved)).first;
        }
        model = &it->second;
      } else {
        if (!full_model) full_model = fit(train_all, resolved);
        model = &*full_model;
      }

      double total = 0.0;
      int count = 0;
      for (int i : test_idx) {
        if (scope.kind != ModelScope::Kind::full_on_all &&
            samples[i].group != scope.group) {
          continue;
        }
        total += acse(samples[i], predict_trajectory(*model, samples[i]), model->grid);
        ++count;
      }
      if (count == 0) throw std::runtime_error("empty test fold");
      table[s].push_back(total / count);
    }
  }
  return table;
}

}  // namespace

FoldAssignment stratified_folds(const std::vector<LongitudinalSample>& samples, int k,
                                std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  if (samples.empty()) throw std::invalid_argument("no samples");

  std::map<std::string, std::vector<int>> members;
  std::vector<std::string> order;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    auto [it, inserted] = members.insert({samples[i].group, {}});
    if (inserted) order.push_back(samples[i].group);
    it->second.push_back(i);
  }
  for (const auto& label : order) {
    if (static_cast<int>(members[label].size()) < k) {
      throw std::runtime_error("group too small for k folds");
    }
  }

  FoldAssignment assignment;
  assignment.fold.assign(samples.size(), 0);
  assignment.k = k;
  assignment.seed = seed;
  auto rng = make_rng(seed);
  int cursor = 0;
  for (const auto& label : order) {
    std::vector<int>& idx = members[label];
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i : idx) assignment.fold[i] = cursor++ % k;
  }
  return assignment;
}

double acse(const LongitudinalSample& sample, const Eigen::VectorXd& predicted,
            const TimeGrid& grid) {
  if (sample.times.empty()) throw std::invalid_argument("empty sample");
  if (predicted.size() != grid.size()) {
    throw std::invalid_argument("curve length does not match grid");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < sample.times.size(); ++j) {
    const double r = sample.values[j] - predicted(nearest_grid_index(sample.times[j], grid));
    total += r * r;
  }
  return total / static_cast<double>(sample.times.size());
}

double root_macse(const std::vector<LongitudinalSample>& samples, const ModelScope& scope,
                  const FoldAssignment& folds, const FitConfig& config) {
  const auto table = fold_macse_table(samples, {scope}, folds, config);
  return root_macse_from_folds(table[0]);
}

double root_macse_from_folds(const std::vector<double>& macse_per_fold) {
  if (macse_per_fold.empty()) throw std::invalid_argument("no folds");
  double total = 0.0;
  for (double m : macse_per_fold) total += m;
  return std::sqrt(total / static_cast<double>(macse_per_fold.size()));
}

double root_mse(const std::vector<double>& residuals) {
  if (residuals.empty()) throw std::invalid_argument("no residuals");
  double total = 0.0;
  for (double r : residuals) total += r * r;
  return std::sqrt(total / static_cast<double>(residuals.size()));
}

GofResult gof_compare(const std::vector<LongitudinalSample>& samples, int repeats, int k,
                      std::uint64_t seed, const FitConfig& config) {
  if (repeats < 1) throw std::invalid_argument("need at least 1 repeat");
  GofResult result;
  result.group_labels = labels_in_order(samples);
  result.repeats = repeats;
  result.folds = k;
  result.seed = seed;

  std::vector<ModelScope> scopes;
  scopes.push_back(ModelScope::full());
  for (const auto& g : result.group_labels) scopes.push_back(ModelScope::full_on(g));
  for (const auto& g : result.group_labels) scopes.push_back(ModelScope::group_on(g));

  const int n_groups = static_cast<int>(result.group_labels.size());
  for (int r = 0; r < repeats; ++r) {
    const FoldAssignment folds =
        stratified_folds(samples, k, derive_seed(seed, static_cast<std::uint64_t>(r)));
    const auto table = fold_macse_table(samples, scopes, folds, config);
    result.full_on_all.push_back(root_macse_from_folds(table[0]));
    std::vector<double> full_g(n_groups);
    std::vector<double> group_g(n_groups);
    for (int g = 0; g < n_groups; ++g) {
      full_g[g] = root_macse_from_folds(table[1 + g]);
      group_g[g] = root_macse_from_folds(table[1 + n_groups + g]);
    }
    result.full_on_group.push_back(std::move(full_g));
    result.group_on_group.push_back(std::move(group_g));
  }
  return result;
}

FutureAccuracy future_prediction_rmse(const std::vector<LongitudinalSample>& samples,
                                      const FitConfig& config) {
  const FitConfig resolved = with_cohort_domain(config, samples);

  std::vector<LongitudinalSample> truncated;
  std::vector<double> held_time;
  std::vector<double> held_value;
  int excluded = 0;
  for (const auto& s : samples) {
    if (s.times.size() < 2) {
      ++excluded;
      continue;
    }
    LongitudinalSample t = s;
    held_time.push_back(t.times.back());
    held_value.push_back(t.values.back());
    t.times.pop_back();
    t.values.pop_back();
    truncated.push_back(std::move(t));
  }
  if (truncated.empty()) throw std::runtime_error("no eligible subjects");

  FutureAccuracy result;
  result.group_labels = labels_in_order(truncated);
  result.evaluated_subjects = static_cast<int>(truncated.size());
  result.excluded_subjects = excluded;

  const int n = static_cast<int>(truncated.size());
  std::vector<double> residuals(n);
  {
    const FpcaModel full = fit(truncated, resolved);
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd pred = predict_trajectory(full, truncated[i]);
      residuals[i] = held_value[i] - pred(nearest_grid_index(held_time[i], full.grid));
    }
  }
  result.full_on_all = root_mse(residuals);
  for (const auto& label : result.group_labels) {
    std::vector<double> group_res;
    for (int i = 0; i < n; ++i) {
      if (truncated[i].group == label) group_res.push_back(residuals[i]);
    }
    result.full_on_group.push_back(root_mse(group_res));
  }

  for (const auto& label : result.group_labels) {
    std::vector<LongitudinalSample> group_train;
    std::vector<double> group_time;
    std::vector<double> group_value;
    for (int i = 0; i < n; ++i) {
      if (truncated[i].group != label) continue;
      group_train.push_back(truncated[i]);
      group_time.push_back(held_time[i]);
      group_value.push_back(held_value[i]);
    }
    const FpcaModel model = fit(group_train, resolved);
    std::vector<double> group_res(group_train.size());
    for (std::size_t i = 0; i < group_train.size(); ++i) {
      const Eigen::VectorXd pred = predict_trajectory(model, group_train[i]);
      group_res[i] = group_value[i] - pred(nearest_grid_index(group_time[i], model.grid));
    }
    result.group_on_group.push_back(root_mse(group_res));
  }
  return result;
}

}  // namespace fpca
