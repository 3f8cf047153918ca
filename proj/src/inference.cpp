#include "fpca/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "fpca/random.hpp"

namespace fpca {

namespace {

// Group labels in first-appearance order with member row indices.
struct GroupIndex {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> members;
};

GroupIndex index_groups(const std::vector<std::string>& groups) {
  GroupIndex index;
  std::map<std::string, int> position;
  for (int i = 0; i < static_cast<int>(groups.size()); ++i) {
    auto [it, inserted] = position.insert({groups[i], static_cast<int>(index.labels.size())});
    if (inserted) {
      index.labels.push_back(groups[i]);
      index.members.emplace_back();
    }
    index.members[it->second].push_back(i);
  }
  return index;
}

double fp_from_labels(const Eigen::MatrixXd& rows, const TimeGrid& grid,
                      const GroupIndex& index) {
  const int n = static_cast<int>(rows.rows());
  const int g = static_cast<int>(index.labels.size());
  if (g < 2) throw std::invalid_argument("need at least 2 groups");

  const Eigen::VectorXd overall = rows.colwise().mean().transpose();
  double numerator = 0.0;
  double denominator = 0.0;
  for (int q = 0; q < g; ++q) {
    const auto& rows_q = index.members[q];
    Eigen::VectorXd group_mean = Eigen::VectorXd::Zero(rows.cols());
    for (int i : rows_q) group_mean += rows.row(i).transpose();
    group_mean /= static_cast<double>(rows_q.size());
    numerator += rows_q.size() * norm_sq(group_mean - overall, grid);
    for (int i : rows_q) {
      denominator += norm_sq(rows.row(i).transpose() - group_mean, grid);
    }
  }
  if (n <= g || !(denominator > 0.0)) {
    throw std::runtime_error("no within-group variation");
  }
  return (numerator / (g - 1)) / (denominator / (n - g));
}

double add_one_p(int count_ge, int replicates) {
  return (1.0 + count_ge) / (1.0 + replicates);
}

// Observed FP plus a permutation p-value from shuffling the labels of `rows`.
std::pair<double, double> permuted_fp(const Eigen::MatrixXd& rows, const TimeGrid& grid,
                                      const std::vector<std::string>& labels, int replicates,
                                      std::uint64_t seed) {
  const double observed = fp_from_labels(rows, grid, index_groups(labels));
  int count = 0;
  std::vector<std::string> shuffled = labels;
  for (int r = 0; r < replicates; ++r) {
    auto rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    shuffled = labels;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    double stat;
    try {
      stat = fp_from_labels(rows, grid, index_groups(shuffled));
    } catch (const std::runtime_error&) {
      // A relabeling with zero within-group variation can only happen when
      // the observed statistic also degenerates, which fp_from_labels above
      // would have rejected; treat as an extreme draw.
      stat = std::numeric_limits<double>::infinity();
    }
    if (stat >= observed) ++count;
  }
  return {observed, add_one_p(count, replicates)};
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& rows) {
  const int n = static_cast<int>(rows.rows());
  const Eigen::RowVectorXd mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - mean;
  return centered.transpose() * centered / static_cast<double>(n - 1);
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (s + s.transpose()));
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const Eigen::VectorXd roots = solver.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

void check_symmetric(const Eigen::MatrixXd& s) {
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if ((s - s.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw std::invalid_argument("matrix not symmetric");
  }
}

Eigen::MatrixXd rows_subset(const Eigen::MatrixXd& rows, const std::vector<int>& idx) {
  Eigen::MatrixXd out(static_cast<int>(idx.size()), rows.cols());
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) out.row(i) = rows.row(idx[i]);
  return out;
}

}  // namespace

double fp_statistic(const CurveMatrix& curves) {
  return fp_from_labels(curves.rows, curves.grid, index_groups(curves.groups));
}

PermutationTestResult mean_permutation_test(const CurveMatrix& curves, int replicates,
                                            std::uint64_t seed) {
  if (replicates < 1) throw std::invalid_argument("need at least 1 replicate");
  PermutationTestResult result;
  result.replicates = replicates;
  result.seed = seed;
  std::tie(result.statistic, result.p_global) =
      permuted_fp(curves.rows, curves.grid, curves.groups, replicates, seed);

  const GroupIndex index = index_groups(curves.groups);
  const std::uint64_t pair_base = derive_seed(seed, 0xA11CEULL);
  const int g = static_cast<int>(index.labels.size());
  int q = 0;
  for (int u = 0; u < g; ++u) {
    for (int v = u + 1; v < g; ++v, ++q) {
      std::vector<int> idx = index.members[u];
      idx.insert(idx.end(), index.members[v].begin(), index.members[v].end());
      const Eigen::MatrixXd pair_rows = rows_subset(curves.rows, idx);
      std::vector<std::string> pair_labels;
      pair_labels.reserve(idx.size());
      for (int i : idx) pair_labels.push_back(curves.groups[i]);
      PairResult pr;
      pr.group_u = index.labels[u];
      pr.group_v = index.labels[v];
      std::tie(pr.statistic, pr.p_value) =
          permuted_fp(pair_rows, curves.grid, pair_labels, replicates,
                      derive_seed(pair_base, static_cast<std::uint64_t>(q)));
      result.pairwise.push_back(std::move(pr));
    }
  }
  return result;
}

StandardizedCurves standardize_trajectories(const CurveMatrix& curves,
                                            const FpcaModel& full_model) {
  const int m = curves.grid.size();
  if (full_model.cov.rows() != m || full_model.grid.size() != m) {
    throw std::invalid_argument("model grid does not match curves");
  }
  Eigen::VectorXd sd(m);
  for (int i = 0; i < m; ++i) {
    const double var = full_model.cov(i, i);
    if (!(var > 0.0)) {
      throw std::runtime_error("nonpositive variance at grid point " + std::to_string(i));
    }
    sd(i) = std::sqrt(var);
  }

  StandardizedCurves out;
  out.curves = curves;
  const GroupIndex index = index_groups(curves.groups);
  for (std::size_t g = 0; g < index.members.size(); ++g) {
    const auto& members = index.members[g];
    Eigen::RowVectorXd group_mean = Eigen::RowVectorXd::Zero(m);
    for (int i : members) group_mean += curves.rows.row(i);
    group_mean /= static_cast<double>(members.size());
    for (int i : members) {
      out.curves.rows.row(i) =
          (curves.rows.row(i) - group_mean).cwiseQuotient(sd.transpose());
    }
  }
  return out;
}

double sqrt_distance(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2,
                     const TimeGrid& grid) {
  const int m = grid.size();
  if (s1.rows() != m || s1.cols() != m || s2.rows() != m || s2.cols() != m) {
    throw std::invalid_argument("matrix size does not match grid");
  }
  check_symmetric(s1);
  check_symmetric(s2);
  const Eigen::MatrixXd diff = matrix_sqrt_psd(s1) - matrix_sqrt_psd(s2);
  double total = 0.0;
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      total += grid.weights(a) * grid.weights(b) * diff(a, b) * diff(a, b);
    }
  }
  return std::sqrt(total);
}

PermutationTestResult covariance_permutation_test(const StandardizedCurves& standardized,
                                                  int replicates, std::uint64_t seed) {
  if (replicates < 1) throw std::invalid_argument("need at least 1 replicate");
  const CurveMatrix& curves = standardized.curves;
  const GroupIndex index = index_groups(curves.groups);
  const int g = static_cast<int>(index.labels.size());
  if (g < 2) throw std::invalid_argument("need at least 2 groups");
  for (const auto& members : index.members) {
    if (members.size() < 2) throw std::invalid_argument("need at least 2 subjects per group");
  }

  const int n = static_cast<int>(curves.rows.rows());
  struct Pair {
    int u;
    int v;
    std::vector<int> pooled;
    std::vector<char> mask;
    int n_u;
    double observed;
    std::vector<double> permuted;
  };
  std::vector<Pair> pairs;
  for (int u = 0; u < g; ++u) {
    for (int v = u + 1; v < g; ++v) {
      Pair p;
      p.u = u;
      p.v = v;
      p.pooled = index.members[u];
      p.pooled.insert(p.pooled.end(), index.members[v].begin(), index.members[v].end());
      p.mask.assign(n, 0);
      for (int i : p.pooled) p.mask[i] = 1;
      p.n_u = static_cast<int>(index.members[u].size());
      const Eigen::MatrixXd cov_u =
          sample_covariance(rows_subset(curves.rows, index.members[u]));
      const Eigen::MatrixXd cov_v =
          sample_covariance(rows_subset(curves.rows, index.members[v]));
      p.observed = sqrt_distance(cov_u, cov_v, curves.grid);
      p.permuted.reserve(replicates);
      pairs.push_back(std::move(p));
    }
  }

  // One global shuffle per replicate; each pair reads off the suborder of its
  // own pooled rows, so the pairwise relabelings stay coupled within a
  // replicate while each remains uniform over its pair.
  std::vector<int> order(n);
  std::vector<int> sub;
  for (int r = 0; r < replicates; ++r) {
    for (int i = 0; i < n; ++i) order[i] = i;
    auto rng = make_rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    std::shuffle(order.begin(), order.end(), rng);
    for (auto& p : pairs) {
      sub.clear();
      for (int i : order) {
        if (p.mask[i]) sub.push_back(i);
      }
      const std::vector<int> left(sub.begin(), sub.begin() + p.n_u);
      const std::vector<int> right(sub.begin() + p.n_u, sub.end());
      const Eigen::MatrixXd cov_l = sample_covariance(rows_subset(curves.rows, left));
      const Eigen::MatrixXd cov_r = sample_covariance(rows_subset(curves.rows, right));
      p.permuted.push_back(sqrt_distance(cov_l, cov_r, curves.grid));
    }
  }

  PermutationTestResult result;
  result.replicates = replicates;
  result.seed = seed;

  // Partial p-values: each pair's observed and per-replicate statistics are
  // ranked against the same permutation distribution, then combined with
  // max-T over 1 - p.
  std::vector<std::vector<double>> sorted(pairs.size());
  std::vector<double> observed_p(pairs.size());
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    sorted[q] = pairs[q].permuted;
    std::sort(sorted[q].begin(), sorted[q].end());
    const auto count_ge = [&](double v) {
      return static_cast<int>(sorted[q].end() -
                              std::lower_bound(sorted[q].begin(), sorted[q].end(), v));
    };
    observed_p[q] = add_one_p(count_ge(pairs[q].observed), replicates);
    PairResult pr;
    pr.group_u = index.labels[pairs[q].u];
    pr.group_v = index.labels[pairs[q].v];
    pr.statistic = pairs[q].observed;
    pr.p_value = observed_p[q];
    result.pairwise.push_back(std::move(pr));
  }

  double t_observed = 0.0;
  for (double p : observed_p) t_observed = std::max(t_observed, 1.0 - p);
  int count = 0;
  for (int r = 0; r < replicates; ++r) {
    double t_r = 0.0;
    for (std::size_t q = 0; q < pairs.size(); ++q) {
      const auto& s = sorted[q];
      const int ge = static_cast<int>(
          s.end() - std::lower_bound(s.begin(), s.end(), pairs[q].permuted[r]));
      t_r = std::max(t_r, 1.0 - add_one_p(ge, replicates));
    }
    if (t_r >= t_observed) ++count;
  }
  result.statistic = t_observed;
  result.p_global = add_one_p(count, replicates);
  return result;
}

}  // namespace fpca
