#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fpca/evaluate.hpp"
#include "fpca/inference.hpp"
#include "fpca/io.hpp"
#include "fpca/pace.hpp"
#include "fpca/simulate.hpp"

namespace {

struct Options {
  std::string input;
  std::string output;
  std::string model_path;
  std::string spec_path;
  std::string group_col = "group";
  int grid_points = 51;
  double fve = 0.95;
  int max_components = 20;
  double bandwidth_mean = 0.0;  // 0 = auto
  double bandwidth_cov = 0.0;
  int permutations = 1000;
  int folds = 5;
  int repeats = 100;
  std::uint64_t seed = 12345;
};

fpca::FitConfig make_config(const Options& opt) {
  fpca::FitConfig config;
  config.grid_points = opt.grid_points;
  config.fve_threshold = opt.fve;
  config.max_components = opt.max_components;
  if (opt.bandwidth_mean > 0.0) {
    config.bandwidth_mean = fpca::Bandwidth::fixed(opt.bandwidth_mean);
  }
  if (opt.bandwidth_cov > 0.0) {
    config.bandwidth_cov = fpca::Bandwidth::fixed(opt.bandwidth_cov);
  }
  config.bandwidth_seed = opt.seed;
  return config;
}

std::string bandwidth_label(double flag) {
  return flag > 0.0 ? fpca::format_double(flag) : std::string("auto");
}

void print_config(const std::string& command, const Options& opt,
                  const std::vector<std::string>& extra) {
  std::ostringstream line;
  line << "config: command=" << command << " grid_points=" << opt.grid_points
       << " fve=" << fpca::format_double(opt.fve)
       << " max_components=" << opt.max_components
       << " bandwidth_mean=" << bandwidth_label(opt.bandwidth_mean)
       << " bandwidth_cov=" << bandwidth_label(opt.bandwidth_cov)
       << " group_col=" << opt.group_col << " seed=" << opt.seed;
  for (const auto& e : extra) line << " " << e;
  std::cerr << line.str() << "\n";
}

// model.json -> model; model.json + "_scores.csv" suffix handling
std::string output_stem(const std::string& path) {
  const std::string suffix = ".json";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return path.substr(0, path.size() - suffix.size());
  }
  return path;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void require_groups(const std::vector<fpca::LongitudinalSample>& samples) {
  std::set<std::string> labels;
  for (const auto& s : samples) labels.insert(s.group);
  if (labels.size() < 2) throw std::runtime_error("need at least 2 groups");
}

fpca::ShapeFn parse_shape(const nlohmann::json& j, double t_min, double t_max) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "legendre") {
    return fpca::legendre_shape(j.at("degree").get<int>(), t_min, t_max);
  }
  if (kind == "fourier") {
    return fpca::fourier_sine_shape(j.at("k").get<int>(), t_min, t_max);
  }
  if (kind == "tabulated") {
    return fpca::tabulated_shape(j.at("times").get<std::vector<double>>(),
                                 j.at("values").get<std::vector<double>>());
  }
  throw std::runtime_error("unknown shape kind: " + kind);
}

fpca::ShapeFn parse_mean(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    const double intercept = j.at("intercept").get<double>();
    const double slope = j.at("slope").get<double>();
    return [=](double t) { return intercept + slope * t; };
  }
  if (kind == "tabulated") {
    return fpca::tabulated_shape(j.at("times").get<std::vector<double>>(),
                                 j.at("values").get<std::vector<double>>());
  }
  throw std::runtime_error("unknown mean kind: " + kind);
}

fpca::KlSpec parse_kl_spec(const nlohmann::json& j) {
  fpca::KlSpec spec;
  const auto domain = j.at("domain").get<std::vector<double>>();
  if (domain.size() != 2) throw std::runtime_error("domain must be [t_min, t_max]");
  spec.t_min = domain[0];
  spec.t_max = domain[1];
  spec.mean = parse_mean(j.at("mean"));
  spec.sigma2 = j.at("sigma2").get<double>();
  if (j.contains("obs_min")) spec.obs_min = j.at("obs_min").get<int>();
  if (j.contains("obs_max")) spec.obs_max = j.at("obs_max").get<int>();
  spec.components.clear();
  for (const auto& c : j.at("components")) {
    spec.components.push_back(
        {c.at("eigenvalue").get<double>(), parse_shape(c.at("shape"), spec.t_min, spec.t_max)});
  }
  return spec;
}

int run_fit(const Options& opt) {
  print_config("fit", opt, {"input=" + opt.input, "output=" + opt.output});
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  const fpca::FpcaModel model = fpca::fit(samples, make_config(opt));
  fpca::write_file_atomic(opt.output, fpca::model_to_json(model));
  const std::string stem = output_stem(opt.output);
  fpca::write_file_atomic(stem + "_mean.csv", fpca::mean_to_csv(model));
  fpca::write_file_atomic(stem + "_eigenfunctions.csv", fpca::eigenfunctions_to_csv(model));
  fpca::write_file_atomic(stem + "_scores.csv", fpca::scores_to_csv(model));
  fpca::write_file_atomic(stem + "_fve.csv", fpca::fve_to_csv(model));
  std::cerr << "fit: n=" << samples.size() << " k=" << model.k
            << " sigma2=" << fpca::format_double(model.sigma2) << "\n";
  return 0;
}

int run_predict(const Options& opt) {
  print_config("predict", opt,
               {"model=" + opt.model_path, "input=" + opt.input, "output=" + opt.output});
  const fpca::FpcaModel model = fpca::model_from_json(read_file(opt.model_path));
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  fpca::CurveMatrix curves;
  curves.grid = model.grid;
  curves.rows.resize(static_cast<int>(samples.size()), model.grid.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    curves.rows.row(static_cast<int>(i)) =
        fpca::predict_trajectory(model, samples[i]).transpose();
    curves.subject_ids.push_back(samples[i].subject_id);
    curves.groups.push_back(samples[i].group);
  }
  fpca::write_file_atomic(opt.output, fpca::curves_to_csv(curves));
  return 0;
}

int run_test_mean(const Options& opt) {
  print_config("test-mean", opt,
               {"permutations=" + std::to_string(opt.permutations), "input=" + opt.input,
                "output=" + opt.output});
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  require_groups(samples);
  const fpca::FpcaModel model = fpca::fit(samples, make_config(opt));
  const auto result =
      fpca::mean_permutation_test(fpca::fitted_curves(model), opt.permutations, opt.seed);
  fpca::write_file_atomic(opt.output, fpca::test_result_to_json(result, "mean"));
  std::cerr << "test-mean: statistic=" << fpca::format_double(result.statistic)
            << " p_global=" << fpca::format_double(result.p_global) << "\n";
  return 0;
}

int run_test_cov(const Options& opt) {
  print_config("test-cov", opt,
               {"permutations=" + std::to_string(opt.permutations), "input=" + opt.input,
                "output=" + opt.output});
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  require_groups(samples);
  const fpca::FpcaModel model = fpca::fit(samples, make_config(opt));
  const auto standardized =
      fpca::standardize_trajectories(fpca::fitted_curves(model), model);
  const auto result =
      fpca::covariance_permutation_test(standardized, opt.permutations, opt.seed);
  fpca::write_file_atomic(opt.output, fpca::test_result_to_json(result, "covariance"));
  std::cerr << "test-cov: statistic=" << fpca::format_double(result.statistic)
            << " p_global=" << fpca::format_double(result.p_global) << "\n";
  return 0;
}

int run_gof(const Options& opt) {
  print_config("gof", opt,
               {"repeats=" + std::to_string(opt.repeats),
                "folds=" + std::to_string(opt.folds), "input=" + opt.input,
                "output=" + opt.output});
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  const auto result =
      fpca::gof_compare(samples, opt.repeats, opt.folds, opt.seed, make_config(opt));
  fpca::write_file_atomic(opt.output, fpca::gof_to_json(result));
  fpca::write_file_atomic(output_stem(opt.output) + ".csv", fpca::gof_to_csv(result));
  return 0;
}

int run_future_acc(const Options& opt) {
  print_config("future-acc", opt, {"input=" + opt.input, "output=" + opt.output});
  const auto samples = fpca::ingest_csv(opt.input, opt.group_col);
  const auto result = fpca::future_prediction_rmse(samples, make_config(opt));
  fpca::write_file_atomic(opt.output, fpca::future_to_json(result));
  fpca::write_file_atomic(output_stem(opt.output) + ".csv", fpca::future_to_csv(result));
  std::cerr << "future-acc: evaluated=" << result.evaluated_subjects
            << " excluded=" << result.excluded_subjects << "\n";
  return 0;
}

int run_simulate(const Options& opt, bool seed_given) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(opt.spec_path));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("spec json: ") + e.what());
  }
  std::uint64_t seed = opt.seed;
  if (!seed_given && j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();

  std::vector<fpca::GroupSpec> groups;
  for (const auto& g : j.at("groups")) {
    fpca::GroupSpec spec;
    spec.label = g.contains("label") ? g.at("label").get<std::string>() : "";
    spec.n = g.at("n").get<int>();
    spec.spec = parse_kl_spec(g);
    groups.push_back(std::move(spec));
  }
  Options logged = opt;
  logged.seed = seed;
  print_config("simulate", logged, {"spec=" + opt.spec_path, "output=" + opt.output});

  fpca::SimulatedCohort cohort;
  if (groups.size() == 1 && groups[0].label.empty()) {
    cohort = fpca::simulate_cohort(groups[0].spec, groups[0].n, seed);
  } else {
    cohort = fpca::simulate_groups(groups, seed);
  }
  fpca::write_file_atomic(opt.output, fpca::cohort_to_csv(cohort.samples));
  std::cerr << "simulate: subjects=" << cohort.samples.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Functional principal components for sparse longitudinal trajectories"};
  app.require_subcommand(1);
  Options opt;

  const auto add_fit_options = [&](CLI::App* cmd, bool with_input = true) {
    if (with_input) cmd->add_option("--input", opt.input, "input CSV")->required();
    cmd->add_option("--output", opt.output, "output path")->required();
    cmd->add_option("--grid-points", opt.grid_points, "grid size");
    cmd->add_option("--fve", opt.fve, "variance threshold for K");
    cmd->add_option("--max-components", opt.max_components, "cap on K");
    cmd->add_option("--bandwidth-mean", opt.bandwidth_mean, "fixed mean bandwidth (0 = auto)");
    cmd->add_option("--bandwidth-cov", opt.bandwidth_cov,
                    "fixed covariance bandwidth (0 = auto)");
    cmd->add_option("--seed", opt.seed, "seed");
    cmd->add_option("--group-col", opt.group_col, "group column name");
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model and write it as JSON");
  add_fit_options(fit_cmd);

  CLI::App* predict_cmd =
      app.add_subcommand("predict", "predict trajectories for new subjects");
  predict_cmd->add_option("--model", opt.model_path, "model JSON")->required();
  predict_cmd->add_option("--input", opt.input, "input CSV")->required();
  predict_cmd->add_option("--output", opt.output, "output CSV")->required();
  predict_cmd->add_option("--group-col", opt.group_col, "group column name");

  CLI::App* mean_cmd = app.add_subcommand("test-mean", "permutation test for mean curves");
  add_fit_options(mean_cmd);
  mean_cmd->add_option("--permutations", opt.permutations, "permutation replicates");

  CLI::App* cov_cmd =
      app.add_subcommand("test-cov", "permutation test for correlation structure");
  add_fit_options(cov_cmd);
  cov_cmd->add_option("--permutations", opt.permutations, "permutation replicates");

  CLI::App* gof_cmd =
      app.add_subcommand("gof", "cross-validated full vs group-specific comparison");
  add_fit_options(gof_cmd);
  gof_cmd->add_option("--repeats", opt.repeats, "fold redraws");
  gof_cmd->add_option("--folds", opt.folds, "folds");

  CLI::App* future_cmd =
      app.add_subcommand("future-acc", "held-out latest-observation accuracy");
  add_fit_options(future_cmd);

  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate a cohort CSV from a spec");
  sim_cmd->add_option("--spec", opt.spec_path, "spec JSON")->required();
  sim_cmd->add_option("--output", opt.output, "output CSV")->required();
  CLI::Option* sim_seed = sim_cmd->add_option("--seed", opt.seed, "seed (overrides spec)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return run_fit(opt);
    if (predict_cmd->parsed()) return run_predict(opt);
    if (mean_cmd->parsed()) return run_test_mean(opt);
    if (cov_cmd->parsed()) return run_test_cov(opt);
    if (gof_cmd->parsed()) return run_gof(opt);
    if (future_cmd->parsed()) return run_future_acc(opt);
    if (sim_cmd->parsed()) return run_simulate(opt, sim_seed->count() > 0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
