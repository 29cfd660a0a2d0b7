#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mrd/datagen.hpp"
#include "mrd/dataset.hpp"
#include "mrd/elastic_net.hpp"
#include "mrd/mlp.hpp"

namespace mrd {

// One predictive method in an experiment (base or risk-discrepancy variant).
struct MethodSpec {
  enum class Base { kLasso, kElasticNet, kMlp };

  Base base = Base::kLasso;
  bool mrd = false;
  std::string label;                 // unique within the config

  std::optional<double> alpha1;      // fixed L1 penalty; otherwise CV-tuned
  double alpha2 = 0.0;               // fixed L2 penalty (elastic net: 0.1)
  std::optional<double> lambda;      // fixed penalty weight; otherwise auto
  int cv_folds = 5;
  int cv_grid_size = 16;
  double cv_grid_min_ratio = 0.01;

  ElasticNetConfig admm;
  MlpConfig mlp;
  int subset_size = 0;               // 0 = auto (d linear, min(d,32) MLP)
};

struct ExperimentConfig {
  int spec_version = 1;

  // Data source: a synthetic design or a feature CSV (optionally with a
  // ground-truth sidecar).  With a CSV and a response spec, the response is
  // re-simulated per trial (semi-synthetic mode).
  std::optional<DesignSpec> design;
  std::optional<std::string> data_csv;
  std::optional<std::string> truth_file;
  std::optional<ResponseSpec> response;

  std::vector<MethodSpec> methods;

  enum class TestKind { kHrt, kCvHrt };
  TestKind test_kind = TestKind::kHrt;
  int dummies = 1000;
  int folds = 8;  // CV-HRT folds

  enum class LawKind { kTrue, kGaussianFit, kGmmFit };
  LawKind law_kind = LawKind::kTrue;
  int gmm_components = 3;

  enum class SelectionKind { kBh, kBy };
  SelectionKind selection = SelectionKind::kBh;
  double q = 0.2;

  int trials = 1;
  std::uint64_t base_seed = 0;
  double train_fraction = 0.5;
  std::string output_dir = "out";
  int workers = 1;
  bool rd_trajectory = false;
};

// Parses and validates a config document; throws ConfigError.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

struct TrialRecord {
  int trial = 0;
  std::string method;
  bool failed = false;
  std::string error;

  double rmse = 0.0;  // standardized response scale
  double t_star = 0.0;
  int num_rejected = 0;
  std::optional<double> fdp;
  std::optional<double> power;

  // Risk-discrepancy summary over the tested features (when truth is known).
  std::optional<double> rd_h1_q25, rd_h1_q50, rd_h1_q75, rd_h0_q75;

  // Per-feature results kept for report emission.
  std::vector<int> features;
  Eigen::VectorXd pvalues;
  Eigen::VectorXd rd_hat;
  std::vector<int> trial_nonnull;  // that trial's ground truth, if known
  bool truth_known = false;
  std::string pvalues_path;  // relative to the output directory
};

struct TrajectoryPoint {
  int iteration = 0;
  double h1_q25 = 0.0, h1_q50 = 0.0, h1_q75 = 0.0, h0_q75 = 0.0;
  int trials = 0;  // how many trials reached this iteration
};

struct ExperimentResult {
  std::vector<TrialRecord> records;  // trial-major, method order per trial
  std::map<std::string, std::vector<TrajectoryPoint>> trajectories;
  int failed_trials = 0;
};

// Runs all trials (possibly on several worker threads; outputs are
// byte-identical regardless of worker count) and writes the per-trial
// p-value CSVs into config.output_dir.  Per-trial errors are recorded, not
// thrown.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Writes trials.csv, summary.json, qq_data.csv and (when trajectories were
// collected) rd_trajectory.csv into output_dir.
void emit_reports(const ExperimentConfig& config, const ExperimentResult& result);

// Interpolating (type-7) quantile of an unsorted sample.
double quantile(std::vector<double> values, double p);

}  // namespace mrd
