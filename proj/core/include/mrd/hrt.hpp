#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mrd/conditional.hpp"
#include "mrd/dataset.hpp"
#include "mrd/model.hpp"

namespace mrd {

struct HrtConfig {
  int dummies = 1000;                            // K
  std::optional<std::vector<int>> feature_subset;  // default: all features
  std::uint64_t seed = 0;
};

struct TestReport {
  std::vector<int> features;   // tested features (0-based)
  Eigen::VectorXd pvalues;     // aligned with features
  double t_star = 0.0;         // mean statistic on the original test data
  Eigen::MatrixXd dummy_stats; // |features| x K
  Eigen::VectorXd rd_hat;      // mean dummy statistic - t_star, per feature
};

// (y - f(x))^2 for a single sample.
double squared_error_stat(const Model& model, const Eigen::RowVectorXd& x,
                          double y);

// Holdout randomization test: for each tested feature j, resamples column j
// from the law K times (the model is treated as fixed) and computes
//   p_j = (1 + #{k : t_star >= t_tilde_j^(k)}) / (K + 1).
// Replicate streams are derived as derive_seed(seed, "hrt-dummy", {j, k}),
// which makes per-feature and per-replicate work order-independent.
TestReport hrt_pvalues(const Model& model, const Dataset& test,
                       const ConditionalLaw& law, const HrtConfig& cfg);

// Empirical risk discrepancy per feature (0 for features the model ignores):
// the mean over dummies and samples of the swapped squared error minus the
// original mean squared error.
Eigen::VectorXd empirical_rd(const Model& model, const Dataset& test,
                             const ConditionalLaw& law, int dummies,
                             std::uint64_t seed);

using FitFn = std::function<std::unique_ptr<Model>(const Dataset& train)>;

// Cross-validation HRT: fits one model per fold complement so every sample
// is scored by a model that never saw it; t_star pools the per-sample
// held-out statistics over all n samples, and every dummy replicate resamples
// column j once per sample.
TestReport cv_hrt_pvalues(const Dataset& data, const FitFn& fit_fn,
                          const ConditionalLaw& law, int folds, int dummies,
                          std::uint64_t seed);

struct SingleTestResult {
  double pvalue = 1.0;
  bool reject = false;
};

// Tests H_{0,j} alone at level alpha (reject iff p <= alpha).
SingleTestResult single_hypothesis_test(const Model& model, const Dataset& test,
                                        const ConditionalLaw& law, int j,
                                        int dummies, double alpha,
                                        std::uint64_t seed);

// CSV with header feature,pvalue,t_star,rd_hat (1-based feature ids).  When
// dummy_dump_path is non-empty, also writes feature,k,stat rows for Q-Q
// analysis of the dummy statistics.
void write_test_report_csv(const std::string& path, const TestReport& report,
                           const std::string& dummy_dump_path = "");

// Reads feature (1-based) and pvalue columns back from a report CSV.
std::pair<std::vector<int>, Eigen::VectorXd> read_pvalues_csv(
    const std::string& path);

}  // namespace mrd
