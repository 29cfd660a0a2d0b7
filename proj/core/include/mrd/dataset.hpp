#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace mrd {

// A regression dataset: feature matrix X (rows = samples), response y, and an
// optional ground-truth set of non-null feature indices (0-based internally;
// file formats use 1-based indices).
struct Dataset {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::optional<std::vector<int>> truth;

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }
  bool has_response() const { return y.size() == x.rows() && y.size() > 0; }
};

// Throws ShapeError / std::invalid_argument when the basic invariants fail.
void validate(const Dataset& data);

// Per-column affine transform (population std convention, divide by n).
struct StandardizationParams {
  Eigen::VectorXd feature_means;
  Eigen::VectorXd feature_stds;
  double y_mean = 0.0;
  double y_std = 1.0;
};

// Centers and scales every column and the response to mean 0, std 1.
// Throws ConstantColumnError(j) when column j (or, with j = -1, the response)
// has zero variance.
std::pair<Dataset, StandardizationParams> standardize(const Dataset& data);

// Applies previously estimated parameters (e.g. train-split statistics
// applied to the test split).
Dataset apply_standardization(const Dataset& data,
                              const StandardizationParams& params);
Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& x,
                                      const StandardizationParams& params);

// Exact inverse of apply_standardization.
Dataset unstandardize(const Dataset& data, const StandardizationParams& params);

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

// Seeded uniform-permutation split; train gets round(train_fraction * n)
// samples.  Throws InvalidFractionError when either side would be empty.
SplitIndices split_train_test(int n, double train_fraction, std::uint64_t seed);

struct FoldAssignment {
  std::vector<int> fold_of;  // values in [0, folds)
  int folds = 0;

  std::vector<int> members(int fold) const;
  std::vector<int> complement(int fold) const;
};

// Balanced random partition into `folds` folds (sizes differ by at most 1);
// deterministic given the seed.  Throws InvalidKError unless 2 <= folds <= n.
FoldAssignment kfold_indices(int n, int folds, std::uint64_t seed);

Dataset select_rows(const Dataset& data, const std::vector<int>& rows);

}  // namespace mrd
