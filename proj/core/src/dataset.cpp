#include "mrd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

void validate(const Dataset& data) {
  if (data.n() < 2) {
    throw ShapeError("dataset needs at least 2 samples");
  }
  if (data.d() < 1) {
    throw ShapeError("dataset needs at least 1 feature");
  }
  if (data.y.size() != data.x.rows()) {
    throw ShapeError("response length " + std::to_string(data.y.size()) +
                     " does not match sample count " +
                     std::to_string(data.n()));
  }
  if (data.truth) {
    for (int j : *data.truth) {
      if (j < 0 || j >= data.d()) {
        throw ShapeError("truth index " + std::to_string(j) + " out of range");
      }
    }
  }
}

namespace {

// Population convention: divide by n, matching the unit-variance contract.
std::pair<double, double> mean_and_std(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const double var = (v.array() - mean).square().sum() /
                     static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

bool effectively_constant(double sd, double mean) {
  return sd < 1e-12 * std::max(1.0, std::abs(mean));
}

}  // namespace

std::pair<Dataset, StandardizationParams> standardize(const Dataset& data) {
  validate(data);
  const int n = data.n();
  const int d = data.d();

  StandardizationParams params;
  params.feature_means.resize(d);
  params.feature_stds.resize(d);

  Dataset out = data;
  for (int j = 0; j < d; ++j) {
    auto [mean, sd] = mean_and_std(data.x.col(j));
    if (effectively_constant(sd, mean)) {
      throw ConstantColumnError(j);
    }
    params.feature_means[j] = mean;
    params.feature_stds[j] = sd;
    out.x.col(j) = (data.x.col(j).array() - mean) / sd;
  }

  auto [y_mean, y_sd] = mean_and_std(data.y);
  if (effectively_constant(y_sd, y_mean)) {
    throw ConstantColumnError(-1);
  }
  params.y_mean = y_mean;
  params.y_std = y_sd;
  out.y = (data.y.array() - y_mean) / y_sd;
  (void)n;
  return {std::move(out), std::move(params)};
}

Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& x,
                                      const StandardizationParams& params) {
  if (x.cols() != params.feature_means.size()) {
    throw ShapeError("column count does not match standardization params");
  }
  Eigen::MatrixXd out = x;
  out.rowwise() -= params.feature_means.transpose();
  out.array().rowwise() /= params.feature_stds.transpose().array();
  return out;
}

Dataset apply_standardization(const Dataset& data,
                              const StandardizationParams& params) {
  Dataset out = data;
  out.x = apply_standardization(data.x, params);
  if (data.has_response()) {
    out.y = (data.y.array() - params.y_mean) / params.y_std;
  }
  return out;
}

Dataset unstandardize(const Dataset& data, const StandardizationParams& params) {
  if (data.x.cols() != params.feature_means.size()) {
    throw ShapeError("column count does not match standardization params");
  }
  Dataset out = data;
  out.x.array().rowwise() *= params.feature_stds.transpose().array();
  out.x.rowwise() += params.feature_means.transpose();
  if (data.has_response()) {
    out.y = data.y.array() * params.y_std + params.y_mean;
  }
  return out;
}

SplitIndices split_train_test(int n, double train_fraction,
                              std::uint64_t seed) {
  if (n < 2) {
    throw InvalidFractionError("need at least 2 samples to split");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidFractionError("train_fraction must lie in (0, 1)");
  }
  const int n_train = static_cast<int>(
      std::llround(train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n - n_train < 1) {
    throw InvalidFractionError("split would leave an empty side");
  }

  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.test.assign(perm.begin() + n_train, perm.end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::vector<int> FoldAssignment::members(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(fold_of.size()); ++i) {
    if (fold_of[static_cast<std::size_t>(i)] == fold) {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<int> FoldAssignment::complement(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(fold_of.size()); ++i) {
    if (fold_of[static_cast<std::size_t>(i)] != fold) {
      out.push_back(i);
    }
  }
  return out;
}

FoldAssignment kfold_indices(int n, int folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) {
    throw InvalidKError("fold count must satisfy 2 <= K <= n");
  }
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(perm);

  FoldAssignment out;
  out.folds = folds;
  out.fold_of.assign(static_cast<std::size_t>(n), 0);
  // Dealing the shuffled samples round-robin keeps fold sizes within 1.
  for (int pos = 0; pos < n; ++pos) {
    out.fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] =
        pos % folds;
  }
  return out;
}

Dataset select_rows(const Dataset& data, const std::vector<int>& rows) {
  Dataset out;
  out.x.resize(static_cast<Eigen::Index>(rows.size()), data.x.cols());
  const bool with_y = data.has_response();
  if (with_y) {
    out.y.resize(static_cast<Eigen::Index>(rows.size()));
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= data.n()) {
      throw ShapeError("row index out of range");
    }
    out.x.row(static_cast<Eigen::Index>(i)) = data.x.row(r);
    if (with_y) {
      out.y[static_cast<Eigen::Index>(i)] = data.y[r];
    }
  }
  out.truth = data.truth;
  return out;
}

}  // namespace mrd
