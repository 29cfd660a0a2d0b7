#include "doctest.h"

#include <Eigen/Dense>
#include <cmath>
#include <set>

#include "mrd/dataset.hpp"
#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

namespace {

Dataset tiny_dataset() {
  Dataset data;
  data.x.resize(3, 2);
  data.x << 1.0, -1.2247448713915890,
            2.0, 0.0,
            3.0, 1.2247448713915890;
  data.y.resize(3);
  data.y << 2.0, 4.0, 6.0;
  return data;
}

// Direct mean/std oracle with the population (divide by n) convention.
std::pair<double, double> oracle_mean_std(const Eigen::VectorXd& v) {
  double mean = 0.0;
  for (int i = 0; i < v.size(); ++i) mean += v[i];
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (int i = 0; i < v.size(); ++i) var += (v[i] - mean) * (v[i] - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

}  // namespace

TEST_CASE("standardize matches a direct mean/std oracle") {
  Dataset data = tiny_dataset();
  auto [std_data, params] = standardize(data);

  auto [m0, s0] = oracle_mean_std(data.x.col(0));
  CHECK(params.feature_means[0] == doctest::Approx(m0));
  CHECK(params.feature_stds[0] == doctest::Approx(s0));

  // Column [1,2,3] standardizes to (-1.2247, 0, 1.2247).
  CHECK(std_data.x(0, 0) == doctest::Approx(-1.2247448713915890));
  CHECK(std_data.x(1, 0) == doctest::Approx(0.0));
  CHECK(std_data.x(2, 0) == doctest::Approx(1.2247448713915890));
  // Y = [2,4,6] likewise.
  CHECK(std_data.y[0] == doctest::Approx(-1.2247448713915890));
  CHECK(std_data.y[2] == doctest::Approx(1.2247448713915890));
}

TEST_CASE("an already standardized column comes back unchanged") {
  Dataset data = tiny_dataset();
  auto [std_data, params] = standardize(data);
  CHECK(params.feature_means[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(params.feature_stds[1] == doctest::Approx(1.0));
  for (int i = 0; i < 3; ++i) {
    CHECK(std_data.x(i, 1) == doctest::Approx(data.x(i, 1)).epsilon(1e-12));
  }
}

TEST_CASE("constant column raises ConstantColumnError with the column id") {
  Dataset data = tiny_dataset();
  data.x.col(1).setConstant(3.0);
  try {
    standardize(data);
    FAIL("expected ConstantColumnError");
  } catch (const ConstantColumnError& e) {
    CHECK(e.column() == 1);
  }
}

TEST_CASE("standardized output has mean 0 and std 1 within 1e-10") {
  Rng rng(5);
  Dataset data;
  data.x.resize(40, 6);
  data.y.resize(40);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 6; ++j) {
      data.x(i, j) = 3.0 * rng.normal() + j;
    }
    data.y[i] = rng.normal() - 2.0;
  }
  auto [std_data, params] = standardize(data);
  for (int j = 0; j < 6; ++j) {
    auto [m, s] = oracle_mean_std(std_data.x.col(j));
    CHECK(std::abs(m) < 1e-10);
    CHECK(std::abs(s - 1.0) < 1e-10);
  }
  auto [my, sy] = oracle_mean_std(std_data.y);
  CHECK(std::abs(my) < 1e-10);
  CHECK(std::abs(sy - 1.0) < 1e-10);

  // Round trip.
  Dataset back = unstandardize(std_data, params);
  CHECK((back.x - data.x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.y - data.y).cwiseAbs().maxCoeff() < 1e-10);

  // apply_standardization with the estimated params reproduces std_data.
  Dataset applied = apply_standardization(data, params);
  CHECK((applied.x - std_data.x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("split_train_test sizes and determinism") {
  SplitIndices s = split_train_test(800, 0.5, 17);
  CHECK(s.train.size() == 400);
  CHECK(s.test.size() == 400);

  SplitIndices again = split_train_test(800, 0.5, 17);
  CHECK(s.train == again.train);
  CHECK(s.test == again.test);

  SplitIndices other = split_train_test(800, 0.5, 18);
  CHECK(s.train != other.train);

  SplitIndices minimal = split_train_test(2, 0.5, 1);
  CHECK(minimal.train.size() == 1);
  CHECK(minimal.test.size() == 1);
}

TEST_CASE("split_train_test rejects empty sides") {
  CHECK_THROWS_AS(split_train_test(3, 0.01, 0), InvalidFractionError);
  CHECK_THROWS_AS(split_train_test(3, 0.999, 0), InvalidFractionError);
  CHECK_THROWS_AS(split_train_test(10, 0.0, 0), InvalidFractionError);
  CHECK_THROWS_AS(split_train_test(10, 1.0, 0), InvalidFractionError);
}

TEST_CASE("split partitions the index range exactly") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 37;
    SplitIndices s = split_train_test(n, 0.3, seed);
    std::set<int> all(s.train.begin(), s.train.end());
    all.insert(s.test.begin(), s.test.end());
    CHECK(all.size() == static_cast<std::size_t>(n));
    CHECK(*all.begin() == 0);
    CHECK(*all.rbegin() == n - 1);
  }
}

TEST_CASE("kfold balance and partition") {
  FoldAssignment folds = kfold_indices(80, 8, 9);
  for (int f = 0; f < 8; ++f) {
    CHECK(folds.members(f).size() == 10);
  }

  FoldAssignment loo = kfold_indices(5, 5, 2);
  for (int f = 0; f < 5; ++f) {
    CHECK(loo.members(f).size() == 1);
  }

  CHECK_THROWS_AS(kfold_indices(10, 1, 0), InvalidKError);
  CHECK_THROWS_AS(kfold_indices(10, 11, 0), InvalidKError);

  // Balance: max fold size - min fold size <= 1 over assorted (n, K).
  Rng rng(31);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 2 + rng.uniform_int(60);
    const int k = 2 + rng.uniform_int(std::max(1, n - 2));
    if (k > n) continue;
    FoldAssignment fa = kfold_indices(n, k, rep);
    std::size_t lo = static_cast<std::size_t>(n);
    std::size_t hi = 0;
    std::set<int> all;
    for (int f = 0; f < k; ++f) {
      auto m = fa.members(f);
      CHECK(!m.empty());
      lo = std::min(lo, m.size());
      hi = std::max(hi, m.size());
      all.insert(m.begin(), m.end());
    }
    CHECK(hi - lo <= 1);
    CHECK(all.size() == static_cast<std::size_t>(n));
  }

  FoldAssignment again = kfold_indices(80, 8, 9);
  CHECK(folds.fold_of == again.fold_of);
}

TEST_CASE("select_rows keeps rows aligned") {
  Dataset data = tiny_dataset();
  Dataset sub = select_rows(data, {2, 0});
  CHECK(sub.n() == 2);
  CHECK(sub.x(0, 0) == doctest::Approx(3.0));
  CHECK(sub.y[0] == doctest::Approx(6.0));
  CHECK(sub.x(1, 0) == doctest::Approx(1.0));
  CHECK(sub.y[1] == doctest::Approx(2.0));
}

TEST_CASE("validate rejects inconsistent shapes") {
  Dataset bad = tiny_dataset();
  bad.y.resize(2);
  CHECK_THROWS_AS(validate(bad), ShapeError);

  Dataset truth_bad = tiny_dataset();
  truth_bad.truth = std::vector<int>{5};
  CHECK_THROWS_AS(validate(truth_bad), ShapeError);
}
