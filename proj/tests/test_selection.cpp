#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "mrd/rng.hpp"
#include "mrd/selection.hpp"
#include "support/oracles.hpp"

using namespace mrd;

TEST_CASE("bh rejects nothing when every p-value is 1") {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(6);
  SelectionResult sel = bh_select(p, 0.2);
  CHECK(sel.rejected.empty());
}

TEST_CASE("bh on the worked four-value example") {
  Eigen::VectorXd p(4);
  p << 0.01, 0.02, 0.30, 0.90;
  SelectionResult sel = bh_select(p, 0.1);
  // Thresholds 0.025, 0.05, 0.075, 0.1; the largest admissible k is 2.
  CHECK(sel.rejected == std::vector<int>{0, 1});
  CHECK(sel.rejected == oracles::brute_force_bh(p, 0.1));
}

TEST_CASE("single p-value is tested at level q") {
  Eigen::VectorXd p(1);
  p << 0.05;
  CHECK(bh_select(p, 0.1).rejected == std::vector<int>{0});
  CHECK(by_select(p, 0.1).rejected == std::vector<int>{0});  // H_1 = 1
  p << 0.15;
  CHECK(bh_select(p, 0.1).rejected.empty());
}

TEST_CASE("by applies the harmonic correction") {
  Eigen::VectorXd p(4);
  p << 0.01, 0.02, 0.30, 0.90;
  SelectionResult sel = by_select(p, 0.1);
  // Effective level 0.1 / (1 + 1/2 + 1/3 + 1/4) = 0.048; thresholds
  // 0.012, 0.024, 0.036, 0.048.  p_(2) = 0.02 <= 0.024, so k0 = 2 and the
  // two smallest p-values are rejected (brute force agrees).
  CHECK(sel.rejected == oracles::brute_force_by(p, 0.1));
  CHECK(sel.rejected == std::vector<int>{0, 1});
}

TEST_CASE("bh and by match brute force on random vectors; by within bh") {
  Rng rng(7);
  for (int rep = 0; rep < 500; ++rep) {
    const int d = 1 + rng.uniform_int(50);
    Eigen::VectorXd p(d);
    for (int j = 0; j < d; ++j) {
      // Mixture of small and uniform p-values exercises all regimes.
      p[j] = rng.uniform() < 0.3 ? 0.05 * rng.uniform() : rng.uniform();
    }
    const double q = 0.05 + 0.3 * rng.uniform();
    SelectionResult bh = bh_select(p, q);
    SelectionResult by = by_select(p, q);
    CHECK(bh.rejected == oracles::brute_force_bh(p, q));
    CHECK(by.rejected == oracles::brute_force_by(p, q));
    CHECK(std::includes(bh.rejected.begin(), bh.rejected.end(),
                        by.rejected.begin(), by.rejected.end()));
  }
}

TEST_CASE("bh is permutation invariant and monotone in the p-values") {
  Rng rng(11);
  for (int rep = 0; rep < 100; ++rep) {
    const int d = 2 + rng.uniform_int(20);
    Eigen::VectorXd p(d);
    for (int j = 0; j < d; ++j) {
      p[j] = rng.uniform();
    }
    const double q = 0.2;
    SelectionResult base = bh_select(p, q);

    // Permutation: same rejected features after relabeling.
    std::vector<int> perm(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) perm[static_cast<std::size_t>(j)] = j;
    rng.shuffle(perm);
    Eigen::VectorXd shuffled(d);
    for (int j = 0; j < d; ++j) {
      shuffled[perm[static_cast<std::size_t>(j)]] = p[j];
    }
    SelectionResult permuted = bh_select(shuffled, q);
    std::vector<int> mapped;
    for (int j : base.rejected) {
      mapped.push_back(perm[static_cast<std::size_t>(j)]);
    }
    std::sort(mapped.begin(), mapped.end());
    CHECK(permuted.rejected == mapped);

    // Monotone: lowering one p-value never shrinks the rejection set.
    Eigen::VectorXd lowered = p;
    const int target = rng.uniform_int(d);
    lowered[target] *= 0.5;
    SelectionResult more = bh_select(lowered, q);
    CHECK(more.rejected.size() >= base.rejected.size());
    for (int j : base.rejected) {
      if (j == target) continue;
      CHECK(std::find(more.rejected.begin(), more.rejected.end(), j) !=
            more.rejected.end());
    }
  }
}

TEST_CASE("tied p-values at the threshold share their fate") {
  Eigen::VectorXd p(4);
  p << 0.02, 0.02, 0.02, 0.9;
  SelectionResult sel = bh_select(p, 0.1);
  // k0 = 3 (0.02 <= 0.075); all three ties rejected together.
  CHECK(sel.rejected == std::vector<int>{0, 1, 2});
}

TEST_CASE("fdp and power follow the set-arithmetic definitions") {
  FdpPower empty = eval_fdp_power({}, {0, 1}, 5);
  CHECK(empty.fdp == doctest::Approx(0.0));
  CHECK(empty.power == doctest::Approx(0.0));

  FdpPower mixed = eval_fdp_power({0, 1, 2}, {0, 1}, 5);
  CHECK(mixed.fdp == doctest::Approx(1.0 / 3.0));
  CHECK(mixed.power == doctest::Approx(1.0));

  FdpPower no_truth = eval_fdp_power({2, 4}, {}, 5);
  CHECK(no_truth.fdp == doctest::Approx(1.0));
  CHECK(no_truth.power == doctest::Approx(0.0));  // empty-H1 convention

  // Random cases against a brute-force set intersection.
  Rng rng(13);
  for (int rep = 0; rep < 500; ++rep) {
    const int d = 3 + rng.uniform_int(30);
    const int s_size = rng.uniform_int(d + 1);
    const int h1_size = rng.uniform_int(d + 1);
    std::vector<int> selected = rng.sample_without_replacement(d, s_size);
    std::vector<int> nonnull = rng.sample_without_replacement(d, h1_size);
    FdpPower got = eval_fdp_power(selected, nonnull, d);

    int tp = 0;
    for (int a : selected) {
      for (int b : nonnull) {
        if (a == b) ++tp;
      }
    }
    const double fdp_expect =
        selected.empty()
            ? 0.0
            : static_cast<double>(static_cast<int>(selected.size()) - tp) /
                  static_cast<double>(selected.size());
    const double power_expect =
        nonnull.empty() ? 0.0
                        : static_cast<double>(tp) /
                              static_cast<double>(nonnull.size());
    CHECK(got.fdp == doctest::Approx(fdp_expect));
    CHECK(got.power == doctest::Approx(power_expect));
  }
}
