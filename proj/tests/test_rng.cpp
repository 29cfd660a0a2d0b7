#include "doctest.h"

#include <cmath>
#include <set>
#include <vector>

#include "mrd/rng.hpp"

using namespace mrd;

TEST_CASE("derive_seed separates roles and indices") {
  const std::uint64_t base = 42;
  CHECK(derive_seed(base, "a") != derive_seed(base, "b"));
  CHECK(derive_seed(base, "a", {0}) != derive_seed(base, "a", {1}));
  CHECK(derive_seed(base, "a", {0, 1}) != derive_seed(base, "a", {1, 0}));
  CHECK(derive_seed(base, "a", {7}) == derive_seed(base, "a", {7}));
  CHECK(derive_seed(1, "a", {7}) != derive_seed(2, "a", {7}));
}

TEST_CASE("uniform stays in [0,1) and is deterministic") {
  Rng a(123);
  Rng b(123);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(u == b.uniform());
  }
}

TEST_CASE("normal moments") {
  Rng rng(7);
  const int n = 200000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("chi-square has the right mean and variance") {
  Rng rng(11);
  const double dof = 5.0;
  const int n = 100000;
  double sum = 0.0;
  double sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.chi_square(dof);
    CHECK(x >= 0.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean - dof) < 0.05);          // E = dof
  CHECK(std::abs(var - 2.0 * dof) < 0.3);      // Var = 2 dof
}

TEST_CASE("uniform_int covers the range uniformly") {
  Rng rng(3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    ++counts[static_cast<std::size_t>(rng.uniform_int(7))];
  }
  for (int c : counts) {
    CHECK(std::abs(c - n / 7) < 600);
  }
}

TEST_CASE("sample_without_replacement is a sorted subset") {
  Rng rng(99);
  for (int rep = 0; rep < 50; ++rep) {
    auto s = rng.sample_without_replacement(20, 8);
    REQUIRE(s.size() == 8);
    std::set<int> uniq(s.begin(), s.end());
    CHECK(uniq.size() == 8);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(*s.begin() >= 0);
    CHECK(s.back() < 20);
  }
}
