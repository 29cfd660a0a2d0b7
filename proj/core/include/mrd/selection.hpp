#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace mrd {

struct SelectionResult {
  std::vector<int> rejected;  // 0-based, sorted
  double q = 0.0;
  std::optional<double> fdp;    // filled when ground truth is known
  std::optional<double> power;
};

// Benjamini-Hochberg step-up at level q: rejects the hypotheses of the k0
// smallest p-values where k0 is the largest k with p_(k) <= (k/d) q; tied
// p-values at the threshold share their fate.
SelectionResult bh_select(const Eigen::VectorXd& pvalues, double q);

// Benjamini-Yekutieli: BH at level q / H_d with H_d the d-th harmonic number.
SelectionResult by_select(const Eigen::VectorXd& pvalues, double q);

struct FdpPower {
  double fdp = 0.0;
  double power = 0.0;
};

// fdp = |S ∩ H0| / max{|S|, 1}; power = |S ∩ H1| / |H1| (0 when H1 is
// empty).  nonnull holds the 0-based indices of H1 among d features.
FdpPower eval_fdp_power(const std::vector<int>& selected,
                        const std::vector<int>& nonnull, int d);

}  // namespace mrd
