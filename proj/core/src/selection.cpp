#include "mrd/selection.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace mrd {

namespace {

SelectionResult step_up(const Eigen::VectorXd& pvalues, double level,
                        double reported_q) {
  const int d = static_cast<int>(pvalues.size());
  if (d < 1) {
    throw std::invalid_argument("need at least one p-value");
  }
  for (int j = 0; j < d; ++j) {
    if (!(pvalues[j] >= 0.0 && pvalues[j] <= 1.0)) {
      throw std::invalid_argument("p-values must lie in [0, 1]");
    }
  }
  Eigen::VectorXd sorted = pvalues;
  std::sort(sorted.data(), sorted.data() + d);

  int k0 = 0;
  for (int k = 1; k <= d; ++k) {
    if (sorted[k - 1] <= level * k / d) {
      k0 = k;
    }
  }
  SelectionResult result;
  result.q = reported_q;
  if (k0 == 0) {
    return result;
  }
  const double threshold = sorted[k0 - 1];
  for (int j = 0; j < d; ++j) {
    if (pvalues[j] <= threshold) {
      result.rejected.push_back(j);
    }
  }
  return result;
}

}  // namespace

SelectionResult bh_select(const Eigen::VectorXd& pvalues, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("q must lie in (0, 1)");
  }
  return step_up(pvalues, q, q);
}

SelectionResult by_select(const Eigen::VectorXd& pvalues, double q) {
  if (!(q > 0.0 && q < 1.0)) {
    throw std::invalid_argument("q must lie in (0, 1)");
  }
  const int d = static_cast<int>(pvalues.size());
  double harmonic = 0.0;
  for (int k = 1; k <= d; ++k) {
    harmonic += 1.0 / k;
  }
  return step_up(pvalues, q / harmonic, q);
}

FdpPower eval_fdp_power(const std::vector<int>& selected,
                        const std::vector<int>& nonnull, int d) {
  std::unordered_set<int> h1(nonnull.begin(), nonnull.end());
  for (int j : selected) {
    if (j < 0 || j >= d) {
      throw std::invalid_argument("selected index out of range");
    }
  }
  int true_pos = 0;
  int false_pos = 0;
  for (int j : selected) {
    if (h1.count(j)) {
      ++true_pos;
    } else {
      ++false_pos;
    }
  }
  FdpPower out;
  out.fdp = static_cast<double>(false_pos) /
            std::max<std::size_t>(selected.size(), 1);
  out.power = h1.empty() ? 0.0
                         : static_cast<double>(true_pos) /
                               static_cast<double>(h1.size());
  return out;
}

}  // namespace mrd
