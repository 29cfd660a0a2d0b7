#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "mrd/conditional.hpp"
#include "mrd/dataset.hpp"

namespace mrd {

// Synthetic feature designs.  All families are zero mean with AR(1)-style
// covariance entries rho^|i-j|; the mixture picks one rho per sample
// uniformly, and the t design has covariance equal to the stated matrix.
struct DesignSpec {
  enum class Family { kAr1Gaussian, kGmmMixture, kStudentT };

  Family family = Family::kAr1Gaussian;
  double rho = 0.0;             // Ar1Gaussian / StudentT
  std::vector<double> rhos;     // GmmMixture component auto-correlations
  double nu = 5.0;              // StudentT degrees of freedom (> 2)
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
};

void validate(const DesignSpec& spec);

Eigen::MatrixXd ar1_covariance(int d, double rho);

Eigen::MatrixXd gen_design(const DesignSpec& spec);

// The exact conditional law of the design family (the generative
// parameters, not an estimate).
std::unique_ptr<ConditionalLaw> true_law(const DesignSpec& spec);

struct GroundTruth {
  Eigen::VectorXd beta;        // all zero for the interaction model
  std::vector<int> nonnull;    // sorted, 0-based
};

// Exactly round(sparsity * d) entries of magnitude c with independent random
// signs at positions drawn uniformly without replacement.
GroundTruth gen_beta(int d, double sparsity, double c, std::uint64_t seed);

struct ResponseSpec {
  enum class Model { kM1, kM2, kM3, kM4 };

  Model model = Model::kM1;
  double amplitude = 0.0;   // c
  double sparsity = 0.3;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
};

// Ground truth matching the response model: coefficients for M1-M3, the
// fixed 30-feature interaction set for M4 (requires d >= 30).
GroundTruth ground_truth_for(const ResponseSpec& spec, int d);

// Y = g(X) + noise with the response model's link g.
Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const ResponseSpec& spec,
                             const GroundTruth& truth);

}  // namespace mrd
