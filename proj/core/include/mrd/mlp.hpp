#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mrd/conditional.hpp"
#include "mrd/dataset.hpp"
#include "mrd/elastic_net.hpp"  // MrdConfig
#include "mrd/model.hpp"

namespace mrd {

struct MlpConfig {
  int hidden_dim = 16;
  double dropout_rate = 0.5;
  double learning_rate = 0.005;
  int epochs = 60;               // full-batch steps
  double cancelout_weight = 0.02;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

// Network parameters in standardized space.  flatten()/unflatten() give the
// canonical coordinate order used by Adam and by finite-difference checks.
struct MlpParams {
  Eigen::VectorXd gate;  // d
  Eigen::MatrixXd w1;    // hidden x d
  Eigen::VectorXd b1;    // hidden
  Eigen::VectorXd w2;    // hidden
  double b2 = 0.0;
};

Eigen::VectorXd flatten(const MlpParams& p);
MlpParams unflatten(const Eigen::VectorXd& v, int d, int hidden);

// Full training loss for one step, dummies and dropout mask held fixed:
//   (1 - lambda) * (MSE + cancelout_weight * mean(sigmoid(gate)))
//   + (lambda/|P|) * sum_s sigmoid(risk_scale * (z - z_tilde_s))
// where z is the training MSE and z_tilde_s the MSE with column subset[s]
// swapped for dummies_std.col(s).  mask is n x hidden with 0/1 entries
// (inverted dropout, scaled by 1/(1 - dropout_rate) when training).
// Pass grad_out = nullptr to evaluate only.
double mlp_loss_and_gradient(const MlpParams& params, const MlpConfig& cfg,
                             const Eigen::MatrixXd& x_std,
                             const Eigen::VectorXd& y_std,
                             const Eigen::MatrixXd& mask, double lambda,
                             double risk_scale,
                             const std::vector<int>& subset,
                             const Eigen::MatrixXd& dummies_std,
                             MlpParams* grad_out);

struct MlpFitResult {
  MlpModel model;
  // Squared gradient norm per step; diagnostic only.
  std::vector<double> grad_sq_norms;
};

// Adam on the full-batch loss; deterministic given the seed.  Throws
// NonFiniteLossError if the loss stops being finite.
MlpFitResult fit_mlp(const Dataset& train, const MlpConfig& cfg,
                     std::uint64_t seed);

// Same optimizer with the risk-discrepancy penalty: every step resamples a
// feature subset (default min(d, 32)) and fresh dummies.  With lambda = 0 the
// trajectory is bit-for-bit identical to fit_mlp under the same seed.
MlpFitResult fit_mrd_mlp(const Dataset& train, const MlpConfig& cfg,
                         const MrdConfig& mrd, const ConditionalLaw& law,
                         std::uint64_t seed);

// Validation MSE of the base network on a held-out 20% split (standardized
// scale); feeds auto_lambda for the MLP path.
double mlp_validation_mse(const Dataset& train, const MlpConfig& cfg,
                          std::uint64_t seed);

}  // namespace mrd
