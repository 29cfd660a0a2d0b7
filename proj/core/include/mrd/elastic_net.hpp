#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "mrd/conditional.hpp"
#include "mrd/dataset.hpp"
#include "mrd/model.hpp"

namespace mrd {

struct ElasticNetConfig {
  double alpha1 = 0.0;       // L1 penalty
  double alpha2 = 0.0;       // L2 penalty
  double admm_rho = 1.0;
  double eps_rel = 1e-3;
  double eps_abs = 5e-4;
  int max_iter = 400;
  int inner_gd_steps = 50;   // gradient-descent steps per v-update
  // Step size on standardized data; 0 picks it automatically: a near-exact
  // solve for the deterministic base subproblem, deliberately small steps
  // for the stochastic risk-discrepancy subproblem (the fresh dummy noise
  // then averages out across iterations).
  double inner_lr = 0.0;
};

// Risk-discrepancy penalty settings shared by the linear and MLP fitters.
struct MrdConfig {
  double lambda = 0.0;            // in [0, 1); 0 disables the penalty
  int subset_size = 0;            // features resampled per iteration; 0 = auto
  bool resample_each_iter = true;
  // Multiplier on the risk difference inside the sigmoid; 0 picks the
  // feature count d (at the raw per-sample scale the sigmoid is flat and
  // the separation term has no effect).
  double risk_scale = 0.0;
};

// Elementwise soft-threshold then shrink: (1 / (1 + alpha2)) * S_tau(v),
// the exact minimizer of (1/2)(v - b)^2 + tau*|b| + (alpha2/2) b^2.
Eigen::VectorXd prox_elastic_net(const Eigen::VectorXd& v, double tau,
                                 double alpha2);
double prox_elastic_net(double v, double tau, double alpha2);

// Called once per ADMM iteration with the current sparse iterate.
class AdmmIterObserver {
 public:
  virtual ~AdmmIterObserver() = default;
  virtual void on_iteration(int iter, const LinearModel& current) = 0;
};

struct LinearFitResult {
  LinearModel model;
  bool converged = false;  // false: stopped at max_iter (best iterate kept)
  int iterations = 0;
};

// Elastic net by ADMM on standardized data (estimated internally from the
// given training data); the v-subproblem is solved by warm-started gradient
// descent.  Does not throw on max_iter: the result carries converged=false.
LinearFitResult fit_elastic_net_admm(const Dataset& train,
                                     const ElasticNetConfig& cfg,
                                     AdmmIterObserver* observer = nullptr,
                                     const Eigen::VectorXd* warm_start = nullptr);

// Elastic net + risk-discrepancy penalty.  Every iteration resamples a
// feature subset and fresh dummy columns from the law; with lambda = 0 the
// iterates coincide with fit_elastic_net_admm.
LinearFitResult fit_mrd_elastic_net(const Dataset& train,
                                    const ElasticNetConfig& cfg,
                                    const MrdConfig& mrd,
                                    const ConditionalLaw& law,
                                    std::uint64_t seed,
                                    AdmmIterObserver* observer = nullptr);

struct PenaltyTuneResult {
  double alpha1 = 0.0;
  double mse_validation = 0.0;  // mean held-out MSE (standardized scale)
};

// K-fold cross-validation of the L1 penalty for the base (non-MRD) fit;
// returns the grid value with the lowest mean held-out MSE together with
// that MSE.
PenaltyTuneResult cv_tune_penalty(const Dataset& data,
                                  const std::vector<double>& alpha1_grid,
                                  int folds, double alpha2,
                                  std::uint64_t seed,
                                  const ElasticNetConfig& base_cfg = {});

// min{0.8, 0.8 * mse_validation}.
double auto_lambda(double mse_validation);

// Log-spaced grid from the null threshold max|X'y|/n (computed on the
// standardized data) down to min_ratio times it.
std::vector<double> default_alpha1_grid(const Dataset& data, int size = 16,
                                        double min_ratio = 0.01);

namespace detail {

// Empirical risks of the linear predictor v on standardized data: z on the
// original matrix, z_tilde[s] on the matrix with column subset[s] swapped for
// dummies_std.col(s).
struct MrdRisks {
  double z = 0.0;
  Eigen::VectorXd z_tilde;
};
MrdRisks linear_mrd_risks(const Eigen::MatrixXd& x_std,
                          const Eigen::VectorXd& y_std,
                          const Eigen::VectorXd& v,
                          const Eigen::MatrixXd& dummies_std,
                          const std::vector<int>& subset);

// Value and gradient of the ADMM v-subproblem objective
//   (1-lambda)/(2m) |Xv - y|^2
//   + (lambda/|P|) sum_j sigmoid(risk_scale * (z - z_tilde_j))
//   + (rho/2) |v - beta + u|^2.
double linear_v_objective(const Eigen::MatrixXd& x_std,
                          const Eigen::VectorXd& y_std,
                          const Eigen::VectorXd& v, double lambda,
                          double risk_scale,
                          const Eigen::MatrixXd& dummies_std,
                          const std::vector<int>& subset, double rho,
                          const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& u,
                          Eigen::VectorXd* grad_out);

}  // namespace detail

}  // namespace mrd
