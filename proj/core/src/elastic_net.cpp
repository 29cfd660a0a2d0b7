#include "mrd/elastic_net.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

namespace {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Like standardize(), but a zero-variance response is centered only (a
// constant response is a legitimate degenerate fit, not an input error).
std::pair<Dataset, StandardizationParams> standardize_for_fit(
    const Dataset& data) {
  validate(data);
  const int d = data.d();
  const int n = data.n();
  StandardizationParams params;
  params.feature_means.resize(d);
  params.feature_stds.resize(d);
  Dataset out = data;
  for (int j = 0; j < d; ++j) {
    const double mean = data.x.col(j).mean();
    const double sd = std::sqrt(
        (data.x.col(j).array() - mean).square().sum() / n);
    if (sd < 1e-12 * std::max(1.0, std::abs(mean))) {
      throw ConstantColumnError(j);
    }
    params.feature_means[j] = mean;
    params.feature_stds[j] = sd;
    out.x.col(j) = (data.x.col(j).array() - mean) / sd;
  }
  const double y_mean = data.y.mean();
  double y_sd =
      std::sqrt((data.y.array() - y_mean).square().sum() / n);
  if (y_sd < 1e-12 * std::max(1.0, std::abs(y_mean))) {
    y_sd = 1.0;
  }
  params.y_mean = y_mean;
  params.y_std = y_sd;
  out.y = (data.y.array() - y_mean) / y_sd;
  return {std::move(out), std::move(params)};
}

}  // namespace

double prox_elastic_net(double v, double tau, double alpha2) {
  const double soft = std::max(0.0, v - tau) - std::max(0.0, -v - tau);
  return soft / (1.0 + alpha2);
}

Eigen::VectorXd prox_elastic_net(const Eigen::VectorXd& v, double tau,
                                 double alpha2) {
  if (tau < 0.0 || alpha2 < 0.0) {
    throw std::invalid_argument("penalties must be nonnegative");
  }
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out[i] = prox_elastic_net(v[i], tau, alpha2);
  }
  return out;
}

namespace detail {

MrdRisks linear_mrd_risks(const Eigen::MatrixXd& x_std,
                          const Eigen::VectorXd& y_std,
                          const Eigen::VectorXd& v,
                          const Eigen::MatrixXd& dummies_std,
                          const std::vector<int>& subset) {
  const double m = static_cast<double>(x_std.rows());
  const Eigen::VectorXd r = x_std * v - y_std;
  MrdRisks out;
  out.z = r.squaredNorm() / m;
  out.z_tilde.resize(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const int j = subset[s];
    const Eigen::VectorXd delta =
        dummies_std.col(static_cast<Eigen::Index>(s)) - x_std.col(j);
    // Swapping one column shifts the residual by delta * v_j.
    out.z_tilde[static_cast<Eigen::Index>(s)] =
        out.z + (2.0 * v[j] * delta.dot(r) + v[j] * v[j] * delta.squaredNorm()) / m;
  }
  return out;
}

double linear_v_objective(const Eigen::MatrixXd& x_std,
                          const Eigen::VectorXd& y_std,
                          const Eigen::VectorXd& v, double lambda,
                          double risk_scale,
                          const Eigen::MatrixXd& dummies_std,
                          const std::vector<int>& subset, double rho,
                          const Eigen::VectorXd& beta,
                          const Eigen::VectorXd& u,
                          Eigen::VectorXd* grad_out) {
  const double m = static_cast<double>(x_std.rows());
  const Eigen::VectorXd r = x_std * v - y_std;
  const Eigen::VectorXd diff = v - beta + u;
  const double z = r.squaredNorm() / m;
  double value = (1.0 - lambda) * 0.5 * z + 0.5 * rho * diff.squaredNorm();

  Eigen::VectorXd grad;
  if (grad_out) {
    grad = ((1.0 - lambda) / m) * (x_std.transpose() * r) + rho * diff;
  }

  if (lambda > 0.0 && !subset.empty()) {
    const double scale = lambda / static_cast<double>(subset.size());
    const double chain = risk_scale * 2.0 / m;
    for (std::size_t s = 0; s < subset.size(); ++s) {
      const int j = subset[s];
      const Eigen::VectorXd delta =
          dummies_std.col(static_cast<Eigen::Index>(s)) - x_std.col(j);
      const double dtr = delta.dot(r);
      const double dsq = delta.squaredNorm();
      const double arg = -chain * (v[j] * dtr + 0.5 * v[j] * v[j] * dsq);
      const double sig = sigmoid(arg);
      value += scale * sig;
      if (grad_out) {
        const double sigp = sig * (1.0 - sig);
        grad -= (scale * sigp * chain) * (v[j] * (x_std.transpose() * delta));
        grad[j] -= scale * sigp * chain * (dtr + v[j] * dsq);
      }
    }
  }
  if (grad_out) {
    *grad_out = std::move(grad);
  }
  return value;
}

}  // namespace detail

namespace {

struct MrdIterationState {
  std::vector<int> subset;          // features with fresh dummies
  Eigen::MatrixXd delta;            // n x |P|, standardized dummy - original
  Eigen::MatrixXd xt_delta;         // d x |P|
  Eigen::VectorXd delta_sq;         // |P|
};

// Largest eigenvalue of X'X / m by power iteration.
double sigma_max_gram(const Eigen::MatrixXd& x) {
  const double m = static_cast<double>(x.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(x.cols()).normalized();
  double eig = 1.0;
  for (int it = 0; it < 12; ++it) {
    Eigen::VectorXd w = x.transpose() * (x * v) / m;
    eig = w.norm();
    if (!(eig > 0.0)) {
      return 1.0;
    }
    v = w / eig;
  }
  return eig;
}

// Shared ADMM loop; lambda = 0 runs the base elastic net (and must produce
// iterates identical to it, so the base path goes through this same code).
LinearFitResult fit_admm_impl(const Dataset& train, const ElasticNetConfig& cfg,
                              const MrdConfig& mrd, const ConditionalLaw* law,
                              std::uint64_t seed, AdmmIterObserver* observer,
                              const Eigen::VectorXd* warm_start) {
  if (cfg.max_iter < 1 || cfg.inner_gd_steps < 1) {
    throw std::invalid_argument("iteration counts must be positive");
  }
  if (cfg.alpha1 < 0.0 || cfg.alpha2 < 0.0 || cfg.admm_rho <= 0.0 ||
      cfg.eps_rel <= 0.0 || cfg.eps_abs <= 0.0 || cfg.inner_lr < 0.0) {
    throw std::invalid_argument("invalid elastic net configuration");
  }
  if (!(mrd.lambda >= 0.0 && mrd.lambda < 1.0)) {
    throw std::invalid_argument("lambda must lie in [0, 1)");
  }
  const bool with_penalty = mrd.lambda > 0.0;
  if (with_penalty && law == nullptr) {
    throw std::invalid_argument("risk-discrepancy fitting needs a law");
  }

  auto [std_data, params] = standardize_for_fit(train);
  const Eigen::MatrixXd& x = std_data.x;
  const Eigen::VectorXd& y = std_data.y;
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const double m = static_cast<double>(n);
  const double rho = cfg.admm_rho;
  const double lambda = mrd.lambda;

  if (with_penalty) {
    if (law->dim() != d) {
      throw ShapeError("law dimension does not match feature count");
    }
    if (mrd.subset_size < 0 || mrd.subset_size > d) {
      throw std::invalid_argument("subset size must lie in [1, d]");
    }
  }
  const int subset_n = mrd.subset_size == 0 ? d : mrd.subset_size;
  const double risk_scale =
      mrd.risk_scale == 0.0 ? static_cast<double>(d) : mrd.risk_scale;
  if (risk_scale < 0.0) {
    throw std::invalid_argument("risk_scale must be nonnegative");
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(d);
  if (warm_start) {
    if (warm_start->size() != d) {
      throw ShapeError("warm start length mismatch");
    }
    beta = *warm_start;
    v = *warm_start;
  }

  double inner_lr = cfg.inner_lr;
  if (inner_lr == 0.0) {
    if (with_penalty) {
      // Averaging regime: the separation term is stochastic (fresh dummies
      // every iteration), so the iterate must move slowly enough per
      // iteration for the dummy noise to cancel across iterations instead
      // of imprinting on the solution.
      inner_lr = 0.025 / (static_cast<double>(cfg.inner_gd_steps) * rho);
    } else {
      // Deterministic subproblem: a near-exact solve from a power-iteration
      // curvature bound.
      inner_lr = 1.5 / (1.05 * sigma_max_gram(x) + rho);
    }
  }

  MrdIterationState state;
  std::optional<DummySamplerBank> sampler_bank;
  if (with_penalty) {
    sampler_bank.emplace(*law, train.x);
  }
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  bool converged = false;
  int iterations = 0;

  for (int iter = 0; iter < cfg.max_iter; ++iter) {
    iterations = iter + 1;
    if (with_penalty && (mrd.resample_each_iter || iter == 0)) {
      Rng subset_rng(derive_seed(seed, "admm-subset",
                                 {static_cast<std::uint64_t>(iter)}));
      state.subset = subset_rng.sample_without_replacement(d, subset_n);
      Eigen::MatrixXd dummies_raw =
          sampler_bank->sample(state.subset,
                               derive_seed(seed, "admm-dummies",
                                           {static_cast<std::uint64_t>(iter)}));
      const Eigen::Index p = static_cast<Eigen::Index>(state.subset.size());
      state.delta.resize(n, p);
      for (Eigen::Index s = 0; s < p; ++s) {
        const int j = state.subset[static_cast<std::size_t>(s)];
        Eigen::VectorXd col_std =
            (dummies_raw.col(s).array() - params.feature_means[j]) /
            params.feature_stds[j];
        state.delta.col(s) = col_std - x.col(j);
      }
      state.xt_delta = x.transpose() * state.delta;
      state.delta_sq = state.delta.colwise().squaredNorm();
    }

    // v-update: fixed-count gradient descent, warm-started at the previous v.
    for (int step = 0; step < cfg.inner_gd_steps; ++step) {
      Eigen::VectorXd r = x * v - y;
      Eigen::VectorXd grad =
          ((1.0 - lambda) / m) * (x.transpose() * r) + rho * (v - beta + u);
      if (with_penalty) {
        const double scale = lambda / static_cast<double>(state.subset.size());
        const double chain = risk_scale * 2.0 / m;
        Eigen::VectorXd dtr = state.delta.transpose() * r;
        Eigen::VectorXd coeff(static_cast<Eigen::Index>(state.subset.size()));
        for (std::size_t s = 0; s < state.subset.size(); ++s) {
          const int j = state.subset[s];
          const Eigen::Index si = static_cast<Eigen::Index>(s);
          // Sigmoid of the scaled risk difference (see linear_v_objective).
          const double arg = -chain *
              (v[j] * dtr[si] + 0.5 * v[j] * v[j] * state.delta_sq[si]);
          const double sig = sigmoid(arg);
          const double sigp = sig * (1.0 - sig);
          coeff[si] = scale * sigp * chain * v[j];
          grad[j] -= scale * sigp * chain *
                     (dtr[si] + v[j] * state.delta_sq[si]);
        }
        grad -= state.xt_delta * coeff;
      }
      v -= inner_lr * grad;
    }
    if (!v.allFinite()) {
      throw NonFiniteLossError("v-update diverged; lower inner_lr");
    }

    // Exact prox of (1 - lambda) * (alpha1 |b|_1 + alpha2/2 |b|^2) at
    // parameter rho; the (1 - lambda) factor keeps the effective shrinkage
    // of the penalized fit aligned with the base objective.
    Eigen::VectorXd beta_prev = beta;
    beta = prox_elastic_net(v + u, (1.0 - lambda) * cfg.alpha1 / rho,
                            (1.0 - lambda) * cfg.alpha2 / rho);
    u += v - beta;

    if (observer) {
      observer->on_iteration(iter, LinearModel(beta, params));
    }

    // Stopping rule on the primal residual v - beta and dual residual
    // rho * (beta_k+1 - beta_k).
    const double r_norm = (v - beta).norm();
    const double s_norm = rho * (beta - beta_prev).norm();
    const double eps_pri =
        sqrt_d * cfg.eps_abs +
        cfg.eps_rel * std::max(v.norm(), beta.norm());
    const double eps_dual =
        sqrt_d * cfg.eps_abs + cfg.eps_rel * (rho * u.norm());
    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      converged = true;
      break;
    }
  }

  return LinearFitResult{LinearModel(beta, params), converged, iterations};
}

}  // namespace

LinearFitResult fit_elastic_net_admm(const Dataset& train,
                                     const ElasticNetConfig& cfg,
                                     AdmmIterObserver* observer,
                                     const Eigen::VectorXd* warm_start) {
  return fit_admm_impl(train, cfg, MrdConfig{}, nullptr, 0, observer,
                       warm_start);
}

LinearFitResult fit_mrd_elastic_net(const Dataset& train,
                                    const ElasticNetConfig& cfg,
                                    const MrdConfig& mrd,
                                    const ConditionalLaw& law,
                                    std::uint64_t seed,
                                    AdmmIterObserver* observer) {
  return fit_admm_impl(train, cfg, mrd, &law, seed, observer, nullptr);
}

PenaltyTuneResult cv_tune_penalty(const Dataset& data,
                                  const std::vector<double>& alpha1_grid,
                                  int folds, double alpha2, std::uint64_t seed,
                                  const ElasticNetConfig& base_cfg) {
  if (alpha1_grid.empty()) {
    throw std::invalid_argument("alpha1 grid must be non-empty");
  }
  validate(data);
  FoldAssignment assignment =
      kfold_indices(data.n(), folds, derive_seed(seed, "cv-folds"));

  // Process each fold along a descending grid so fits warm-start from the
  // previous (more regularized) solution.
  std::vector<std::size_t> order(alpha1_grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return alpha1_grid[a] > alpha1_grid[b];
  });

  std::vector<double> mse(alpha1_grid.size(), 0.0);
  for (int f = 0; f < folds; ++f) {
    const Dataset train = select_rows(data, assignment.complement(f));
    const Dataset valid = select_rows(data, assignment.members(f));
    Eigen::VectorXd warm;
    bool have_warm = false;
    for (std::size_t oi : order) {
      ElasticNetConfig cfg = base_cfg;
      cfg.alpha1 = alpha1_grid[oi];
      cfg.alpha2 = alpha2;
      LinearFitResult fit = fit_elastic_net_admm(
          train, cfg, nullptr, have_warm ? &warm : nullptr);
      warm = fit.model.beta();
      have_warm = true;
      const Eigen::VectorXd pred = fit.model.predict(valid.x);
      const double y_std = fit.model.standardization().y_std;
      mse[oi] += ((valid.y - pred) / y_std).squaredNorm() /
                 static_cast<double>(valid.n());
    }
  }
  for (double& v : mse) {
    v /= static_cast<double>(folds);
  }

  // Minimum mean MSE; ties go to the stronger penalty.
  std::size_t best = 0;
  for (std::size_t i = 1; i < alpha1_grid.size(); ++i) {
    const bool better = mse[i] < mse[best] ||
                        (mse[i] == mse[best] &&
                         alpha1_grid[i] > alpha1_grid[best]);
    if (better) {
      best = i;
    }
  }
  return PenaltyTuneResult{alpha1_grid[best], mse[best]};
}

double auto_lambda(double mse_validation) {
  if (mse_validation < 0.0) {
    throw std::invalid_argument("validation MSE must be nonnegative");
  }
  return std::min(0.8, 0.8 * mse_validation);
}

std::vector<double> default_alpha1_grid(const Dataset& data, int size,
                                        double min_ratio) {
  if (size < 1 || !(min_ratio > 0.0 && min_ratio <= 1.0)) {
    throw std::invalid_argument("invalid grid shape");
  }
  auto [std_data, params] = standardize_for_fit(data);
  const double n = static_cast<double>(data.n());
  const double alpha_max =
      (std_data.x.transpose() * std_data.y).cwiseAbs().maxCoeff() / n;
  std::vector<double> grid(static_cast<std::size_t>(size));
  if (size == 1) {
    grid[0] = alpha_max;
    return grid;
  }
  for (int i = 0; i < size; ++i) {
    grid[static_cast<std::size_t>(i)] =
        alpha_max *
        std::pow(min_ratio, static_cast<double>(i) / (size - 1));
  }
  return grid;
}

}  // namespace mrd
