#include "mrd/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

namespace {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

// Same leniency as the linear fitter: constant response is centered only.
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
    const double sd =
        std::sqrt((data.x.col(j).array() - mean).square().sum() / n);
    if (sd < 1e-12 * std::max(1.0, std::abs(mean))) {
      throw ConstantColumnError(j);
    }
    params.feature_means[j] = mean;
    params.feature_stds[j] = sd;
    out.x.col(j) = (data.x.col(j).array() - mean) / sd;
  }
  const double y_mean = data.y.mean();
  double y_sd = std::sqrt((data.y.array() - y_mean).square().sum() / n);
  if (y_sd < 1e-12 * std::max(1.0, std::abs(y_mean))) {
    y_sd = 1.0;
  }
  params.y_mean = y_mean;
  params.y_std = y_sd;
  out.y = (data.y.array() - y_mean) / y_sd;
  return {std::move(out), std::move(params)};
}

struct ForwardPass {
  Eigen::MatrixXd gated;       // n x d
  Eigen::MatrixXd hidden_pre;  // n x h
  Eigen::MatrixXd hidden;      // after relu + dropout scale
  Eigen::VectorXd pred;        // n
};

ForwardPass forward(const MlpParams& p, const Eigen::MatrixXd& x_std,
                    const Eigen::MatrixXd& mask, double keep) {
  ForwardPass f;
  const Eigen::ArrayXd gate_act = p.gate.array().unaryExpr(
      [](double g) { return sigmoid(g); });
  f.gated = x_std.array().rowwise() * gate_act.transpose();
  f.hidden_pre =
      (f.gated * p.w1.transpose()).rowwise() + p.b1.transpose();
  f.hidden = f.hidden_pre.cwiseMax(0.0);
  if (keep < 1.0) {
    f.hidden = (f.hidden.array() * mask.array()) / keep;
  }
  f.pred = (f.hidden * p.w2).array() + p.b2;
  return f;
}

double mse_of(const ForwardPass& f, const Eigen::VectorXd& y) {
  return (f.pred - y).squaredNorm() / static_cast<double>(y.size());
}

// Accumulates coef * d(MSE)/d(theta) for the pass f on input x_in.
void backward_mse(const MlpParams& p, const Eigen::MatrixXd& x_in,
                  const ForwardPass& f, const Eigen::VectorXd& y,
                  const Eigen::MatrixXd& mask, double keep, double coef,
                  MlpParams& grad) {
  const double m = static_cast<double>(y.size());
  const Eigen::VectorXd e = (2.0 / m) * (f.pred - y);  // n

  grad.w2 += coef * (f.hidden.transpose() * e);
  grad.b2 += coef * e.sum();

  Eigen::MatrixXd g_hidden = e * p.w2.transpose();  // n x h
  if (keep < 1.0) {
    g_hidden = (g_hidden.array() * mask.array()) / keep;
  }
  // ReLU gate.
  g_hidden = (f.hidden_pre.array() > 0.0).select(g_hidden, 0.0);

  grad.w1 += coef * (g_hidden.transpose() * f.gated);
  grad.b1 += coef * g_hidden.colwise().sum().transpose();

  Eigen::MatrixXd g_gated = g_hidden * p.w1;  // n x d
  // gated = x .* sigmoid(gate)': chain through the gate activation.
  const Eigen::ArrayXd gate_act = p.gate.array().unaryExpr(
      [](double g) { return sigmoid(g); });
  const Eigen::ArrayXd gate_deriv = gate_act * (1.0 - gate_act);
  Eigen::VectorXd per_feature =
      (g_gated.array() * x_in.array()).colwise().sum();
  grad.gate += coef * (per_feature.array() * gate_deriv).matrix();
}

}  // namespace

Eigen::VectorXd flatten(const MlpParams& p) {
  const Eigen::Index d = p.gate.size();
  const Eigen::Index h = p.b1.size();
  Eigen::VectorXd v(d + h * d + h + h + 1);
  Eigen::Index off = 0;
  v.segment(off, d) = p.gate;
  off += d;
  v.segment(off, h * d) =
      Eigen::Map<const Eigen::VectorXd>(p.w1.data(), h * d);
  off += h * d;
  v.segment(off, h) = p.b1;
  off += h;
  v.segment(off, h) = p.w2;
  off += h;
  v[off] = p.b2;
  return v;
}

MlpParams unflatten(const Eigen::VectorXd& v, int d, int hidden) {
  const Eigen::Index h = hidden;
  MlpParams p;
  Eigen::Index off = 0;
  p.gate = v.segment(off, d);
  off += d;
  p.w1 = Eigen::Map<const Eigen::MatrixXd>(v.data() + off, h, d);
  off += h * d;
  p.b1 = v.segment(off, h);
  off += h;
  p.w2 = v.segment(off, h);
  off += h;
  p.b2 = v[off];
  return p;
}

double mlp_loss_and_gradient(const MlpParams& params, const MlpConfig& cfg,
                             const Eigen::MatrixXd& x_std,
                             const Eigen::VectorXd& y_std,
                             const Eigen::MatrixXd& mask, double lambda,
                             double risk_scale,
                             const std::vector<int>& subset,
                             const Eigen::MatrixXd& dummies_std,
                             MlpParams* grad_out) {
  const int d = static_cast<int>(x_std.cols());
  const double keep = 1.0 - cfg.dropout_rate;
  if (!(keep > 0.0 && keep <= 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }

  ForwardPass orig = forward(params, x_std, mask, keep);
  const double z = mse_of(orig, y_std);

  const Eigen::ArrayXd gate_act = params.gate.array().unaryExpr(
      [](double g) { return sigmoid(g); });
  const double gate_pen = cfg.cancelout_weight * gate_act.mean();

  double loss = (1.0 - lambda) * (z + gate_pen);

  std::vector<ForwardPass> swapped;
  Eigen::VectorXd sig_terms;
  if (lambda > 0.0 && !subset.empty()) {
    const double scale = lambda / static_cast<double>(subset.size());
    swapped.reserve(subset.size());
    sig_terms.resize(static_cast<Eigen::Index>(subset.size()));
    for (std::size_t s = 0; s < subset.size(); ++s) {
      Eigen::MatrixXd x_swap = x_std;
      x_swap.col(subset[s]) = dummies_std.col(static_cast<Eigen::Index>(s));
      swapped.push_back(forward(params, x_swap, mask, keep));
      const double z_tilde = mse_of(swapped.back(), y_std);
      sig_terms[static_cast<Eigen::Index>(s)] =
          sigmoid(risk_scale * (z - z_tilde));
      loss += scale * sig_terms[static_cast<Eigen::Index>(s)];
    }
  }

  if (grad_out) {
    MlpParams grad;
    grad.gate = Eigen::VectorXd::Zero(d);
    grad.w1 = Eigen::MatrixXd::Zero(params.w1.rows(), params.w1.cols());
    grad.b1 = Eigen::VectorXd::Zero(params.b1.size());
    grad.w2 = Eigen::VectorXd::Zero(params.w2.size());
    grad.b2 = 0.0;

    double orig_coef = 1.0 - lambda;
    if (lambda > 0.0 && !subset.empty()) {
      const double scale = lambda / static_cast<double>(subset.size());
      for (std::size_t s = 0; s < subset.size(); ++s) {
        const double sig = sig_terms[static_cast<Eigen::Index>(s)];
        // Chain rule through risk_scale * (z - z_tilde).
        const double sigp = sig * (1.0 - sig) * risk_scale;
        orig_coef += scale * sigp;             // d z / d theta enters with +
        Eigen::MatrixXd x_swap = x_std;
        x_swap.col(subset[s]) =
            dummies_std.col(static_cast<Eigen::Index>(s));
        backward_mse(params, x_swap, swapped[s], y_std, mask, keep,
                     -scale * sigp, grad);
      }
    }
    backward_mse(params, x_std, orig, y_std, mask, keep, orig_coef, grad);

    const Eigen::ArrayXd gate_deriv = gate_act * (1.0 - gate_act);
    grad.gate += ((1.0 - lambda) * cfg.cancelout_weight / d) *
                 gate_deriv.matrix();
    *grad_out = std::move(grad);
  }
  return loss;
}

namespace {

MlpParams init_params(int d, int hidden, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "mlp-init"));
  MlpParams p;
  p.gate = Eigen::VectorXd::Zero(d);
  p.w1.resize(hidden, d);
  const double limit1 = std::sqrt(6.0 / (d + hidden));
  for (int r = 0; r < hidden; ++r) {
    for (int c = 0; c < d; ++c) {
      p.w1(r, c) = limit1 * (2.0 * rng.uniform() - 1.0);
    }
  }
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.w2.resize(hidden);
  const double limit2 = std::sqrt(6.0 / (hidden + 1));
  for (int r = 0; r < hidden; ++r) {
    p.w2[r] = limit2 * (2.0 * rng.uniform() - 1.0);
  }
  p.b2 = 0.0;
  return p;
}

MlpFitResult fit_mlp_impl(const Dataset& train, const MlpConfig& cfg,
                          const MrdConfig& mrd, const ConditionalLaw* law,
                          std::uint64_t seed) {
  if (cfg.hidden_dim < 1 || cfg.epochs < 0 || cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("invalid network configuration");
  }
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  if (!(mrd.lambda >= 0.0 && mrd.lambda < 1.0)) {
    throw std::invalid_argument("lambda must lie in [0, 1)");
  }
  const bool with_penalty = mrd.lambda > 0.0;
  if (with_penalty && law == nullptr) {
    throw std::invalid_argument("risk-discrepancy fitting needs a law");
  }

  auto [std_data, params_std] = standardize_for_fit(train);
  const Eigen::MatrixXd& x = std_data.x;
  const Eigen::VectorXd& y = std_data.y;
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int h = cfg.hidden_dim;
  if (with_penalty) {
    if (law->dim() != d) {
      throw ShapeError("law dimension does not match feature count");
    }
    if (mrd.subset_size < 0 || mrd.subset_size > d) {
      throw std::invalid_argument("subset size must lie in [1, d]");
    }
  }
  const int subset_n =
      mrd.subset_size == 0 ? std::min(d, 32) : mrd.subset_size;
  const double risk_scale =
      mrd.risk_scale == 0.0 ? static_cast<double>(d) : mrd.risk_scale;

  MlpParams p = init_params(d, h, seed);
  Eigen::VectorXd theta = flatten(p);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(theta.size());

  std::optional<DummySamplerBank> sampler_bank;
  if (with_penalty) {
    sampler_bank.emplace(*law, train.x);
  }

  MlpFitResult result{
      MlpModel(p.gate, p.w1, p.b1, p.w2, p.b2, params_std), {}};
  result.grad_sq_norms.reserve(static_cast<std::size_t>(cfg.epochs));

  std::vector<int> subset;
  Eigen::MatrixXd dummies_std;
  Eigen::MatrixXd mask = Eigen::MatrixXd::Ones(n, h);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.dropout_rate > 0.0) {
      Rng drop_rng(derive_seed(seed, "mlp-dropout",
                               {static_cast<std::uint64_t>(epoch)}));
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < h; ++k) {
          mask(i, k) = drop_rng.uniform() >= cfg.dropout_rate ? 1.0 : 0.0;
        }
      }
    }
    if (with_penalty && (mrd.resample_each_iter || epoch == 0)) {
      Rng subset_rng(derive_seed(seed, "mlp-subset",
                                 {static_cast<std::uint64_t>(epoch)}));
      subset = subset_rng.sample_without_replacement(d, subset_n);
      Eigen::MatrixXd dummies_raw =
          sampler_bank->sample(subset,
                               derive_seed(seed, "mlp-dummies",
                                           {static_cast<std::uint64_t>(epoch)}));
      dummies_std.resize(n, static_cast<Eigen::Index>(subset.size()));
      for (std::size_t s = 0; s < subset.size(); ++s) {
        const int j = subset[s];
        dummies_std.col(static_cast<Eigen::Index>(s)) =
            (dummies_raw.col(static_cast<Eigen::Index>(s)).array() -
             params_std.feature_means[j]) /
            params_std.feature_stds[j];
      }
    }

    MlpParams grad;
    const double loss = mlp_loss_and_gradient(
        p, cfg, x, y, mask, with_penalty ? mrd.lambda : 0.0, risk_scale,
        subset, dummies_std, &grad);
    if (!std::isfinite(loss)) {
      throw NonFiniteLossError("training loss became non-finite at step " +
                               std::to_string(epoch));
    }
    Eigen::VectorXd g = flatten(grad);
    result.grad_sq_norms.push_back(g.squaredNorm());

    // Adam with bias correction.
    const double t = static_cast<double>(epoch + 1);
    adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * g;
    adam_v = cfg.adam_beta2 * adam_v.array().matrix() +
             (1.0 - cfg.adam_beta2) * g.array().square().matrix();
    const double corr1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double corr2 = 1.0 - std::pow(cfg.adam_beta2, t);
    theta -= (cfg.learning_rate *
              (adam_m.array() / corr1 /
               ((adam_v.array() / corr2).sqrt() + cfg.adam_eps)))
                 .matrix();
    p = unflatten(theta, d, h);
  }

  result.model = MlpModel(p.gate, p.w1, p.b1, p.w2, p.b2, params_std);
  return result;
}

}  // namespace

MlpFitResult fit_mlp(const Dataset& train, const MlpConfig& cfg,
                     std::uint64_t seed) {
  return fit_mlp_impl(train, cfg, MrdConfig{}, nullptr, seed);
}

MlpFitResult fit_mrd_mlp(const Dataset& train, const MlpConfig& cfg,
                         const MrdConfig& mrd, const ConditionalLaw& law,
                         std::uint64_t seed) {
  return fit_mlp_impl(train, cfg, mrd, &law, seed);
}

double mlp_validation_mse(const Dataset& train, const MlpConfig& cfg,
                          std::uint64_t seed) {
  SplitIndices split =
      split_train_test(train.n(), 0.8, derive_seed(seed, "mlp-holdout"));
  const Dataset fit_part = select_rows(train, split.train);
  const Dataset valid = select_rows(train, split.test);
  MlpFitResult fit = fit_mlp(fit_part, cfg, seed);
  const Eigen::VectorXd pred = fit.model.predict(valid.x);
  const double y_std = fit.model.standardization().y_std;
  return ((valid.y - pred) / y_std).squaredNorm() /
         static_cast<double>(valid.n());
}

}  // namespace mrd
