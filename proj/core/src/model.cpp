#include "mrd/model.hpp"

#include <cmath>

#include "json.hpp"
#include "json_util.hpp"
#include "mrd/errors.hpp"

namespace mrd {

using json = nlohmann::json;
using jsonutil::matrix_from_json;
using jsonutil::matrix_to_json;
using jsonutil::vector_from_json;
using jsonutil::vector_to_json;

namespace {

json params_to_json(const StandardizationParams& p) {
  json out;
  out["feature_means"] = vector_to_json(p.feature_means);
  out["feature_stds"] = vector_to_json(p.feature_stds);
  out["y_mean"] = p.y_mean;
  out["y_std"] = p.y_std;
  return out;
}

StandardizationParams params_from_json(const json& doc) {
  StandardizationParams p;
  p.feature_means = vector_from_json(doc.at("feature_means"));
  p.feature_stds = vector_from_json(doc.at("feature_stds"));
  p.y_mean = doc.at("y_mean").get<double>();
  p.y_std = doc.at("y_std").get<double>();
  return p;
}

}  // namespace

Eigen::VectorXd Model::predict_column_swap(const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& base_pred,
                                           int j,
                                           const Eigen::VectorXd& col) const {
  (void)base_pred;
  Eigen::MatrixXd swapped = x;
  swapped.col(j) = col;
  return predict(swapped);
}

// ---------------------------------------------------------------------------
// LinearModel

LinearModel::LinearModel(Eigen::VectorXd beta, StandardizationParams params,
                         double intercept)
    : beta_(std::move(beta)), intercept_(intercept), params_(std::move(params)) {
  if (beta_.size() != params_.feature_means.size()) {
    throw ShapeError("beta length does not match standardization params");
  }
  if (!beta_.allFinite()) {
    throw std::invalid_argument("non-finite coefficients");
  }
}

Eigen::VectorXd LinearModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != beta_.size()) {
    throw ShapeError("feature count mismatch in predict");
  }
  Eigen::MatrixXd x_std = apply_standardization(x, params_);
  Eigen::VectorXd pred_std = (x_std * beta_).array() + intercept_;
  return (pred_std.array() * params_.y_std + params_.y_mean).matrix();
}

Eigen::VectorXd LinearModel::predict_column_swap(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& base_pred, int j,
    const Eigen::VectorXd& col) const {
  if (j < 0 || j >= num_features()) {
    throw std::invalid_argument("feature index out of range");
  }
  if (base_pred.size() != x.rows() || col.size() != x.rows()) {
    throw ShapeError("prediction/column length mismatch");
  }
  // Only the j-th additive term changes under a column swap.
  const double scale = params_.y_std * beta_[j] / params_.feature_stds[j];
  return base_pred + scale * (col - x.col(j));
}

std::string LinearModel::to_json() const {
  json doc;
  doc["type"] = "linear";
  doc["beta"] = vector_to_json(beta_);
  doc["intercept"] = intercept_;
  doc["standardization"] = params_to_json(params_);
  return doc.dump();
}

// ---------------------------------------------------------------------------
// MlpModel

MlpModel::MlpModel(Eigen::VectorXd gate, Eigen::MatrixXd w1, Eigen::VectorXd b1,
                   Eigen::VectorXd w2, double b2, StandardizationParams params)
    : gate_(std::move(gate)),
      w1_(std::move(w1)),
      b1_(std::move(b1)),
      w2_(std::move(w2)),
      b2_(b2),
      params_(std::move(params)) {
  if (w1_.cols() != gate_.size() || w1_.rows() != b1_.size() ||
      w2_.size() != b1_.size()) {
    throw ShapeError("inconsistent layer shapes");
  }
  if (!gate_.allFinite() || !w1_.allFinite() || !b1_.allFinite() ||
      !w2_.allFinite() || !std::isfinite(b2_)) {
    throw std::invalid_argument("non-finite weights");
  }
}

Eigen::VectorXd MlpModel::forward_standardized(
    const Eigen::MatrixXd& x_std) const {
  const Eigen::VectorXd gate_act =
      (1.0 / (1.0 + (-gate_.array()).exp())).matrix();
  Eigen::MatrixXd gated = x_std.array().rowwise() *
                          gate_act.transpose().array();
  Eigen::MatrixXd hidden = (gated * w1_.transpose()).rowwise() + b1_.transpose();
  hidden = hidden.cwiseMax(0.0);
  return (hidden * w2_).array() + b2_;
}

Eigen::VectorXd MlpModel::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != gate_.size()) {
    throw ShapeError("feature count mismatch in predict");
  }
  Eigen::MatrixXd x_std = apply_standardization(x, params_);
  Eigen::VectorXd pred_std = forward_standardized(x_std);
  return (pred_std.array() * params_.y_std + params_.y_mean).matrix();
}

std::string MlpModel::to_json() const {
  json doc;
  doc["type"] = "mlp";
  doc["gate"] = vector_to_json(gate_);
  doc["w1"] = matrix_to_json(w1_);
  doc["b1"] = vector_to_json(b1_);
  doc["w2"] = vector_to_json(w2_);
  doc["b2"] = b2_;
  doc["standardization"] = params_to_json(params_);
  return doc.dump();
}

std::unique_ptr<Model> Model::from_json(const std::string& text) {
  json doc = json::parse(text);
  const std::string type = doc.at("type").get<std::string>();
  if (type == "linear") {
    return std::make_unique<LinearModel>(
        vector_from_json(doc.at("beta")),
        params_from_json(doc.at("standardization")),
        doc.at("intercept").get<double>());
  }
  if (type == "mlp") {
    return std::make_unique<MlpModel>(
        vector_from_json(doc.at("gate")), matrix_from_json(doc.at("w1")),
        vector_from_json(doc.at("b1")), vector_from_json(doc.at("w2")),
        doc.at("b2").get<double>(),
        params_from_json(doc.at("standardization")));
  }
  throw ConfigError("unknown model type '" + type + "'");
}

}  // namespace mrd
