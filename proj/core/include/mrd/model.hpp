#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "mrd/dataset.hpp"

namespace mrd {

// A trained predictor.  Models store the standardization estimated on their
// training split: predict() takes raw features and returns raw-scale
// predictions.  Immutable after construction and safe to share across
// threads.
class Model {
 public:
  virtual ~Model() = default;

  virtual int num_features() const = 0;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& x) const = 0;

  // Predictions after replacing column j of x by col.  base_pred must be
  // predict(x); the default materializes the swapped matrix, concrete models
  // may shortcut.
  virtual Eigen::VectorXd predict_column_swap(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& base_pred,
                                              int j,
                                              const Eigen::VectorXd& col) const;

  virtual const StandardizationParams& standardization() const = 0;

  virtual std::string to_json() const = 0;
  static std::unique_ptr<Model> from_json(const std::string& text);
};

class LinearModel final : public Model {
 public:
  LinearModel(Eigen::VectorXd beta, StandardizationParams params,
              double intercept = 0.0);

  int num_features() const override {
    return static_cast<int>(beta_.size());
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  Eigen::VectorXd predict_column_swap(const Eigen::MatrixXd& x,
                                      const Eigen::VectorXd& base_pred, int j,
                                      const Eigen::VectorXd& col) const override;
  const StandardizationParams& standardization() const override {
    return params_;
  }
  std::string to_json() const override;

  // Coefficients in standardized feature/response space.
  const Eigen::VectorXd& beta() const { return beta_; }
  double intercept() const { return intercept_; }

 private:
  Eigen::VectorXd beta_;
  double intercept_;
  StandardizationParams params_;
};

// Two-layer perceptron with a sigmoid input gate, ReLU hidden layer, and
// linear output; dropout is a training-time concern, inference is
// deterministic.
class MlpModel final : public Model {
 public:
  MlpModel(Eigen::VectorXd gate, Eigen::MatrixXd w1, Eigen::VectorXd b1,
           Eigen::VectorXd w2, double b2, StandardizationParams params);

  int num_features() const override {
    return static_cast<int>(gate_.size());
  }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override;
  const StandardizationParams& standardization() const override {
    return params_;
  }
  std::string to_json() const override;

  const Eigen::VectorXd& gate() const { return gate_; }
  const Eigen::MatrixXd& w1() const { return w1_; }
  const Eigen::VectorXd& b1() const { return b1_; }
  const Eigen::VectorXd& w2() const { return w2_; }
  double b2() const { return b2_; }

  // Forward pass in standardized space (no dropout).
  Eigen::VectorXd forward_standardized(const Eigen::MatrixXd& x_std) const;

 private:
  Eigen::VectorXd gate_;
  Eigen::MatrixXd w1_;  // hidden x d
  Eigen::VectorXd b1_;  // hidden
  Eigen::VectorXd w2_;  // hidden
  double b2_;
  StandardizationParams params_;
};

}  // namespace mrd
