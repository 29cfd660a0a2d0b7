#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "mrd/rng.hpp"

namespace mrd {

struct GaussianModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  int dim() const { return static_cast<int>(mean.size()); }
};

// Default ridge added to empirical covariances: 1e-6 * trace / d.
double default_gaussian_ridge(const Eigen::MatrixXd& x);

// Column means + population covariance + ridge * I.  Throws
// SingularCovarianceError when the result is not positive definite.
GaussianModel fit_gaussian(const Eigen::MatrixXd& x, double ridge);

struct ConditionalMoments {
  double mean = 0.0;
  double var = 0.0;
};

// Exact Gaussian conditional of X_j given X_{-j} = x_minus_j, computed by a
// direct Schur-complement solve.  x_minus_j stacks the coordinates in index
// order with j removed.
ConditionalMoments gaussian_conditional_law(const GaussianModel& model, int j,
                                            const Eigen::VectorXd& x_minus_j);

struct GmmModel {
  Eigen::VectorXd weights;
  std::vector<GaussianModel> components;

  int dim() const {
    return components.empty() ? 0 : components.front().dim();
  }
  int num_components() const { return static_cast<int>(components.size()); }
};

// EM with seeded random-responsibility initialization.  The log-likelihood is
// non-decreasing across iterations; stops when the relative improvement drops
// below tol or max_iter is reached.  Throws DegenerateComponentError when a
// component loses essentially all of its mass.
GmmModel fit_gmm(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                 int max_iter = 200, double tol = 1e-8,
                 std::vector<double>* ll_trace = nullptr);

double gmm_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& x);

namespace detail {
// M-step from a responsibility matrix (n x k); exposed so the degenerate
// component path can be exercised directly.
GmmModel gmm_m_step(const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& responsibilities);
}  // namespace detail

// One draw from the GMM conditional of X_j given X_{-j}: picks a component by
// its posterior given x_minus_j (log-space), then draws from that component's
// Gaussian conditional.
double gmm_conditional_sample(const GmmModel& model, int j,
                              const Eigen::VectorXd& x_minus_j, Rng& rng);

// Squared Euclidean distance between the empirical cross-covariance vectors
// cov(X_j, X_{-j}) and cov(dummy_col, X_{-j}).  Zero when the dummy column
// reproduces the original exactly; callers sum over j for a whole-design
// diagnostic.
double covariance_gof(const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& dummy_col, int j);

// Draws a whole dummy column for one feature against a fixed conditioning
// matrix.  Construction precomputes the per-row conditional parameters, so a
// draw costs O(n) (Gaussian) or O(n * k) (mixture).
class ColumnSampler {
 public:
  virtual ~ColumnSampler() = default;
  virtual Eigen::VectorXd draw(Rng& rng) const = 0;
};

// A sampleable model of X_j | X_{-j} for every feature j.  Never sees Y.
class ConditionalLaw {
 public:
  virtual ~ConditionalLaw() = default;
  virtual int dim() const = 0;
  virtual std::unique_ptr<ColumnSampler> column_sampler(
      const Eigen::MatrixXd& x, int j) const = 0;

  // JSON document (means/covariances/weights) for reuse across CLI runs.
  virtual std::string to_json() const = 0;
  static std::unique_ptr<ConditionalLaw> from_json(const std::string& text);
};

class GaussianLaw final : public ConditionalLaw {
 public:
  explicit GaussianLaw(GaussianModel model);

  int dim() const override { return model_.dim(); }
  std::unique_ptr<ColumnSampler> column_sampler(const Eigen::MatrixXd& x,
                                                int j) const override;
  std::string to_json() const override;

  const GaussianModel& model() const { return model_; }
  // Cached regression weights: conditional mean of X_j is
  // mean_j + sum_{k != j} reg(j, k) * (x_k - mean_k).
  const Eigen::MatrixXd& regression_weights() const { return regression_; }
  double conditional_sd(int j) const { return cond_sd_[j]; }

 private:
  GaussianModel model_;
  Eigen::MatrixXd regression_;  // d x d, zero diagonal
  Eigen::VectorXd cond_sd_;
};

class GmmLaw final : public ConditionalLaw {
 public:
  explicit GmmLaw(GmmModel model);

  int dim() const override { return model_.dim(); }
  std::unique_ptr<ColumnSampler> column_sampler(const Eigen::MatrixXd& x,
                                                int j) const override;
  std::string to_json() const override;

  const GmmModel& model() const { return model_; }

 private:
  GmmModel model_;
};

// Exact conditional law of a multivariate Student-t design (used when testing
// with the generative law of heavy-tailed synthetic data).
class StudentTLaw final : public ConditionalLaw {
 public:
  // scale is the t scale matrix; dof > 2.
  StudentTLaw(Eigen::MatrixXd scale, double dof);

  int dim() const override { return static_cast<int>(scale_.rows()); }
  std::unique_ptr<ColumnSampler> column_sampler(const Eigen::MatrixXd& x,
                                                int j) const override;
  std::string to_json() const override;

  const Eigen::MatrixXd& scale() const { return scale_; }
  double dof() const { return dof_; }

 private:
  Eigen::MatrixXd scale_;
  double dof_;
};

// Dummy matrix for a subset of features: entry (i, s) is an independent draw
// of feature subset[s] conditional on row i of x.  Per-feature streams are
// derived as derive_seed(seed, "dummy-column", {j}), so each column is
// reproducible independently of which other features are requested.
Eigen::MatrixXd sample_dummies(const ConditionalLaw& law,
                               const Eigen::MatrixXd& x,
                               const std::vector<int>& subset,
                               std::uint64_t seed);

// Per-feature samplers prebuilt against a fixed conditioning matrix; sample()
// reproduces sample_dummies(law, x, ...) bit for bit but amortizes the
// conditional-parameter computation across repeated draws (iterative fitters
// resample every iteration).
class DummySamplerBank {
 public:
  DummySamplerBank(const ConditionalLaw& law, const Eigen::MatrixXd& x);

  Eigen::MatrixXd sample(const std::vector<int>& subset,
                         std::uint64_t seed) const;

 private:
  std::vector<std::unique_ptr<ColumnSampler>> samplers_;
  Eigen::Index rows_;
};

}  // namespace mrd
