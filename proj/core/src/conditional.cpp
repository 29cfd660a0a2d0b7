#include "mrd/conditional.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"
#include "json_util.hpp"
#include "mrd/errors.hpp"

namespace mrd {

using json = nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Eigen::MatrixXd drop_row_col(const Eigen::MatrixXd& m, int j) {
  const int d = static_cast<int>(m.rows());
  Eigen::MatrixXd out(d - 1, d - 1);
  for (int r = 0, ro = 0; r < d; ++r) {
    if (r == j) continue;
    for (int c = 0, co = 0; c < d; ++c) {
      if (c == j) continue;
      out(ro, co) = m(r, c);
      ++co;
    }
    ++ro;
  }
  return out;
}

Eigen::VectorXd drop_entry(const Eigen::VectorXd& v, int j) {
  const int d = static_cast<int>(v.size());
  Eigen::VectorXd out(d - 1);
  for (int i = 0, o = 0; i < d; ++i) {
    if (i == j) continue;
    out(o++) = v(i);
  }
  return out;
}

Eigen::VectorXd column_of_without(const Eigen::MatrixXd& m, int j) {
  // Column j of m with the j-th entry removed.
  return drop_entry(m.col(j), j);
}

// Schur-complement split of a Gaussian: everything needed to evaluate the
// conditional of coordinate j given the rest.
struct CondSplit {
  double mu_j = 0.0;
  Eigen::VectorXd mu_rest;
  Eigen::VectorXd w;  // regression weights; conditional mean = mu_j + w'(x - mu_rest)
  double cond_var = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_rest;
  double logdet_rest = 0.0;
};

CondSplit make_cond_split(const GaussianModel& model, int j) {
  const int d = model.dim();
  if (j < 0 || j >= d) {
    throw std::invalid_argument("feature index out of range");
  }
  CondSplit split;
  split.mu_j = model.mean(j);
  if (d == 1) {
    split.mu_rest.resize(0);
    split.w.resize(0);
    split.cond_var = model.covariance(0, 0);
    return split;
  }
  split.mu_rest = drop_entry(model.mean, j);
  const Eigen::MatrixXd rest = drop_row_col(model.covariance, j);
  const Eigen::VectorXd cross = column_of_without(model.covariance, j);
  split.llt_rest.compute(rest);
  if (split.llt_rest.info() != Eigen::Success) {
    throw SingularCovarianceError(
        "conditioning covariance block is not positive definite");
  }
  split.w = split.llt_rest.solve(cross);
  split.cond_var = model.covariance(j, j) - cross.dot(split.w);
  if (!(split.cond_var > 0.0)) {
    throw SingularCovarianceError("non-positive conditional variance");
  }
  split.logdet_rest = 0.0;
  const auto& l = split.llt_rest.matrixLLT();
  for (int i = 0; i < d - 1; ++i) {
    split.logdet_rest += 2.0 * std::log(l(i, i));
  }
  return split;
}

double log_gaussian_density(const CondSplit& split,
                            const Eigen::VectorXd& x_rest) {
  // Marginal density of the conditioning block.
  const int p = static_cast<int>(x_rest.size());
  if (p == 0) {
    return 0.0;
  }
  Eigen::VectorXd c = x_rest - split.mu_rest;
  const double quad = c.dot(split.llt_rest.solve(c));
  return -0.5 * (p * kLog2Pi + split.logdet_rest + quad);
}

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) {
    return m;
  }
  return m + std::log((v.array() - m).exp().sum());
}

void check_positive_definite(const Eigen::MatrixXd& cov,
                             const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw SingularCovarianceError(what);
  }
  const double max_eig = es.eigenvalues().maxCoeff();
  if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(1.0, max_eig)) {
    throw SingularCovarianceError(what);
  }
}

}  // namespace

double default_gaussian_ridge(const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  Eigen::RowVectorXd mean = x.colwise().mean();
  double trace = 0.0;
  for (int j = 0; j < d; ++j) {
    trace += (x.col(j).array() - mean(j)).square().sum() / n;
  }
  return 1e-6 * trace / d;
}

GaussianModel fit_gaussian(const Eigen::MatrixXd& x, double ridge) {
  const int n = static_cast<int>(x.rows());
  if (n < 2) {
    throw std::invalid_argument("fit_gaussian needs at least 2 samples");
  }
  if (ridge < 0.0) {
    throw std::invalid_argument("ridge must be nonnegative");
  }
  GaussianModel model;
  model.mean = x.colwise().mean();
  Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();
  model.covariance = (centered.adjoint() * centered) / static_cast<double>(n);
  model.covariance = ((model.covariance + model.covariance.transpose()) / 2.0).eval();
  model.covariance.diagonal().array() += ridge;
  check_positive_definite(model.covariance,
                          "empirical covariance is singular; raise the ridge");
  return model;
}

ConditionalMoments gaussian_conditional_law(const GaussianModel& model, int j,
                                            const Eigen::VectorXd& x_minus_j) {
  if (x_minus_j.size() != model.dim() - 1) {
    throw ShapeError("conditioning vector must have length d - 1");
  }
  CondSplit split = make_cond_split(model, j);
  ConditionalMoments out;
  out.var = split.cond_var;
  out.mean = split.mu_j +
             (x_minus_j.size() > 0 ? split.w.dot(x_minus_j - split.mu_rest)
                                   : 0.0);
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian law

GaussianLaw::GaussianLaw(GaussianModel model) : model_(std::move(model)) {
  const int d = model_.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(model_.covariance);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("covariance is not positive definite");
  }
  // Precision matrix gives every per-feature regression in one shot:
  // w_j(k) = -Q(j,k)/Q(j,j), conditional variance 1/Q(j,j).
  Eigen::MatrixXd precision =
      llt.solve(Eigen::MatrixXd::Identity(d, d));
  regression_.resize(d, d);
  cond_sd_.resize(d);
  for (int j = 0; j < d; ++j) {
    const double qjj = precision(j, j);
    if (!(qjj > 0.0)) {
      throw SingularCovarianceError("non-positive precision diagonal");
    }
    for (int k = 0; k < d; ++k) {
      regression_(j, k) = (k == j) ? 0.0 : -precision(j, k) / qjj;
    }
    cond_sd_[j] = std::sqrt(1.0 / qjj);
  }
}

namespace {

class GaussianColumnSampler final : public ColumnSampler {
 public:
  GaussianColumnSampler(Eigen::VectorXd cond_mean, double sd)
      : cond_mean_(std::move(cond_mean)), sd_(sd) {}

  Eigen::VectorXd draw(Rng& rng) const override {
    Eigen::VectorXd out(cond_mean_.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = cond_mean_[i] + sd_ * rng.normal();
    }
    return out;
  }

 private:
  Eigen::VectorXd cond_mean_;
  double sd_;
};

}  // namespace

std::unique_ptr<ColumnSampler> GaussianLaw::column_sampler(
    const Eigen::MatrixXd& x, int j) const {
  if (x.cols() != dim()) {
    throw ShapeError("conditioning matrix has wrong width");
  }
  if (j < 0 || j >= dim()) {
    throw std::invalid_argument("feature index out of range");
  }
  // Zero diagonal in the regression row makes the j-th column drop out.
  Eigen::MatrixXd centered = x.rowwise() - model_.mean.transpose();
  Eigen::VectorXd cond_mean =
      (centered * regression_.row(j).transpose()).array() + model_.mean(j);
  return std::make_unique<GaussianColumnSampler>(std::move(cond_mean),
                                                 cond_sd_[j]);
}

// ---------------------------------------------------------------------------
// Gaussian mixture

namespace detail {

GmmModel gmm_m_step(const Eigen::MatrixXd& x,
                    const Eigen::MatrixXd& responsibilities) {
  const int n = static_cast<int>(x.rows());
  const int k = static_cast<int>(responsibilities.cols());
  GmmModel model;
  model.weights.resize(k);
  model.components.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const Eigen::VectorXd r = responsibilities.col(c);
    const double mass = r.sum();
    if (mass < 1e-8 * n) {
      throw DegenerateComponentError(
          "mixture component " + std::to_string(c) +
          " lost all mass; reduce k or add regularization");
    }
    model.weights[c] = mass / n;
    auto& comp = model.components[static_cast<std::size_t>(c)];
    comp.mean = (x.transpose() * r) / mass;
    Eigen::MatrixXd centered = x.rowwise() - comp.mean.transpose();
    comp.covariance =
        (centered.transpose() * (centered.array().colwise() * r.array()).matrix()) /
        mass;
    comp.covariance =
        ((comp.covariance + comp.covariance.transpose()) / 2.0).eval();
    // Eigenvalue floor keeps every component usable for conditioning.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(comp.covariance);
    if (es.info() != Eigen::Success) {
      throw DegenerateComponentError("component covariance decomposition failed");
    }
    Eigen::VectorXd evals = es.eigenvalues().cwiseMax(1e-6);
    comp.covariance = es.eigenvectors() * evals.asDiagonal() *
                      es.eigenvectors().transpose();
  }
  model.weights /= model.weights.sum();
  return model;
}

}  // namespace detail

namespace {

// Log density of every sample under every component: n x k.
Eigen::MatrixXd gmm_log_densities(const GmmModel& model,
                                  const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int k = model.num_components();
  Eigen::MatrixXd logd(n, k);
  for (int c = 0; c < k; ++c) {
    const auto& comp = model.components[static_cast<std::size_t>(c)];
    Eigen::LLT<Eigen::MatrixXd> llt(comp.covariance);
    if (llt.info() != Eigen::Success) {
      throw SingularCovarianceError("component covariance not positive definite");
    }
    double logdet = 0.0;
    for (int i = 0; i < d; ++i) {
      logdet += 2.0 * std::log(llt.matrixLLT()(i, i));
    }
    Eigen::MatrixXd centered = x.rowwise() - comp.mean.transpose();
    // Solve L z = centered' column-wise; quad form = |z|^2 per sample.
    Eigen::MatrixXd z = llt.matrixL().solve(centered.transpose());
    Eigen::VectorXd quad = z.colwise().squaredNorm();
    logd.col(c) =
        (-0.5 * (d * kLog2Pi + logdet + quad.array())).matrix();
  }
  return logd;
}

}  // namespace

double gmm_log_likelihood(const GmmModel& model, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd logd = gmm_log_densities(model, x);
  for (int c = 0; c < model.num_components(); ++c) {
    logd.col(c).array() += std::log(model.weights[c]);
  }
  double ll = 0.0;
  for (int i = 0; i < logd.rows(); ++i) {
    ll += logsumexp(logd.row(i).transpose());
  }
  return ll;
}

GmmModel fit_gmm(const Eigen::MatrixXd& x, int k, std::uint64_t seed,
                 int max_iter, double tol, std::vector<double>* ll_trace) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (k < 1) {
    throw std::invalid_argument("k must be at least 1");
  }
  if (n < k * (d + 1)) {
    throw std::invalid_argument("need n >= k * (d + 1) samples to fit a GMM");
  }
  if (max_iter < 1) {
    throw std::invalid_argument("max_iter must be at least 1");
  }

  // Seeded random responsibilities.
  Rng rng(derive_seed(seed, "gmm-init"));
  Eigen::MatrixXd resp(n, k);
  for (int i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (int c = 0; c < k; ++c) {
      resp(i, c) = 0.05 + rng.uniform();
      row_sum += resp(i, c);
    }
    resp.row(i) /= row_sum;
  }

  GmmModel model = detail::gmm_m_step(x, resp);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // E-step.
    Eigen::MatrixXd logd = gmm_log_densities(model, x);
    for (int c = 0; c < k; ++c) {
      logd.col(c).array() += std::log(model.weights[c]);
    }
    double ll = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lse = logsumexp(logd.row(i).transpose());
      ll += lse;
      resp.row(i) = (logd.row(i).array() - lse).exp();
    }
    if (ll_trace) {
      ll_trace->push_back(ll);
    }
    if (std::isfinite(prev_ll)) {
      const double rel = (ll - prev_ll) / (std::abs(prev_ll) + 1e-12);
      if (rel < tol) {
        break;
      }
    }
    prev_ll = ll;
    model = detail::gmm_m_step(x, resp);
  }
  return model;
}

double gmm_conditional_sample(const GmmModel& model, int j,
                              const Eigen::VectorXd& x_minus_j, Rng& rng) {
  const int k = model.num_components();
  if (k < 1) {
    throw std::invalid_argument("empty mixture");
  }
  Eigen::VectorXd log_post(k);
  std::vector<ConditionalMoments> moments(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto& comp = model.components[static_cast<std::size_t>(c)];
    CondSplit split = make_cond_split(comp, j);
    log_post[c] = std::log(model.weights[c]) +
                  log_gaussian_density(split, x_minus_j);
    auto& m = moments[static_cast<std::size_t>(c)];
    m.var = split.cond_var;
    m.mean = split.mu_j + (x_minus_j.size() > 0
                               ? split.w.dot(x_minus_j - split.mu_rest)
                               : 0.0);
  }
  const double lse = logsumexp(log_post);
  if (!std::isfinite(lse)) {
    throw NumericalUnderflowError(
        "all mixture component densities underflowed");
  }
  Eigen::VectorXd probs = (log_post.array() - lse).exp();
  // Draw the component, then its Gaussian conditional.
  double u = rng.uniform();
  int pick = k - 1;
  double acc = 0.0;
  for (int c = 0; c < k; ++c) {
    acc += probs[c];
    if (u < acc) {
      pick = c;
      break;
    }
  }
  const auto& m = moments[static_cast<std::size_t>(pick)];
  return m.mean + std::sqrt(m.var) * rng.normal();
}

GmmLaw::GmmLaw(GmmModel model) : model_(std::move(model)) {
  if (model_.num_components() < 1) {
    throw std::invalid_argument("mixture needs at least one component");
  }
  const double wsum = model_.weights.sum();
  if (model_.weights.minCoeff() < 0.0 || std::abs(wsum - 1.0) > 1e-10) {
    throw std::invalid_argument("mixture weights must be a probability vector");
  }
}

namespace {

class GmmColumnSampler final : public ColumnSampler {
 public:
  // post, mean: n x k; sd: k.
  GmmColumnSampler(Eigen::MatrixXd post, Eigen::MatrixXd mean,
                   Eigen::VectorXd sd)
      : post_(std::move(post)), mean_(std::move(mean)), sd_(std::move(sd)) {}

  Eigen::VectorXd draw(Rng& rng) const override {
    const int n = static_cast<int>(post_.rows());
    const int k = static_cast<int>(post_.cols());
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform();
      int pick = k - 1;
      double acc = 0.0;
      for (int c = 0; c < k; ++c) {
        acc += post_(i, c);
        if (u < acc) {
          pick = c;
          break;
        }
      }
      out[i] = mean_(i, pick) + sd_[pick] * rng.normal();
    }
    return out;
  }

 private:
  Eigen::MatrixXd post_;
  Eigen::MatrixXd mean_;
  Eigen::VectorXd sd_;
};

}  // namespace

std::unique_ptr<ColumnSampler> GmmLaw::column_sampler(const Eigen::MatrixXd& x,
                                                      int j) const {
  const int n = static_cast<int>(x.rows());
  const int d = dim();
  const int k = model_.num_components();
  if (x.cols() != d) {
    throw ShapeError("conditioning matrix has wrong width");
  }
  Eigen::MatrixXd log_post(n, k);
  Eigen::MatrixXd cond_mean(n, k);
  Eigen::VectorXd cond_sd(k);
  for (int c = 0; c < k; ++c) {
    const auto& comp = model_.components[static_cast<std::size_t>(c)];
    CondSplit split = make_cond_split(comp, j);
    cond_sd[c] = std::sqrt(split.cond_var);
    const double logw = std::log(model_.weights[c]);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd rest = drop_entry(x.row(i).transpose(), j);
      log_post(i, c) = logw + log_gaussian_density(split, rest);
      cond_mean(i, c) =
          split.mu_j +
          (rest.size() > 0 ? split.w.dot(rest - split.mu_rest) : 0.0);
    }
  }
  Eigen::MatrixXd post(n, k);
  for (int i = 0; i < n; ++i) {
    const double lse = logsumexp(log_post.row(i).transpose());
    if (!std::isfinite(lse)) {
      throw NumericalUnderflowError(
          "all mixture component densities underflowed");
    }
    post.row(i) = (log_post.row(i).array() - lse).exp();
  }
  return std::make_unique<GmmColumnSampler>(std::move(post),
                                            std::move(cond_mean),
                                            std::move(cond_sd));
}

// ---------------------------------------------------------------------------
// Student-t law

StudentTLaw::StudentTLaw(Eigen::MatrixXd scale, double dof)
    : scale_(std::move(scale)), dof_(dof) {
  if (scale_.rows() != scale_.cols()) {
    throw ShapeError("scale matrix must be square");
  }
  if (!(dof_ > 2.0)) {
    throw std::invalid_argument("t law needs dof > 2");
  }
  check_positive_definite(scale_, "t scale matrix not positive definite");
}

namespace {

class StudentTColumnSampler final : public ColumnSampler {
 public:
  StudentTColumnSampler(Eigen::VectorXd loc, Eigen::VectorXd scale, double dof)
      : loc_(std::move(loc)), scale_(std::move(scale)), dof_(dof) {}

  Eigen::VectorXd draw(Rng& rng) const override {
    Eigen::VectorXd out(loc_.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      out[i] = loc_[i] + scale_[i] * rng.student_t(dof_);
    }
    return out;
  }

 private:
  Eigen::VectorXd loc_;
  Eigen::VectorXd scale_;
  double dof_;
};

}  // namespace

std::unique_ptr<ColumnSampler> StudentTLaw::column_sampler(
    const Eigen::MatrixXd& x, int j) const {
  const int n = static_cast<int>(x.rows());
  const int d = dim();
  if (x.cols() != d) {
    throw ShapeError("conditioning matrix has wrong width");
  }
  // Conditional of a zero-mean multivariate t: location is the Gaussian
  // formula on the scale matrix, the scale inflates with the Mahalanobis
  // distance of the conditioning block, and the dof grows to dof + d - 1.
  GaussianModel as_gaussian{Eigen::VectorXd::Zero(d), scale_};
  CondSplit split = make_cond_split(as_gaussian, j);
  const double cond_dof = dof_ + (d - 1);
  Eigen::VectorXd loc(n);
  Eigen::VectorXd sc(n);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd rest = drop_entry(x.row(i).transpose(), j);
    double quad = 0.0;
    if (rest.size() > 0) {
      quad = rest.dot(split.llt_rest.solve(rest));
      loc[i] = split.w.dot(rest);
    } else {
      loc[i] = 0.0;
    }
    sc[i] = std::sqrt(split.cond_var * (dof_ + quad) / cond_dof);
  }
  return std::make_unique<StudentTColumnSampler>(std::move(loc), std::move(sc),
                                                 cond_dof);
}

// ---------------------------------------------------------------------------
// Cross-covariance diagnostic

double covariance_gof(const Eigen::MatrixXd& x,
                      const Eigen::VectorXd& dummy_col, int j) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (dummy_col.size() != n) {
    throw ShapeError("dummy column length does not match sample count");
  }
  if (j < 0 || j >= d) {
    throw std::invalid_argument("feature index out of range");
  }
  const Eigen::VectorXd orig = x.col(j);
  const double mean_orig = orig.mean();
  const double mean_dummy = dummy_col.mean();
  double dist = 0.0;
  for (int k = 0; k < d; ++k) {
    if (k == j) continue;
    const Eigen::VectorXd other = x.col(k);
    const double mean_other = other.mean();
    const double cov_orig =
        ((orig.array() - mean_orig) * (other.array() - mean_other)).sum() / n;
    const double cov_dummy =
        ((dummy_col.array() - mean_dummy) * (other.array() - mean_other))
            .sum() /
        n;
    const double diff = cov_orig - cov_dummy;
    dist += diff * diff;
  }
  return dist;
}

Eigen::MatrixXd sample_dummies(const ConditionalLaw& law,
                               const Eigen::MatrixXd& x,
                               const std::vector<int>& subset,
                               std::uint64_t seed) {
  if (subset.empty()) {
    throw std::invalid_argument("feature subset must be non-empty");
  }
  if (x.cols() != law.dim()) {
    throw ShapeError("law dimension does not match the matrix");
  }
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(subset.size()));
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const int j = subset[s];
    auto sampler = law.column_sampler(x, j);
    Rng rng(derive_seed(seed, "dummy-column",
                        {static_cast<std::uint64_t>(j)}));
    out.col(static_cast<Eigen::Index>(s)) = sampler->draw(rng);
  }
  return out;
}

DummySamplerBank::DummySamplerBank(const ConditionalLaw& law,
                                   const Eigen::MatrixXd& x)
    : rows_(x.rows()) {
  if (x.cols() != law.dim()) {
    throw ShapeError("law dimension does not match the matrix");
  }
  samplers_.reserve(static_cast<std::size_t>(law.dim()));
  for (int j = 0; j < law.dim(); ++j) {
    samplers_.push_back(law.column_sampler(x, j));
  }
}

Eigen::MatrixXd DummySamplerBank::sample(const std::vector<int>& subset,
                                         std::uint64_t seed) const {
  if (subset.empty()) {
    throw std::invalid_argument("feature subset must be non-empty");
  }
  Eigen::MatrixXd out(rows_, static_cast<Eigen::Index>(subset.size()));
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const int j = subset[s];
    if (j < 0 || j >= static_cast<int>(samplers_.size())) {
      throw std::invalid_argument("feature index out of range");
    }
    Rng rng(derive_seed(seed, "dummy-column",
                        {static_cast<std::uint64_t>(j)}));
    out.col(static_cast<Eigen::Index>(s)) =
        samplers_[static_cast<std::size_t>(j)]->draw(rng);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

using jsonutil::matrix_from_json;
using jsonutil::matrix_to_json;
using jsonutil::vector_from_json;
using jsonutil::vector_to_json;

std::string GaussianLaw::to_json() const {
  json doc;
  doc["type"] = "gaussian";
  doc["mean"] = vector_to_json(model_.mean);
  doc["covariance"] = matrix_to_json(model_.covariance);
  return doc.dump();
}

std::string GmmLaw::to_json() const {
  json doc;
  doc["type"] = "gmm";
  doc["weights"] = vector_to_json(model_.weights);
  json comps = json::array();
  for (const auto& c : model_.components) {
    json comp;
    comp["mean"] = vector_to_json(c.mean);
    comp["covariance"] = matrix_to_json(c.covariance);
    comps.push_back(std::move(comp));
  }
  doc["components"] = std::move(comps);
  return doc.dump();
}

std::string StudentTLaw::to_json() const {
  json doc;
  doc["type"] = "student_t";
  doc["dof"] = dof_;
  doc["scale"] = matrix_to_json(scale_);
  return doc.dump();
}

std::unique_ptr<ConditionalLaw> ConditionalLaw::from_json(
    const std::string& text) {
  json doc = json::parse(text);
  const std::string type = doc.at("type").get<std::string>();
  if (type == "gaussian") {
    GaussianModel m;
    m.mean = vector_from_json(doc.at("mean"));
    m.covariance = matrix_from_json(doc.at("covariance"));
    return std::make_unique<GaussianLaw>(std::move(m));
  }
  if (type == "gmm") {
    GmmModel m;
    m.weights = vector_from_json(doc.at("weights"));
    for (const auto& comp : doc.at("components")) {
      GaussianModel g;
      g.mean = vector_from_json(comp.at("mean"));
      g.covariance = matrix_from_json(comp.at("covariance"));
      m.components.push_back(std::move(g));
    }
    return std::make_unique<GmmLaw>(std::move(m));
  }
  if (type == "student_t") {
    return std::make_unique<StudentTLaw>(matrix_from_json(doc.at("scale")),
                                         doc.at("dof").get<double>());
  }
  throw ConfigError("unknown conditional law type '" + type + "'");
}

}  // namespace mrd
