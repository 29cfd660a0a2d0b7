#include "mrd/datagen.hpp"

#include <cmath>
#include <stdexcept>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

void validate(const DesignSpec& spec) {
  if (spec.n < 1 || spec.d < 2) {
    throw std::invalid_argument("design needs n >= 1 and d >= 2");
  }
  switch (spec.family) {
    case DesignSpec::Family::kAr1Gaussian:
      if (!(std::abs(spec.rho) < 1.0)) {
        throw std::invalid_argument("|rho| must be < 1");
      }
      break;
    case DesignSpec::Family::kGmmMixture:
      if (spec.rhos.empty()) {
        throw std::invalid_argument("mixture needs at least one rho");
      }
      for (double r : spec.rhos) {
        if (!(std::abs(r) < 1.0)) {
          throw std::invalid_argument("|rho| must be < 1");
        }
      }
      break;
    case DesignSpec::Family::kStudentT:
      if (!(std::abs(spec.rho) < 1.0)) {
        throw std::invalid_argument("|rho| must be < 1");
      }
      if (!(spec.nu > 2.0)) {
        throw std::invalid_argument("t design needs nu > 2");
      }
      break;
  }
}

Eigen::MatrixXd ar1_covariance(int d, double rho) {
  Eigen::MatrixXd cov(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      cov(i, j) = std::pow(rho, std::abs(i - j));
    }
  }
  return cov;
}

namespace {

// One AR(1) Gaussian row: x_0 ~ N(0,1), x_k = rho x_{k-1} + sqrt(1-rho^2) z.
// Exact for the rho^|i-j| covariance and O(d) per row.
Eigen::RowVectorXd ar1_row(int d, double rho, Rng& rng) {
  Eigen::RowVectorXd row(d);
  const double scale = std::sqrt(1.0 - rho * rho);
  row(0) = rng.normal();
  for (int j = 1; j < d; ++j) {
    row(j) = rho * row(j - 1) + scale * rng.normal();
  }
  return row;
}

}  // namespace

Eigen::MatrixXd gen_design(const DesignSpec& spec) {
  validate(spec);
  Eigen::MatrixXd x(spec.n, spec.d);
  Rng rng(derive_seed(spec.seed, "design"));
  switch (spec.family) {
    case DesignSpec::Family::kAr1Gaussian: {
      for (int i = 0; i < spec.n; ++i) {
        x.row(i) = ar1_row(spec.d, spec.rho, rng);
      }
      break;
    }
    case DesignSpec::Family::kGmmMixture: {
      const int k = static_cast<int>(spec.rhos.size());
      for (int i = 0; i < spec.n; ++i) {
        const int c = rng.uniform_int(k);
        x.row(i) = ar1_row(spec.d, spec.rhos[static_cast<std::size_t>(c)], rng);
      }
      break;
    }
    case DesignSpec::Family::kStudentT: {
      // X = Z / sqrt(W / nu) with Z Gaussian under the scale matrix
      // Sigma * (nu - 2) / nu, so that Cov(X) equals the AR(1) matrix.
      const double shrink = std::sqrt((spec.nu - 2.0) / spec.nu);
      for (int i = 0; i < spec.n; ++i) {
        x.row(i) = ar1_row(spec.d, spec.rho, rng);
        const double w = rng.chi_square(spec.nu);
        x.row(i) *= shrink / std::sqrt(w / spec.nu);
      }
      break;
    }
  }
  return x;
}

std::unique_ptr<ConditionalLaw> true_law(const DesignSpec& spec) {
  validate(spec);
  switch (spec.family) {
    case DesignSpec::Family::kAr1Gaussian: {
      GaussianModel m;
      m.mean = Eigen::VectorXd::Zero(spec.d);
      m.covariance = ar1_covariance(spec.d, spec.rho);
      return std::make_unique<GaussianLaw>(std::move(m));
    }
    case DesignSpec::Family::kGmmMixture: {
      GmmModel m;
      const int k = static_cast<int>(spec.rhos.size());
      m.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
      for (double r : spec.rhos) {
        GaussianModel comp;
        comp.mean = Eigen::VectorXd::Zero(spec.d);
        comp.covariance = ar1_covariance(spec.d, r);
        m.components.push_back(std::move(comp));
      }
      return std::make_unique<GmmLaw>(std::move(m));
    }
    case DesignSpec::Family::kStudentT: {
      Eigen::MatrixXd scale =
          ar1_covariance(spec.d, spec.rho) * ((spec.nu - 2.0) / spec.nu);
      return std::make_unique<StudentTLaw>(std::move(scale), spec.nu);
    }
  }
  throw std::logic_error("unreachable");
}

GroundTruth gen_beta(int d, double sparsity, double c, std::uint64_t seed) {
  if (d < 1) {
    throw std::invalid_argument("d must be positive");
  }
  if (!(sparsity > 0.0 && sparsity <= 1.0)) {
    throw std::invalid_argument("sparsity must lie in (0, 1]");
  }
  if (c < 0.0) {
    throw std::invalid_argument("amplitude must be nonnegative");
  }
  GroundTruth truth;
  truth.beta = Eigen::VectorXd::Zero(d);
  if (c == 0.0) {
    return truth;
  }
  const int k = static_cast<int>(std::llround(sparsity * d));
  if (k < 1) {
    throw std::invalid_argument("sparsity * d rounds to zero non-nulls");
  }
  Rng rng(derive_seed(seed, "beta"));
  truth.nonnull = rng.sample_without_replacement(d, k);
  for (int j : truth.nonnull) {
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    truth.beta[j] = sign * c;
  }
  return truth;
}

GroundTruth ground_truth_for(const ResponseSpec& spec, int d) {
  if (spec.model == ResponseSpec::Model::kM4) {
    if (d < 30) {
      throw std::invalid_argument("interaction model needs d >= 30");
    }
    GroundTruth truth;
    truth.beta = Eigen::VectorXd::Zero(d);
    for (int j = 0; j < 30; ++j) {
      truth.nonnull.push_back(j);
    }
    return truth;
  }
  return gen_beta(d, spec.sparsity, spec.amplitude, spec.seed);
}

Eigen::VectorXd gen_response(const Eigen::MatrixXd& x, const ResponseSpec& spec,
                             const GroundTruth& truth) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (spec.model != ResponseSpec::Model::kM4 && truth.beta.size() != d) {
    throw ShapeError("beta length does not match feature count");
  }
  Eigen::VectorXd g(n);
  switch (spec.model) {
    case ResponseSpec::Model::kM1:
      g = x * truth.beta;
      break;
    case ResponseSpec::Model::kM2:
      g = (x * truth.beta).array().cube() / 2.0;
      break;
    case ResponseSpec::Model::kM3: {
      g.setZero();
      for (int j : truth.nonnull) {
        g.array() += (x.col(j).array() * truth.beta[j]).sin();
      }
      break;
    }
    case ResponseSpec::Model::kM4: {
      if (d < 30) {
        throw std::invalid_argument("interaction model needs d >= 30");
      }
      g.setZero();
      // Pairwise products of the first 30 features: columns (0,1), ..., (28,29).
      for (int p = 0; p < 15; ++p) {
        g.array() += x.col(2 * p).array() * x.col(2 * p + 1).array();
      }
      break;
    }
  }
  Rng rng(derive_seed(spec.seed, "noise"));
  for (int i = 0; i < n; ++i) {
    g[i] += spec.noise_sd * rng.normal();
  }
  return g;
}

}  // namespace mrd
