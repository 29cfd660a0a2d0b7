#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "mrd/datagen.hpp"
#include "mrd/elastic_net.hpp"
#include "mrd/hrt.hpp"
#include "mrd/model.hpp"
#include "mrd/rng.hpp"

using namespace mrd;

namespace {

StandardizationParams identity_params(int d) {
  StandardizationParams p;
  p.feature_means = Eigen::VectorXd::Zero(d);
  p.feature_stds = Eigen::VectorXd::Ones(d);
  p.y_mean = 0.0;
  p.y_std = 1.0;
  return p;
}

// Law whose sampler always returns a fixed column (test scaffolding).
class FixedColumnLaw final : public ConditionalLaw {
 public:
  FixedColumnLaw(int d, Eigen::VectorXd column)
      : d_(d), column_(std::move(column)) {}
  int dim() const override { return d_; }
  std::unique_ptr<ColumnSampler> column_sampler(const Eigen::MatrixXd& x,
                                                int) const override {
    struct Fixed final : ColumnSampler {
      Eigen::VectorXd col;
      Eigen::VectorXd draw(Rng&) const override { return col; }
    };
    auto out = std::make_unique<Fixed>();
    out->col = column_.head(x.rows());
    return out;
  }
  std::string to_json() const override { return "{}"; }

 private:
  int d_;
  Eigen::VectorXd column_;
};

// Echoes the original column: dummies identical to the data.
class EchoLaw final : public ConditionalLaw {
 public:
  explicit EchoLaw(int d) : d_(d) {}
  int dim() const override { return d_; }
  std::unique_ptr<ColumnSampler> column_sampler(const Eigen::MatrixXd& x,
                                                int j) const override {
    struct Echo final : ColumnSampler {
      Eigen::VectorXd col;
      Eigen::VectorXd draw(Rng&) const override { return col; }
    };
    auto out = std::make_unique<Echo>();
    out->col = x.col(j);
    return out;
  }
  std::string to_json() const override { return "{}"; }

 private:
  int d_;
};

class ConstantModel final : public Model {
 public:
  ConstantModel(int d, double value)
      : d_(d), value_(value), params_(identity_params(d)) {}
  int num_features() const override { return d_; }
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    return Eigen::VectorXd::Constant(x.rows(), value_);
  }
  const StandardizationParams& standardization() const override {
    return params_;
  }
  std::string to_json() const override { return "{\"type\":\"constant\"}"; }

 private:
  int d_;
  double value_;
  StandardizationParams params_;
};

Dataset gaussian_null_data(int n, int d, std::uint64_t seed) {
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.25;
  spec.n = n;
  spec.d = d;
  spec.seed = seed;
  Dataset data;
  data.x = gen_design(spec);
  Rng rng(derive_seed(seed, "pure-noise"));
  data.y.resize(n);
  for (int i = 0; i < n; ++i) {
    data.y[i] = rng.normal();
  }
  return data;
}

}  // namespace

TEST_CASE("squared_error_stat basics") {
  LinearModel model(Eigen::VectorXd::Ones(2), identity_params(2));
  Eigen::RowVectorXd x(2);
  x << 1.0, 2.0;  // prediction 3
  CHECK(squared_error_stat(model, x, 3.0) == doctest::Approx(0.0));
  CHECK(squared_error_stat(model, x, 1.0) == doctest::Approx(4.0));

  // Mean over a test set equals an explicitly accumulated MSE.
  Dataset data = gaussian_null_data(40, 2, 3);
  double acc = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    acc += squared_error_stat(model, data.x.row(i), data.y[i]);
  }
  acc /= data.n();
  Eigen::VectorXd pred = model.predict(data.x);
  const double mse = (data.y - pred).squaredNorm() / data.n();
  CHECK(acc == doctest::Approx(mse).epsilon(1e-12));
}

TEST_CASE("perfect model hits the p-value floor 1/(K+1)") {
  const int n = 50;
  Dataset data = gaussian_null_data(n, 2, 5);
  data.y = data.x.col(0);  // the model below predicts it exactly
  Eigen::VectorXd beta(2);
  beta << 1.0, 0.0;
  LinearModel model(beta, identity_params(2));

  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.0;
  spec.n = n;
  spec.d = 2;
  auto law = true_law(spec);

  HrtConfig cfg;
  cfg.dummies = 99;
  cfg.feature_subset = std::vector<int>{0};
  cfg.seed = 11;
  TestReport report = hrt_pvalues(model, data, *law, cfg);
  CHECK(report.t_star == doctest::Approx(0.0));
  CHECK(report.pvalues[0] == doctest::Approx(1.0 / 100.0));
  CHECK(report.rd_hat[0] > 0.0);
}

TEST_CASE("p-value counts >= comparisons exactly (K=9, 4 dummies below)") {
  // One test sample: t* = a^2, dummy statistics are the squared dummy draws.
  const int k_dummies = 9;
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.0;
  spec.n = 1;
  spec.d = 2;
  auto law = true_law(spec);

  // Two identical conditioning rows; the dummy statistic of replicate k is
  // the mean of the two squared draws (y = 0, beta = e1).
  Eigen::MatrixXd x_cond(2, 2);
  x_cond << 0.0, 0.0, 0.0, 0.0;
  std::vector<double> dummy_stats;
  for (int k = 0; k < k_dummies; ++k) {
    Rng rng(derive_seed(77, "hrt-dummy", {0, static_cast<std::uint64_t>(k)}));
    Eigen::VectorXd col = law->column_sampler(x_cond, 0)->draw(rng);
    dummy_stats.push_back((col[0] * col[0] + col[1] * col[1]) / 2.0);
  }
  std::vector<double> sorted = dummy_stats;
  std::sort(sorted.begin(), sorted.end());
  // Place t* = a^2 exactly between the 4th and 5th smallest dummy stats.
  const double a = std::sqrt(0.5 * (sorted[3] + sorted[4]));

  Dataset data;
  data.x.resize(2, 2);
  data.x << a, 0.0, a, 0.0;
  data.y.resize(2);
  data.y << 0.0, 0.0;
  Eigen::VectorXd beta(2);
  beta << 1.0, 0.0;
  LinearModel model(beta, identity_params(2));

  HrtConfig cfg;
  cfg.dummies = k_dummies;
  cfg.feature_subset = std::vector<int>{0};
  cfg.seed = 77;
  TestReport report = hrt_pvalues(model, data, *law, cfg);
  CHECK(report.t_star == doctest::Approx(a * a));
  CHECK(report.pvalues[0] == doctest::Approx(0.5));  // (1 + 4) / 10
}

TEST_CASE("identical dummies give rd 0 and p 1; dead coefficients too") {
  Dataset data = gaussian_null_data(60, 3, 7);
  Eigen::VectorXd beta(3);
  beta << 0.7, 0.0, -0.4;  // feature 1 is dead
  LinearModel model(beta, identity_params(3));

  EchoLaw echo(3);
  HrtConfig cfg;
  cfg.dummies = 25;
  cfg.seed = 13;
  TestReport report = hrt_pvalues(model, data, echo, cfg);
  for (int j = 0; j < 3; ++j) {
    CHECK(report.pvalues[j] == doctest::Approx(1.0));
    CHECK(report.rd_hat[j] == doctest::Approx(0.0));
  }

  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.25;
  spec.n = 60;
  spec.d = 3;
  auto law = true_law(spec);
  TestReport real_report = hrt_pvalues(model, data, *law, cfg);
  CHECK(real_report.pvalues[1] == doctest::Approx(1.0));
  CHECK(real_report.rd_hat[1] == doctest::Approx(0.0));
  CHECK(real_report.rd_hat[0] != 0.0);
}

TEST_CASE("empirical_rd matches a hand-expanded two-sample toy") {
  // Linear model beta=(b1,b2), fixed dummy column (c1,c2) for feature 0.
  const double b1 = 0.8;
  const double b2 = -0.5;
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0,
       -1.0, 0.5;
  Eigen::VectorXd y(2);
  y << 0.7, -0.2;
  const double c1 = 0.3;
  const double c2 = -1.1;

  Eigen::VectorXd beta(2);
  beta << b1, b2;
  LinearModel model(beta, identity_params(2));
  Eigen::VectorXd fixed(2);
  fixed << c1, c2;
  FixedColumnLaw law(2, fixed);

  Eigen::VectorXd rd = empirical_rd(model, Dataset{x, y, {}}, law, 5, 3);

  // Hand expansion of the two squared errors, original and swapped.
  const double e1 = y[0] - (b1 * x(0, 0) + b2 * x(0, 1));
  const double e2 = y[1] - (b1 * x(1, 0) + b2 * x(1, 1));
  const double t_star = (e1 * e1 + e2 * e2) / 2.0;
  const double s1 = y[0] - (b1 * c1 + b2 * x(0, 1));
  const double s2 = y[1] - (b1 * c2 + b2 * x(1, 1));
  const double t_swap = (s1 * s1 + s2 * s2) / 2.0;
  CHECK(rd[0] == doctest::Approx(t_swap - t_star).epsilon(1e-12));
}

TEST_CASE("null p-values are super-uniform at desk scale") {
  const int reps = 200;
  const int k_dummies = 40;
  const int null_feature = 3;
  int below_010 = 0;
  int below_020 = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data = gaussian_null_data(150, 4, 1000 + rep);
    SplitIndices split = split_train_test(data.n(), 0.5, 2000 + rep);
    Dataset train = select_rows(data, split.train);
    Dataset test = select_rows(data, split.test);
    ElasticNetConfig cfg;
    cfg.alpha1 = 0.15;
    LinearFitResult fit = fit_elastic_net_admm(train, cfg);

    DesignSpec spec;
    spec.family = DesignSpec::Family::kAr1Gaussian;
    spec.rho = 0.25;
    spec.n = test.n();
    spec.d = 4;
    auto law = true_law(spec);

    HrtConfig hrt_cfg;
    hrt_cfg.dummies = k_dummies;
    hrt_cfg.feature_subset = std::vector<int>{null_feature};
    hrt_cfg.seed = 3000 + rep;
    TestReport report = hrt_pvalues(fit.model, test, *law, hrt_cfg);
    if (report.pvalues[0] <= 0.1) ++below_010;
    if (report.pvalues[0] <= 0.2) ++below_020;

    // P-values live on the grid {c/(K+1)}.
    const double scaled = report.pvalues[0] * (k_dummies + 1);
    CHECK(std::abs(scaled - std::round(scaled)) < 1e-9);
  }
  const double se10 = std::sqrt(0.1 * 0.9 / reps);
  const double se20 = std::sqrt(0.2 * 0.8 / reps);
  CHECK(static_cast<double>(below_010) / reps <= 0.1 + 3.0 * se10);
  CHECK(static_cast<double>(below_020) / reps <= 0.2 + 3.0 * se20);
}

TEST_CASE("reports are deterministic and leave the model unchanged") {
  Dataset data = gaussian_null_data(60, 3, 17);
  Eigen::VectorXd beta(3);
  beta << 0.4, 0.2, 0.0;
  LinearModel model(beta, identity_params(3));
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.25;
  spec.n = 60;
  spec.d = 3;
  auto law = true_law(spec);

  const std::string before = model.to_json();
  HrtConfig cfg;
  cfg.dummies = 30;
  cfg.seed = 19;
  TestReport a = hrt_pvalues(model, data, *law, cfg);
  TestReport b = hrt_pvalues(model, data, *law, cfg);
  CHECK(model.to_json() == before);
  CHECK((a.pvalues - b.pvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.dummy_stats - b.dummy_stats).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.t_star == b.t_star);

  // Monotonicity of the p-value formula in t* against fixed dummy stats.
  for (int j = 0; j < 3; ++j) {
    const auto row = a.dummy_stats.row(j);
    auto pvalue_at = [&](double t) {
      int count = 0;
      for (int k = 0; k < row.size(); ++k) {
        if (t >= row[k]) ++count;
      }
      return static_cast<double>(1 + count) / (row.size() + 1);
    };
    CHECK(pvalue_at(a.t_star) == doctest::Approx(a.pvalues[j]));
    CHECK(pvalue_at(a.t_star + 10.0) >= a.pvalues[j]);
    CHECK(pvalue_at(a.t_star - 10.0) <= a.pvalues[j]);
  }
}

TEST_CASE("cv-hrt fits one model per fold and pools held-out statistics") {
  Dataset data = gaussian_null_data(80, 3, 23);
  int fit_calls = 0;
  FitFn fit_fn = [&](const Dataset& train) -> std::unique_ptr<Model> {
    ++fit_calls;
    CHECK(train.n() == 70);  // 8 folds on 80 samples
    return std::make_unique<ConstantModel>(3, 0.25);
  };
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.25;
  spec.n = 80;
  spec.d = 3;
  auto law = true_law(spec);

  TestReport report = cv_hrt_pvalues(data, fit_fn, *law, 8, 15, 29);
  CHECK(fit_calls == 8);
  // Every sample scored exactly once: t* equals the direct pooled MSE of the
  // constant predictor.
  const double direct =
      (data.y.array() - 0.25).square().sum() / data.n();
  CHECK(report.t_star == doctest::Approx(direct).epsilon(1e-12));
  // A constant predictor is unaffected by swaps: every p-value is 1.
  for (int j = 0; j < 3; ++j) {
    CHECK(report.pvalues[j] == doctest::Approx(1.0));
  }
}

TEST_CASE("cv-hrt with a real fitter is null-calibrated at desk scale") {
  const int reps = 60;
  const int k_dummies = 30;
  int below_020 = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Dataset data = gaussian_null_data(60, 3, 5000 + rep);
    FitFn fit_fn = [](const Dataset& train) -> std::unique_ptr<Model> {
      ElasticNetConfig cfg;
      cfg.alpha1 = 0.2;
      cfg.max_iter = 200;
      return std::make_unique<LinearModel>(
          fit_elastic_net_admm(train, cfg).model);
    };
    DesignSpec spec;
    spec.family = DesignSpec::Family::kAr1Gaussian;
    spec.rho = 0.25;
    spec.n = 60;
    spec.d = 3;
    auto law = true_law(spec);
    TestReport report = cv_hrt_pvalues(data, fit_fn, *law, 4, k_dummies,
                                       6000 + rep);
    if (report.pvalues[1] <= 0.2) ++below_020;
  }
  const double se = std::sqrt(0.2 * 0.8 / reps);
  CHECK(static_cast<double>(below_020) / reps <= 0.2 + 3.0 * se);
}

TEST_CASE("single hypothesis test rejects at and below alpha") {
  // Perfect model: p = 1/(K+1) = 0.05 at K=19; the boundary must reject.
  const int n = 40;
  Dataset data = gaussian_null_data(n, 2, 31);
  data.y = data.x.col(0);
  Eigen::VectorXd beta(2);
  beta << 1.0, 0.0;
  LinearModel model(beta, identity_params(2));
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.0;
  spec.n = n;
  spec.d = 2;
  auto law = true_law(spec);

  SingleTestResult boundary =
      single_hypothesis_test(model, data, *law, 0, 19, 0.05, 37);
  CHECK(boundary.pvalue == doctest::Approx(0.05));
  CHECK(boundary.reject);

  SingleTestResult above =
      single_hypothesis_test(model, data, *law, 0, 9, 0.05, 37);
  CHECK(above.pvalue == doctest::Approx(0.1));
  CHECK(!above.reject);
}

TEST_CASE("report csv round trip") {
  Dataset data = gaussian_null_data(50, 3, 41);
  Eigen::VectorXd beta(3);
  beta << 0.5, 0.0, 0.1;
  LinearModel model(beta, identity_params(3));
  DesignSpec spec;
  spec.family = DesignSpec::Family::kAr1Gaussian;
  spec.rho = 0.25;
  spec.n = 50;
  spec.d = 3;
  auto law = true_law(spec);
  HrtConfig cfg;
  cfg.dummies = 12;
  cfg.seed = 43;
  TestReport report = hrt_pvalues(model, data, *law, cfg);

  const std::string path = "/tmp/mrd_test_report.csv";
  const std::string dump = "/tmp/mrd_test_report_dummies.csv";
  write_test_report_csv(path, report, dump);
  auto [features, pvalues] = read_pvalues_csv(path);
  REQUIRE(features.size() == 3);
  CHECK(features[0] == 0);
  CHECK((pvalues - report.pvalues).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
  std::remove(dump.c_str());
}
