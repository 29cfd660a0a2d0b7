#include "mrd/hrt.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "mrd/csv.hpp"
#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

double squared_error_stat(const Model& model, const Eigen::RowVectorXd& x,
                          double y) {
  Eigen::MatrixXd one_row = x;
  const double pred = model.predict(one_row)[0];
  const double diff = y - pred;
  return diff * diff;
}

namespace {

std::vector<int> resolve_features(const HrtConfig& cfg, int d) {
  if (cfg.feature_subset) {
    if (cfg.feature_subset->empty()) {
      throw std::invalid_argument("feature subset must be non-empty");
    }
    for (int j : *cfg.feature_subset) {
      if (j < 0 || j >= d) {
        throw std::invalid_argument("feature index out of range");
      }
    }
    return *cfg.feature_subset;
  }
  std::vector<int> all(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    all[static_cast<std::size_t>(j)] = j;
  }
  return all;
}

}  // namespace

TestReport hrt_pvalues(const Model& model, const Dataset& test,
                       const ConditionalLaw& law, const HrtConfig& cfg) {
  validate(test);
  if (!test.has_response()) {
    throw ShapeError("test data needs a response");
  }
  if (model.num_features() != test.d()) {
    throw ShapeError("model and test data disagree on feature count");
  }
  if (law.dim() != test.d()) {
    throw ShapeError("law and test data disagree on feature count");
  }
  if (cfg.dummies < 1) {
    throw std::invalid_argument("need at least one dummy replicate");
  }

  const int n = test.n();
  const int k_dummies = cfg.dummies;
  const std::vector<int> features = resolve_features(cfg, test.d());

  const Eigen::VectorXd base_pred = model.predict(test.x);
  const double t_star =
      (test.y - base_pred).squaredNorm() / static_cast<double>(n);

  TestReport report;
  report.features = features;
  report.t_star = t_star;
  report.pvalues.resize(static_cast<Eigen::Index>(features.size()));
  report.dummy_stats.resize(static_cast<Eigen::Index>(features.size()),
                            k_dummies);
  report.rd_hat.resize(static_cast<Eigen::Index>(features.size()));

  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    const int j = features[fi];
    auto sampler = law.column_sampler(test.x, j);
    int count = 0;
    for (int k = 0; k < k_dummies; ++k) {
      Rng rng(derive_seed(cfg.seed, "hrt-dummy",
                          {static_cast<std::uint64_t>(j),
                           static_cast<std::uint64_t>(k)}));
      const Eigen::VectorXd col = sampler->draw(rng);
      const Eigen::VectorXd swap_pred =
          model.predict_column_swap(test.x, base_pred, j, col);
      const double t_tilde =
          (test.y - swap_pred).squaredNorm() / static_cast<double>(n);
      report.dummy_stats(static_cast<Eigen::Index>(fi), k) = t_tilde;
      if (t_star >= t_tilde) {
        ++count;
      }
    }
    report.pvalues[static_cast<Eigen::Index>(fi)] =
        static_cast<double>(1 + count) / static_cast<double>(k_dummies + 1);
    report.rd_hat[static_cast<Eigen::Index>(fi)] =
        report.dummy_stats.row(static_cast<Eigen::Index>(fi)).mean() - t_star;
  }
  return report;
}

Eigen::VectorXd empirical_rd(const Model& model, const Dataset& test,
                             const ConditionalLaw& law, int dummies,
                             std::uint64_t seed) {
  HrtConfig cfg;
  cfg.dummies = dummies;
  cfg.seed = seed;
  return hrt_pvalues(model, test, law, cfg).rd_hat;
}

TestReport cv_hrt_pvalues(const Dataset& data, const FitFn& fit_fn,
                          const ConditionalLaw& law, int folds, int dummies,
                          std::uint64_t seed) {
  validate(data);
  if (!data.has_response()) {
    throw ShapeError("data needs a response");
  }
  if (dummies < 1) {
    throw std::invalid_argument("need at least one dummy replicate");
  }
  const int n = data.n();
  const int d = data.d();
  if (law.dim() != d) {
    throw ShapeError("law and data disagree on feature count");
  }
  FoldAssignment assignment =
      kfold_indices(n, folds, derive_seed(seed, "cv-hrt-folds"));

  // One model per fold complement plus each fold's held-out predictions.
  std::vector<std::unique_ptr<Model>> models;
  std::vector<std::vector<int>> fold_rows;
  std::vector<Eigen::MatrixXd> fold_x;
  std::vector<Eigen::VectorXd> fold_y;
  std::vector<Eigen::VectorXd> fold_pred;
  models.reserve(static_cast<std::size_t>(folds));
  double stat_sum = 0.0;
  for (int f = 0; f < folds; ++f) {
    const Dataset train = select_rows(data, assignment.complement(f));
    models.push_back(fit_fn(train));
    if (!models.back() || models.back()->num_features() != d) {
      throw ShapeError("fit_fn returned a model with wrong feature count");
    }
    fold_rows.push_back(assignment.members(f));
    const Dataset held = select_rows(data, fold_rows.back());
    fold_x.push_back(held.x);
    fold_y.push_back(held.y);
    fold_pred.push_back(models.back()->predict(held.x));
    stat_sum += (held.y - fold_pred.back()).squaredNorm();
  }
  const double t_star = stat_sum / static_cast<double>(n);

  TestReport report;
  report.features.resize(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) {
    report.features[static_cast<std::size_t>(j)] = j;
  }
  report.t_star = t_star;
  report.pvalues.resize(d);
  report.dummy_stats.resize(d, dummies);
  report.rd_hat.resize(d);

  for (int j = 0; j < d; ++j) {
    // Per-fold samplers bound to each fold's held-out rows.
    std::vector<std::unique_ptr<ColumnSampler>> samplers;
    samplers.reserve(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
      samplers.push_back(law.column_sampler(fold_x[static_cast<std::size_t>(f)], j));
    }
    int count = 0;
    for (int k = 0; k < dummies; ++k) {
      Rng rng(derive_seed(seed, "cv-hrt-dummy",
                          {static_cast<std::uint64_t>(j),
                           static_cast<std::uint64_t>(k)}));
      double swap_sum = 0.0;
      for (int f = 0; f < folds; ++f) {
        const auto fs = static_cast<std::size_t>(f);
        const Eigen::VectorXd col = samplers[fs]->draw(rng);
        const Eigen::VectorXd swap_pred = models[fs]->predict_column_swap(
            fold_x[fs], fold_pred[fs], j, col);
        swap_sum += (fold_y[fs] - swap_pred).squaredNorm();
      }
      const double t_tilde = swap_sum / static_cast<double>(n);
      report.dummy_stats(j, k) = t_tilde;
      if (t_star >= t_tilde) {
        ++count;
      }
    }
    report.pvalues[j] =
        static_cast<double>(1 + count) / static_cast<double>(dummies + 1);
    report.rd_hat[j] = report.dummy_stats.row(j).mean() - t_star;
  }
  return report;
}

SingleTestResult single_hypothesis_test(const Model& model, const Dataset& test,
                                        const ConditionalLaw& law, int j,
                                        int dummies, double alpha,
                                        std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("alpha must lie in (0, 1)");
  }
  HrtConfig cfg;
  cfg.dummies = dummies;
  cfg.feature_subset = std::vector<int>{j};
  cfg.seed = seed;
  const TestReport report = hrt_pvalues(model, test, law, cfg);
  SingleTestResult out;
  out.pvalue = report.pvalues[0];
  out.reject = out.pvalue <= alpha;
  return out;
}

void write_test_report_csv(const std::string& path, const TestReport& report,
                           const std::string& dummy_dump_path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << "feature,pvalue,t_star,rd_hat\n";
  for (std::size_t fi = 0; fi < report.features.size(); ++fi) {
    const auto i = static_cast<Eigen::Index>(fi);
    out << (report.features[fi] + 1) << ',' << format_double(report.pvalues[i])
        << ',' << format_double(report.t_star) << ','
        << format_double(report.rd_hat[i]) << '\n';
  }
  if (!dummy_dump_path.empty()) {
    std::ofstream dump(dummy_dump_path);
    if (!dump) {
      throw std::runtime_error("cannot write " + dummy_dump_path);
    }
    dump << "feature,k,stat\n";
    for (std::size_t fi = 0; fi < report.features.size(); ++fi) {
      for (Eigen::Index k = 0; k < report.dummy_stats.cols(); ++k) {
        dump << (report.features[fi] + 1) << ',' << (k + 1) << ','
             << format_double(
                    report.dummy_stats(static_cast<Eigen::Index>(fi), k))
             << '\n';
      }
    }
  }
}

std::pair<std::vector<int>, Eigen::VectorXd> read_pvalues_csv(
    const std::string& path) {
  auto rows = read_csv_rows(path);
  if (rows.size() < 2) {
    throw ParseError("no p-value rows in " + path, 1, 1);
  }
  const auto& header = rows.front();
  int feat_col = -1;
  int p_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "feature") feat_col = static_cast<int>(c);
    if (header[c] == "pvalue") p_col = static_cast<int>(c);
  }
  if (feat_col < 0 || p_col < 0) {
    throw ParseError("missing feature/pvalue columns in " + path, 1, 1);
  }
  std::vector<int> features;
  Eigen::VectorXd pvalues(static_cast<Eigen::Index>(rows.size() - 1));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) {
      throw ShapeError("ragged row in " + path);
    }
    features.push_back(
        std::stoi(row[static_cast<std::size_t>(feat_col)]) - 1);
    pvalues[static_cast<Eigen::Index>(i - 1)] =
        std::stod(row[static_cast<std::size_t>(p_col)]);
  }
  return {std::move(features), std::move(pvalues)};
}

}  // namespace mrd
