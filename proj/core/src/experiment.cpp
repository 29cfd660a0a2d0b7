#include "mrd/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "json.hpp"
#include "mrd/csv.hpp"
#include "mrd/errors.hpp"
#include "mrd/hrt.hpp"
#include "mrd/rng.hpp"
#include "mrd/selection.hpp"

namespace mrd {

using json = nlohmann::ordered_json;

double quantile(std::vector<double> values, double p) {
  if (values.empty()) {
    throw std::invalid_argument("quantile of empty sample");
  }
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) {
    return values.back();
  }
  return values[lo] + (h - lo) * (values[lo + 1] - values[lo]);
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

MethodSpec::Base parse_base(const std::string& name) {
  if (name == "lasso") return MethodSpec::Base::kLasso;
  if (name == "elastic_net") return MethodSpec::Base::kElasticNet;
  if (name == "mlp") return MethodSpec::Base::kMlp;
  throw ConfigError("unknown method '" + name + "'");
}

std::string base_name(MethodSpec::Base base) {
  switch (base) {
    case MethodSpec::Base::kLasso: return "lasso";
    case MethodSpec::Base::kElasticNet: return "elastic_net";
    case MethodSpec::Base::kMlp: return "mlp";
  }
  return "?";
}

MethodSpec parse_method(const json& doc) {
  MethodSpec spec;
  spec.base = parse_base(doc.at("name").get<std::string>());
  spec.mrd = doc.value("mrd", false);
  if (spec.base == MethodSpec::Base::kElasticNet) {
    spec.alpha2 = 0.1;
  }
  if (doc.contains("alpha1")) spec.alpha1 = doc.at("alpha1").get<double>();
  if (doc.contains("alpha2")) spec.alpha2 = doc.at("alpha2").get<double>();
  if (doc.contains("lambda")) {
    const auto& l = doc.at("lambda");
    if (l.is_string()) {
      if (l.get<std::string>() != "auto") {
        throw ConfigError("lambda must be a number or \"auto\"");
      }
    } else {
      spec.lambda = l.get<double>();
    }
  }
  spec.cv_folds = doc.value("cv_folds", spec.cv_folds);
  spec.cv_grid_size = doc.value("cv_grid_size", spec.cv_grid_size);
  spec.cv_grid_min_ratio =
      doc.value("cv_grid_min_ratio", spec.cv_grid_min_ratio);
  spec.subset_size = doc.value("subset_size", spec.subset_size);

  spec.admm.max_iter = doc.value("max_iter", spec.admm.max_iter);
  spec.admm.inner_gd_steps =
      doc.value("inner_gd_steps", spec.admm.inner_gd_steps);
  spec.admm.inner_lr = doc.value("inner_lr", spec.admm.inner_lr);
  spec.admm.admm_rho = doc.value("admm_rho", spec.admm.admm_rho);
  spec.admm.eps_rel = doc.value("eps_rel", spec.admm.eps_rel);
  spec.admm.eps_abs = doc.value("eps_abs", spec.admm.eps_abs);

  spec.mlp.hidden_dim = doc.value("hidden_dim", spec.mlp.hidden_dim);
  spec.mlp.dropout_rate = doc.value("dropout_rate", spec.mlp.dropout_rate);
  spec.mlp.learning_rate = doc.value("learning_rate", spec.mlp.learning_rate);
  spec.mlp.epochs = doc.value("epochs", spec.mlp.epochs);
  spec.mlp.cancelout_weight =
      doc.value("cancelout_weight", spec.mlp.cancelout_weight);

  spec.label = doc.value("label", std::string());
  if (spec.label.empty()) {
    spec.label = (spec.mrd ? "mrd_" : "") + base_name(spec.base);
  }
  return spec;
}

DesignSpec parse_design(const json& doc) {
  DesignSpec spec;
  const std::string family = doc.at("family").get<std::string>();
  if (family == "ar1") {
    spec.family = DesignSpec::Family::kAr1Gaussian;
    spec.rho = doc.at("rho").get<double>();
  } else if (family == "gmm_mixture") {
    spec.family = DesignSpec::Family::kGmmMixture;
    for (const auto& r : doc.at("rhos")) {
      spec.rhos.push_back(r.get<double>());
    }
  } else if (family == "student_t") {
    spec.family = DesignSpec::Family::kStudentT;
    spec.rho = doc.at("rho").get<double>();
    spec.nu = doc.at("nu").get<double>();
  } else {
    throw ConfigError("unknown design family '" + family + "'");
  }
  spec.n = doc.at("n").get<int>();
  spec.d = doc.at("d").get<int>();
  return spec;
}

ResponseSpec parse_response(const json& doc) {
  ResponseSpec spec;
  const std::string model = doc.at("model").get<std::string>();
  if (model == "M1") spec.model = ResponseSpec::Model::kM1;
  else if (model == "M2") spec.model = ResponseSpec::Model::kM2;
  else if (model == "M3") spec.model = ResponseSpec::Model::kM3;
  else if (model == "M4") spec.model = ResponseSpec::Model::kM4;
  else throw ConfigError("unknown response model '" + model + "'");
  spec.amplitude = doc.value("amplitude", 0.0);
  spec.sparsity = doc.value("sparsity", 0.3);
  spec.noise_sd = doc.value("noise_sd", 1.0);
  return spec;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.spec_version = doc.value("spec_version", 1);
    if (cfg.spec_version != 1) {
      throw ConfigError("unsupported spec_version");
    }
    if (doc.contains("design")) {
      const auto& design = doc.at("design");
      if (design.at("family").get<std::string>() == "csv") {
        cfg.data_csv = design.at("path").get<std::string>();
        if (design.contains("truth")) {
          cfg.truth_file = design.at("truth").get<std::string>();
        }
      } else {
        cfg.design = parse_design(design);
      }
    }
    if (!cfg.design && !cfg.data_csv) {
      throw ConfigError("config needs a design or a csv data source");
    }
    if (doc.contains("response")) {
      cfg.response = parse_response(doc.at("response"));
    }
    if (cfg.design && !cfg.response) {
      throw ConfigError("synthetic designs need a response spec");
    }

    if (!doc.contains("methods") || doc.at("methods").empty()) {
      throw ConfigError("config needs at least one method");
    }
    for (const auto& m : doc.at("methods")) {
      cfg.methods.push_back(parse_method(m));
    }
    // Uniquify labels.
    std::unordered_set<std::string> seen;
    for (auto& m : cfg.methods) {
      std::string label = m.label;
      int suffix = 2;
      while (seen.count(label)) {
        label = m.label + "_" + std::to_string(suffix++);
      }
      m.label = label;
      seen.insert(label);
    }

    if (doc.contains("test")) {
      const auto& test = doc.at("test");
      const std::string type = test.value("type", "hrt");
      if (type == "hrt") cfg.test_kind = ExperimentConfig::TestKind::kHrt;
      else if (type == "cv_hrt") cfg.test_kind = ExperimentConfig::TestKind::kCvHrt;
      else throw ConfigError("unknown test type '" + type + "'");
      cfg.dummies = test.value("dummies", cfg.dummies);
      cfg.folds = test.value("folds", cfg.folds);
    }
    if (cfg.dummies < 1) {
      throw ConfigError("dummies must be positive");
    }
    if (cfg.test_kind == ExperimentConfig::TestKind::kCvHrt && cfg.folds < 2) {
      throw ConfigError("cv_hrt needs at least 2 folds");
    }

    if (doc.contains("law")) {
      const auto& law = doc.at("law");
      const std::string type = law.at("type").get<std::string>();
      if (type == "true") cfg.law_kind = ExperimentConfig::LawKind::kTrue;
      else if (type == "gaussian_fit")
        cfg.law_kind = ExperimentConfig::LawKind::kGaussianFit;
      else if (type == "gmm_fit") {
        cfg.law_kind = ExperimentConfig::LawKind::kGmmFit;
        cfg.gmm_components = law.value("components", 3);
      } else {
        throw ConfigError("unknown law type '" + type + "'");
      }
    }
    if (cfg.law_kind == ExperimentConfig::LawKind::kTrue && !cfg.design) {
      throw ConfigError("law 'true' needs a synthetic design");
    }

    if (doc.contains("selection")) {
      const auto& sel = doc.at("selection");
      const std::string method = sel.value("method", "bh");
      if (method == "bh") cfg.selection = ExperimentConfig::SelectionKind::kBh;
      else if (method == "by")
        cfg.selection = ExperimentConfig::SelectionKind::kBy;
      else throw ConfigError("unknown selection method '" + method + "'");
      cfg.q = sel.value("q", cfg.q);
    }
    if (!(cfg.q > 0.0 && cfg.q < 1.0)) {
      throw ConfigError("q must lie in (0, 1)");
    }

    cfg.trials = doc.value("trials", 1);
    if (cfg.trials < 1) {
      throw ConfigError("trials must be positive");
    }
    cfg.base_seed = doc.value("base_seed", std::uint64_t{0});
    cfg.train_fraction = doc.value("train_fraction", 0.5);
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
      throw ConfigError("train_fraction must lie in (0, 1)");
    }
    cfg.output_dir = doc.value("output_dir", std::string("out"));
    cfg.workers = doc.value("workers", 1);
    cfg.rd_trajectory = doc.value("rd_trajectory", false);
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config: ") + e.what());
  }
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

// ---------------------------------------------------------------------------
// Trial execution

namespace {

struct TrialData {
  Dataset data;
  std::vector<int> nonnull;
  bool truth_known = false;
};

TrialData make_trial_data(const ExperimentConfig& cfg, int trial,
                          const Dataset* csv_base) {
  TrialData out;
  const std::uint64_t t = static_cast<std::uint64_t>(trial);
  if (cfg.design) {
    DesignSpec design = *cfg.design;
    design.seed = derive_seed(cfg.base_seed, "trial-design", {t});
    out.data.x = gen_design(design);
    ResponseSpec response = *cfg.response;
    response.seed = derive_seed(cfg.base_seed, "trial-response", {t});
    GroundTruth truth = ground_truth_for(response, design.d);
    out.data.y = gen_response(out.data.x, response, truth);
    out.nonnull = truth.nonnull;
    out.truth_known = true;
  } else {
    out.data.x = csv_base->x;
    if (cfg.response) {
      // Semi-synthetic: keep the real features, simulate the response.
      ResponseSpec response = *cfg.response;
      response.seed = derive_seed(cfg.base_seed, "trial-response", {t});
      GroundTruth truth = ground_truth_for(response, out.data.d());
      out.data.y = gen_response(out.data.x, response, truth);
      out.nonnull = truth.nonnull;
      out.truth_known = true;
    } else {
      if (!csv_base->has_response()) {
        throw ConfigError("csv has no response and no response spec given");
      }
      out.data.y = csv_base->y;
      if (csv_base->truth) {
        out.nonnull = *csv_base->truth;
        out.truth_known = true;
      }
    }
  }
  return out;
}

std::unique_ptr<ConditionalLaw> make_law(const ExperimentConfig& cfg, int trial,
                                         const Eigen::MatrixXd& x) {
  const std::uint64_t t = static_cast<std::uint64_t>(trial);
  switch (cfg.law_kind) {
    case ExperimentConfig::LawKind::kTrue: {
      DesignSpec design = *cfg.design;
      design.seed = 0;  // law depends only on the family parameters
      return true_law(design);
    }
    case ExperimentConfig::LawKind::kGaussianFit: {
      GaussianModel m = fit_gaussian(x, default_gaussian_ridge(x));
      return std::make_unique<GaussianLaw>(std::move(m));
    }
    case ExperimentConfig::LawKind::kGmmFit: {
      GmmModel m = fit_gmm(x, cfg.gmm_components,
                           derive_seed(cfg.base_seed, "trial-law", {t}));
      return std::make_unique<GmmLaw>(std::move(m));
    }
  }
  throw std::logic_error("unreachable");
}

// Probes the empirical risk discrepancy on the test split at every ADMM
// iteration; samplers are built once and reused.
class RdTrajectoryObserver final : public AdmmIterObserver {
 public:
  RdTrajectoryObserver(const Dataset& test, const ConditionalLaw& law,
                       const std::vector<int>& nonnull, std::uint64_t seed,
                       int dummies_per_probe)
      : test_(test), nonnull_(nonnull.begin(), nonnull.end()), seed_(seed),
        dummies_(dummies_per_probe) {
    samplers_.reserve(static_cast<std::size_t>(test.d()));
    for (int j = 0; j < test.d(); ++j) {
      samplers_.push_back(law.column_sampler(test.x, j));
    }
  }

  void on_iteration(int iter, const LinearModel& current) override {
    const int n = test_.n();
    const int d = test_.d();
    const Eigen::VectorXd base_pred = current.predict(test_.x);
    const double t_star =
        (test_.y - base_pred).squaredNorm() / static_cast<double>(n);
    std::vector<double> rd_h1;
    std::vector<double> rd_h0;
    for (int j = 0; j < d; ++j) {
      Rng rng(derive_seed(seed_, "trajectory",
                          {static_cast<std::uint64_t>(iter),
                           static_cast<std::uint64_t>(j)}));
      double mean_stat = 0.0;
      for (int k = 0; k < dummies_; ++k) {
        const Eigen::VectorXd col =
            samplers_[static_cast<std::size_t>(j)]->draw(rng);
        const Eigen::VectorXd swap_pred =
            current.predict_column_swap(test_.x, base_pred, j, col);
        mean_stat +=
            (test_.y - swap_pred).squaredNorm() / static_cast<double>(n);
      }
      mean_stat /= dummies_;
      (nonnull_.count(j) ? rd_h1 : rd_h0).push_back(mean_stat - t_star);
    }
    TrajectoryPoint point;
    point.iteration = iter;
    point.trials = 1;
    if (!rd_h1.empty()) {
      point.h1_q25 = quantile(rd_h1, 0.25);
      point.h1_q50 = quantile(rd_h1, 0.50);
      point.h1_q75 = quantile(rd_h1, 0.75);
    }
    if (!rd_h0.empty()) {
      point.h0_q75 = quantile(rd_h0, 0.75);
    }
    points.push_back(point);
  }

  std::vector<TrajectoryPoint> points;

 private:
  const Dataset& test_;
  std::unordered_set<int> nonnull_;
  std::uint64_t seed_;
  int dummies_;
  std::vector<std::unique_ptr<ColumnSampler>> samplers_;
};

struct TunedPenalty {
  double alpha1 = 0.0;
  double mse_validation = 0.0;
};

void fill_rd_quantiles(TrialRecord& record) {
  if (!record.truth_known) {
    return;
  }
  std::unordered_set<int> h1(record.trial_nonnull.begin(),
                             record.trial_nonnull.end());
  std::vector<double> rd_h1;
  std::vector<double> rd_h0;
  for (std::size_t fi = 0; fi < record.features.size(); ++fi) {
    const double rd = record.rd_hat[static_cast<Eigen::Index>(fi)];
    (h1.count(record.features[fi]) ? rd_h1 : rd_h0).push_back(rd);
  }
  if (!rd_h1.empty()) {
    record.rd_h1_q25 = quantile(rd_h1, 0.25);
    record.rd_h1_q50 = quantile(rd_h1, 0.50);
    record.rd_h1_q75 = quantile(rd_h1, 0.75);
  }
  if (!rd_h0.empty()) {
    record.rd_h0_q75 = quantile(rd_h0, 0.75);
  }
}

void write_record_pvalues(const ExperimentConfig& cfg, TrialRecord& record) {
  record.pvalues_path =
      "pvalues_" + std::to_string(record.trial) + "_" + record.method + ".csv";
  const std::string full =
      (std::filesystem::path(cfg.output_dir) / record.pvalues_path).string();
  std::ofstream out(full);
  if (!out) {
    throw std::runtime_error("cannot write " + full);
  }
  out << "feature,pvalue,t_star,rd_hat\n";
  for (std::size_t fi = 0; fi < record.features.size(); ++fi) {
    const auto i = static_cast<Eigen::Index>(fi);
    out << (record.features[fi] + 1) << ','
        << format_double(record.pvalues[i]) << ','
        << format_double(record.t_star) << ','
        << format_double(record.rd_hat[i]) << '\n';
  }
}

void run_trial(const ExperimentConfig& cfg, int trial, const Dataset* csv_base,
               std::vector<TrialRecord>& records,
               std::map<std::string, std::vector<TrajectoryPoint>>& traj) {
  const std::uint64_t t = static_cast<std::uint64_t>(trial);
  TrialData trial_data;
  std::unique_ptr<ConditionalLaw> law;
  std::string data_error;
  try {
    trial_data = make_trial_data(cfg, trial, csv_base);
    validate(trial_data.data);
    law = make_law(cfg, trial, trial_data.data.x);
  } catch (const std::exception& e) {
    data_error = e.what();
  }

  const bool hrt_mode = cfg.test_kind == ExperimentConfig::TestKind::kHrt;
  Dataset train;
  Dataset test;
  if (data_error.empty() && hrt_mode) {
    try {
      SplitIndices split =
          split_train_test(trial_data.data.n(), cfg.train_fraction,
                           derive_seed(cfg.base_seed, "trial-split", {t}));
      train = select_rows(trial_data.data, split.train);
      test = select_rows(trial_data.data, split.test);
    } catch (const std::exception& e) {
      data_error = e.what();
    }
  }

  // Penalty tuning shared between a base method and its MRD variant.
  std::map<std::pair<int, double>, TunedPenalty> tuned_cache;
  auto tuned_for = [&](const MethodSpec& m,
                       const Dataset& tune_data) -> TunedPenalty {
    const auto key = std::make_pair(static_cast<int>(m.base), m.alpha2);
    auto it = tuned_cache.find(key);
    if (it != tuned_cache.end()) {
      return it->second;
    }
    TunedPenalty tuned;
    if (m.base == MethodSpec::Base::kMlp) {
      tuned.mse_validation = mlp_validation_mse(
          tune_data, m.mlp,
          derive_seed(cfg.base_seed, "trial-mlpval", {t}));
    } else {
      const std::vector<double> grid = default_alpha1_grid(
          tune_data, m.cv_grid_size, m.cv_grid_min_ratio);
      PenaltyTuneResult res = cv_tune_penalty(
          tune_data, grid, m.cv_folds, m.alpha2,
          derive_seed(cfg.base_seed, "trial-cv",
                      {t, static_cast<std::uint64_t>(key.first)}),
          m.admm);
      tuned.alpha1 = res.alpha1;
      tuned.mse_validation = res.mse_validation;
    }
    tuned_cache.emplace(key, tuned);
    return tuned;
  };

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const MethodSpec& m = cfg.methods[mi];
    TrialRecord record;
    record.trial = trial;
    record.method = m.label;
    record.trial_nonnull = trial_data.nonnull;
    record.truth_known = trial_data.truth_known;
    if (!data_error.empty()) {
      record.failed = true;
      record.error = data_error;
      records.push_back(std::move(record));
      continue;
    }
    try {
      const std::uint64_t mi64 = static_cast<std::uint64_t>(mi);
      const Dataset& tune_data = hrt_mode ? train : trial_data.data;

      // Resolve hyperparameters.
      ElasticNetConfig en_cfg = m.admm;
      en_cfg.alpha2 = m.alpha2;
      MrdConfig mrd_cfg;
      mrd_cfg.subset_size = m.subset_size;
      double lambda = 0.0;
      if (m.mrd) {
        if (m.lambda) {
          lambda = *m.lambda;
        } else {
          lambda = auto_lambda(tuned_for(m, tune_data).mse_validation);
        }
      }
      mrd_cfg.lambda = lambda;
      if (m.base != MethodSpec::Base::kMlp) {
        en_cfg.alpha1 = m.alpha1 ? *m.alpha1 : tuned_for(m, tune_data).alpha1;
      }

      TestReport report;
      double rmse = 0.0;
      if (hrt_mode) {
        std::unique_ptr<Model> model;
        std::unique_ptr<RdTrajectoryObserver> observer;
        if (cfg.rd_trajectory && m.base != MethodSpec::Base::kMlp) {
          observer = std::make_unique<RdTrajectoryObserver>(
              test, *law, trial_data.nonnull,
              derive_seed(cfg.base_seed, "trial-traj", {t, mi64}), 8);
        }
        const std::uint64_t fit_seed =
            derive_seed(cfg.base_seed, "trial-fit", {t, mi64});
        if (m.base == MethodSpec::Base::kMlp) {
          if (m.mrd) {
            model = std::make_unique<MlpModel>(
                fit_mrd_mlp(train, m.mlp, mrd_cfg, *law, fit_seed).model);
          } else {
            model = std::make_unique<MlpModel>(
                fit_mlp(train, m.mlp, fit_seed).model);
          }
        } else {
          LinearFitResult fit =
              m.mrd ? fit_mrd_elastic_net(train, en_cfg, mrd_cfg, *law,
                                          fit_seed, observer.get())
                    : fit_elastic_net_admm(train, en_cfg, observer.get());
          model = std::make_unique<LinearModel>(std::move(fit.model));
        }
        const Eigen::VectorXd pred = model->predict(test.x);
        rmse = std::sqrt((test.y - pred).squaredNorm() /
                         static_cast<double>(test.n())) /
               model->standardization().y_std;

        HrtConfig hrt_cfg;
        hrt_cfg.dummies = cfg.dummies;
        hrt_cfg.seed = derive_seed(cfg.base_seed, "trial-hrt", {t, mi64});
        report = hrt_pvalues(*model, test, *law, hrt_cfg);
        if (observer) {
          traj[m.label] = std::move(observer->points);
        }
      } else {
        // CV-HRT: every sample is scored by its fold-complement model.
        int fold_counter = 0;
        const std::uint64_t cv_seed =
            derive_seed(cfg.base_seed, "trial-cvhrt", {t, mi64});
        FitFn fit_fn = [&](const Dataset& fold_train) -> std::unique_ptr<Model> {
          const std::uint64_t fit_seed = derive_seed(
              cfg.base_seed, "trial-cvhrt-fit",
              {t, mi64, static_cast<std::uint64_t>(fold_counter++)});
          if (m.base == MethodSpec::Base::kMlp) {
            if (m.mrd) {
              return std::make_unique<MlpModel>(
                  fit_mrd_mlp(fold_train, m.mlp, mrd_cfg, *law, fit_seed)
                      .model);
            }
            return std::make_unique<MlpModel>(
                fit_mlp(fold_train, m.mlp, fit_seed).model);
          }
          if (m.mrd) {
            return std::make_unique<LinearModel>(
                fit_mrd_elastic_net(fold_train, en_cfg, mrd_cfg, *law,
                                    fit_seed)
                    .model);
          }
          return std::make_unique<LinearModel>(
              fit_elastic_net_admm(fold_train, en_cfg).model);
        };
        report = cv_hrt_pvalues(trial_data.data, fit_fn, *law, cfg.folds,
                                cfg.dummies, cv_seed);
        const double y_mean = trial_data.data.y.mean();
        const double y_sd = std::sqrt(
            (trial_data.data.y.array() - y_mean).square().sum() /
            trial_data.data.n());
        rmse = std::sqrt(report.t_star) / (y_sd > 0.0 ? y_sd : 1.0);
      }

      record.rmse = rmse;
      record.t_star = report.t_star;
      record.features = report.features;
      record.pvalues = report.pvalues;
      record.rd_hat = report.rd_hat;

      SelectionResult sel =
          cfg.selection == ExperimentConfig::SelectionKind::kBh
              ? bh_select(report.pvalues, cfg.q)
              : by_select(report.pvalues, cfg.q);
      record.num_rejected = static_cast<int>(sel.rejected.size());
      if (trial_data.truth_known) {
        std::vector<int> selected_features;
        for (int pos : sel.rejected) {
          selected_features.push_back(
              report.features[static_cast<std::size_t>(pos)]);
        }
        FdpPower fp = eval_fdp_power(selected_features, trial_data.nonnull,
                                     trial_data.data.d());
        record.fdp = fp.fdp;
        record.power = fp.power;
      }
      fill_rd_quantiles(record);
      write_record_pvalues(cfg, record);
    } catch (const std::exception& e) {
      record.failed = true;
      record.error = e.what();
    }
    records.push_back(std::move(record));
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.output_dir);

  Dataset csv_base;
  const Dataset* csv_ptr = nullptr;
  if (config.data_csv) {
    csv_base = load_feature_csv(*config.data_csv);
    if (config.truth_file) {
      csv_base.truth = load_truth_sidecar(*config.truth_file, csv_base.d());
    }
    csv_ptr = &csv_base;
  }

  const int trials = config.trials;
  std::vector<std::vector<TrialRecord>> per_trial(
      static_cast<std::size_t>(trials));
  std::vector<std::map<std::string, std::vector<TrajectoryPoint>>> per_traj(
      static_cast<std::size_t>(trials));

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int trial = next.fetch_add(1);
      if (trial >= trials) {
        break;
      }
      run_trial(config, trial, csv_ptr,
                per_trial[static_cast<std::size_t>(trial)],
                per_traj[static_cast<std::size_t>(trial)]);
    }
  };

  const int workers = std::max(1, config.workers);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) {
    pool.emplace_back(worker);
  }
  worker();
  for (auto& th : pool) {
    th.join();
  }

  ExperimentResult result;
  for (int trial = 0; trial < trials; ++trial) {
    bool any_failed = false;
    for (auto& record : per_trial[static_cast<std::size_t>(trial)]) {
      any_failed = any_failed || record.failed;
      result.records.push_back(std::move(record));
    }
    if (any_failed) {
      ++result.failed_trials;
    }
  }

  // Average trajectories across trials per iteration index.
  for (int trial = 0; trial < trials; ++trial) {
    for (auto& [label, points] : per_traj[static_cast<std::size_t>(trial)]) {
      auto& merged = result.trajectories[label];
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (merged.size() <= i) {
          merged.push_back(points[i]);
        } else {
          merged[i].h1_q25 += points[i].h1_q25;
          merged[i].h1_q50 += points[i].h1_q50;
          merged[i].h1_q75 += points[i].h1_q75;
          merged[i].h0_q75 += points[i].h0_q75;
          merged[i].trials += 1;
        }
      }
    }
  }
  for (auto& [label, points] : result.trajectories) {
    for (auto& p : points) {
      p.h1_q25 /= p.trials;
      p.h1_q50 /= p.trials;
      p.h1_q75 /= p.trials;
      p.h0_q75 /= p.trials;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string opt_str(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

struct Aggregate {
  int count = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double v) {
    ++count;
    sum += v;
    sumsq += v * v;
  }
  double mean() const { return count > 0 ? sum / count : 0.0; }
  double se() const {
    if (count < 2) {
      return 0.0;
    }
    const double m = mean();
    const double var = (sumsq - count * m * m) / (count - 1);
    return std::sqrt(std::max(0.0, var) / count);
  }
};

}  // namespace

void emit_reports(const ExperimentConfig& config,
                  const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(config.output_dir);
  const fs::path dir(config.output_dir);

  // trials.csv
  {
    std::ofstream out(dir / "trials.csv");
    if (!out) {
      throw std::runtime_error("cannot write trials.csv");
    }
    out << "trial,method,failed,rmse,t_star,num_rejected,fdp,power,"
           "rd_h1_q25,rd_h1_q50,rd_h1_q75,rd_h0_q75,pvalues_path,error\n";
    for (const auto& r : result.records) {
      out << r.trial << ',' << r.method << ',' << (r.failed ? 1 : 0) << ',';
      if (r.failed) {
        out << ",,,,,,,,," << ',' << r.error << '\n';
        continue;
      }
      out << format_double(r.rmse) << ',' << format_double(r.t_star) << ','
          << r.num_rejected << ',' << opt_str(r.fdp) << ',' << opt_str(r.power)
          << ',' << opt_str(r.rd_h1_q25) << ',' << opt_str(r.rd_h1_q50) << ','
          << opt_str(r.rd_h1_q75) << ',' << opt_str(r.rd_h0_q75) << ','
          << r.pvalues_path << ",\n";
    }
  }

  // summary.json
  {
    json methods = json::object();
    for (const auto& m : config.methods) {
      Aggregate power, fdp, rmse;
      int ok = 0;
      int failed = 0;
      for (const auto& r : result.records) {
        if (r.method != m.label) {
          continue;
        }
        if (r.failed) {
          ++failed;
          continue;
        }
        ++ok;
        rmse.add(r.rmse);
        if (r.power) power.add(*r.power);
        if (r.fdp) fdp.add(*r.fdp);
      }
      json entry;
      entry["trials"] = ok;
      entry["failed"] = failed;
      entry["power_mean"] = power.mean();
      entry["power_se"] = power.se();
      entry["fdr_mean"] = fdp.mean();
      entry["fdr_se"] = fdp.se();
      entry["rmse_mean"] = rmse.mean();
      entry["rmse_se"] = rmse.se();
      methods[m.label] = std::move(entry);
    }
    json doc;
    doc["spec_version"] = config.spec_version;
    doc["trials"] = config.trials;
    doc["failed_trials"] = result.failed_trials;
    doc["dummies"] = config.dummies;
    doc["q"] = config.q;
    doc["selection"] =
        config.selection == ExperimentConfig::SelectionKind::kBh ? "bh" : "by";
    doc["base_seed"] = config.base_seed;
    doc["methods"] = std::move(methods);
    std::ofstream out(dir / "summary.json");
    if (!out) {
      throw std::runtime_error("cannot write summary.json");
    }
    out << doc.dump(2) << '\n';
  }

  // qq_data.csv: per method, the sorted p-values of each truth group against
  // uniform plotting positions.
  {
    std::ofstream out(dir / "qq_data.csv");
    if (!out) {
      throw std::runtime_error("cannot write qq_data.csv");
    }
    out << "method,trial,feature,pvalue,null_flag,uniform_quantile\n";
    for (const auto& m : config.methods) {
      struct Row {
        int trial;
        int feature;
        double pvalue;
        int null_flag;  // -1 when truth unknown
      };
      std::vector<Row> rows;
      for (const auto& r : result.records) {
        if (r.method != m.label || r.failed) {
          continue;
        }
        std::unordered_set<int> h1(r.trial_nonnull.begin(),
                                   r.trial_nonnull.end());
        for (std::size_t fi = 0; fi < r.features.size(); ++fi) {
          Row row;
          row.trial = r.trial;
          row.feature = r.features[fi];
          row.pvalue = r.pvalues[static_cast<Eigen::Index>(fi)];
          row.null_flag = r.truth_known
                              ? (h1.count(row.feature) ? 0 : 1)
                              : -1;
          rows.push_back(row);
        }
      }
      for (int group : {1, 0, -1}) {
        std::vector<Row> in_group;
        for (const auto& row : rows) {
          if (row.null_flag == group) {
            in_group.push_back(row);
          }
        }
        if (in_group.empty()) {
          continue;
        }
        std::sort(in_group.begin(), in_group.end(),
                  [](const Row& a, const Row& b) {
                    if (a.pvalue != b.pvalue) return a.pvalue < b.pvalue;
                    if (a.trial != b.trial) return a.trial < b.trial;
                    return a.feature < b.feature;
                  });
        const double count = static_cast<double>(in_group.size());
        for (std::size_t i = 0; i < in_group.size(); ++i) {
          const auto& row = in_group[i];
          out << m.label << ',' << row.trial << ',' << (row.feature + 1) << ','
              << format_double(row.pvalue) << ','
              << (row.null_flag < 0 ? std::string()
                                    : std::to_string(row.null_flag))
              << ','
              << format_double((static_cast<double>(i) + 1.0) / (count + 1.0))
              << '\n';
        }
      }
    }
  }

  // rd_trajectory.csv
  if (!result.trajectories.empty()) {
    std::ofstream out(dir / "rd_trajectory.csv");
    if (!out) {
      throw std::runtime_error("cannot write rd_trajectory.csv");
    }
    out << "method,iteration,h1_q25,h1_q50,h1_q75,h0_q75,trials\n";
    for (const auto& [label, points] : result.trajectories) {
      for (const auto& p : points) {
        out << label << ',' << p.iteration << ',' << format_double(p.h1_q25)
            << ',' << format_double(p.h1_q50) << ',' << format_double(p.h1_q75)
            << ',' << format_double(p.h0_q75) << ',' << p.trials << '\n';
      }
    }
  }
}

}  // namespace mrd
