// Command-line front end: synthetic data generation, model/law fitting,
// holdout randomization testing, BH/BY selection, dummy diagnostics, and the
// config-driven experiment runner.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mrd/conditional.hpp"
#include "mrd/csv.hpp"
#include "mrd/datagen.hpp"
#include "mrd/dataset.hpp"
#include "mrd/elastic_net.hpp"
#include "mrd/errors.hpp"
#include "mrd/experiment.hpp"
#include "mrd/hrt.hpp"
#include "mrd/mlp.hpp"
#include "mrd/model.hpp"
#include "mrd/rng.hpp"
#include "mrd/selection.hpp"

namespace {

namespace fs = std::filesystem;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw mrd::ConfigError("cannot open " + path);
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path);
  }
  out << text << '\n';
}

mrd::Dataset load_dataset(const std::string& data_path,
                          const std::string& truth_path) {
  mrd::Dataset data = mrd::load_feature_csv(data_path);
  if (!truth_path.empty()) {
    data.truth = mrd::load_truth_sidecar(truth_path, data.d());
  }
  return data;
}

struct GenDataArgs {
  std::string out_dir = ".";
  std::string family = "ar1";
  double rho = 0.25;
  std::vector<double> rhos;
  double nu = 5.0;
  int n = 800;
  int d = 100;
  std::string response = "M2";
  double amplitude = 0.14;
  double sparsity = 0.3;
  double noise_sd = 1.0;
  std::uint64_t seed = 1;
};

int run_gen_data(const GenDataArgs& args) {
  mrd::DesignSpec design;
  if (args.family == "ar1") {
    design.family = mrd::DesignSpec::Family::kAr1Gaussian;
    design.rho = args.rho;
  } else if (args.family == "gmm_mixture") {
    design.family = mrd::DesignSpec::Family::kGmmMixture;
    design.rhos = args.rhos;
  } else if (args.family == "student_t") {
    design.family = mrd::DesignSpec::Family::kStudentT;
    design.rho = args.rho;
    design.nu = args.nu;
  } else {
    throw mrd::ConfigError("unknown family '" + args.family + "'");
  }
  design.n = args.n;
  design.d = args.d;
  design.seed = mrd::derive_seed(args.seed, "trial-design", {0});

  mrd::ResponseSpec response;
  if (args.response == "M1") response.model = mrd::ResponseSpec::Model::kM1;
  else if (args.response == "M2") response.model = mrd::ResponseSpec::Model::kM2;
  else if (args.response == "M3") response.model = mrd::ResponseSpec::Model::kM3;
  else if (args.response == "M4") response.model = mrd::ResponseSpec::Model::kM4;
  else throw mrd::ConfigError("unknown response model '" + args.response + "'");
  response.amplitude = args.amplitude;
  response.sparsity = args.sparsity;
  response.noise_sd = args.noise_sd;
  response.seed = mrd::derive_seed(args.seed, "trial-response", {0});

  mrd::Dataset data;
  data.x = mrd::gen_design(design);
  mrd::GroundTruth truth = mrd::ground_truth_for(response, design.d);
  data.y = mrd::gen_response(data.x, response, truth);

  fs::create_directories(args.out_dir);
  const fs::path dir(args.out_dir);
  mrd::save_dataset_csv((dir / "data.csv").string(), data);
  mrd::save_truth_sidecar((dir / "truth.txt").string(), truth.nonnull);
  write_file((dir / "law.json").string(), mrd::true_law(design)->to_json());
  std::cout << "wrote " << (dir / "data.csv").string() << " (n=" << data.n()
            << ", d=" << data.d() << "), truth.txt, law.json\n";
  return 0;
}

struct FitArgs {
  std::string data_path;
  std::string truth_path;
  std::string method = "lasso";
  bool mrd = false;
  std::string law_path;
  std::string lambda = "auto";
  double alpha1 = -1.0;  // negative: tune by CV
  double alpha2 = -1.0;  // negative: per-method default
  int components = 3;
  int epochs = 60;
  std::uint64_t seed = 1;
  std::string out_path = "model.json";
};

int run_fit(const FitArgs& args) {
  if (args.method == "gaussian" || args.method == "gmm") {
    mrd::Dataset data = load_dataset(args.data_path, "");
    std::unique_ptr<mrd::ConditionalLaw> law;
    if (args.method == "gaussian") {
      law = std::make_unique<mrd::GaussianLaw>(mrd::fit_gaussian(
          data.x, mrd::default_gaussian_ridge(data.x)));
    } else {
      law = std::make_unique<mrd::GmmLaw>(
          mrd::fit_gmm(data.x, args.components, args.seed));
    }
    write_file(args.out_path, law->to_json());
    std::cout << "wrote " << args.out_path << '\n';
    return 0;
  }

  mrd::Dataset data = load_dataset(args.data_path, args.truth_path);
  if (!data.has_response()) {
    throw mrd::ConfigError("fit needs a csv with a y column");
  }

  std::unique_ptr<mrd::ConditionalLaw> law;
  if (!args.law_path.empty()) {
    law = mrd::ConditionalLaw::from_json(read_file(args.law_path));
  }
  if (args.mrd && !law) {
    throw mrd::ConfigError("--mrd needs --law");
  }

  std::string model_json;
  if (args.method == "mlp") {
    mrd::MlpConfig cfg;
    cfg.epochs = args.epochs;
    mrd::MrdConfig mrd_cfg;
    if (args.mrd) {
      if (args.lambda == "auto") {
        mrd_cfg.lambda = mrd::auto_lambda(
            mrd::mlp_validation_mse(data, cfg, args.seed));
      } else {
        mrd_cfg.lambda = std::stod(args.lambda);
      }
      model_json =
          mrd::fit_mrd_mlp(data, cfg, mrd_cfg, *law, args.seed).model.to_json();
    } else {
      model_json = mrd::fit_mlp(data, cfg, args.seed).model.to_json();
    }
  } else if (args.method == "lasso" || args.method == "elastic_net") {
    mrd::ElasticNetConfig cfg;
    cfg.alpha2 = args.alpha2 >= 0.0
                     ? args.alpha2
                     : (args.method == "elastic_net" ? 0.1 : 0.0);
    double mse_validation = 1.0;
    if (args.alpha1 >= 0.0) {
      cfg.alpha1 = args.alpha1;
    } else {
      auto tuned = mrd::cv_tune_penalty(data, mrd::default_alpha1_grid(data),
                                        5, cfg.alpha2,
                                        mrd::derive_seed(args.seed, "cli-cv"));
      cfg.alpha1 = tuned.alpha1;
      mse_validation = tuned.mse_validation;
      std::cout << "cv: alpha1=" << cfg.alpha1
                << " mse_validation=" << mse_validation << '\n';
    }
    if (args.mrd) {
      mrd::MrdConfig mrd_cfg;
      mrd_cfg.lambda = args.lambda == "auto" ? mrd::auto_lambda(mse_validation)
                                             : std::stod(args.lambda);
      model_json = mrd::fit_mrd_elastic_net(data, cfg, mrd_cfg, *law,
                                            mrd::derive_seed(args.seed, "cli-fit"))
                       .model.to_json();
    } else {
      model_json = mrd::fit_elastic_net_admm(data, cfg).model.to_json();
    }
  } else {
    throw mrd::ConfigError("unknown method '" + args.method + "'");
  }
  write_file(args.out_path, model_json);
  std::cout << "wrote " << args.out_path << '\n';
  return 0;
}

struct TestArgs {
  std::string model_path;
  std::string data_path;
  std::string law_path;
  int dummies = 1000;
  std::uint64_t seed = 1;
  std::string out_path = "report.csv";
  std::string dump_path;
};

int run_test(const TestArgs& args) {
  auto model = mrd::Model::from_json(read_file(args.model_path));
  mrd::Dataset data = load_dataset(args.data_path, "");
  auto law = mrd::ConditionalLaw::from_json(read_file(args.law_path));
  mrd::HrtConfig cfg;
  cfg.dummies = args.dummies;
  cfg.seed = args.seed;
  mrd::TestReport report = mrd::hrt_pvalues(*model, data, *law, cfg);
  mrd::write_test_report_csv(args.out_path, report, args.dump_path);
  std::cout << "wrote " << args.out_path << " (t_star=" << report.t_star
            << ")\n";
  return 0;
}

struct SelectArgs {
  std::string pvalues_path;
  std::string method = "bh";
  double q = 0.2;
  std::string truth_path;
  std::string out_path = "selection.csv";
};

int run_select(const SelectArgs& args) {
  auto [features, pvalues] = mrd::read_pvalues_csv(args.pvalues_path);
  mrd::SelectionResult sel = args.method == "by"
                                 ? mrd::by_select(pvalues, args.q)
                                 : mrd::bh_select(pvalues, args.q);
  std::vector<int> selected;
  for (int pos : sel.rejected) {
    selected.push_back(features[static_cast<std::size_t>(pos)]);
  }
  std::optional<mrd::FdpPower> fp;
  if (!args.truth_path.empty()) {
    const int d = static_cast<int>(features.size());
    std::vector<int> nonnull = mrd::load_truth_sidecar(args.truth_path, d);
    fp = mrd::eval_fdp_power(selected, nonnull, d);
  }
  std::ofstream out(args.out_path);
  if (!out) {
    throw std::runtime_error("cannot write " + args.out_path);
  }
  out << "method,q,num_rejected,fdp,power\n";
  out << args.method << ',' << mrd::format_double(args.q) << ','
      << selected.size() << ',' << (fp ? mrd::format_double(fp->fdp) : "")
      << ',' << (fp ? mrd::format_double(fp->power) : "") << '\n';
  out << "rejected";
  for (int j : selected) {
    out << ',' << (j + 1);
  }
  out << '\n';
  std::cout << "rejected " << selected.size() << " features\n";
  return 0;
}

struct DiagnoseArgs {
  std::string data_path;
  std::string law_path;
  std::vector<int> features;  // 1-based on the command line
  int replicates = 10;
  std::uint64_t seed = 1;
  std::string out_path = "gof.csv";
};

int run_diagnose(const DiagnoseArgs& args) {
  mrd::Dataset data = load_dataset(args.data_path, "");
  auto law = mrd::ConditionalLaw::from_json(read_file(args.law_path));
  std::vector<int> features;
  if (args.features.empty()) {
    for (int j = 0; j < data.d(); ++j) {
      features.push_back(j);
    }
  } else {
    for (int j : args.features) {
      features.push_back(j - 1);
    }
  }
  std::ofstream out(args.out_path);
  if (!out) {
    throw std::runtime_error("cannot write " + args.out_path);
  }
  out << "feature,gof\n";
  double total = 0.0;
  for (int j : features) {
    auto sampler = law->column_sampler(data.x, j);
    double mean_gof = 0.0;
    for (int r = 0; r < args.replicates; ++r) {
      mrd::Rng rng(mrd::derive_seed(args.seed, "diagnose",
                                    {static_cast<std::uint64_t>(j),
                                     static_cast<std::uint64_t>(r)}));
      mean_gof += mrd::covariance_gof(data.x, sampler->draw(rng), j);
    }
    mean_gof /= args.replicates;
    total += mean_gof;
    out << (j + 1) << ',' << mrd::format_double(mean_gof) << '\n';
  }
  out << "total," << mrd::format_double(total) << '\n';
  std::cout << "sum of covariance diagnostics: " << total << '\n';
  return 0;
}

struct QqArgs {
  std::string pvalues_path;
  std::string truth_path;
  std::string out_path = "qq_data.csv";
};

int run_qq(const QqArgs& args) {
  auto [features, pvalues] = mrd::read_pvalues_csv(args.pvalues_path);
  const int d = static_cast<int>(features.size());
  std::vector<int> nonnull;
  bool truth_known = false;
  if (!args.truth_path.empty()) {
    nonnull = mrd::load_truth_sidecar(args.truth_path, d);
    truth_known = true;
  }
  std::vector<bool> is_null(static_cast<std::size_t>(d), true);
  for (int j : nonnull) {
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      if (features[fi] == j) {
        is_null[fi] = false;
      }
    }
  }
  std::ofstream out(args.out_path);
  if (!out) {
    throw std::runtime_error("cannot write " + args.out_path);
  }
  out << "feature,pvalue,null_flag,uniform_quantile\n";
  auto emit_group = [&](bool want_null) {
    std::vector<std::size_t> idx;
    for (std::size_t fi = 0; fi < features.size(); ++fi) {
      if (!truth_known || is_null[fi] == want_null) {
        idx.push_back(fi);
      }
    }
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (pvalues[static_cast<Eigen::Index>(a)] !=
          pvalues[static_cast<Eigen::Index>(b)]) {
        return pvalues[static_cast<Eigen::Index>(a)] <
               pvalues[static_cast<Eigen::Index>(b)];
      }
      return features[a] < features[b];
    });
    const double count = static_cast<double>(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out << (features[idx[i]] + 1) << ','
          << mrd::format_double(pvalues[static_cast<Eigen::Index>(idx[i])])
          << ','
          << (truth_known ? std::to_string(want_null ? 1 : 0) : std::string())
          << ','
          << mrd::format_double((static_cast<double>(i) + 1.0) / (count + 1.0))
          << '\n';
    }
  };
  if (truth_known) {
    emit_group(true);
    emit_group(false);
  } else {
    emit_group(true);  // single group when truth is unknown
  }
  std::cout << "wrote " << args.out_path << '\n';
  return 0;
}

struct ExperimentArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;
};

int run_experiment_cmd(const ExperimentArgs& args) {
  mrd::ExperimentConfig config = mrd::load_experiment_config(args.config_path);
  if (args.seed) config.base_seed = *args.seed;
  if (args.workers) config.workers = *args.workers;
  if (args.out_dir) config.output_dir = *args.out_dir;
  mrd::ExperimentResult result = mrd::run_experiment(config);
  mrd::emit_reports(config, result);
  std::cout << "ran " << config.trials << " trials ("
            << result.failed_trials << " failed); reports in "
            << config.output_dir << '\n';
  return result.failed_trials > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Holdout randomization testing with risk-discrepancy training"};
  app.require_subcommand(1);

  GenDataArgs gen_args;
  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
  gen->add_option("--out", gen_args.out_dir, "Output directory");
  gen->add_option("--family", gen_args.family, "ar1|gmm_mixture|student_t");
  gen->add_option("--rho", gen_args.rho, "AR(1) auto-correlation");
  gen->add_option("--rhos", gen_args.rhos, "Mixture component rhos")
      ->delimiter(',');
  gen->add_option("--nu", gen_args.nu, "Student-t degrees of freedom");
  gen->add_option("--n", gen_args.n, "Sample count");
  gen->add_option("--d", gen_args.d, "Feature count");
  gen->add_option("--response", gen_args.response, "M1|M2|M3|M4");
  gen->add_option("--amplitude", gen_args.amplitude, "Signal amplitude c");
  gen->add_option("--sparsity", gen_args.sparsity, "Non-null fraction");
  gen->add_option("--noise-sd", gen_args.noise_sd, "Noise standard deviation");
  gen->add_option("--seed", gen_args.seed, "Base seed");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Train a model (or fit a law)");
  fit->add_option("--data", fit_args.data_path, "Training CSV")->required();
  fit->add_option("--truth", fit_args.truth_path, "Truth sidecar");
  fit->add_option("--method", fit_args.method,
                  "lasso|elastic_net|mlp|gaussian|gmm");
  fit->add_flag("--mrd", fit_args.mrd, "Add the risk-discrepancy penalty");
  fit->add_option("--law", fit_args.law_path, "Law JSON (needed with --mrd)");
  fit->add_option("--lambda", fit_args.lambda, "Penalty weight or 'auto'");
  fit->add_option("--alpha1", fit_args.alpha1, "L1 penalty (omit to CV-tune)");
  fit->add_option("--alpha2", fit_args.alpha2, "L2 penalty");
  fit->add_option("--components", fit_args.components, "GMM components");
  fit->add_option("--epochs", fit_args.epochs, "MLP epochs");
  fit->add_option("--seed", fit_args.seed, "Seed");
  fit->add_option("--out", fit_args.out_path, "Output JSON path");

  TestArgs test_args;
  auto* test = app.add_subcommand("test", "HRT p-values from a fitted model");
  test->add_option("--model", test_args.model_path, "Model JSON")->required();
  test->add_option("--data", test_args.data_path, "Held-out CSV")->required();
  test->add_option("--law", test_args.law_path, "Law JSON")->required();
  test->add_option("--dummies", test_args.dummies, "Dummy replicates K");
  test->add_option("--seed", test_args.seed, "Seed");
  test->add_option("--out", test_args.out_path, "Report CSV path");
  test->add_option("--dump-dummies", test_args.dump_path,
                   "Also dump per-dummy statistics");

  SelectArgs select_args;
  auto* select = app.add_subcommand("select", "BH/BY selection on p-values");
  select->add_option("--pvalues", select_args.pvalues_path, "Report CSV")
      ->required();
  select->add_option("--method", select_args.method, "bh|by");
  select->add_option("--q", select_args.q, "Target FDR level");
  select->add_option("--truth", select_args.truth_path, "Truth sidecar");
  select->add_option("--out", select_args.out_path, "Output CSV");

  DiagnoseArgs diag_args;
  auto* diag = app.add_subcommand("diagnose", "Covariance goodness-of-fit");
  diag->add_option("--data", diag_args.data_path, "Feature CSV")->required();
  diag->add_option("--law", diag_args.law_path, "Law JSON")->required();
  diag->add_option("--features", diag_args.features, "1-based feature ids")
      ->delimiter(',');
  diag->add_option("--replicates", diag_args.replicates, "Dummy draws per feature");
  diag->add_option("--seed", diag_args.seed, "Seed");
  diag->add_option("--out", diag_args.out_path, "Output CSV");

  ExperimentArgs exp_args;
  auto* exp = app.add_subcommand("experiment", "Config-driven experiment run");
  exp->add_option("--config", exp_args.config_path, "Config JSON")->required();
  std::uint64_t seed_opt = 0;
  auto* seed_flag = exp->add_option("--seed", seed_opt, "Override base seed");
  int workers_opt = 0;
  auto* workers_flag =
      exp->add_option("--workers", workers_opt, "Worker thread count");
  std::string out_opt;
  auto* out_flag = exp->add_option("--out", out_opt, "Override output dir");

  QqArgs qq_args;
  auto* qq = app.add_subcommand("qq", "Q-Q data from a p-value report");
  qq->add_option("--pvalues", qq_args.pvalues_path, "Report CSV")->required();
  qq->add_option("--truth", qq_args.truth_path, "Truth sidecar");
  qq->add_option("--out", qq_args.out_path, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen_data(gen_args);
    if (*fit) return run_fit(fit_args);
    if (*test) return run_test(test_args);
    if (*select) return run_select(select_args);
    if (*diag) return run_diagnose(diag_args);
    if (*exp) {
      if (*seed_flag) exp_args.seed = seed_opt;
      if (*workers_flag) exp_args.workers = workers_opt;
      if (*out_flag) exp_args.out_dir = out_opt;
      return run_experiment_cmd(exp_args);
    }
    if (*qq) return run_qq(qq_args);
  } catch (const mrd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const mrd::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
