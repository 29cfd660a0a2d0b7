// End-to-end checks of the command-line pipeline and its file formats.
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "mrd/csv.hpp"
#include "mrd/model.hpp"

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MRD_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path("/tmp/" + name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace

TEST_CASE("gen-data, fit, test, select, diagnose, qq pipeline") {
  TempDir dir("mrd_cli_pipeline");

  CHECK(run_cli("gen-data --out " + dir.path.string() +
                " --family ar1 --rho 0.25 --n 120 --d 5 --response M1"
                " --amplitude 0.8 --sparsity 0.4 --seed 3") == 0);
  REQUIRE(fs::exists(dir.file("data.csv")));
  REQUIRE(fs::exists(dir.file("truth.txt")));
  REQUIRE(fs::exists(dir.file("law.json")));
  mrd::Dataset data = mrd::load_feature_csv(dir.file("data.csv"));
  CHECK(data.n() == 120);
  CHECK(data.d() == 5);
  CHECK(data.has_response());

  CHECK(run_cli("fit --data " + dir.file("data.csv") +
                " --method lasso --alpha1 0.05 --seed 5 --out " +
                dir.file("model.json")) == 0);
  {
    std::ifstream in(dir.file("model.json"));
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto model = mrd::Model::from_json(text);
    CHECK(model->num_features() == 5);
  }

  // Risk-discrepancy variant against the generative law.
  CHECK(run_cli("fit --data " + dir.file("data.csv") +
                " --method lasso --alpha1 0.05 --mrd --law " +
                dir.file("law.json") + " --lambda 0.5 --seed 5 --out " +
                dir.file("model_mrd.json")) == 0);

  // Law fitting through the same subcommand.
  CHECK(run_cli("fit --data " + dir.file("data.csv") +
                " --method gaussian --out " + dir.file("law_fit.json")) == 0);

  CHECK(run_cli("test --model " + dir.file("model.json") + " --data " +
                dir.file("data.csv") + " --law " + dir.file("law.json") +
                " --dummies 20 --seed 7 --out " + dir.file("report.csv") +
                " --dump-dummies " + dir.file("dump.csv")) == 0);
  auto report_rows = mrd::read_csv_rows(dir.file("report.csv"));
  CHECK(report_rows.size() == 6);  // header + d rows
  CHECK(report_rows[0] ==
        std::vector<std::string>{"feature", "pvalue", "t_star", "rd_hat"});
  auto dump_rows = mrd::read_csv_rows(dir.file("dump.csv"));
  CHECK(dump_rows.size() == 1 + 5 * 20);

  CHECK(run_cli("select --pvalues " + dir.file("report.csv") +
                " --method bh --q 0.2 --truth " + dir.file("truth.txt") +
                " --out " + dir.file("selection.csv")) == 0);
  auto sel_rows = mrd::read_csv_rows(dir.file("selection.csv"));
  REQUIRE(sel_rows.size() >= 2);
  CHECK(sel_rows[0] ==
        std::vector<std::string>{"method", "q", "num_rejected", "fdp",
                                 "power"});

  CHECK(run_cli("diagnose --data " + dir.file("data.csv") + " --law " +
                dir.file("law.json") + " --replicates 3 --seed 9 --out " +
                dir.file("gof.csv")) == 0);
  auto gof_rows = mrd::read_csv_rows(dir.file("gof.csv"));
  CHECK(gof_rows.size() == 1 + 5 + 1);  // header + per-feature + total
  CHECK(gof_rows.back()[0] == "total");

  CHECK(run_cli("qq --pvalues " + dir.file("report.csv") + " --truth " +
                dir.file("truth.txt") + " --out " + dir.file("qq.csv")) == 0);
  auto qq_rows = mrd::read_csv_rows(dir.file("qq.csv"));
  CHECK(qq_rows.size() == 1 + 5);
}

TEST_CASE("experiment subcommand and exit codes") {
  TempDir dir("mrd_cli_experiment");
  const std::string cfg_path = dir.file("config.json");
  {
    std::ofstream out(cfg_path);
    out << R"({
      "design": {"family": "ar1", "rho": 0.2, "n": 60, "d": 4},
      "response": {"model": "M1", "amplitude": 0.8, "sparsity": 0.5},
      "methods": [{"name": "lasso", "alpha1": 0.05, "max_iter": 120}],
      "test": {"type": "hrt", "dummies": 10},
      "law": {"type": "true"},
      "trials": 2,
      "base_seed": 4,
      "output_dir": ")"
        << dir.file("out") << R"("
    })";
  }
  CHECK(run_cli("experiment --config " + cfg_path + " --workers 2") == 0);
  CHECK(fs::exists(dir.file("out") + "/summary.json"));
  CHECK(fs::exists(dir.file("out") + "/trials.csv"));

  // Config errors exit with 2.
  const std::string bad_path = dir.file("bad.json");
  std::ofstream(bad_path) << "{\"methods\": []}";
  CHECK(run_cli("experiment --config " + bad_path) == 2);
  CHECK(run_cli("experiment --config " + dir.file("missing.json")) == 2);

  // CLI parse errors exit with 2 as well.
  CHECK(run_cli("fit") == 2);
  CHECK(run_cli("no-such-command") == 2);
}
