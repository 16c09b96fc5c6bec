#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "anfis/serialization.hpp"
#include "support/fixtures.hpp"

namespace anfis {
namespace {

namespace fs = std::filesystem;
using testing::read_text;
using testing::write_text;

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run_cli(const fs::path& dir, const std::string& args) {
  const std::string cmd = fmt::format("cd '{}' && '{}' {} >stdout.txt 2>stderr.txt", dir.string(), ANFIS_CLI_PATH, args);
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(dir / "stdout.txt"), read_text(dir / "stderr.txt")};
}

std::string config(const std::string& subsystems, const std::string& extra = "") {
  return fmt::format(R"({{
  "seed": 11,
  "output_dir": "out",
  "signals": [
    {{"name": "BTC", "path": "btc.csv", "value_column": "close"}},
    {{"name": "BTC.D", "path": "btcd.csv", "date_column": "time"}}
  ],
  "subsystems": [{}],
  "training": {{"epochs": 8}}{}
}})",
                     subsystems, extra);
}

const std::string kBtcOnly = R"({"name": "BTC", "inputs": ["BTC"]})";
const std::string kCoupled =
    R"({"name": "BTC", "inputs": ["BTC", "BTC.D+1"]}, {"name": "BTC.D", "inputs": ["BTC.D"]})";

fs::path workspace(const std::string& name, const std::string& cfg, std::size_t days = 240) {
  const auto dir = testing::scratch_dir("cli_" + name);
  testing::write_market_csvs(dir, days);
  write_text(dir / "run.json", cfg);
  return dir;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

TEST(Cli, IngestWritesSupervisedDump) {
  const auto dir = workspace("ingest", config(kCoupled));
  ASSERT_EQ(run_cli(dir, "ingest --config run.json").code, 0);
  const std::string csv = read_text(dir / "out" / "supervised_BTC.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "date,BTC,BTC.D+1,target");
  EXPECT_EQ(lines(csv), 240u);
}

TEST(Cli, TrainBtcOnly) {
  const auto dir = workspace("train", config(kBtcOnly));
  const auto r = run_cli(dir, "train --config run.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto model = std::get<AnfisModel>(load_model(dir / "out" / "models" / "BTC.json"));
  EXPECT_EQ(model.metadata.at("fis.type"), "sugeno");
  EXPECT_EQ(model.metadata.at("induction.method"), "grid");
  EXPECT_EQ(model.metadata.at("training.method"), "hybrid");
  const std::string report = read_text(dir / "out" / "report.csv");
  EXPECT_EQ(lines(report), 2u);
  EXPECT_NE(report.find("BTC,BTC(k),grid,hybrid,"), std::string::npos);
  EXPECT_EQ(lines(read_text(dir / "out" / "curves" / "BTC.grid.hybrid.csv")), 9u);
  EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "BTC_test.svg"));
}

TEST(Cli, SweepGivesSixRows) {
  const auto dir = workspace(
      "sweep", config(kBtcOnly, R"(, "induction": {"method": ["grid", "subtractive", "fcm"], "fcm": {"clusters": 3}})"));
  auto j = nlohmann::json::parse(read_text(dir / "run.json"));
  j["training"]["method"] = {"hybrid", "backprop"};
  write_text(dir / "run.json", j.dump());
  const auto r = run_cli(dir, "train --config run.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(read_text(dir / "out" / "report.csv")), 7u);
  EXPECT_TRUE(fs::exists(dir / "out" / "models" / "BTC.fcm.backprop.json"));
}

TEST(Cli, MissingDataFile) {
  const auto dir = workspace("missing", config(kBtcOnly));
  fs::remove(dir / "btcd.csv");
  const auto r = run_cli(dir, "train --config run.json");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("btcd.csv"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, SeedIsMandatory) {
  auto j = nlohmann::json::parse(config(kBtcOnly));
  j.erase("seed");
  const auto dir = workspace("noseed", j.dump());
  EXPECT_NE(run_cli(dir, "ingest --config run.json").code, 0);
  EXPECT_EQ(run_cli(dir, "ingest --config run.json --seed 4").code, 0);
}

TEST(Cli, ForecastSevenCycles) {
  const auto dir = workspace("forecast", config(kCoupled));
  ASSERT_EQ(run_cli(dir, "train --config run.json").code, 0);
  const auto r = run_cli(dir, "forecast --config run.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_text(dir / "out" / "forecast.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "cycle,date,BTC,BTC.D");
  EXPECT_EQ(lines(csv), 8u);
  EXPECT_TRUE(fs::exists(dir / "out" / "plots" / "forecast_BTC.svg"));
}

TEST(Cli, ForecastHorizonOneIsOneStepPrediction) {
  const auto dir = workspace("horizon1", config(kCoupled, R"(, "horizon": 1)"));
  ASSERT_EQ(run_cli(dir, "train --config run.json").code, 0);
  ASSERT_EQ(run_cli(dir, "forecast --config run.json").code, 0);
  const std::string csv = read_text(dir / "out" / "forecast.csv");
  ASSERT_EQ(lines(csv), 2u);

  const auto btc = load_candles(dir / "btc.csv", "date", "close");
  const auto dom = load_candles(dir / "btcd.csv", "time", "close");
  const auto d_model = std::get<AnfisModel>(load_model(dir / "out" / "models" / "BTC.D.json"));
  const auto b_model = std::get<AnfisModel>(load_model(dir / "out" / "models" / "BTC.json"));
  const double d1 = predict(d_model, std::vector<double>{dom.values.back()});
  const double b1 = predict(b_model, std::vector<double>{btc.values.back(), d1});
  const std::string row = csv.substr(csv.find('\n') + 1);
  EXPECT_NE(row.find(fmt::format(",{},{}\n", b1, d1)), std::string::npos) << row;
}

TEST(Cli, ForecastWithoutDominanceModel) {
  const auto dir = workspace("nodom", config(kCoupled));
  ASSERT_EQ(run_cli(dir, "train --config run.json").code, 0);
  fs::remove(dir / "out" / "models" / "BTC.D.json");
  fs::remove(dir / "out" / "forecast.csv");
  const auto r = run_cli(dir, "forecast --config run.json");
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("UnknownSignal"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "out" / "forecast.csv"));
}

TEST(Cli, EvaluateWritesRolloutReport) {
  const auto dir = workspace("evaluate", config(kCoupled));
  ASSERT_EQ(run_cli(dir, "train --config run.json").code, 0);
  const auto r = run_cli(dir, "evaluate --config run.json");
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = read_text(dir / "out" / "rollout_eval.csv");
  EXPECT_EQ(lines(csv), 1u + 7u * 2u);
  const std::string eval = read_text(dir / "out" / "evaluate.csv");
  EXPECT_EQ(lines(eval), 3u);
}

TEST(Cli, CompareLayoutAndDeterminism) {
  const auto dir = workspace("compare", config(kBtcOnly, R"(, "induction": {"fcm": {"clusters": 3}}, "ann": {"max_iter": 30})"));
  const auto first = run_cli(dir, "compare --config run.json");
  ASSERT_EQ(first.code, 0) << first.err;
  const std::string a = read_text(dir / "out" / "compare.csv");
  EXPECT_EQ(a.substr(0, a.find('\n')), "target,method,train_rmse,test_rmse");
  EXPECT_EQ(lines(a), 3u);
  ASSERT_EQ(run_cli(dir, "compare --config run.json").code, 0);
  EXPECT_EQ(read_text(dir / "out" / "compare.csv"), a);
  EXPECT_EQ(read_text(dir / "out" / "compare.txt"), first.out);
}

TEST(Cli, ClusterInfo) {
  const auto dir = workspace("clusters", config(kBtcOnly, R"(, "induction": {"method": "fcm", "fcm": {"clusters": 4}})"));
  const auto r = run_cli(dir, "cluster-info --config run.json");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("fcm, 4 rules"), std::string::npos);
  EXPECT_EQ(read_text(dir / "out" / "cluster_info.txt"), r.out);
}

TEST(Cli, Gradcheck) {
  const auto dir = testing::scratch_dir("cli_gradcheck");
  const auto pass = run_cli(dir, "gradcheck --seed 5");
  EXPECT_EQ(pass.code, 0);
  EXPECT_NE(pass.out.find("PASS"), std::string::npos);
  EXPECT_EQ(run_cli(dir, "gradcheck --seed 5").out, pass.out);
  const auto fail = run_cli(dir, "gradcheck --seed 5 --threshold 0");
  EXPECT_NE(fail.code, 0);
  EXPECT_NE(fail.out.find("FAIL"), std::string::npos);
  EXPECT_NE(run_cli(dir, "gradcheck").code, 0);
}

TEST(Cli, TrainIsDeterministic) {
  const auto dir = workspace("determinism", config(kCoupled, R"(, "induction": {"method": ["grid", "fcm"], "fcm": {"clusters": 3}})"));
  ASSERT_EQ(run_cli(dir, "train --config run.json --out a").code, 0);
  ASSERT_EQ(run_cli(dir, "train --config run.json --out b").code, 0);
  std::size_t files = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    EXPECT_EQ(read_text(entry.path()), read_text(dir / "b" / rel)) << rel;
    ++files;
  }
  EXPECT_GT(files, 5u);
}

TEST(Cli, UsageErrors) {
  const auto dir = testing::scratch_dir("cli_usage");
  EXPECT_NE(run_cli(dir, "").code, 0);
  EXPECT_NE(run_cli(dir, "bogus").code, 0);
  EXPECT_NE(run_cli(dir, "train").code, 0);
  EXPECT_NE(run_cli(dir, "train --config nope.json").code, 0);
}

}  // namespace
}  // namespace anfis
