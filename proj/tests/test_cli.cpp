#include <densegrass/io.hpp>

#include <gtest/gtest.h>

#include "support.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace densegrass;
using testing_support::TempDir;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const TempDir& dir) {
  const auto out = dir.path() / "stdout.txt", err = dir.path() / "stderr.txt";
  const std::string cmd = std::string("'") + DENSEGRASS_CLI_PATH + "' " + args + " > '" + out.string() + "' 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

const char* kSmallScene = "synth --F 10 --P 90 --K 3 --seed 3 --min-angle 20";

}  // namespace

TEST(Cli, SynthReconstructEvalPipeline) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene", out = dir.path() / "est";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  for (const char* f : {"W.csv", "R.csv", "S_gt.csv", "meta.json", "labels_gt.csv"}) EXPECT_TRUE(std::filesystem::exists(data / f)) << f;
  const RunResult rec = run("reconstruct " + q(data) + " --out " + q(out), dir);
  ASSERT_EQ(rec.code, 0) << rec.err;
  for (const char* f : {"S_est.csv", "labels.csv", "diagnostics.json"}) EXPECT_TRUE(std::filesystem::exists(out / f)) << f;
  const RunResult ev = run("eval " + q(data) + " --estimate " + q(out / "S_est.csv") + " --labels " + q(out / "labels.csv"), dir);
  ASSERT_EQ(ev.code, 0) << ev.err;
  const auto j = nlohmann::json::parse(ev.out);
  ASSERT_TRUE(j.contains("e3d"));
  const double e = j.at("e3d").get<double>();
  EXPECT_TRUE(std::isfinite(e));
  EXPECT_GE(e, 0.0);
  EXPECT_GE(j.at("label_accuracy").get<double>(), 0.0);
  EXPECT_EQ(read_labels(out / "labels.csv").size(), 90u);
  const auto diag = nlohmann::json::parse(slurp(out / "diagnostics.json"));
  ASSERT_FALSE(diag.at("iterations").empty());
  for (const char* key : {"iter", "gap", "rho", "reproj", "nn_Ssharp", "nn_Z", "objective"})
    EXPECT_TRUE(diag.at("iterations")[0].contains(key)) << key;
  EXPECT_FALSE(diag.at("iterations")[0].contains("seconds"));
}

TEST(Cli, MissingMeasurementsExitOne) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  std::filesystem::remove(data / "W.csv");
  const RunResult r = run("reconstruct " + q(data) + " --out " + q(dir.path() / "est"), dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("W.csv"), std::string::npos) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, EvalOfGroundTruthIsZero) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  std::filesystem::copy_file(data / "S_gt.csv", dir.path() / "S_est.csv");
  const RunResult r = run("eval " + q(data) + " --estimate " + q(dir.path() / "S_est.csv"), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("e3d").get<double>(), 0.0);
}

TEST(Cli, HelpListsEveryKeyWithDefault) {
  TempDir dir("dg_cli");
  const RunResult r = run("--help", dir);
  EXPECT_EQ(r.code, 0);
  for (const char* key : {"--beta1", "--beta2", "--beta3", "--rho0", "--rho-max", "--eps", "--c", "--K", "--p",
                          "--d-tilde", "--max-iter", "--seed", "--threads", "--config", "--out"})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  for (const char* def : {"[0.01]", "[1e+08]", "[1e-10]", "[1.1]", "[300]", "[6]", "[3]", "[0.1]"})
    EXPECT_NE(r.out.find(def), std::string::npos) << def;
}

TEST(Cli, UsageErrorsExitOne) {
  TempDir dir("dg_cli");
  EXPECT_EQ(run("", dir).code, 1);
  EXPECT_EQ(run("reconstruct", dir).code, 1);
  EXPECT_EQ(run("synth --no-such-flag 3", dir).code, 1);
  EXPECT_EQ(run("synth --F abc", dir).code, 1);
}

TEST(Cli, ConfigFileAppliesAndRejectsUnknownKeys) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  write_text(dir.path() / "good.ini", "max-iter = 3\nbeta1 = 2.0\n");
  const RunResult ok = run("--config " + q(dir.path() / "good.ini") + " reconstruct " + q(data) + " --out " + q(dir.path() / "e"), dir);
  ASSERT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(nlohmann::json::parse(ok.out).at("iterations").get<int>(), 3);
  write_text(dir.path() / "bad.ini", "max-iter = 3\nbeta7 = 2.0\n");
  const RunResult bad = run("--config " + q(dir.path() / "bad.ini") + " reconstruct " + q(data), dir);
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.err.find("beta7"), std::string::npos) << bad.err;
}

TEST(Cli, FlagsOverrideConfigFile) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  write_text(dir.path() / "c.ini", "max-iter = 3\n");
  const RunResult r = run("--config " + q(dir.path() / "c.ini") + " reconstruct " + q(data) + " --max-iter 2 --out " + q(dir.path() / "e"), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("iterations").get<int>(), 2);
}

TEST(Cli, IdenticalRunsProduceIdenticalFiles) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run(std::string(kSmallScene) + " --out " + q(data), dir).code, 0);
  ASSERT_EQ(run("reconstruct " + q(data) + " --max-iter 40 --out " + q(dir.path() / "a"), dir).code, 0);
  ASSERT_EQ(run("reconstruct " + q(data) + " --max-iter 40 --out " + q(dir.path() / "b"), dir).code, 0);
  for (const char* f : {"S_est.csv", "diagnostics.json", "labels.csv"})
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
}

TEST(Cli, SweepWritesTable) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run("synth --F 8 --P 40 --K 2 --seed 1 --out " + q(data), dir).code, 0);
  const RunResult r = run("sweep-noise " + q(data) + " --lambdas 0,0.01 --noise-seeds 1,2 --max-iter 5 --out " + q(dir.path() / "s"), dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string text = slurp(dir.path() / "s" / "sweep.csv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "lambda_g,seed,e3d,iters,seconds");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
}

TEST(Cli, NumericalFailureExitTwo) {
  TempDir dir("dg_cli");
  const auto data = dir.path() / "scene";
  ASSERT_EQ(run("synth --F 6 --P 30 --K 2 --seed 1 --out " + q(data), dir).code, 0);
  Matrix W = read_csv(data / "W.csv");
  W *= 1e300;
  write_csv(data / "W.csv", W);
  const RunResult r = run("reconstruct " + q(data) + " --out " + q(dir.path() / "e"), dir);
  EXPECT_EQ(r.code, 2) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "e" / "diagnostics.json"));
}
