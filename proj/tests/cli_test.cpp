#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "relstance/cli.hpp"
#include "relstance/serialize.hpp"

using namespace relstance;
namespace fs = std::filesystem;

namespace {

const std::string kData = std::string(RELSTANCE_FIXTURES) + "/three_rows.jsonl";

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "relstance");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string run_dir(const Result& r) {
  std::smatch m;
  static const std::regex re("run_dir=(\\S+)");
  return std::regex_search(r.out, m, re) ? m[1].str() : std::string{};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("relstance_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  std::vector<std::string> base(std::string cmd) const {
    return {std::move(cmd), "--data", kData, "--split", "1,1,1", "--run-root", root_.string()};
  }
  fs::path root_;
};

}  // namespace

TEST_F(CliTest, ChainedPipelineOnThreeRows) {
  auto args = base("build-graph");
  auto g = run(args);
  ASSERT_EQ(g.code, 0) << g.err;
  EXPECT_NE(g.out.find("nodes=3 edges=3"), std::string::npos);
  const fs::path gdir = run_dir(g);
  const auto graph = read_json_file(gdir / "graph.json");
  EXPECT_EQ(graph["meta"]["rho"].get<double>(), 0.3);
  EXPECT_EQ(read_json_file(gdir / "config.json")["values"]["rho"], "0.3");
  EXPECT_TRUE(fs::exists(gdir / "stats.json"));

  args = base("pretrain-gae");
  args.insert(args.end(), {"--graph", (gdir / "graph.json").string(), "--gae-epochs", "5", "--dim", "4"});
  auto p = run(args);
  ASSERT_EQ(p.code, 0) << p.err;
  const fs::path pdir = run_dir(p);
  EXPECT_EQ(read_json_file(pdir / "gae.json")["d"], 4);

  auto f = run({"featurize", "--data", kData, "--text-dim", "8", "--run-root", root_.string()});
  ASSERT_EQ(f.code, 0) << f.err;
  const fs::path fdir = run_dir(f);
  ASSERT_TRUE(fs::exists(fdir / "embeddings.tsv"));

  args = base("train");
  args.insert(args.end(), {"--graph", (gdir / "graph.json").string(), "--gae", (pdir / "gae.json").string(),
                        "--embeddings", (fdir / "embeddings.tsv").string(), "--dim", "4", "--text-dim", "8",
                        "--rel-out-dim", "4", "--epochs", "2"});
  auto t = run(args);
  ASSERT_EQ(t.code, 0) << t.err;
  const fs::path tdir = run_dir(t);
  ASSERT_TRUE(fs::exists(tdir / "classifier.json"));

  args = base("evaluate");
  args.insert(args.end(), {"--graph", (gdir / "graph.json").string(), "--classifier",
                        (tdir / "classifier.json").string(), "--embeddings", (fdir / "embeddings.tsv").string(),
                        "--text-dim", "8"});
  auto e = run(args);
  ASSERT_EQ(e.code, 0) << e.err;
  const fs::path edir = run_dir(e);
  std::ifstream preds(edir / "predictions.jsonl");
  EXPECT_EQ(read_predictions(preds).size(), 1u);
  const auto report = read_json_file(edir / "report.json");
  EXPECT_TRUE(report.contains("config"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({"bogus"}).code, 2);
  EXPECT_EQ(run({"build-graph", "--no-such-flag"}).code, 2);
  EXPECT_EQ(run({"build-graph", "--set", "nokey=1", "--data", kData}).code, 2);
  EXPECT_EQ(run({"build-graph", "--help"}).code, 0);
  const auto missing = run({"build-graph", "--run-root", root_.string()});
  EXPECT_EQ(missing.code, 1);
  EXPECT_FALSE(missing.err.empty());
  const auto absent = run({"build-graph", "--data", "/nonexistent.jsonl", "--run-root", root_.string()});
  EXPECT_EQ(absent.code, 1);
  // Failed commands leave no run directory behind.
  EXPECT_TRUE(!fs::exists(root_) || fs::is_empty(root_));
}

TEST_F(CliTest, FlagsOverrideSetWhichOverridesFile) {
  const auto cfg = root_.string() + ".cfg";
  {
    std::ofstream out(cfg);
    out << "rho=0.1\nseed=3\n";
  }
  auto args = base("build-graph");
  args.insert(args.end(), {"--config", cfg, "--set", "rho=0.2", "--set", "seed=8", "--seed", "9"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto config = read_json_file(fs::path(run_dir(r)) / "config.json");
  EXPECT_EQ(config["values"]["rho"], "0.2");
  EXPECT_EQ(config["values"]["seed"], "9");
  fs::remove(cfg);
}

TEST_F(CliTest, SameConfigSameRunDirectory) {
  const auto a = run(base("build-graph"));
  const auto b = run(base("build-graph"));
  EXPECT_EQ(run_dir(a), run_dir(b));
  auto args = base("build-graph");
  args.push_back("--rho");
  args.push_back("0.5");
  EXPECT_NE(run_dir(run(args)), run_dir(a));
}

TEST_F(CliTest, SynthAndGradCheck) {
  const auto s = run({"synth", "--synth-kind", "link", "--synth-per-community", "5", "--run-root", root_.string()});
  ASSERT_EQ(s.code, 0) << s.err;
  EXPECT_TRUE(fs::exists(fs::path(run_dir(s)) / "heldout.json"));
  const auto f = run({"synth", "--synth-records", "40", "--synth-hubs", "6", "--run-root", root_.string()});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_TRUE(fs::exists(fs::path(run_dir(f)) / "dataset.jsonl"));

  const auto g = run({"grad-check", "--grad-probes", "20", "--run-root", root_.string()});
  EXPECT_EQ(g.code, 0) << g.out << g.err;
}

TEST_F(CliTest, BinaryReportsUsageErrors) {
  const std::string cmd = std::string(RELSTANCE_CLI) + " bogus > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_NE(status, -1);
  EXPECT_EQ(WEXITSTATUS(status), 2);
}
