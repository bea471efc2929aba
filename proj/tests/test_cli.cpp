#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "amsa/cli.hpp"

namespace amsa::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("amsa_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

TEST(Parse, Defaults) {
  const CliConfig c = parse_config({"train"});
  EXPECT_EQ(c.experiment, Task::sine);
  EXPECT_EQ(c.strategy, StrategyName::shallow);
  EXPECT_EQ(c.runs, 20u);
  EXPECT_EQ(c.iters, 800u);
  EXPECT_EQ(c.samples, 20u);
  EXPECT_EQ(c.width, 3u);
  EXPECT_EQ(c.rho, 5.0);
  EXPECT_EQ(c.final_time, 5.0);
  EXPECT_EQ(c.tau, 1e-8);
  EXPECT_EQ(c.integrator, IntegratorKind::explicit_euler);
}

TEST(Parse, TaskDefaultsAndOverrides) {
  const CliConfig c = parse_config({"train", "--experiment", "classif", "--strategy", "a2", "--runs", "3",
                                    "--integrator", "heun", "--threads", "8", "--seed", "7"});
  EXPECT_EQ(c.width, 6u);
  EXPECT_EQ(c.bounds.lo, -2.0);
  EXPECT_EQ(c.samples, 800u);
  EXPECT_EQ(c.strategy, StrategyName::a2);
  EXPECT_EQ(c.runs, 3u);
  EXPECT_EQ(c.threads, 8u);
  EXPECT_EQ(c.seed, 7u);
  EXPECT_EQ(c.integrator, IntegratorKind::heun2);
  const CliConfig b = parse_config({"train", "--bounds", "-0.5", "0.5", "--samples", "40"});
  EXPECT_EQ(b.bounds.hi, 0.5);
  EXPECT_EQ(b.samples, 40u);
}

TEST(Parse, RejectsInvalidValues) {
  EXPECT_THROW(parse_config({"train", "--runs", "0"}), UsageError);
  EXPECT_THROW(parse_config({"train", "--strategy", "bogus"}), UsageError);
  EXPECT_THROW(parse_config({"train", "--bounds", "1", "-1"}), UsageError);
  EXPECT_THROW(parse_config({"train", "--experiment", "classif", "--width", "3"}), UsageError);
  EXPECT_THROW(parse_config({"train", "--strategy", "theoretical"}), UsageError);
  EXPECT_THROW(parse_config({"train", "--no-such-flag"}), UsageError);
  EXPECT_THROW(parse_config({}), UsageError);
  try {
    parse_config({"train", "--runs", "0"});
  } catch (const UsageError& e) {
    EXPECT_NE(std::string(e.what()).find("runs"), std::string::npos);
  }
}

TEST(Parse, ConfigFileAndFlagPrecedence) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  const fs::path file = dir / "run.ini";
  std::ofstream(file) << "experiment=step\nruns=4\nrho=2.5\n";
  const CliConfig c = parse_config({"train", "--config", file.string(), "--runs", "2"});
  EXPECT_EQ(c.experiment, Task::step);
  EXPECT_EQ(c.rho, 2.5);
  EXPECT_EQ(c.runs, 2u);
  std::ofstream(file) << "experiment=step\nunknown_key=1\n";
  EXPECT_THROW(parse_config({"train", "--config", file.string()}), UsageError);
}

TEST(Command, SmokeRunWritesThreeFiles) {
  const fs::path dir = scratch("smoke");
  const CliConfig c = parse_config(
      {"train", "--samples", "4", "--runs", "1", "--iters", "1", "--out-dir", dir.string()});
  std::ostringstream out, err;
  EXPECT_EQ(run_experiment_command(c, out, err), 0) << err.str();
  EXPECT_EQ(line_count(dir / "loss_history.csv"), 3u);
  EXPECT_EQ(line_count(dir / "summary.csv"), 2u);
  EXPECT_EQ(line_count(dir / "predictions.csv"), 202u);
  EXPECT_EQ(slurp(dir / "loss_history.csv").substr(0, 52), std::string(csv::kLossHistoryHeader).substr(0, 52));
  EXPECT_NE(out.str().find("median_min_J"), std::string::npos);
}

TEST(Command, UnwritableOutputDirectory) {
  const fs::path dir = scratch("blocked");
  fs::create_directories(dir.parent_path());
  std::ofstream(dir) << "a file, not a directory";
  const CliConfig c = parse_config({"train", "--samples", "4", "--runs", "1", "--iters", "1", "--out-dir",
                                    (dir / "sub").string()});
  std::ostringstream out, err;
  EXPECT_EQ(run_experiment_command(c, out, err), 2);
  fs::remove(dir);
}

TEST(Command, ByteIdenticalAcrossRepeatsAndThreads) {
  auto run = [](const std::string& name, const std::string& threads) {
    const fs::path dir = scratch(name);
    const CliConfig c = parse_config({"train", "--experiment", "classif", "--samples", "12", "--strategy", "a2",
                                      "--runs", "3", "--iters", "4", "--threads", threads, "--out-dir", dir.string()});
    std::ostringstream out, err;
    EXPECT_EQ(run_experiment_command(c, out, err), 0);
    return dir;
  };
  const fs::path a = run("det_a", "1");
  const fs::path b = run("det_b", "1");
  const fs::path c = run("det_c", "8");
  for (const char* f : {"loss_history.csv", "summary.csv", "predictions.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
  }
}

TEST(Csv, LossHistoryRoundTrip) {
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  std::vector<csv::LossHistoryRow> rows(2);
  rows[0].run_id = 0;
  rows[0].row.iteration = 0;
  rows[0].row.layers = 3;
  rows[0].row.train_loss = 0.1 + 0.2;
  rows[0].row.test_loss = 1.0 / 3.0;
  rows[1].run_id = 4;
  rows[1].row.iteration = 17;
  rows[1].row.layers = 32;
  rows[1].row.train_loss = 1e-300;
  rows[1].row.test_loss = 123456.789;
  rows[1].row.lambda_sq = 2.5e-7;
  csv::write_loss_history(dir / "h.csv", rows);
  const auto back = csv::read_loss_history(dir / "h.csv");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].run_id, rows[i].run_id);
    EXPECT_EQ(back[i].row.iteration, rows[i].row.iteration);
    EXPECT_EQ(back[i].row.layers, rows[i].row.layers);
    EXPECT_EQ(back[i].row.train_loss, rows[i].row.train_loss);
    EXPECT_EQ(back[i].row.test_loss, rows[i].row.test_loss);
    EXPECT_EQ(back[i].row.lambda_sq, rows[i].row.lambda_sq);
  }
  EXPECT_THROW(csv::parse_loss_row("1,2,3"), std::invalid_argument);
}

}  // namespace
}  // namespace amsa::cli
