#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>

#include "oracles.hpp"
#include "softki/bench.hpp"
#include "softki/checkpoint.hpp"
#include "softki/report.hpp"

#ifndef SOFTKI_CLI_PATH
#error "SOFTKI_CLI_PATH must point at the CLI binary"
#endif

using namespace softki;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() /
                     ("softki_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SOFTKI_CLI_PATH) + " " + args + " > " +
                          log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string report_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

Checkpoint small_checkpoint() {
  std::mt19937_64 rng(3);
  Dataset d;
  d.x = oracle::random_matrix(80, 2, rng);
  d.y = oracle::random_vector(80, rng);
  d.stats = Standardization::identity(2);
  d.stats.y_mean = 0.25;
  d.stats.y_std = 3.0;
  return make_checkpoint(fit_qr(d, oracle::random_theta(6, 2, rng)), 80, d.stats);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const fs::path dir = scratch("roundtrip");
  const Checkpoint ck = small_checkpoint();
  write_checkpoint((dir / "a.ckpt").string(), ck);
  const Checkpoint back = read_checkpoint((dir / "a.ckpt").string());
  EXPECT_EQ(back.model, ck.model);
  EXPECT_EQ(back.n, ck.n);
  EXPECT_EQ(back.noise, ck.noise);
  EXPECT_EQ(back.outputscale, ck.outputscale);
  EXPECT_EQ(back.z, ck.z);
  EXPECT_EQ(back.temperature, ck.temperature);
  EXPECT_EQ(back.lengthscales, ck.lengthscales);
  EXPECT_EQ(back.uzz, ck.uzz);
  EXPECT_EQ(back.r, ck.r);
  EXPECT_EQ(back.alpha, ck.alpha);
  EXPECT_EQ(back.stats.y_std, 3.0);
  write_checkpoint((dir / "b.ckpt").string(), back);
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));

  std::mt19937_64 rng(4);
  const DenseMatrix xs = oracle::random_matrix(5, 2, rng);
  EXPECT_EQ(predict(ck, xs).mean, predict(back, xs).mean);
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const fs::path dir = scratch("corrupt");
  const std::string path = (dir / "c.ckpt").string();
  write_checkpoint(path, small_checkpoint());
  std::string bytes = slurp(path);

  std::string flipped = bytes;
  flipped[flipped.size() - 3] ^= 0x10;
  std::ofstream(path, std::ios::binary) << flipped;
  EXPECT_THROW(read_checkpoint(path), ChecksumOrVersionMismatch);

  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 8);
  EXPECT_THROW(read_checkpoint(path), ChecksumOrVersionMismatch);

  std::string versioned = bytes;
  const auto at = versioned.find("version 1");
  ASSERT_NE(at, std::string::npos);
  versioned.replace(at, 9, "version 9");
  std::ofstream(path, std::ios::binary) << versioned;
  EXPECT_THROW(read_checkpoint(path), ChecksumOrVersionMismatch);

  std::ofstream(path, std::ios::binary) << "not a checkpoint\n";
  EXPECT_THROW(read_checkpoint(path), ChecksumOrVersionMismatch);
  EXPECT_THROW(read_checkpoint((dir / "missing.ckpt").string()), FileNotFound);
  fs::remove_all(dir);
}

TEST(Checkpoint, PredictChecksDimensions) {
  EXPECT_THROW(predict(small_checkpoint(), DenseMatrix::Zero(2, 3)), DimensionMismatch);
}

TEST(Report, FormattingIsDeterministic) {
  RunReport r;
  r.set("b", 0.1);
  r.set("a", 3);
  r.set("c", std::string("x"));
  EXPECT_EQ(r.to_text(), "b=0.1\na=3\nc=x\n");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  ASSERT_NE(r.get("a"), nullptr);
  EXPECT_EQ(*r.get("a"), "3");
  EXPECT_EQ(r.get("zzz"), nullptr);
}

TEST(Bench, SeedsPlusAggregateRows) {
  BenchSuite suite;
  suite.base.train.m = 8;
  suite.base.train.epochs = 2;
  suite.workers = 2;
  const auto rows = run_bench(suite);
  ASSERT_EQ(rows.size(), 4u);
  int aggregates = 0;
  for (const auto& r : rows) aggregates += r.aggregate ? 1 : 0;
  EXPECT_EQ(aggregates, 1);
  EXPECT_TRUE(bench_all_completed(rows));
}

TEST(Bench, ForcedExactOnDegenerateDataIsNanRow) {
  BenchSuite suite;
  suite.datasets = {"coincident"};
  suite.modes = {ObjectiveMode::kExact, ObjectiveMode::kAuto};
  suite.seeds = {0};
  suite.base.train.m = 16;
  suite.base.train.epochs = 3;
  suite.base.train.precision = Precision::kFloat32;
  const auto rows = run_bench(suite);
  bool saw_nan = false, saw_ok = false;
  for (const auto& r : rows) {
    if (r.aggregate) continue;
    if (r.mode == "exact") {
      EXPECT_EQ(r.status, "nan");
      EXPECT_TRUE(std::isnan(r.rmse));
      saw_nan = true;
    } else {
      EXPECT_EQ(r.status, "ok");
      EXPECT_TRUE(std::isfinite(r.rmse));
      saw_ok = true;
    }
  }
  EXPECT_TRUE(saw_nan && saw_ok);
  EXPECT_TRUE(bench_all_completed(rows));
}

TEST(Cli, TrainEvalPredictEndToEnd) {
  const fs::path dir = scratch("e2e");
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run_cli("train --model softki --data ricker --m 32 --epochs 10 --lr 0.1 --seed 0 "
                    "--out " + out,
                    dir / "train.log"),
            0)
      << slurp(dir / "train.log");
  for (const char* f : {"model.ckpt", "report.txt", "trace.csv", "timing.csv",
                        "lengthscales.csv", "temperatures.csv"}) {
    EXPECT_TRUE(fs::exists(fs::path(out) / f)) << f;
  }
  const std::string report = slurp(fs::path(out) / "report.txt");
  EXPECT_FALSE(report_value(report, "rmse").empty());
  EXPECT_EQ(report_value(report, "model"), "softki");

  // Evaluating on its own training data beats the raw target spread.
  const std::string ckpt = out + "/model.ckpt";
  ASSERT_EQ(run_cli("eval --checkpoint " + ckpt + " --data ricker --split train --out " +
                        (dir / "eval1").string(),
                    dir / "eval.log"),
            0)
      << slurp(dir / "eval.log");
  const std::string ev1 = slurp(dir / "eval1" / "report.txt");
  const double rmse = std::stod(report_value(ev1, "rmse"));
  EXPECT_TRUE(std::isfinite(rmse));
  EXPECT_LT(rmse, 1.0);

  ASSERT_EQ(run_cli("eval --checkpoint " + ckpt + " --data ricker --split train --out " +
                        (dir / "eval2").string(),
                    dir / "eval.log"),
            0);
  EXPECT_EQ(ev1, slurp(dir / "eval2" / "report.txt"));

  std::ofstream(dir / "in.csv") << "0,0\n0.5,-0.5\n";
  ASSERT_EQ(run_cli("predict --checkpoint " + ckpt + " --input " + (dir / "in.csv").string() +
                        " --output " + (dir / "pred.csv").string(),
                    dir / "pred.log"),
            0)
      << slurp(dir / "pred.log");
  std::istringstream pred(slurp(dir / "pred.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(pred, line)) ++lines;
  EXPECT_EQ(lines, 3);  // header + two rows
  fs::remove_all(dir);
}

TEST(Cli, TrainReportIsDeterministic) {
  const fs::path dir = scratch("det");
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(run_cli("train --model sgpr --data ricker --m 16 --epochs 5 --seed 3 --out " +
                          (dir / sub).string(),
                      dir / "log"),
              0)
        << slurp(dir / "log");
  }
  EXPECT_EQ(slurp(dir / "a" / "report.txt"), slurp(dir / "b" / "report.txt"));
  EXPECT_EQ(slurp(dir / "a" / "model.ckpt"), slurp(dir / "b" / "model.ckpt"));
  EXPECT_EQ(report_value(slurp(dir / "a" / "report.txt"), "model"), "sgpr");
  EXPECT_EQ(read_checkpoint((dir / "a" / "model.ckpt").string()).model, ModelKind::kSGPR);
  fs::remove_all(dir);
}

TEST(Cli, MissingFileFailsWithRecord) {
  const fs::path dir = scratch("missing");
  const int code = run_cli("train --data /nonexistent/data.csv --out " + (dir / "o").string(),
                           dir / "log");
  EXPECT_NE(code, 0);
  const std::string record = slurp(dir / "o" / "error.txt");
  EXPECT_NE(record.find("FileNotFound"), std::string::npos) << record;
  EXPECT_NE(record.find("file not found"), std::string::npos) << record;
  fs::remove_all(dir);
}

TEST(Cli, DimensionMismatchOnEval) {
  const fs::path dir = scratch("dim");
  write_checkpoint((dir / "m.ckpt").string(), small_checkpoint());
  std::ofstream(dir / "d3.csv") << "1,2,3,4\n2,3,4,5\n3,4,5,6\n4,5,6,7\n5,6,7,9\n";
  const int code = run_cli("eval --checkpoint " + (dir / "m.ckpt").string() + " --data " +
                               (dir / "d3.csv").string() + " --out " + (dir / "o").string(),
                           dir / "log");
  EXPECT_NE(code, 0);
  EXPECT_NE(slurp(dir / "log").find("DimensionMismatch"), std::string::npos)
      << slurp(dir / "log");
  fs::remove_all(dir);
}

TEST(Cli, BenchWritesTables) {
  const fs::path dir = scratch("bench");
  ASSERT_EQ(run_cli("bench --data ricker --model softki --model sgpr --seeds 2 --epochs 2 "
                    "--m 8 --solver-study --out " + dir.string(),
                    dir / "log"),
            0)
      << slurp(dir / "log");
  std::istringstream in(slurp(dir / "bench.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 1 + 2 * 3);
  EXPECT_TRUE(fs::exists(dir / "solver_study.csv"));
  EXPECT_TRUE(fs::exists(dir / "residual_curves.csv"));
  fs::remove_all(dir);
}
