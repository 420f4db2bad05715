// softki command-line driver: train, eval, predict, bench.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "softki/bench.hpp"
#include "softki/checkpoint.hpp"
#include "softki/data.hpp"
#include "softki/report.hpp"

namespace fs = std::filesystem;
using namespace softki;

namespace {

struct TrainFlags {
  std::string model = "softki";
  std::string data = "ricker";
  long long m = 512;
  int epochs = 50;
  long long batch_size = 1024;
  double lr = 0;  // 0: per-model default
  int probes = 10;
  unsigned long long seed = 0;
  std::string objective = "auto";
  std::string solver = "qr";
  double train_frac = 0.9;
  bool header = false;
  int target = -1;
  double cg_tol = 1e-6;
  int cg_max_iters = 500;
  bool float32 = false;
  bool unscaled_probes = false;
  double init_noise = 0.5;
  double init_lengthscale = 1.0;
  double init_outputscale = 1.0;
  double init_temperature = 1.0;
  int lr_step = 0;
  double lr_decay = 0.5;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool multi_valued_dispatch) {
  if (!multi_valued_dispatch) {
    cmd->add_option("--model", f.model, "softki, sgpr or exact")
        ->check(CLI::IsMember({"softki", "sgpr", "exact"}));
    cmd->add_option("--data", f.data, "CSV path, 'ricker' or 'coincident'");
    cmd->add_option("--objective", f.objective, "auto, exact or pseudoloss")
        ->check(CLI::IsMember({"auto", "exact", "pseudoloss"}));
    cmd->add_option("--seed", f.seed, "random seed");
  }
  cmd->add_option("--m", f.m, "number of interpolation / inducing points");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--batch-size", f.batch_size, "minibatch size (SoftKI)");
  cmd->add_option("--lr", f.lr, "learning rate (default 0.01 SoftKI, 0.1 baselines)");
  cmd->add_option("--probes", f.probes, "probe vectors for the pseudoloss");
  cmd->add_option("--solver", f.solver, "qr, direct, cholesky or cg:<tol>");
  cmd->add_option("--train-frac", f.train_frac, "training fraction for CSV data");
  cmd->add_flag("--header", f.header, "CSV has a header row");
  cmd->add_option("--target", f.target, "target column (negative counts from the end)");
  cmd->add_option("--cg-tol", f.cg_tol, "CG relative tolerance");
  cmd->add_option("--cg-max-iters", f.cg_max_iters, "CG iteration cap");
  cmd->add_flag("--float32", f.float32, "evaluate the training objective in float32");
  cmd->add_flag("--unscaled-probes", f.unscaled_probes,
                "do not scale the probe term by the batch size");
  cmd->add_option("--init-noise", f.init_noise, "initial noise std");
  cmd->add_option("--init-lengthscale", f.init_lengthscale, "initial lengthscale");
  cmd->add_option("--init-outputscale", f.init_outputscale, "initial output scale");
  cmd->add_option("--init-temperature", f.init_temperature, "initial temperature");
  cmd->add_option("--lr-step", f.lr_step, "decay the learning rate every N epochs (0: off)");
  cmd->add_option("--lr-decay", f.lr_decay, "learning-rate decay factor");
}

RunConfig to_run_config(const TrainFlags& f) {
  RunConfig c;
  c.model = model_kind_from_string(f.model);
  c.data = f.data;
  c.csv.header = f.header;
  c.csv.target_column = f.target;
  c.train_fraction = f.train_frac;
  c.train.epochs = f.epochs;
  c.train.batch_size = f.batch_size;
  c.train.probes = f.probes;
  c.train.seed = f.seed;
  c.train.objective_mode = objective_mode_from_string(f.objective);
  c.train.cg_tol = f.cg_tol;
  c.train.cg_max_iters = f.cg_max_iters;
  c.train.m = f.m;
  c.train.precision = f.float32 ? Precision::kFloat32 : Precision::kFloat64;
  c.train.scale_probes = !f.unscaled_probes;
  c.train.init_noise = f.init_noise;
  c.train.init_lengthscale = f.init_lengthscale;
  c.train.init_outputscale = f.init_outputscale;
  c.train.init_temperature = f.init_temperature;
  c.train.lr_step_epochs = f.lr_step;
  c.train.lr_decay = f.lr_decay;
  if (f.lr > 0) c.learning_rate = f.lr;
  c.solver = SolverSpec::parse(f.solver);
  return c;
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

int cmd_train(const TrainFlags& f, const std::string& out) {
  const RunConfig cfg = to_run_config(f);
  cfg.validate();
  const SplitResult data = load_dataset(cfg);
  const PipelineResult r = run_pipeline(cfg, data);
  fs::create_directories(out);
  write_checkpoint(out_path(out, "model.ckpt"), r.checkpoint);
  const RunReport rep = make_report(cfg, r, data);
  write_file(out_path(out, "report.txt"), rep.to_text());
  write_file(out_path(out, "trace.csv"), trace_csv(r.trace));
  write_file(out_path(out, "timing.csv"), timing_csv(r.trace));
  write_file(out_path(out, "lengthscales.csv"), vector_csv("lengthscale", r.lengthscales));
  if (r.temperatures.size() > 0) {
    write_file(out_path(out, "temperatures.csv"), vector_csv("temperature", r.temperatures));
  }
  std::cout << rep.to_text();
  return 0;
}

// Returns the requested split of `data` in original units, re-standardized
// with the checkpoint statistics.
Dataset restandardize(const Dataset& part, const Standardization& from,
                      const Standardization& to) {
  Dataset out;
  out.x = to.apply_x(from.invert_x(part.x));
  out.y = to.apply_y(from.invert_y(part.y));
  out.stats = to;
  out.split = part.split;
  return out;
}

struct EvalFlags {
  std::string checkpoint;
  std::string split = "test";
  std::string predictions;
};

int cmd_eval(const TrainFlags& f, const EvalFlags& e, const std::string& out) {
  const Checkpoint ck = read_checkpoint(e.checkpoint);
  const RunConfig cfg = to_run_config(f);
  const SplitResult data = load_dataset(cfg);
  const Dataset& part = e.split == "train" ? data.train : data.test;
  const Dataset ds = restandardize(part, part.stats, ck.stats);
  const Metrics m = evaluate_checkpoint(ck, ds);
  const Prediction p = predict(ck, ds.x);
  const DenseVector diff = ck.stats.invert_y(p.mean) - ck.stats.invert_y(ds.y);
  RunReport rep;
  rep.set("checkpoint", e.checkpoint);
  rep.set("model", to_string(ck.model));
  rep.set("data", cfg.data);
  rep.set("split", e.split);
  rep.set("seed", (long long)cfg.train.seed);
  rep.set("train_frac", cfg.train_fraction);
  rep.set("n", (long long)ds.x.rows());
  rep.set("rmse", m.rmse);
  rep.set("nll", m.nll);
  rep.set("rmse_original_units",
          ds.x.rows() ? std::sqrt(diff.squaredNorm() / double(diff.size())) : 0.0);
  if (!out.empty()) {
    fs::create_directories(out);
    write_file(out_path(out, "report.txt"), rep.to_text());
  }
  if (!e.predictions.empty()) {
    std::string csv = "mean,var,target\n";
    const DenseVector mean = ck.stats.invert_y(p.mean);
    const DenseVector y = ck.stats.invert_y(ds.y);
    for (Index i = 0; i < mean.size(); ++i) {
      const double var = p.var.size() ? p.var(i) * ck.stats.y_std * ck.stats.y_std
                                      : std::nan("");
      csv += format_double(mean(i)) + "," + format_double(var) + "," +
             format_double(y(i)) + "\n";
    }
    write_file(e.predictions, csv);
  }
  std::cout << rep.to_text();
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& input, bool header,
                const std::string& output) {
  const Checkpoint ck = read_checkpoint(checkpoint);
  // Feature-only CSV: append a dummy target so the loader keeps every column.
  CsvSchema schema;
  schema.header = header;
  std::ifstream in(input);
  if (!in) throw FileNotFound("file not found: " + input);
  std::string text, line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    text += line + ((header && first) ? ",target\n" : ",0\n");
    first = false;
  }
  const std::string tmp = output + ".input.tmp";
  write_file(tmp, text);
  Dataset raw;
  try {
    raw = load_csv(tmp, schema);
  } catch (...) {
    fs::remove(tmp);
    throw;
  }
  fs::remove(tmp);
  const Prediction p = predict(ck, ck.stats.apply_x(raw.x));
  const DenseVector mean = ck.stats.invert_y(p.mean);
  std::string csv = "mean,var\n";
  for (Index i = 0; i < mean.size(); ++i) {
    const double var =
        p.var.size() ? p.var(i) * ck.stats.y_std * ck.stats.y_std : std::nan("");
    csv += format_double(mean(i)) + "," + format_double(var) + "\n";
  }
  write_file(output, csv);
  return 0;
}

struct BenchFlags {
  std::vector<std::string> datasets = {"ricker"};
  std::vector<std::string> models = {"softki"};
  std::vector<std::string> objectives = {"auto"};
  int seeds = 3;
  int workers = 1;
  bool solver_study = false;
};

int cmd_bench(const TrainFlags& f, const BenchFlags& b, const std::string& out) {
  BenchSuite suite;
  suite.base = to_run_config(f);
  suite.datasets = b.datasets;
  suite.models.clear();
  for (const auto& m : b.models) suite.models.push_back(model_kind_from_string(m));
  suite.modes.clear();
  for (const auto& o : b.objectives) suite.modes.push_back(objective_mode_from_string(o));
  suite.seeds.clear();
  for (int s = 0; s < b.seeds; ++s) suite.seeds.push_back(std::uint64_t(s));
  suite.workers = b.workers;
  fs::create_directories(out);
  const auto rows = run_bench(suite);
  const std::string table = bench_csv(rows);
  write_file(out_path(out, "bench.csv"), table);
  std::cout << table;
  if (b.solver_study) {
    const DegenerateProblem p = degenerate_problem(f.seed);
    const auto study = run_solver_study(p.data, p.theta, default_study_solvers());
    write_file(out_path(out, "solver_study.csv"), solver_study_csv(study));
    write_file(out_path(out, "residual_curves.csv"), residual_curves_csv(study));
    std::cout << solver_study_csv(study);
  }
  return bench_all_completed(rows) ? 0 : 1;
}

void write_error(const std::string& out, const std::string& kind,
                 const std::string& message) {
  std::cerr << "error kind=" << kind << " message=" << message << "\n";
  if (out.empty()) return;
  try {
    fs::create_directories(out);
    write_file(out_path(out, "error.txt"), "kind=" + kind + "\nmessage=" + message + "\n");
  } catch (...) {
    // stderr already has the record
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SoftKI Gaussian process regression"};
  app.set_config("--config", "", "read options from a TOML/INI file");
  app.require_subcommand(1);

  std::string out = "softki_out";
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a model and write a checkpoint");
  add_train_flags(train, train_flags, false);
  train->add_option("--out", out, "output directory");

  TrainFlags eval_flags;
  EvalFlags eval;
  std::string eval_out;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->alias("evaluate");
  ev->add_option("--checkpoint", eval.checkpoint, "checkpoint file")->required();
  ev->add_option("--data", eval_flags.data, "CSV path, 'ricker' or 'coincident'");
  ev->add_option("--seed", eval_flags.seed, "split seed");
  ev->add_option("--train-frac", eval_flags.train_frac, "training fraction for CSV data");
  ev->add_flag("--header", eval_flags.header, "CSV has a header row");
  ev->add_option("--target", eval_flags.target, "target column");
  ev->add_option("--split", eval.split, "train or test")
      ->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--predictions", eval.predictions, "write per-point predictions CSV");
  ev->add_option("--out", eval_out, "output directory for report.txt");

  std::string pred_ckpt, pred_input, pred_output = "predictions.csv";
  bool pred_header = false;
  auto* pr = app.add_subcommand("predict", "predict at new inputs");
  pr->add_option("--checkpoint", pred_ckpt, "checkpoint file")->required();
  pr->add_option("--input", pred_input, "CSV of raw feature columns")->required();
  pr->add_flag("--header", pred_header, "input has a header row");
  pr->add_option("--output", pred_output, "predictions CSV");

  TrainFlags bench_flags;
  BenchFlags bench;
  std::string bench_out = "softki_bench";
  auto* be = app.add_subcommand("bench", "run a benchmark suite");
  add_train_flags(be, bench_flags, true);
  be->add_option("--data", bench.datasets, "datasets (repeatable)");
  be->add_option("--model", bench.models, "models (repeatable)")
      ->check(CLI::IsMember({"softki", "sgpr", "exact"}));
  be->add_option("--objective", bench.objectives, "objective modes (repeatable)")
      ->check(CLI::IsMember({"auto", "exact", "pseudoloss"}));
  be->add_option("--seeds", bench.seeds, "number of seeds (0..N-1)");
  be->add_option("--workers", bench.workers, "parallel rows (capped by SOFTKI_THREADS)");
  be->add_flag("--solver-study", bench.solver_study,
               "also run the posterior solver comparison");
  be->add_option("--out", bench_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::string err_dir;
  try {
    if (*train) {
      err_dir = out;
      return cmd_train(train_flags, out);
    }
    if (*ev) {
      err_dir = eval_out;
      return cmd_eval(eval_flags, eval, eval_out);
    }
    if (*pr) {
      err_dir = fs::path(pred_output).parent_path().string();
      return cmd_predict(pred_ckpt, pred_input, pred_header, pred_output);
    }
    if (*be) {
      err_dir = bench_out;
      return cmd_bench(bench_flags, bench, bench_out);
    }
  } catch (const Error& e) {
    write_error(err_dir, e.kind(), e.what());
    return 1;
  } catch (const std::exception& e) {
    write_error(err_dir, "Error", e.what());
    return 1;
  }
  return 0;
}
