#include "softki/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>

#include "softki/exact_gp.hpp"
#include "softki/kmeans.hpp"
#include "softki/sgpr.hpp"

namespace softki {

double RunConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  return model == ModelKind::kSoftKI ? 0.01 : 0.1;
}

void RunConfig::validate() const {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw InvalidArgument("train fraction must lie in (0, 1)");
  }
  TrainConfig t = train;
  t.learning_rate = effective_learning_rate();
  t.validate();
  if (model == ModelKind::kSGPR && solver.kind != SolverKind::kQR &&
      solver.kind != SolverKind::kDirect) {
    throw InvalidArgument("SGPR supports the qr and direct solvers");
  }
}

SplitResult load_dataset(const RunConfig& cfg) {
  if (cfg.data == "ricker") {
    RickerOptions o;
    o.seed = cfg.train.seed;
    return ricker_dataset(o);
  }
  if (cfg.data == "coincident") {
    CoincidentOptions o;
    o.seed = cfg.train.seed;
    return coincident_dataset(o);
  }
  return split_standardize(load_csv(cfg.data, cfg.csv), cfg.train_fraction,
                           cfg.train.seed);
}

namespace {

Metrics checkpoint_metrics(const Checkpoint& ck, const Dataset& data) {
  const Prediction p = predict(ck, data.x);
  if (p.var.size() == 0) {
    Metrics m = gaussian_metrics(p.mean, DenseVector::Zero(p.mean.size()), data.y,
                                 ck.noise * ck.noise);
    m.nll = std::nan("");
    return m;
  }
  return gaussian_metrics(p.mean, p.var, data.y, ck.noise * ck.noise);
}

}  // namespace

Metrics evaluate_checkpoint(const Checkpoint& ck, const Dataset& data) {
  return checkpoint_metrics(ck, data);
}

PipelineResult run_pipeline(const RunConfig& cfg, const SplitResult& data) {
  cfg.validate();
  const Dataset& train = data.train;
  PipelineResult out;
  out.warnings = data.warnings;
  const double lr = cfg.effective_learning_rate();
  const auto t0 = std::chrono::steady_clock::now();
  switch (cfg.model) {
    case ModelKind::kSoftKI: {
      TrainConfig tc = cfg.train;
      tc.learning_rate = lr;
      TrainResult tr = train_softki(train, tc);
      const FittedPosterior post = fit_with_solver(train, tr.theta, cfg.solver);
      out.checkpoint = make_checkpoint(post, train.size(), train.stats);
      out.trace = std::move(tr.trace);
      out.lengthscales = tr.theta.kernel.lengthscales;
      out.temperatures = tr.theta.interp.temperature;
      break;
    }
    case ModelKind::kSGPR: {
      SGPRConfig sc;
      sc.epochs = cfg.train.epochs;
      sc.learning_rate = lr;
      sc.m = cfg.train.m;
      sc.seed = cfg.train.seed;
      sc.init_noise = cfg.train.init_noise;
      sc.init_outputscale = cfg.train.init_outputscale;
      sc.init_lengthscale = cfg.train.init_lengthscale;
      sc.lr_step_epochs = cfg.train.lr_step_epochs;
      sc.lr_decay = cfg.train.lr_decay;
      SGPRTrainResult tr = train_sgpr(train, sc);
      const SGPRPosterior post = sgpr_fit(train, tr.theta, cfg.solver);
      out.checkpoint = make_checkpoint(post, train.size(), train.stats);
      out.trace = std::move(tr.trace);
      out.lengthscales = tr.theta.kernel.lengthscales;
      break;
    }
    case ModelKind::kExact: {
      ExactGPConfig ec;
      ec.epochs = cfg.train.epochs;
      ec.learning_rate = lr;
      ec.init_noise = cfg.train.init_noise;
      ec.init_outputscale = cfg.train.init_outputscale;
      ec.init_lengthscale = cfg.train.init_lengthscale;
      ExactGPTrainResult tr = train_exact_gp(train, ec);
      const ExactGPPosterior post = exact_gp_fit(train, tr.theta);
      out.checkpoint = make_checkpoint(post, train.stats);
      out.trace = std::move(tr.trace);
      out.lengthscales = tr.theta.kernel.lengthscales;
      break;
    }
  }
  out.train_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  out.test = checkpoint_metrics(out.checkpoint, data.test);
  if (data.test.size() > 0) {
    const Prediction p = predict(out.checkpoint, data.test.x);
    const DenseVector diff = data.test.stats.invert_y(p.mean) -
                             data.test.stats.invert_y(data.test.y);
    out.raw_rmse = std::sqrt(diff.squaredNorm() / double(diff.size()));
  }
  return out;
}

RunReport make_report(const RunConfig& cfg, const PipelineResult& r,
                      const SplitResult& data) {
  RunReport rep;
  rep.set("model", to_string(cfg.model));
  rep.set("data", cfg.data);
  rep.set("train_frac", cfg.train_fraction);
  rep.set("m", (long long)cfg.train.m);
  rep.set("epochs", cfg.train.epochs);
  rep.set("batch_size", (long long)cfg.train.batch_size);
  rep.set("lr", cfg.effective_learning_rate());
  rep.set("probes", cfg.train.probes);
  rep.set("seed", (long long)cfg.train.seed);
  rep.set("objective", to_string(cfg.train.objective_mode));
  rep.set("solver", cfg.solver.name());
  rep.set("cg_tol", cfg.train.cg_tol);
  rep.set("cg_max_iters", cfg.train.cg_max_iters);
  rep.set("precision",
          cfg.train.precision == Precision::kFloat32 ? "float32" : "float64");
  rep.set("init_noise", cfg.train.init_noise);
  rep.set("init_lengthscale", cfg.train.init_lengthscale);
  rep.set("init_outputscale", cfg.train.init_outputscale);
  rep.set("init_temperature", cfg.train.init_temperature);
  rep.set("lr_step_epochs", cfg.train.lr_step_epochs);
  rep.set("lr_decay", cfg.train.lr_decay);
  rep.set("n_train", (long long)data.train.size());
  rep.set("n_test", (long long)data.test.size());
  rep.set("d", (long long)data.train.dims());
  rep.set("threads", r.trace.threads);
  rep.set("noise", r.checkpoint.noise);
  rep.set("outputscale", r.checkpoint.outputscale);
  rep.set("jitter", r.checkpoint.jitter);
  int exact = 0;
  int pseudo = 0;
  for (auto mode : r.trace.batch_modes) {
    (mode == ObjectiveMode::kExact ? exact : pseudo) += 1;
  }
  rep.set("steps", r.trace.steps);
  rep.set("mode_exact_steps", exact);
  rep.set("mode_pseudoloss_steps", pseudo);
  rep.set("final_objective", r.trace.epoch_objective.empty()
                                 ? std::nan("")
                                 : r.trace.epoch_objective.back());
  rep.set("rmse", r.test.rmse);
  rep.set("nll", r.test.nll);
  rep.set("rmse_original_units", r.raw_rmse);
  for (std::size_t i = 0; i < r.warnings.size(); ++i) {
    rep.set("warning_" + std::to_string(i), r.warnings[i]);
  }
  return rep;
}

int worker_limit(int fallback) {
  if (const char* env = std::getenv("SOFTKI_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  return std::max(fallback, 1);
}

namespace {

std::string mode_label(ModelKind model, ObjectiveMode mode) {
  return model == ModelKind::kSoftKI ? to_string(mode) : "elbo";
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSuite& suite) {
  struct Job {
    std::string dataset;
    ModelKind model;
    ObjectiveMode mode;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (const auto& ds : suite.datasets) {
    for (auto model : suite.models) {
      // Baselines do not have objective modes; run them once per seed.
      const std::vector<ObjectiveMode> modes =
          model == ModelKind::kSoftKI ? suite.modes
                                      : std::vector<ObjectiveMode>{ObjectiveMode::kAuto};
      for (auto mode : modes) {
        for (auto seed : suite.seeds) jobs.push_back({ds, model, mode, seed});
      }
    }
  }
  std::vector<BenchRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const Job& job = jobs[i];
      BenchRow& row = rows[i];
      row.dataset = job.dataset;
      row.model = to_string(job.model);
      row.mode = mode_label(job.model, job.mode);
      row.seed = job.seed;
      RunConfig cfg = suite.base;
      cfg.data = job.dataset;
      cfg.model = job.model;
      cfg.train.objective_mode = job.mode;
      cfg.train.seed = job.seed;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const SplitResult data = load_dataset(cfg);
        const PipelineResult r = run_pipeline(cfg, data);
        row.rmse = r.test.rmse;
        row.nll = r.test.nll;
        row.status = "ok";
      } catch (const TrainingFailed& e) {
        row.rmse = row.nll = std::nan("");
        row.status = "nan";
      } catch (const std::exception& e) {
        row.rmse = row.nll = std::nan("");
        row.status = std::string("error: ") + e.what();
      }
      row.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const int n_workers =
      std::min<int>(worker_limit(suite.workers), std::max<int>(int(jobs.size()), 1));
  std::vector<std::thread> pool;
  for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, std::vector<const BenchRow*>> groups;
  for (const auto& r : rows) groups[{r.dataset, r.model, r.mode}].push_back(&r);
  std::vector<BenchRow> aggregates;
  for (const auto& [key, members] : groups) {
    BenchRow agg;
    std::tie(agg.dataset, agg.model, agg.mode) = key;
    agg.aggregate = true;
    const double k = double(members.size());
    double rs = 0, ns = 0, ts = 0;
    for (const auto* r : members) {
      rs += r->rmse;
      ns += r->nll;
      ts += r->seconds;
    }
    agg.rmse = rs / k;
    agg.nll = ns / k;
    agg.seconds = ts / k;
    double rv = 0, nv = 0;
    for (const auto* r : members) {
      rv += (r->rmse - agg.rmse) * (r->rmse - agg.rmse);
      nv += (r->nll - agg.nll) * (r->nll - agg.nll);
    }
    agg.rmse_std = std::sqrt(rv / k);
    agg.nll_std = std::sqrt(nv / k);
    agg.status = std::isnan(agg.rmse) ? "nan" : "ok";
    aggregates.push_back(agg);
  }
  rows.insert(rows.end(), aggregates.begin(), aggregates.end());
  std::sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    return std::tie(a.dataset, a.model, a.mode, a.aggregate, a.seed) <
           std::tie(b.dataset, b.model, b.mode, b.aggregate, b.seed);
  });
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::string out = "dataset,model,mode,seed,rmse,rmse_std,nll,nll_std,seconds,status\n";
  for (const auto& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += r.dataset + "," + r.model + "," + r.mode + "," +
           (r.aggregate ? std::string("mean") : std::to_string(r.seed)) + "," +
           format_double(r.rmse) + "," + format_double(r.rmse_std) + "," +
           format_double(r.nll) + "," + format_double(r.nll_std) + "," +
           format_double(r.seconds) + "," + status + "\n";
  }
  return out;
}

bool bench_all_completed(const std::vector<BenchRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const BenchRow& r) {
    return r.status == "ok" || r.status == "nan";
  });
}

std::vector<SolverSpec> default_study_solvers() {
  std::vector<SolverSpec> s;
  for (const char* name :
       {"qr", "direct", "cholesky", "cg:1e-1", "cg:1e-2", "cg:1e-3", "cg:1e-4"}) {
    s.push_back(SolverSpec::parse(name));
  }
  return s;
}

std::vector<SolverStudyRow> run_solver_study(const Dataset& data,
                                             const SoftKIHyperparams& theta,
                                             const std::vector<SolverSpec>& solvers) {
  std::vector<SolverStudyRow> rows;
  const DenseMatrix khat =
      softmax_weights<double>(data.x, theta.interp.z, theta.interp.temperature) *
      [&] {
        DenseMatrix k = matern32_symmetric<double>(theta.interp.z, theta.kernel);
        k.diagonal().array() += factor_kzz(k).jitter;
        return k;
      }();
  for (const auto& spec : solvers) {
    SolverStudyRow row;
    row.solver = spec.name();
    const AltSolveResult r = alt_solve(data, theta, spec);
    row.ok = r.ok;
    row.error = r.error;
    row.relative_residual = r.relative_residual;
    row.iterations = r.iterations;
    row.residual_history = r.residual_history;
    const DenseVector resid = khat * r.alpha - data.y;
    row.train_rmse = std::sqrt(resid.squaredNorm() / double(data.size()));
    if (!std::isfinite(row.train_rmse)) row.train_rmse = std::nan("");
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string solver_study_csv(const std::vector<SolverStudyRow>& rows) {
  std::string out = "solver,ok,train_rmse,relative_residual,iterations,error\n";
  for (const auto& r : rows) {
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    out += r.solver + "," + (r.ok ? "1" : "0") + "," + format_double(r.train_rmse) +
           "," + format_double(r.relative_residual) + "," +
           std::to_string(r.iterations) + "," + err + "\n";
  }
  return out;
}

std::string residual_curves_csv(const std::vector<SolverStudyRow>& rows) {
  std::string out = "solver,iteration,relative_residual\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.residual_history.size(); ++i) {
      out += r.solver + "," + std::to_string(i + 1) + "," +
             format_double(r.residual_history[i]) + "\n";
    }
  }
  return out;
}

DegenerateProblem degenerate_problem(std::uint64_t seed) {
  // Dense grid of interpolation points under a long lengthscale and almost
  // no noise: C_hat = K_zz + K_hat^T K_hat / beta^2 is numerically singular
  // while the stacked QR system is still solvable.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(-2.0, 2.0);
  const Index n = 1000;
  const Index m = 200;
  DegenerateProblem p;
  p.data.x.resize(n, 1);
  p.data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    p.data.x(i, 0) = unif(rng);
    p.data.y(i) = std::sin(3.0 * p.data.x(i, 0));
  }
  p.data.stats = Standardization::identity(1);
  p.data.split = Split::kTrain;
  p.theta.interp.z.resize(m, 1);
  for (Index j = 0; j < m; ++j) p.theta.interp.z(j, 0) = -2.0 + 4.0 * double(j) / double(m - 1);
  p.theta.interp.temperature = DenseVector::Ones(1);
  p.theta.kernel.lengthscales = DenseVector::Constant(1, 2.0);
  p.theta.kernel.outputscale = 1.0;
  p.theta.noise = 3e-5;
  return p;
}

}  // namespace softki
