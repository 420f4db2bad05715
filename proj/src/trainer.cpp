#include "softki/trainer.hpp"

#include <Eigen/Core>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "softki/adam.hpp"
#include "softki/kmeans.hpp"

namespace softki {

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be nonnegative");
  if (batch_size < 1) throw InvalidArgument("batch size must be at least 1");
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (m < 1) throw InvalidArgument("m must be at least 1");
  if (probes < 1) throw InvalidArgument("need at least one probe");
  if (!(cg_tol > 0)) throw InvalidArgument("cg tolerance must be positive");
  if (cg_max_iters < 1) throw InvalidArgument("cg iteration cap must be positive");
  if (lr_step_epochs < 0 || !(lr_decay > 0)) {
    throw InvalidArgument("invalid learning-rate schedule");
  }
}

ObjectiveConfig TrainConfig::objective() const {
  ObjectiveConfig c;
  c.mode = objective_mode;
  c.precision = precision;
  c.probes = probes;
  c.cg_tol = cg_tol;
  c.cg_max_iters = cg_max_iters;
  c.scale_probes = scale_probes;
  return c;
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (lr_step_epochs == 0) return learning_rate;
  return learning_rate * std::pow(lr_decay, epoch / lr_step_epochs);
}

std::vector<std::vector<Index>> epoch_batches(Index n, Index batch_size,
                                              std::uint64_t seed, int epoch) {
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index(0));
  std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32),
                    std::uint32_t(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Index>> batches;
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    batches.emplace_back(perm.begin() + start, perm.begin() + end);
  }
  return batches;
}

namespace {

std::uint64_t probe_seed(std::uint64_t seed, int step) {
  // splitmix64 of (seed, step)
  std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + std::uint64_t(step) + 1;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

TrainResult train_softki_from(const Dataset& train, const TrainConfig& cfg,
                              const SoftKIHyperparams& init) {
  cfg.validate();
  const Index n = train.size();
  const Index d = train.dims();
  if (n < 1) throw InvalidArgument("empty training set");
  init.validate(d);
  const Parameterization param(init.num_points(), d, true);
  DenseVector raw = param.to_raw(init);
  AdamState adam(raw.size());
  const ObjectiveConfig obj = cfg.objective();

  TrainResult out;
  out.trace.threads = Eigen::nbThreads();
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = epoch_batches(n, cfg.batch_size, cfg.seed, epoch);
    const double lr = cfg.learning_rate_at(epoch);
    double total = 0;
    int exact = 0;
    int pseudo = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto& idx = batches[b];
      const Index nb = Index(idx.size());
      DenseMatrix xb(nb, d);
      DenseVector yb(nb);
      for (Index i = 0; i < nb; ++i) {
        xb.row(i) = train.x.row(idx[i]);
        yb(i) = train.y(idx[i]);
      }
      const SoftKIHyperparams theta = param.softki_from_raw(raw);
      ObjectiveReport r;
      try {
        r = stabilized_objective(xb, yb, theta, obj, probe_seed(cfg.seed, step));
      } catch (const ObjectiveFailed& e) {
        throw TrainingFailed(epoch, int(b), e.what());
      }
      const DenseVector g = param.raw_gradient(raw, r.gradient) / double(nb);
      adam.ascend(raw, g, lr);
      total += r.value / double(nb);
      (r.mode_used == ObjectiveMode::kExact ? exact : pseudo) += 1;
      out.trace.batch_modes.push_back(r.mode_used);
      ++step;
    }
    const auto t1 = std::chrono::steady_clock::now();
    out.trace.epoch_objective.push_back(total / double(batches.size()));
    out.trace.exact_count.push_back(exact);
    out.trace.pseudoloss_count.push_back(pseudo);
    out.trace.epoch_seconds.push_back(
        std::chrono::duration<double>(t1 - t0).count());
  }
  out.trace.steps = step;
  out.theta = param.softki_from_raw(raw);
  return out;
}

TrainResult train_softki(const Dataset& train, const TrainConfig& cfg) {
  cfg.validate();
  const Index d = train.dims();
  SoftKIHyperparams init;
  init.noise = cfg.init_noise;
  init.kernel.outputscale = cfg.init_outputscale;
  init.kernel.lengthscales = DenseVector::Constant(d, cfg.init_lengthscale);
  init.interp.temperature = DenseVector::Constant(d, cfg.init_temperature);
  init.interp.z = kmeans(train.x, cfg.m, cfg.seed);
  return train_softki_from(train, cfg, init);
}

}  // namespace softki

namespace softki {

DenseVector run_full_batch_adam(DenseVector raw, const RawObjective& objective,
                                const FullBatchSchedule& s, TrainTrace& trace) {
  if (s.epochs < 0 || !(s.learning_rate > 0) || s.lr_step_epochs < 0) {
    throw InvalidArgument("invalid full-batch schedule");
  }
  AdamState adam(raw.size());
  trace.threads = Eigen::nbThreads();
  for (int epoch = 0; epoch < s.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = s.lr_step_epochs == 0
                          ? s.learning_rate
                          : s.learning_rate *
                                std::pow(s.lr_decay, epoch / s.lr_step_epochs);
    std::pair<double, DenseVector> r;
    try {
      r = objective(raw);
    } catch (const NotPositiveDefinite& e) {
      throw TrainingFailed(epoch, 0, e.what());
    }
    if (!std::isfinite(r.first) || !r.second.allFinite()) {
      throw TrainingFailed(epoch, 0, "non-finite objective");
    }
    adam.ascend(raw, r.second, lr);
    const auto t1 = std::chrono::steady_clock::now();
    trace.epoch_objective.push_back(r.first);
    trace.exact_count.push_back(1);
    trace.pseudoloss_count.push_back(0);
    trace.batch_modes.push_back(ObjectiveMode::kExact);
    trace.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    ++trace.steps;
  }
  return raw;
}

}  // namespace softki
