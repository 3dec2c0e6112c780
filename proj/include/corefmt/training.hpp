#pragma once

// Joint translation + coreference training.
//
// Every window's loss is a sum over its target tokens (translation) and its
// candidate mentions (coreference); a batch sums over windows. Gradients are
// reduced in window order, so a fixed seed gives bit-identical runs.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <ostream>
#include <vector>

#include "corefmt/coref.hpp"
#include "corefmt/model.hpp"

namespace corefmt {

struct LossParts {
  double total = 0.0;
  double mt = 0.0;
  double coref = 0.0;
};

struct JointLossVars {
  Var total;
  Var mt;
  Var coref;  // invalid when the model has no coreference head
};

// Graph-level loss of one example. The total is mt when alpha is zero, so the
// coreference path never contributes a gradient in that case.
JointLossVars joint_loss(Graph& g, const Model& model, const Example& ex, const DropoutStreams& streams);

// Value-level loss of a batch, dropout off.
LossParts joint_loss(const Model& model, const std::vector<Example>& batch);

// Loss of a batch with dropout drawn for (seed, step); adds d(total)/d(params)
// into `grads`.
LossParts joint_loss_and_gradients(const Model& model, const std::vector<Example>& batch, std::uint64_t seed,
                                   std::int64_t step, ParameterSet& grads);

// lr * min(step / warmup, sqrt(warmup / step)); step counts from 1.
double learning_rate(double base_lr, int warmup_steps, std::int64_t step);

struct StepRecord {
  std::int64_t step = 0;
  double mt_loss = 0.0;
  double coref_loss = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  LossParts train;
  LossParts valid;  // per-window means
};

struct TrainState {
  Model model;
  std::int64_t step = 0;
  ParameterSet adam_m;
  ParameterSet adam_v;
  std::uint64_t seed = 1;
  int epoch = 0;
  double best_valid_mt = std::numeric_limits<double>::infinity();
  double best_valid_coref = std::numeric_limits<double>::infinity();
  double best_valid_total = std::numeric_limits<double>::infinity();
  int stale_epochs = 0;
  bool stopped_early = false;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> history;
};

TrainState init_train_state(Model model, std::uint64_t seed);

// One Adam update with the configured moments.
void adam_step(TrainState& state, const ParameterSet& grads, double lr);

// Batches of at most batch_size windows, bucketed by source length and
// shuffled per epoch.
std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, int batch_size,
                                                   std::uint64_t seed, int epoch);

struct TrainHooks {
  std::ostream* log = nullptr;           // one JSON record per step
  std::filesystem::path checkpoint_dir;  // best.ckpt / last.ckpt when non-empty
  std::function<void(const TrainState&, const EpochRecord&)> on_epoch;
};

class NanLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs up to opts.epochs epochs. Stops early once neither validation loss has
// improved for opts.patience epochs (disabled when `valid` is empty or
// patience <= 0). Throws NanLossError on a non-finite loss.
TrainState train(TrainState state, const std::vector<Example>& train_set, const std::vector<Example>& valid,
                 const TrainOptions& opts, const TrainHooks& hooks = {});
TrainState train(Model model, const std::vector<Example>& train_set, const std::vector<Example>& valid,
                 const TrainOptions& opts, const TrainHooks& hooks = {});

}  // namespace corefmt
