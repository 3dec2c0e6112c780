#include "corefmt/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "corefmt/kernels.hpp"
#include "corefmt/rng.hpp"

namespace corefmt {

JointLossVars joint_loss(Graph& g, const Model& model, const Example& ex, const DropoutStreams& streams) {
  JointLossVars out;
  Var enc = encode(g, model, ex.src, &ex.clusters, streams.mt);
  Var dec = decode(g, model, decoder_input(ex.tgt), enc, streams.mt);
  out.mt = mt_loss(g, model, ex, dec);
  out.total = out.mt;
  if (model.config.coref_mode == CorefMode::kNone) return out;
  Var h = coref_representation(g, model, enc, dec, streams.coref);
  ScoredSpans scored = score_spans(g, model, h, ex.src, streams.coref);
  out.coref = coref_loss(g, scored, ex.clusters, model.config.max_clusters);
  if (model.config.alpha != 0.0) out.total = add(g, out.mt, scale(g, out.coref, model.config.alpha));
  return out;
}

namespace {

LossParts read_parts(const Graph& g, const JointLossVars& v, double alpha) {
  LossParts p;
  p.mt = scalar(g, v.mt);
  p.coref = v.coref.valid() ? scalar(g, v.coref) : 0.0;
  p.total = p.mt + alpha * p.coref;
  return p;
}

void add_parts(LossParts& into, const LossParts& p) {
  into.total += p.total;
  into.mt += p.mt;
  into.coref += p.coref;
}

}  // namespace

LossParts joint_loss(const Model& model, const std::vector<Example>& batch) {
  LossParts sum;
  for (const auto& ex : batch) {
    Graph g(false);
    add_parts(sum, read_parts(g, joint_loss(g, model, ex, {}), model.config.alpha));
  }
  return sum;
}

LossParts joint_loss_and_gradients(const Model& model, const std::vector<Example>& batch, std::uint64_t seed,
                                   std::int64_t step, ParameterSet& grads) {
  LossParts sum;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto mt_rng = make_stream(seed, "dropout.mt", {static_cast<std::uint64_t>(step), i});
    auto coref_rng = make_stream(seed, "dropout.coref", {static_cast<std::uint64_t>(step), i});
    Graph g(true);
    JointLossVars v = joint_loss(g, model, batch[i], {&mt_rng, &coref_rng});
    LossParts p = read_parts(g, v, model.config.alpha);
    if (!std::isfinite(p.total)) {
      std::ostringstream msg;
      msg << "non-finite loss at step " << step << ", batch item " << i << ": mt=" << p.mt << " coref=" << p.coref;
      throw NanLossError(msg.str());
    }
    g.backward(v.total);
    g.accumulate_gradients(model.params, grads);
    add_parts(sum, p);
  }
  return sum;
}

double learning_rate(double base_lr, int warmup_steps, std::int64_t step) {
  if (warmup_steps < 1) throw std::invalid_argument("warmup_steps must be >= 1");
  if (step < 1) throw std::invalid_argument("learning_rate: steps count from 1");
  const double s = static_cast<double>(step);
  const double w = static_cast<double>(warmup_steps);
  return base_lr * std::min(s / w, std::sqrt(w / s));
}

TrainState init_train_state(Model model, std::uint64_t seed) {
  TrainState state;
  state.adam_m = model.params.zeros_like();
  state.adam_v = model.params.zeros_like();
  state.model = std::move(model);
  state.seed = seed;
  return state;
}

void adam_step(TrainState& state, const ParameterSet& grads, double lr) {
  const ModelConfig& cfg = state.model.config;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2, eps = cfg.adam_eps;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (auto& [name, p] : state.model.params) {
    const Matrix& gm = grads.at(name);
    Matrix& m = state.adam_m.at(name);
    Matrix& v = state.adam_v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = gm.data()[i];
      m.data()[i] = b1 * m.data()[i] + (1.0 - b1) * gi;
      v.data()[i] = b2 * v.data()[i] + (1.0 - b2) * gi * gi;
      const double mhat = m.data()[i] / c1;
      const double vhat = v.data()[i] / c2;
      p.data()[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<Example>& data, int batch_size,
                                                   std::uint64_t seed, int epoch) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return data[a].src.size() < data[b].src.size(); });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  auto rng = make_stream(seed, "batches", {static_cast<std::uint64_t>(epoch)});
  // Fisher-Yates with our own index draw keeps the order library-independent.
  for (std::size_t i = batches.size(); i > 1; --i) {
    std::swap(batches[i - 1], batches[uniform_index(rng, i)]);
  }
  return batches;
}

namespace {

void log_step(std::ostream& out, const StepRecord& r) {
  nlohmann::json j{{"step", r.step}, {"mt_loss", r.mt_loss}, {"coref_loss", r.coref_loss}, {"lr", r.lr}};
  out << j.dump() << '\n';
}

LossParts mean_loss(const Model& model, const std::vector<Example>& data) {
  LossParts p = joint_loss(model, data);
  if (data.empty()) return p;
  const double n = static_cast<double>(data.size());
  return {p.total / n, p.mt / n, p.coref / n};
}

}  // namespace

TrainState train(TrainState state, const std::vector<Example>& train_set, const std::vector<Example>& valid,
                 const TrainOptions& opts, const TrainHooks& hooks) {
  if (opts.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (opts.epochs > 0 && train_set.empty()) throw std::invalid_argument("empty training set");
  if (!hooks.checkpoint_dir.empty()) std::filesystem::create_directories(hooks.checkpoint_dir);
  const bool has_coref = state.model.config.coref_mode != CorefMode::kNone;

  while (state.epoch < opts.epochs) {
    EpochRecord rec;
    rec.epoch = state.epoch + 1;
    for (const auto& idx : make_batches(train_set, opts.batch_size, state.seed, state.epoch)) {
      std::vector<Example> batch;
      batch.reserve(idx.size());
      for (std::size_t i : idx) batch.push_back(train_set[i]);
      ++state.step;
      ParameterSet grads = state.model.params.zeros_like();
      LossParts p;
      try {
        p = joint_loss_and_gradients(state.model, batch, state.seed, state.step, grads);
      } catch (const NanLossError&) {
        if (!hooks.checkpoint_dir.empty()) save_checkpoint(hooks.checkpoint_dir / "nan.ckpt", state.model);
        throw;
      }
      const double lr = learning_rate(state.model.config.lr, opts.warmup_steps, state.step);
      adam_step(state, grads, lr);
      StepRecord sr{state.step, p.mt, p.coref, lr};
      if (hooks.log) log_step(*hooks.log, sr);
      state.steps.push_back(sr);
      add_parts(rec.train, p);
    }
    ++state.epoch;

    bool improved = false;
    if (!valid.empty()) {
      rec.valid = mean_loss(state.model, valid);
      if (rec.valid.mt < state.best_valid_mt) {
        state.best_valid_mt = rec.valid.mt;
        improved = true;
      }
      if (has_coref && rec.valid.coref < state.best_valid_coref) {
        state.best_valid_coref = rec.valid.coref;
        improved = true;
      }
    }
    const double selection = valid.empty() ? rec.train.total : rec.valid.total;
    if (!hooks.checkpoint_dir.empty()) {
      save_checkpoint(hooks.checkpoint_dir / "last.ckpt", state.model);
      if (selection < state.best_valid_total) save_checkpoint(hooks.checkpoint_dir / "best.ckpt", state.model);
    }
    state.best_valid_total = std::min(state.best_valid_total, selection);
    state.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(state, rec);

    if (!valid.empty() && opts.patience > 0) {
      state.stale_epochs = improved ? 0 : state.stale_epochs + 1;
      if (state.stale_epochs >= opts.patience) {
        state.stopped_early = true;
        break;
      }
    }
  }
  return state;
}

TrainState train(Model model, const std::vector<Example>& train_set, const std::vector<Example>& valid,
                 const TrainOptions& opts, const TrainHooks& hooks) {
  return train(init_train_state(std::move(model), opts.seed), train_set, valid, opts, hooks);
}

}  // namespace corefmt
