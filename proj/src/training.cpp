#include "modeswitch/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "modeswitch/digest.hpp"

namespace modeswitch {

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("train: patience must be >= 1");
  if (weight_decay < 0.0) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip_norm must be positive");
  if (max_steps < 0) throw std::invalid_argument("train: max_steps must be >= 0");
}

Json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seed", seed},
          {"weight_decay", weight_decay},
          {"clip_norm", clip_norm},
          {"max_steps", max_steps}};
}

TrainConfig TrainConfig::from_json(const Json& j, const TrainConfig& d) {
  TrainConfig c = d;
  c.lr = j.value("lr", d.lr);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.seed = j.value("seed", d.seed);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.max_steps = j.value("max_steps", d.max_steps);
  return c;
}

Json FitResult::to_json() const {
  Json h = Json::array();
  for (const auto& e : history) {
    h.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"valid_loss", e.valid_loss}});
  }
  return {{"epochs", h},
          {"best_epoch", best_epoch},
          {"best_valid_loss", best_valid_loss},
          {"steps", steps},
          {"early_stopped", early_stopped}};
}

FitResult fit(nn::ParamStore& ps, std::size_t n_train, const BatchLossFn& batch_loss, const ValidLossFn& valid_loss,
              const TrainConfig& cfg, const EpochHook& on_epoch) {
  cfg.validate();
  if (n_train == 0) throw std::invalid_argument("fit: empty training set");
  nn::AdamW opt(ps, {.lr = cfg.lr, .weight_decay = cfg.weight_decay});
  nn::Rng shuffle_rng(mix_seed(cfg.seed, "shuffle"));
  nn::Rng dropout_rng(mix_seed(cfg.seed, "dropout"));

  FitResult r;
  std::vector<nn::Matrix> best;
  int bad_epochs = 0;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    std::size_t batches = 0;
    bool capped = false;
    for (std::size_t at = 0; at < n_train; at += cfg.batch_size) {
      const std::size_t end = std::min(n_train, at + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + at, end - at);
      ps.zero_grad();
      nn::Tape tape;
      nn::Var loss = batch_loss(tape, idx, {.train = true, .rng = &dropout_rng});
      const double lv = loss.scalar();
      if (!std::isfinite(lv)) throw DivergenceError(epoch, r.steps, "loss is not finite");
      tape.backward(loss);
      nn::clip_grad_norm(ps, cfg.clip_norm);
      try {
        opt.step();
      } catch (const nn::NonFiniteGradient& e) {
        throw DivergenceError(epoch, r.steps, e.what());
      }
      ++r.steps;
      total += lv;
      ++batches;
      if (cfg.max_steps > 0 && r.steps >= cfg.max_steps) {
        capped = true;
        break;
      }
    }
    EpochLog log{epoch, total / static_cast<double>(batches), valid_loss()};
    if (!std::isfinite(log.valid_loss)) throw DivergenceError(epoch, r.steps, "validation loss is not finite");
    r.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (r.best_epoch == 0 || log.valid_loss < r.best_valid_loss) {
      r.best_valid_loss = log.valid_loss;
      r.best_epoch = epoch;
      best = ps.snapshot();
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      r.early_stopped = true;
      break;
    }
    if (capped) break;
  }
  ps.restore(best);
  return r;
}

}  // namespace modeswitch
