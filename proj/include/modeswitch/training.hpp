#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modeswitch/checkpoint.hpp"
#include "modeswitch/nn/optim.hpp"

namespace modeswitch {

struct TrainConfig {
  double lr = 5e-5;
  std::size_t batch_size = 16;
  int max_epochs = 10;
  int patience = 2;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  /// Stop after this many optimizer steps in total; 0 disables the cap.
  std::int64_t max_steps = 0;

  void validate() const;
  Json to_json() const;
  static TrainConfig from_json(const Json& j, const TrainConfig& defaults);
};

/// Raised when a training loss or gradient stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(int epoch, std::int64_t step, const std::string& what)
      : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + " step " + std::to_string(step) +
                           ": " + what),
        epoch_(epoch),
        step_(step) {}
  int epoch() const { return epoch_; }
  std::int64_t step() const { return step_; }

 private:
  int epoch_;
  std::int64_t step_;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
};

struct FitResult {
  std::vector<EpochLog> history;
  int best_epoch = 0;
  double best_valid_loss = 0.0;
  std::int64_t steps = 0;
  bool early_stopped = false;

  Json to_json() const;
};

/// Loss of one minibatch, given indices into the training set.
using BatchLossFn = std::function<nn::Var(nn::Tape&, std::span<const std::size_t>, const nn::ForwardContext&)>;
/// Mean validation loss in eval mode.
using ValidLossFn = std::function<double()>;
using EpochHook = std::function<void(const EpochLog&)>;

/// Minibatch AdamW over shuffled examples with gradient clipping. Validation
/// loss is checked after every epoch; training stops once it has failed to
/// improve for `patience` epochs and the best parameters are restored.
FitResult fit(nn::ParamStore& ps, std::size_t n_train, const BatchLossFn& batch_loss, const ValidLossFn& valid_loss,
              const TrainConfig& cfg, const EpochHook& on_epoch = {});

}  // namespace modeswitch
