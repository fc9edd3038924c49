#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "modeswitch/nn/tape.hpp"

namespace modeswitch::nn {

struct AdamWConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

class NonFiniteGradient : public std::runtime_error {
 public:
  explicit NonFiniteGradient(const std::string& param)
      : std::runtime_error("non-finite gradient in " + param), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

/// Decoupled weight decay Adam. Moment buffers are keyed by parameter order,
/// so the optimizer must be used with one fixed ParamStore.
class AdamW {
 public:
  AdamW(ParamStore& ps, AdamWConfig cfg);

  /// Updates trainable parameters from their gradients. Checks every gradient
  /// first and throws NonFiniteGradient without touching anything.
  void step();
  std::int64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  ParamStore* ps_;
  AdamWConfig cfg_;
  std::vector<Matrix> m_, v_;
  std::int64_t t_ = 0;
};

/// Scales trainable gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(ParamStore& ps, double max_norm);

}  // namespace modeswitch::nn
