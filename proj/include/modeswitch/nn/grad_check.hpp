#pragma once

#include <cstdint>
#include <functional>

#include "modeswitch/nn/tape.hpp"

namespace modeswitch::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a| + |n|, floor), the floor keeping near-zero gradients
/// from inflating the ratio.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Builds a scalar loss on the given tape from the given input.
using PointFn = std::function<Var(Tape&, const Var&)>;

/// Fourth-order central differences of `f` at `x` against the tape gradient.
GradCheckResult grad_check(const PointFn& f, const Matrix& x, double eps = 1e-4);

/// Builds a scalar loss over parameters in a store.
using LossFn = std::function<Var(Tape&)>;

/// Checks up to `samples_per_param` random coordinates of every trainable
/// parameter (all coordinates when 0).
GradCheckResult grad_check(ParamStore& ps, const LossFn& f, double eps = 1e-4,
                           std::size_t samples_per_param = 0, std::uint64_t seed = 0);

}  // namespace modeswitch::nn
