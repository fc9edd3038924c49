#include "modeswitch/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace modeswitch::nn {

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
}

namespace {

// Fourth-order stencil; LayerNorm over init-scale activations is curved
// enough that the plain central difference needs steps small enough for
// roundoff to dominate.
template <class Eval>
double derivative(double& slot, double eps, const Eval& eval) {
  const double orig = slot;
  auto at = [&](double dx) {
    slot = orig + dx;
    return eval();
  };
  const double d1 = at(eps) - at(-eps);
  const double d2 = at(2 * eps) - at(-2 * eps);
  slot = orig;
  return (8 * d1 - d2) / (12 * eps);
}

}  // namespace

GradCheckResult grad_check(const PointFn& f, const Matrix& x, double eps) {
  Matrix analytic;
  {
    Tape t;
    Var in = t.input(x);
    Var loss = f(t, in);
    t.backward(loss);
    analytic = t.grad(in).size() == 0 ? Matrix::Zero(x.rows(), x.cols()) : t.grad(in);
  }
  auto eval = [&](const Matrix& point) {
    Tape t;
    return f(t, t.input(point)).scalar();
  };
  GradCheckResult r;
  Matrix probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double numeric = derivative(probe.data()[i], eps, [&] { return eval(probe); });
    r.max_rel_error = std::max(r.max_rel_error, relative_error(analytic.data()[i], numeric));
    ++r.checked;
  }
  return r;
}

GradCheckResult grad_check(ParamStore& ps, const LossFn& f, double eps, std::size_t samples_per_param,
                           std::uint64_t seed) {
  ps.zero_grad();
  {
    Tape t;
    t.backward(f(t));
  }
  auto eval = [&] {
    Tape t;
    return f(t).scalar();
  };
  Rng rng(seed);
  GradCheckResult r;
  for (Param* p : ps.params()) {
    if (!p->trainable) continue;
    std::vector<Index> coords(static_cast<std::size_t>(p->value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (samples_per_param != 0 && coords.size() > samples_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(samples_per_param);
    }
    for (Index i : coords) {
      const double numeric = derivative(p->value.data()[i], eps, eval);
      r.max_rel_error = std::max(r.max_rel_error, relative_error(p->grad.data()[i], numeric));
      ++r.checked;
    }
  }
  return r;
}

}  // namespace modeswitch::nn
