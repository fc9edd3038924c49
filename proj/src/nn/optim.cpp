#include "modeswitch/nn/optim.hpp"

#include <cmath>

namespace modeswitch::nn {

AdamW::AdamW(ParamStore& ps, AdamWConfig cfg) : ps_(&ps), cfg_(cfg) {
  for (const Param* p : ps.params()) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::step() {
  auto params = ps_->params();
  if (params.size() != m_.size()) throw std::logic_error("parameter store changed under optimizer");
  for (const Param* p : params) {
    if (p->trainable && !p->grad.allFinite()) throw NonFiniteGradient(p->name);
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.trainable) continue;
    if (p.decay && cfg_.weight_decay != 0.0) p.value *= 1.0 - cfg_.lr * cfg_.weight_decay;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
    const double step = cfg_.lr / bc1;
    p.value.array() -= step * m_[i].array() / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
  }
}

double clip_grad_norm(ParamStore& ps, double max_norm) {
  double sq = 0.0;
  for (const Param* p : std::as_const(ps).params()) {
    if (p->trainable) sq += p->grad.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double s = max_norm / (norm + 1e-6);
    for (Param* p : ps.params()) {
      if (p->trainable) p->grad *= s;
    }
  }
  return norm;
}

}  // namespace modeswitch::nn
