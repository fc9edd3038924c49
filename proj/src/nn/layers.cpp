#include "modeswitch/nn/layers.hpp"

#include <cmath>

namespace modeswitch::nn {

Linear Linear::create(ParamStore& ps, const std::string& name, Index in, Index out, Rng& rng) {
  Linear l;
  l.w = &ps.add_normal(name + ".w", in, out, kInitStd, rng);
  l.b = &ps.add(name + ".b", 1, out, false);
  return l;
}

Linear Linear::bind(ParamStore& ps, const std::string& name) { return {&ps.at(name + ".w"), &ps.at(name + ".b")}; }

Var Linear::operator()(Tape& t, const Var& x) const { return add_row(matmul(x, t.param(*w)), t.param(*b)); }

Matrix Linear::apply(const Matrix& x) const {
  Matrix y = x * w->value;
  y.rowwise() += b->value.row(0);
  return y;
}

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& name, Index dim) {
  LayerNorm ln;
  ln.gamma = &ps.add(name + ".gamma", 1, dim, false);
  ln.gamma->value.setOnes();
  ln.beta = &ps.add(name + ".beta", 1, dim, false);
  return ln;
}

LayerNorm LayerNorm::bind(ParamStore& ps, const std::string& name) {
  return {&ps.at(name + ".gamma"), &ps.at(name + ".beta")};
}

Var LayerNorm::operator()(Tape& t, const Var& x) const {
  return layer_norm(x, t.param(*gamma), t.param(*beta));
}

Matrix LayerNorm::apply(const Matrix& x) const {
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).mean();
    const double var = (x.row(i).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + 1e-5);
    y.row(i) = ((x.row(i).array() - mean) * rstd) * gamma->value.row(0).array() + beta->value.row(0).array();
  }
  return y;
}

SelfAttention SelfAttention::create(ParamStore& ps, const std::string& name, Index dim, int heads, Rng& rng) {
  return {Linear::create(ps, name + ".qkv", dim, 3 * dim, rng), Linear::create(ps, name + ".out", dim, dim, rng),
          heads};
}

SelfAttention SelfAttention::bind(ParamStore& ps, const std::string& name, int heads) {
  return {Linear::bind(ps, name + ".qkv"), Linear::bind(ps, name + ".out"), heads};
}

Var SelfAttention::operator()(Tape& t, const Var& x, std::span<const Segment> segs, bool causal) const {
  const Index e = x.cols();
  Var h = qkv(t, x);
  Var a = attention(slice_cols(h, 0, e), slice_cols(h, e, e), slice_cols(h, 2 * e, e), segs, heads, causal);
  return out(t, a);
}

FeedForward FeedForward::create(ParamStore& ps, const std::string& name, Index dim, Index hidden, Rng& rng) {
  return {Linear::create(ps, name + ".fc1", dim, hidden, rng), Linear::create(ps, name + ".fc2", hidden, dim, rng)};
}

FeedForward FeedForward::bind(ParamStore& ps, const std::string& name) {
  return {Linear::bind(ps, name + ".fc1"), Linear::bind(ps, name + ".fc2")};
}

Var FeedForward::operator()(Tape& t, const Var& x) const { return fc2(t, gelu(fc1(t, x))); }

Matrix FeedForward::apply(const Matrix& x) const {
  constexpr double c = 0.7978845608028654;
  Matrix h = fc1.apply(x).unaryExpr([](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); });
  return fc2.apply(h);
}

TransformerBlock TransformerBlock::create(ParamStore& ps, const std::string& name, Index dim, int heads,
                                          Index hidden, NormPlacement norm, double dropout, Rng& rng) {
  TransformerBlock b;
  b.ln1 = LayerNorm::create(ps, name + ".ln1", dim);
  b.attn = SelfAttention::create(ps, name + ".attn", dim, heads, rng);
  b.ln2 = LayerNorm::create(ps, name + ".ln2", dim);
  b.ff = FeedForward::create(ps, name + ".ff", dim, hidden, rng);
  b.norm = norm;
  b.dropout = dropout;
  return b;
}

TransformerBlock TransformerBlock::bind(ParamStore& ps, const std::string& name, int heads, NormPlacement norm,
                                        double dropout) {
  return {LayerNorm::bind(ps, name + ".ln1"), SelfAttention::bind(ps, name + ".attn", heads),
          LayerNorm::bind(ps, name + ".ln2"), FeedForward::bind(ps, name + ".ff"), norm, dropout};
}

Var TransformerBlock::operator()(Tape& t, const Var& x, std::span<const Segment> segs, bool causal,
                                 const ForwardContext& ctx) const {
  if (norm == NormPlacement::pre) {
    Var h = add(x, nn::dropout(attn(t, ln1(t, x), segs, causal), dropout, ctx));
    return add(h, nn::dropout(ff(t, ln2(t, h)), dropout, ctx));
  }
  Var h = ln1(t, add(x, nn::dropout(attn(t, x, segs, causal), dropout, ctx)));
  return ln2(t, add(h, nn::dropout(ff(t, h), dropout, ctx)));
}

Lstm Lstm::create(ParamStore& ps, const std::string& name, Index in, Index hidden, Rng& rng) {
  Lstm l;
  l.w_ih = &ps.add_normal(name + ".w_ih", in, 4 * hidden, kInitStd, rng);
  l.w_hh = &ps.add_normal(name + ".w_hh", hidden, 4 * hidden, kInitStd, rng);
  l.b = &ps.add(name + ".b", 1, 4 * hidden, false);
  l.hidden = hidden;
  return l;
}

Lstm Lstm::bind(ParamStore& ps, const std::string& name) {
  Lstm l{&ps.at(name + ".w_ih"), &ps.at(name + ".w_hh"), &ps.at(name + ".b"), 0};
  l.hidden = l.w_hh->value.rows();
  return l;
}

std::vector<Var> Lstm::operator()(Tape& t, std::span<const Var> steps) const {
  std::vector<Var> hs;
  if (steps.empty()) return hs;
  const Index n = steps.front().rows();
  Var wih = t.param(*w_ih), whh = t.param(*w_hh), bias = t.param(*b);
  Var h = t.constant(Matrix::Zero(n, hidden));
  Var c = t.constant(Matrix::Zero(n, hidden));
  for (const Var& x : steps) {
    if (x.cols() != w_ih->value.rows()) throw std::invalid_argument("lstm: input dimension mismatch");
    Var z = add_row(add(matmul(x, wih), matmul(h, whh)), bias);
    Var i = sigmoid(slice_cols(z, 0, hidden));
    Var f = sigmoid(slice_cols(z, hidden, hidden));
    Var g = tanh(slice_cols(z, 2 * hidden, hidden));
    Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh(c));
    hs.push_back(h);
  }
  return hs;
}

Mlp2 Mlp2::create(ParamStore& ps, const std::string& name, Index in, Index hidden, Index out, Rng& rng) {
  return {Linear::create(ps, name + ".fc1", in, hidden, rng), Linear::create(ps, name + ".fc2", hidden, out, rng)};
}

Mlp2 Mlp2::bind(ParamStore& ps, const std::string& name) {
  return {Linear::bind(ps, name + ".fc1"), Linear::bind(ps, name + ".fc2")};
}

Var Mlp2::operator()(Tape& t, const Var& x) const { return fc2(t, relu(fc1(t, x))); }

}  // namespace modeswitch::nn
