#pragma once

#include <string>
#include <vector>

#include "modeswitch/nn/tape.hpp"

// Parameterized building blocks. Each holds non-owning pointers into a
// ParamStore, so the store must outlive the layer.

namespace modeswitch::nn {

inline constexpr double kInitStd = 0.02;

struct Linear {
  Param* w = nullptr;  // [in, out]
  Param* b = nullptr;  // [1, out]

  static Linear create(ParamStore& ps, const std::string& name, Index in, Index out, Rng& rng);
  static Linear bind(ParamStore& ps, const std::string& name);
  Var operator()(Tape& t, const Var& x) const;
  Matrix apply(const Matrix& x) const;
};

struct LayerNorm {
  Param* gamma = nullptr;
  Param* beta = nullptr;

  static LayerNorm create(ParamStore& ps, const std::string& name, Index dim);
  static LayerNorm bind(ParamStore& ps, const std::string& name);
  Var operator()(Tape& t, const Var& x) const;
  Matrix apply(const Matrix& x) const;
};

/// Multi-head self-attention with a fused q|k|v projection.
struct SelfAttention {
  Linear qkv;
  Linear out;
  int heads = 1;

  static SelfAttention create(ParamStore& ps, const std::string& name, Index dim, int heads, Rng& rng);
  static SelfAttention bind(ParamStore& ps, const std::string& name, int heads);
  Var operator()(Tape& t, const Var& x, std::span<const Segment> segs, bool causal) const;
};

struct FeedForward {
  Linear fc1;
  Linear fc2;

  static FeedForward create(ParamStore& ps, const std::string& name, Index dim, Index hidden, Rng& rng);
  static FeedForward bind(ParamStore& ps, const std::string& name);
  Var operator()(Tape& t, const Var& x) const;  // gelu between
  Matrix apply(const Matrix& x) const;
};

enum class NormPlacement { pre, post };

struct TransformerBlock {
  LayerNorm ln1;
  SelfAttention attn;
  LayerNorm ln2;
  FeedForward ff;
  NormPlacement norm = NormPlacement::pre;
  double dropout = 0.0;

  static TransformerBlock create(ParamStore& ps, const std::string& name, Index dim, int heads, Index hidden,
                                 NormPlacement norm, double dropout, Rng& rng);
  static TransformerBlock bind(ParamStore& ps, const std::string& name, int heads, NormPlacement norm,
                               double dropout);
  Var operator()(Tape& t, const Var& x, std::span<const Segment> segs, bool causal,
                 const ForwardContext& ctx) const;
};

/// Unidirectional LSTM, gate order i, f, g, o. Steps are [batch, in] each.
struct Lstm {
  Param* w_ih = nullptr;  // [in, 4h]
  Param* w_hh = nullptr;  // [h, 4h]
  Param* b = nullptr;     // [1, 4h]
  Index hidden = 0;

  static Lstm create(ParamStore& ps, const std::string& name, Index in, Index hidden, Rng& rng);
  static Lstm bind(ParamStore& ps, const std::string& name);
  /// Hidden state after each step; initial h and c are zero.
  std::vector<Var> operator()(Tape& t, std::span<const Var> steps) const;
};

/// Two linear layers with a ReLU between.
struct Mlp2 {
  Linear fc1;
  Linear fc2;

  static Mlp2 create(ParamStore& ps, const std::string& name, Index in, Index hidden, Index out, Rng& rng);
  static Mlp2 bind(ParamStore& ps, const std::string& name);
  Var operator()(Tape& t, const Var& x) const;
};

}  // namespace modeswitch::nn
