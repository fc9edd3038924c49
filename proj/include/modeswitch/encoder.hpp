#pragma once

#include <span>
#include <vector>

#include "modeswitch/model_config.hpp"
#include "modeswitch/nn/layers.hpp"
#include "modeswitch/text_codec.hpp"

namespace modeswitch {

/// Bidirectional post-norm transformer; embeddings are layer-normalized
/// before the first block.
class Encoder {
 public:
  Encoder(const ModelConfig& cfg, nn::ParamStore& ps, const std::string& prefix, std::uint64_t seed);
  /// Binds to tensors that already exist in `ps`.
  Encoder(const ModelConfig& cfg, nn::ParamStore& ps, const std::string& prefix);

  const ModelConfig& config() const { return cfg_; }

  /// Contextual vectors for every position of every sequence, concatenated.
  /// Each sequence must start with [CLS].
  nn::Var forward(nn::Tape& t, std::span<const TokenSeq> batch, const nn::ForwardContext& ctx) const;

 private:
  ModelConfig cfg_;
  nn::Param* wte_ = nullptr;
  nn::Param* wpe_ = nullptr;
  nn::LayerNorm ln_emb_;
  std::vector<nn::TransformerBlock> blocks_;
};

}  // namespace modeswitch
