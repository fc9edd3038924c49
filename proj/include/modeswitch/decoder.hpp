#pragma once

#include <optional>
#include <span>
#include <vector>

#include "modeswitch/model_config.hpp"
#include "modeswitch/nn/layers.hpp"
#include "modeswitch/text_codec.hpp"

namespace modeswitch {

/// Causal pre-norm transformer with learned positions and an output
/// projection tied to the token embedding.
class Decoder {
 public:
  Decoder(const ModelConfig& cfg, std::uint64_t seed);
  /// Shape-checks the tensors against `cfg`.
  Decoder(const ModelConfig& cfg, const Checkpoint& ckpt);

  Decoder(Decoder&&) noexcept = default;
  Decoder& operator=(Decoder&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  /// Final hidden states of every sequence, rows concatenated in batch order.
  /// `prompt_override` ([2B, E]) replaces the word embeddings at positions 0
  /// and 1 of sequence b with its rows 2b and 2b+1.
  nn::Var hidden(nn::Tape& t, std::span<const TokenSeq> batch, const nn::Var* prompt_override,
                 const nn::ForwardContext& ctx) const;
  /// Vocabulary logits for hidden rows.
  nn::Var head(nn::Tape& t, const nn::Var& h) const;

  /// Logits [len, V] of one sequence in eval mode.
  nn::Matrix logits(const TokenSeq& tokens, const std::optional<nn::Matrix>& prompt_override = std::nullopt) const;

  /// Word embedding rows of the given tokens ([n, E]).
  nn::Matrix word_embeddings(std::span<const TokenId> ids) const;

  /// Draws fresh embedding rows for the listed tokens.
  void reinit_embeddings(std::span<const TokenId> ids, std::uint64_t seed);

  /// Incremental eval-mode inference with cached keys and values.
  class Session {
   public:
    explicit Session(const Decoder& d, std::optional<nn::Matrix> prompt_override = std::nullopt);
    /// Feeds tokens and returns the logits of the last one.
    nn::RowVector feed(std::span<const TokenId> tokens);
    nn::RowVector feed(TokenId token) { return feed(std::span<const TokenId>(&token, 1)); }
    std::int64_t length() const { return len_; }

   private:
    const Decoder* d_;
    std::optional<nn::Matrix> override_;
    std::vector<nn::Matrix> k_, v_;
    std::int64_t len_ = 0;
  };

 private:
  void bind();

  ModelConfig cfg_;
  nn::ParamStore ps_;
  nn::Param* wte_ = nullptr;
  nn::Param* wpe_ = nullptr;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm ln_f_;
};

}  // namespace modeswitch
