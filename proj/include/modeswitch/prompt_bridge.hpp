#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modeswitch/mode_classifier.hpp"
#include "modeswitch/unified_lm.hpp"

namespace modeswitch {

struct SplitResponse {
  std::string normal_part;
  std::optional<std::string> transition_part;
  bool degenerate = false;  // marker at position 0
  bool truncated = false;   // generation ran out of room before [END]
};

/// Splits decoded tokens at the first [TRANSITION]. Later markers are dropped
/// and every control token is stripped from both parts.
SplitResponse split_transition(std::span<const TokenId> raw, const Vocab& vocab);

/// Windowing shared by the prompted decoders: at most the last three turns.
std::vector<DialogueTurn> recent_turns(const std::vector<DialogueTurn>& history, std::size_t n = kPromptedWindow);

/// Context budget that leaves room for a response of max_new_tokens.
std::size_t context_budget(const Decoder& d, const DecodeParams& params);

/// Continues training a unified model on transition turns. Each turn yields a
/// (mode, transition) and a (mode, normal) example; with `ablation` set the
/// prompt tokens are left out of the inputs. Prompt-token embeddings are
/// re-drawn before training in both cases.
std::pair<LmModel, TrainOutcome> train_discrete(const LmModel& unified, const std::vector<Dialogue>& corpus,
                                                const TrainConfig& cfg, bool ablation,
                                                const EpochHook& on_epoch = {});

struct Generation {
  SplitResponse split;
  TokenSeq raw;
  GenerationMode mode;  // requested (discrete) or predicted (continuous)
};

/// Samples from a discrete-prompt model under an explicit mode. Decode
/// parameters default from mode.ccto.
Generation generate_discrete(const LmModel& m, const std::vector<DialogueTurn>& context, GenerationMode mode,
                             std::optional<DecodeParams> params = std::nullopt, std::uint64_t seed = 0);

/// Samples from a model without prompt tokens (unified or ablation). The
/// unified model sees only the last user utterance.
Generation generate_plain(const LmModel& m, const std::vector<DialogueTurn>& history, const DecodeParams& params);

/// Unidirectional LSTM over (p_ccto, p_ttnt), dropout, then a shared
/// two-layer ReLU MLP.
class Bridge {
 public:
  static constexpr double kDropout = 0.1;

  Bridge(nn::Index dim, std::uint64_t seed);
  Bridge(nn::Index dim, const Checkpoint& ckpt);
  Bridge(Bridge&&) noexcept = default;
  Bridge& operator=(Bridge&&) noexcept = default;

  nn::Index dim() const { return dim_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  /// [2B, E]: rows 2b and 2b+1 are cp_ccto and cp_ttnt of item b.
  nn::Var forward(nn::Tape& t, const nn::Var& p_ccto, const nn::Var& p_ttnt, const nn::ForwardContext& ctx) const;

 private:
  nn::Index dim_;
  nn::ParamStore ps_;
  nn::Lstm lstm_;
  nn::Mlp2 mlp_;
};

struct ContinuousPrompts {
  nn::RowVector cp_ccto;
  nn::RowVector cp_ttnt;

  nn::Matrix stacked() const;  // [2, E]
};

class FrozenBackboneError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct BridgeExample {
  TokenSeq history;  // classifier input
  RenderedLm lm;     // decoder input with reserved prompt positions
  TokenId gold_ccto = 0;
  TokenId gold_ttnt = 0;
};

/// One bridge example per system turn of every non-plain dialogue.
std::vector<BridgeExample> make_bridge_examples(const std::vector<Dialogue>& ds, const Vocab& vocab,
                                                std::size_t classifier_max, std::size_t decoder_max);

struct BridgeLoss {
  nn::Var total;
  nn::Var response;
  nn::Var ccto;
  nn::Var ttnt;
  nn::Var prompt_logits;  // [2B, V]
};

/// Response CE plus CE of the logits at positions 0 and 1 against the gold
/// discrete prompt tokens. Throws FrozenBackboneError if either backbone has
/// a trainable parameter. Backbones always run in eval mode.
BridgeLoss bridge_loss(nn::Tape& t, const Bridge& bridge, const ModeClassifier& cls, const Decoder& dec,
                       std::span<const BridgeExample> batch, const nn::ForwardContext& ctx);

struct BridgeModel {
  Bridge net;
  std::string classifier_hash;
  std::string decoder_hash;
  std::uint64_t seed = 0;
  Json metadata = Json::object();

  /// Throws CheckpointError unless the backbones are the pinned ones.
  void verify(const ClassifierModel& cls, const LmModel& lm) const;
  ContinuousPrompts prompts(const ClassifierOutput& out) const;

  Checkpoint to_checkpoint() const;
  static BridgeModel from_checkpoint(const Checkpoint& c);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static BridgeModel load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }
};

struct BridgeOutcome {
  FitResult fit;
  double prompt_accuracy = 0.0;  // percent over both positions, train split
  double mean_loss = 0.0;
};

struct BridgeEval {
  double prompt_accuracy = 0.0;
  double mean_loss = 0.0;
};
BridgeEval evaluate_bridge(const Bridge& bridge, const ModeClassifier& cls, const Decoder& dec,
                           std::span<const BridgeExample> ex);

/// Freezes both backbones (they are taken by value) and trains the bridge.
std::pair<BridgeModel, BridgeOutcome> train_bridge(ClassifierModel& cls, LmModel& lm,
                                                   const std::vector<Dialogue>& corpus, const TrainConfig& cfg,
                                                   const EpochHook& on_epoch = {});

/// Classifies the full history, maps the pooled vectors to prompts and
/// decodes over the last three turns. Decode parameters follow the predicted
/// mode unless given.
Generation generate_continuous(const ClassifierModel& cls, const BridgeModel& bridge, const LmModel& lm,
                               const std::vector<DialogueTurn>& history,
                               std::optional<DecodeParams> params = std::nullopt, std::uint64_t seed = 0);

}  // namespace modeswitch
