#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "modeswitch/corpus.hpp"
#include "modeswitch/decoder.hpp"
#include "modeswitch/text_codec.hpp"
#include "modeswitch/training.hpp"

namespace modeswitch {

struct DecodeParams {
  int top_k = 5;
  double top_p = 0.9;
  std::size_t max_new_tokens = 48;
  std::uint64_t seed = 0;

  void validate() const;
  Json to_json() const;
  static DecodeParams from_json(const Json& j, const DecodeParams& defaults);
};

/// (5, 0.9) for chit-chat, (10, 0.5) for task-oriented.
DecodeParams default_decode_params(Mode m);

/// Keeps the k most probable entries, then the shortest prefix of those whose
/// mass reaches p, and renormalizes. Ties go to the lower index.
std::vector<double> filter_logits(std::span<const double> dist, int k, double p);

struct Sampled {
  TokenSeq tokens;         // without the closing [END]
  bool truncated = false;  // hit max_new_tokens or the context limit first
};

/// Autoregressive sampling until [END]. Deterministic in params.seed.
Sampled sample_response(const Decoder& d, const TokenSeq& context, const DecodeParams& params,
                        const std::optional<nn::Matrix>& prompt_override = std::nullopt);

/// Decoder input and next-token labels for a rendered example. Context
/// positions carry kIgnoreTarget.
struct LmRows {
  TokenSeq input;
  std::vector<std::int32_t> labels;
};
LmRows lm_rows(const RenderedLm& r);

/// Mean token cross-entropy over target positions of the batch.
/// When `prompt_logits` is given it receives the logits at positions 0 and 1
/// of every sequence ([2B, V]).
nn::Var lm_loss(nn::Tape& t, const Decoder& d, std::span<const RenderedLm> batch, const nn::Var* prompt_override,
                const nn::ForwardContext& ctx, nn::Var* prompt_logits = nullptr);

struct TokenTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double loss_sum = 0.0;  // summed token NLL

  double accuracy() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
  double mean_loss() const { return total == 0 ? 0.0 : loss_sum / static_cast<double>(total); }
};

/// Teacher-forced argmax accuracy and loss over target tokens, eval mode.
TokenTally lm_tally(const Decoder& d, std::span<const RenderedLm> examples, std::size_t batch_size = 16);

std::vector<RenderedLm> render_all(std::span<const LmExample> examples, const Vocab& vocab, bool discrete_prompts,
                                   std::size_t max_len);

/// A decoder together with the vocabulary it was trained on.
struct LmModel {
  std::string kind;  // "unified", "discrete" or "ablation"
  Vocab vocab;
  Decoder decoder;
  std::uint64_t seed = 0;
  Json metadata = Json::object();

  bool uses_prompts() const { return kind == "discrete"; }

  Checkpoint to_checkpoint() const;
  static LmModel from_checkpoint(const Checkpoint& c);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static LmModel load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }
};

struct TrainOutcome {
  FitResult fit;
  TokenTally train_tally;
};

/// Stage 1: a decoder trained from scratch on every system turn, each with
/// its one preceding user utterance as context.
std::pair<LmModel, TrainOutcome> train_unified(const std::vector<Dialogue>& corpus, const Vocab& vocab,
                                               ModelConfig model_cfg, const TrainConfig& cfg,
                                               const EpochHook& on_epoch = {});

}  // namespace modeswitch
