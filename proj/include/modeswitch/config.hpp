#pragma once

#include <filesystem>
#include <string>

#include "modeswitch/eval.hpp"
#include "modeswitch/model_config.hpp"
#include "modeswitch/training.hpp"

namespace modeswitch {

struct StageConfigs {
  TrainConfig unified;
  TrainConfig classifier;
  TrainConfig discrete;
  TrainConfig bridge;
};

/// One document driving every stage. Defaults follow the published
/// hyperparameters; command-line flags override file values.
struct RunConfig {
  std::filesystem::path corpus = "corpus.jsonl";
  std::filesystem::path out = "run";
  std::uint64_t seed = 1;
  std::size_t min_freq = 1;
  std::size_t synthetic_dialogues = 32;
  ModelConfig decoder = default_decoder_config();
  ModelConfig encoder = default_encoder_config();
  StageConfigs train = default_stages();
  DecodeSettings decode;

  static StageConfigs default_stages();

  /// Every stage shares the run seed unless its own block sets one.
  static RunConfig from_json(const Json& j);
  static RunConfig load(const std::filesystem::path& path);
  Json to_json() const;
  void validate() const;
};

}  // namespace modeswitch
