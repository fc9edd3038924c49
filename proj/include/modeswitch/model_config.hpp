#pragma once

#include <cstdint>

#include "modeswitch/checkpoint.hpp"

namespace modeswitch {

struct ModelConfig {
  std::int64_t vocab_size = 0;
  std::int64_t embed_dim = 128;
  int layers = 4;
  int heads = 4;
  std::int64_t ff_dim = 512;
  std::int64_t max_len = 128;
  double dropout = 0.1;

  /// Throws std::invalid_argument on a malformed config.
  void validate() const;
  Json to_json() const;
  static ModelConfig from_json(const Json& j);
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig default_decoder_config();
ModelConfig default_encoder_config();

}  // namespace modeswitch
