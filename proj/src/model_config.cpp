#include "modeswitch/model_config.hpp"

#include <stdexcept>

namespace modeswitch {

void ModelConfig::validate() const {
  if (vocab_size <= 0) throw std::invalid_argument("model: vocab_size must be positive");
  if (embed_dim <= 0 || layers <= 0 || heads <= 0 || ff_dim <= 0 || max_len <= 0) {
    throw std::invalid_argument("model: dimensions must be positive");
  }
  if (embed_dim % heads != 0) throw std::invalid_argument("model: embed_dim must be divisible by heads");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model: dropout must be in [0, 1)");
}

Json ModelConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"embed_dim", embed_dim}, {"layers", layers},   {"heads", heads},
          {"ff_dim", ff_dim},         {"max_len", max_len},     {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const Json& j) {
  ModelConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.layers = j.value("layers", c.layers);
  c.heads = j.value("heads", c.heads);
  c.ff_dim = j.value("ff_dim", c.ff_dim);
  c.max_len = j.value("max_len", c.max_len);
  c.dropout = j.value("dropout", c.dropout);
  return c;
}

ModelConfig default_decoder_config() { return {}; }

ModelConfig default_encoder_config() {
  ModelConfig c;
  c.layers = 2;
  c.max_len = 256;
  return c;
}

}  // namespace modeswitch
