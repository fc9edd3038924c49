#include "modeswitch/config.hpp"

#include <algorithm>
#include <stdexcept>

namespace modeswitch {

StageConfigs RunConfig::default_stages() {
  StageConfigs s;
  s.unified.max_epochs = 5;
  s.classifier.batch_size = 60;
  s.classifier.max_epochs = 4;
  s.discrete.max_epochs = 4;
  s.bridge.max_epochs = 10;
  return s;
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::find_if(keys.begin(), keys.end(), [&](const char* x) { return k == x; }) == keys.end()) {
      throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
    }
  }
}

TrainConfig stage(const Json& j, const char* name, const TrainConfig& d, std::uint64_t seed) {
  TrainConfig base = d;
  base.seed = seed;
  if (!j.contains(name)) return base;
  const Json& s = j.at(name);
  reject_unknown(s, {"lr", "batch_size", "max_epochs", "patience", "seed", "weight_decay", "clip_norm", "max_steps"},
                 std::string("train.") + name);
  return TrainConfig::from_json(s, base);
}

ModelConfig model(const Json& j, const char* name, const ModelConfig& d) {
  if (!j.contains(name)) return d;
  const Json& m = j.at(name);
  reject_unknown(m, {"embed_dim", "layers", "heads", "ff_dim", "max_len", "dropout"}, name);
  Json merged = d.to_json();
  merged.update(m);
  return ModelConfig::from_json(merged);
}

}  // namespace

RunConfig RunConfig::from_json(const Json& j) {
  reject_unknown(j, {"corpus", "out", "seed", "min_freq", "synthetic_dialogues", "decoder", "encoder", "train", "decode"},
                 "config");
  RunConfig c;
  try {
    c.corpus = j.value("corpus", c.corpus.string());
    c.out = j.value("out", c.out.string());
    c.seed = j.value("seed", c.seed);
    c.min_freq = j.value("min_freq", c.min_freq);
    c.synthetic_dialogues = j.value("synthetic_dialogues", c.synthetic_dialogues);
    c.decoder = model(j, "decoder", c.decoder);
    c.encoder = model(j, "encoder", c.encoder);
    const Json t = j.value("train", Json::object());
    reject_unknown(t, {"unified", "classifier", "discrete", "bridge"}, "train");
    const StageConfigs d = default_stages();
    c.train.unified = stage(t, "unified", d.unified, c.seed);
    c.train.classifier = stage(t, "classifier", d.classifier, c.seed);
    c.train.discrete = stage(t, "discrete", d.discrete, c.seed);
    c.train.bridge = stage(t, "bridge", d.bridge, c.seed);
    const Json dec = j.value("decode", Json::object());
    reject_unknown(dec, {"chitchat", "taskoriented"}, "decode");
    if (dec.contains("chitchat")) c.decode.chitchat = DecodeParams::from_json(dec.at("chitchat"), c.decode.chitchat);
    if (dec.contains("taskoriented")) {
      c.decode.taskoriented = DecodeParams::from_json(dec.at("taskoriented"), c.decode.taskoriented);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

Json RunConfig::to_json() const {
  auto model_json = [](const ModelConfig& m) {
    Json j = m.to_json();
    j.erase("vocab_size");
    return j;
  };
  return {{"corpus", corpus.string()},
          {"out", out.string()},
          {"seed", seed},
          {"min_freq", min_freq},
          {"synthetic_dialogues", synthetic_dialogues},
          {"decoder", model_json(decoder)},
          {"encoder", model_json(encoder)},
          {"train",
           {{"unified", train.unified.to_json()},
            {"classifier", train.classifier.to_json()},
            {"discrete", train.discrete.to_json()},
            {"bridge", train.bridge.to_json()}}},
          {"decode", {{"chitchat", decode.chitchat.to_json()}, {"taskoriented", decode.taskoriented.to_json()}}}};
}

void RunConfig::validate() const {
  if (min_freq < 1) throw std::invalid_argument("config: min_freq must be >= 1");
  if (synthetic_dialogues < 1) throw std::invalid_argument("config: synthetic_dialogues must be >= 1");
  for (const TrainConfig* t : {&train.unified, &train.classifier, &train.discrete, &train.bridge}) t->validate();
  decode.chitchat.validate();
  decode.taskoriented.validate();
  if (decoder.embed_dim != encoder.embed_dim) {
    throw std::invalid_argument("config: encoder and decoder embed_dim must match for the bridge");
  }
  ModelConfig d = decoder, e = encoder;
  d.vocab_size = e.vocab_size = 1;
  d.validate();
  e.validate();
}

}  // namespace modeswitch
