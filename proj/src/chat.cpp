#include "modeswitch/chat.hpp"

#include <iostream>
#include <stdexcept>

#include "modeswitch/digest.hpp"

namespace modeswitch {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::unified:
      return "unified";
    case ModelKind::discrete:
      return "discrete";
    case ModelKind::continuous:
      return "continuous";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "unified") return ModelKind::unified;
  if (s == "discrete") return ModelKind::discrete;
  if (s == "continuous") return ModelKind::continuous;
  throw std::invalid_argument("unknown model '" + std::string(s) + "' (expected unified, discrete or continuous)");
}

ModelStack ModelStack::load(const std::filesystem::path& dir, const DecodeSettings& decode) {
  ModelStack s;
  s.decode = decode;
  auto path = [&](const char* name) { return dir / name; };
  if (std::filesystem::exists(path("unified.ckpt"))) s.unified = LmModel::load(path("unified.ckpt"));
  if (std::filesystem::exists(path("discrete.ckpt"))) s.discrete = LmModel::load(path("discrete.ckpt"));
  if (std::filesystem::exists(path("classifier.ckpt"))) s.classifier = ClassifierModel::load(path("classifier.ckpt"));
  if (std::filesystem::exists(path("bridge.ckpt")) && s.classifier && s.discrete) {
    BridgeModel b = BridgeModel::load(path("bridge.ckpt"));
    b.verify(*s.classifier, *s.discrete);
    s.bridge = std::move(b);
  }
  return s;
}

bool ModelStack::has(ModelKind k) const {
  switch (k) {
    case ModelKind::unified:
      return unified.has_value();
    case ModelKind::discrete:
      return discrete.has_value();
    case ModelKind::continuous:
      return discrete && classifier && bridge;
  }
  return false;
}

std::vector<std::string> ModelStack::available() const {
  std::vector<std::string> out;
  for (ModelKind k : {ModelKind::unified, ModelKind::discrete, ModelKind::continuous}) {
    if (has(k)) out.push_back(to_string(k));
  }
  return out;
}

Json ChatReply::to_json() const {
  Json j;
  j["response"] = response;
  j["transition_sentence"] = transition_sentence ? Json(*transition_sentence) : Json(nullptr);
  j["predicted_ccto"] = predicted_ccto ? Json(modeswitch::to_string(*predicted_ccto)) : Json(nullptr);
  j["predicted_ttnt"] = predicted_ttnt ? Json(modeswitch::to_string(*predicted_ttnt)) : Json(nullptr);
  j["model"] = model;
  j["truncated"] = truncated;
  return j;
}

ChatReply ChatReply::from_json(const Json& j) {
  ChatReply r;
  r.response = j.at("response").get<std::string>();
  if (!j.at("transition_sentence").is_null()) r.transition_sentence = j.at("transition_sentence").get<std::string>();
  if (!j.at("predicted_ccto").is_null()) r.predicted_ccto = parse_mode(j.at("predicted_ccto").get<std::string>());
  if (!j.at("predicted_ttnt").is_null()) r.predicted_ttnt = parse_turn_kind(j.at("predicted_ttnt").get<std::string>());
  r.model = j.at("model").get<std::string>();
  r.truncated = j.value("truncated", false);
  return r;
}

ChatSession::ChatSession(std::string id, ModelKind model, std::uint64_t seed)
    : id_(std::move(id)), model_(model), seed_(seed) {}

ChatReply ChatSession::respond(const ModelStack& models, const std::string& utterance,
                               std::optional<GenerationMode> override_mode, std::optional<std::uint64_t> seed) {
  if (utterance.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw std::invalid_argument("utterance is empty");
  }
  if (!models.has(model_)) throw std::runtime_error("model " + to_string(model_) + " is not loaded");
  const std::uint64_t turn_seed = seed.value_or(mix_seed(seed_, history_.size()));

  std::vector<DialogueTurn> hist = history_;
  DialogueTurn user;
  user.speaker = Speaker::user;
  user.text = utterance;
  user.mode = override_mode ? override_mode->ccto : Mode::chitchat;
  hist.push_back(user);

  ChatReply reply;
  reply.model = to_string(model_);
  Generation g;
  switch (model_) {
    case ModelKind::unified: {
      const Mode m = override_mode ? override_mode->ccto : Mode::chitchat;
      g = generate_plain(*models.unified, hist, models.decode.for_mode(m, turn_seed));
      break;
    }
    case ModelKind::discrete: {
      const GenerationMode mode = override_mode.value_or(GenerationMode{});
      g = generate_discrete(*models.discrete, hist, mode, models.decode.for_mode(mode.ccto, turn_seed));
      reply.predicted_ccto = mode.ccto;
      reply.predicted_ttnt = mode.ttnt;
      break;
    }
    case ModelKind::continuous: {
      std::optional<DecodeParams> p;
      if (override_mode) p = models.decode.for_mode(override_mode->ccto, turn_seed);
      g = generate_continuous(*models.classifier, *models.bridge, *models.discrete, hist, p, turn_seed);
      reply.predicted_ccto = g.mode.ccto;
      reply.predicted_ttnt = g.mode.ttnt;
      break;
    }
  }
  reply.response = g.split.normal_part;
  reply.transition_sentence = g.split.transition_part;
  reply.truncated = g.split.truncated;
  replay(utterance, reply);
  return reply;
}

void ChatSession::replay(const std::string& utterance, const ChatReply& reply) {
  const Mode mode = reply.predicted_ccto.value_or(Mode::chitchat);
  DialogueTurn user;
  user.speaker = Speaker::user;
  user.text = utterance;
  user.mode = mode;
  DialogueTurn sys;
  sys.speaker = Speaker::system;
  sys.text = reply.response;
  sys.mode = mode;
  if (reply.transition_sentence) {
    sys.is_transition_turn = true;
    sys.transition_sentence = reply.transition_sentence;
  }
  history_.push_back(std::move(user));
  history_.push_back(std::move(sys));
}

Json turn_to_json(const DialogueTurn& t) {
  return {{"speaker", to_string(t.speaker)},
          {"text", t.text},
          {"mode", to_string(t.mode)},
          {"is_transition_turn", t.is_transition_turn},
          {"transition_sentence", t.transition_sentence ? Json(*t.transition_sentence) : Json(nullptr)}};
}

Json ChatSession::history_json() const {
  Json turns = Json::array();
  for (const auto& t : history_) turns.push_back(turn_to_json(t));
  return {{"session_id", id_}, {"model", to_string(model_)}, {"seed", seed_}, {"history", turns}};
}

void chat_repl(const ModelStack& models, ModelKind model, std::uint64_t seed, std::istream& in, std::ostream& out) {
  ChatSession session("repl", model, seed);
  GenerationMode mode;
  out << "model: " << to_string(model) << "  (:mode cc|to, :turn transition|normal, :quit)\n";
  std::string line;
  while (true) {
    out << "> " << std::flush;
    if (!std::getline(in, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line == ":quit") break;
    if (line.rfind(":mode ", 0) == 0 || line.rfind(":turn ", 0) == 0) {
      const std::string arg = line.substr(6);
      if (model != ModelKind::discrete) {
        out << "(prompt overrides apply to the discrete model only)\n";
      } else if (line[1] == 'm' && (arg == "cc" || arg == "to")) {
        mode.ccto = arg == "cc" ? Mode::chitchat : Mode::taskoriented;
      } else if (line[1] == 't' && (arg == "transition" || arg == "normal")) {
        mode.ttnt = arg == "transition" ? TurnKind::transition : TurnKind::normal;
      } else {
        out << "(unknown setting: " << arg << ")\n";
        continue;
      }
      out << "[" << to_string(mode.ccto) << ", " << to_string(mode.ttnt) << "]\n";
      continue;
    }
    try {
      const auto r = session.respond(models, line, model == ModelKind::discrete ? std::optional(mode) : std::nullopt);
      if (r.predicted_ccto) out << "[" << to_string(*r.predicted_ccto) << ", " << to_string(*r.predicted_ttnt) << "] ";
      out << r.response << "\n";
      if (r.transition_sentence) out << "  >> " << *r.transition_sentence << "\n";
    } catch (const std::exception& e) {
      out << "(generation failed: " << e.what() << ")\n";
    }
  }
}

}  // namespace modeswitch
