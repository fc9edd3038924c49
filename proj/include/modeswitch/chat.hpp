#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "modeswitch/eval.hpp"

namespace modeswitch {

enum class ModelKind { unified, discrete, continuous };
std::string to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// Immutable trained models shared read-only by every session.
struct ModelStack {
  std::optional<LmModel> unified;
  std::optional<LmModel> discrete;
  std::optional<ClassifierModel> classifier;
  std::optional<BridgeModel> bridge;
  DecodeSettings decode;

  /// Loads whatever checkpoints exist in `dir`; the bridge is kept only when
  /// its pinned backbones are present and match.
  static ModelStack load(const std::filesystem::path& dir, const DecodeSettings& decode);

  bool has(ModelKind k) const;
  std::vector<std::string> available() const;
};

struct ChatReply {
  std::string response;
  std::optional<std::string> transition_sentence;
  std::optional<Mode> predicted_ccto;
  std::optional<TurnKind> predicted_ttnt;
  std::string model;
  bool truncated = false;

  Json to_json() const;
  static ChatReply from_json(const Json& j);
};

/// One conversation. Not thread-safe; callers serialize access per session.
class ChatSession {
 public:
  ChatSession(std::string id, ModelKind model, std::uint64_t seed);

  const std::string& id() const { return id_; }
  ModelKind model() const { return model_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<DialogueTurn>& history() const { return history_; }

  /// Appends the utterance and the reply to the history. The override is
  /// the discrete model's prompt pair; other models use only its ccto to pick
  /// decode parameters. Without `seed` the reply seed derives from the
  /// session seed and turn count. On failure the history is left untouched.
  ChatReply respond(const ModelStack& models, const std::string& utterance,
                    std::optional<GenerationMode> override_mode = std::nullopt,
                    std::optional<std::uint64_t> seed = std::nullopt);

  Json history_json() const;
  /// Re-applies a recorded exchange without generating.
  void replay(const std::string& utterance, const ChatReply& reply);

 private:
  std::string id_;
  ModelKind model_;
  std::uint64_t seed_;
  std::vector<DialogueTurn> history_;
};

Json turn_to_json(const DialogueTurn& t);

/// Line-oriented chat on the given streams. Returns when input ends or on :quit.
void chat_repl(const ModelStack& models, ModelKind model, std::uint64_t seed, std::istream& in, std::ostream& out);

}  // namespace modeswitch
