#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modeswitch/corpus.hpp"

namespace modeswitch {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Reserved ids. They occupy the lowest indices of every vocabulary.
enum class Special : TokenId {
  user = 0,
  system,
  end,
  chitchat,
  taskoriented,
  transition_turn,
  normal_turn,
  transition,
  cls,
  sep,
  pad,
  unk,
};

inline constexpr std::size_t kNumSpecials = 12;
inline constexpr std::size_t kClassifierMaxLen = 256;

constexpr TokenId id_of(Special s) { return static_cast<TokenId>(s); }
std::string_view special_text(Special s);
bool is_special(TokenId id);

TokenId prompt_token(Mode m);
TokenId prompt_token(TurnKind t);

/// Lowercased word-level split: runs of letters/digits (with inner apostrophes)
/// and single punctuation characters.
std::vector<std::string> tokenize(std::string_view text);

/// The tokenized form re-joined by single spaces.
std::string normalize(std::string_view text);

class Vocab {
 public:
  /// Specials first, then corpus words by frequency desc, ties lexicographic.
  static Vocab build(const std::vector<Dialogue>& ds, std::size_t min_freq);
  /// `tokens` is the full id-ordered table, specials included.
  static Vocab from_tokens(std::vector<std::string> tokens);
  static Vocab from_json(const std::string& text);
  static Vocab load(const std::filesystem::path& path);

  /// {"token": id, ...} in id order.
  std::string to_json() const;
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  TokenSeq encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// `domain{act(name=value, name=value)}` per act, joined by single spaces.
/// The characters \ { } ( ) , = inside fields are backslash-escaped.
std::string serialize_acts(const std::vector<DialogueAct>& acts);
std::vector<DialogueAct> parse_acts(std::string_view text);

/// Which tokens fill the two prompt positions of a decoder input.
struct PromptTokens {
  TokenId ccto;
  TokenId ttnt;
};

PromptTokens discrete_prompts(GenerationMode mode);
/// Placeholders for positions whose word embeddings get replaced.
PromptTokens reserved_prompts();

struct RenderedLm {
  TokenSeq input;
  TokenSeq target;
};

/// Throws std::length_error when even an empty context cannot fit.
RenderedLm render_lm_input(const LmExample& ex, const Vocab& vocab, bool discrete_prompts,
                           std::size_t max_len);

/// Decoder input for the given context: optional prompts, speaker-tagged turns,
/// trailing [SYSTEM]. Oldest context tokens are dropped to fit `budget`.
TokenSeq render_lm_context(const std::vector<DialogueTurn>& context, const Vocab& vocab,
                           std::optional<PromptTokens> prompts, std::size_t budget);

/// Target tokens for a system turn under a control mode, terminated by [END].
TokenSeq render_lm_target(const DialogueTurn& turn, TurnKind ttnt, const Vocab& vocab);

/// [CLS] followed by turn texts joined by [SEP], front-truncated to max_len.
TokenSeq render_classifier_input(const std::vector<DialogueTurn>& history, const Vocab& vocab,
                                 std::size_t max_len = kClassifierMaxLen);

}  // namespace modeswitch
