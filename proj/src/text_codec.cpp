#include "modeswitch/text_codec.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace modeswitch {

namespace {

constexpr std::array<std::string_view, kNumSpecials> kSpecialText = {
    "[USER]",        "[SYSTEM]",      "[END]",   "[CHIT-CHAT]", "[TASK-ORIENTED]", "[TRANSITION-TURN]",
    "[NORMAL-TURN]", "[TRANSITION]", "[CLS]",   "[SEP]",       "[PAD]",           "[UNK]"};

bool word_char(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

constexpr std::string_view kActMeta = "\\{}(),=";

void append_escaped(std::string& out, std::string_view field) {
  for (char c : field) {
    if (kActMeta.find(c) != std::string_view::npos) out.push_back('\\');
    out.push_back(c);
  }
}

class ActParser {
 public:
  explicit ActParser(std::string_view s) : s_(s) {}

  std::vector<DialogueAct> parse() {
    std::vector<DialogueAct> acts;
    if (s_.empty()) return acts;
    while (true) {
      DialogueAct act;
      act.domain = field_until("{");
      expect('{');
      act.act = field_until("(");
      expect('(');
      if (peek() != ')') {
        while (true) {
          std::string name = field_until("=");
          expect('=');
          std::string value = field_until(",)");
          act.slots.emplace_back(std::move(name), std::move(value));
          if (peek() == ',') {
            expect(',');
            expect(' ');
            continue;
          }
          break;
        }
      }
      expect(')');
      expect('}');
      acts.push_back(std::move(act));
      if (pos_ == s_.size()) break;
      expect(' ');
    }
    return acts;
  }

 private:
  char peek() const {
    if (pos_ >= s_.size()) fail("unexpected end of input");
    return s_[pos_];
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string field_until(std::string_view stops) {
    std::string out;
    while (true) {
      const char c = peek();
      if (c == '\\') {
        ++pos_;
        out.push_back(peek());
        ++pos_;
        continue;
      }
      if (stops.find(c) != std::string_view::npos) return out;
      if (kActMeta.find(c) != std::string_view::npos) fail(std::string("unescaped '") + c + "'");
      out.push_back(c);
      ++pos_;
    }
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw std::invalid_argument("parse_acts: " + why + " at offset " + std::to_string(pos_));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void append(TokenSeq& out, const TokenSeq& more) { out.insert(out.end(), more.begin(), more.end()); }

}  // namespace

std::string_view special_text(Special s) { return kSpecialText[static_cast<std::size_t>(s)]; }

bool is_special(TokenId id) { return id >= 0 && static_cast<std::size_t>(id) < kNumSpecials; }

TokenId prompt_token(Mode m) {
  return id_of(m == Mode::chitchat ? Special::chitchat : Special::taskoriented);
}

TokenId prompt_token(TurnKind t) {
  return id_of(t == TurnKind::transition ? Special::transition_turn : Special::normal_turn);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
      continue;
    }
    if (!word_char(c)) {
      out.emplace_back(1, static_cast<char>(c));
      ++i;
      continue;
    }
    std::string word;
    while (i < text.size()) {
      const auto w = static_cast<unsigned char>(text[i]);
      if (word_char(w)) {
        word.push_back(static_cast<char>(std::tolower(w)));
        ++i;
      } else if (w == '\'' && i + 1 < text.size() &&
                 std::isalpha(static_cast<unsigned char>(text[i + 1]))) {
        word.push_back('\'');
        ++i;
      } else {
        break;
      }
    }
    out.push_back(std::move(word));
  }
  return out;
}

std::string normalize(std::string_view text) {
  std::string out;
  for (const auto& tok : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

Vocab Vocab::build(const std::vector<Dialogue>& ds, std::size_t min_freq) {
  if (min_freq < 1) throw std::invalid_argument("build_vocab: min_freq must be >= 1");
  if (ds.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  auto count = [&](std::string_view text) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  };
  for (const auto& d : ds) {
    for (const auto& t : d.turns) {
      count(t.text);
      if (t.transition_sentence) count(*t.transition_sentence);
      if (!t.acts.empty()) count(serialize_acts(t.acts));
    }
  }
  std::vector<std::pair<std::string, std::size_t>> words;
  for (auto& [w, n] : counts) {
    if (n >= min_freq) words.emplace_back(w, n);
  }
  std::stable_sort(words.begin(), words.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens(kSpecialText.begin(), kSpecialText.end());
  for (auto& [w, _] : words) tokens.push_back(w);
  return from_tokens(std::move(tokens));
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kNumSpecials) throw std::invalid_argument("vocab: missing special tokens");
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    if (tokens[i] != kSpecialText[i]) {
      throw std::invalid_argument("vocab: special token " + std::string(kSpecialText[i]) +
                                  " must have id " + std::to_string(i));
    }
  }
  Vocab v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument("vocab: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

Vocab Vocab::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("vocab: expected a JSON object");
  std::vector<std::string> tokens(j.size());
  std::vector<bool> seen(j.size(), false);
  for (const auto& [tok, id] : j.items()) {
    const auto i = id.get<std::int64_t>();
    if (i < 0 || static_cast<std::size_t>(i) >= tokens.size() || seen[static_cast<std::size_t>(i)]) {
      throw std::invalid_argument("vocab: ids must form a bijection onto [0, size)");
    }
    seen[static_cast<std::size_t>(i)] = true;
    tokens[static_cast<std::size_t>(i)] = tok;
  }
  return from_tokens(std::move(tokens));
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read vocab file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string Vocab::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < tokens_.size(); ++i) j[tokens_[i]] = i;
  return j.dump(1);
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocab file " + path.string());
  out << to_json() << '\n';
}

TokenId Vocab::id(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? id_of(Special::unk) : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("vocab: token id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSeq Vocab::encode(std::string_view text) const {
  TokenSeq out;
  for (const auto& tok : tokenize(text)) out.push_back(id(tok));
  return out;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) {
    if (!out.empty()) out.push_back(' ');
    out += token(id);
  }
  return out;
}

std::string serialize_acts(const std::vector<DialogueAct>& acts) {
  std::string out;
  for (const auto& a : acts) {
    if (!out.empty()) out.push_back(' ');
    append_escaped(out, a.domain);
    out.push_back('{');
    append_escaped(out, a.act);
    out.push_back('(');
    for (std::size_t i = 0; i < a.slots.size(); ++i) {
      if (i > 0) out += ", ";
      append_escaped(out, a.slots[i].first);
      out.push_back('=');
      append_escaped(out, a.slots[i].second);
    }
    out += ")}";
  }
  return out;
}

std::vector<DialogueAct> parse_acts(std::string_view text) { return ActParser(text).parse(); }

PromptTokens discrete_prompts(GenerationMode mode) {
  return {prompt_token(mode.ccto), prompt_token(mode.ttnt)};
}

PromptTokens reserved_prompts() { return {id_of(Special::pad), id_of(Special::pad)}; }

TokenSeq render_lm_context(const std::vector<DialogueTurn>& context, const Vocab& vocab,
                           std::optional<PromptTokens> prompts, std::size_t budget) {
  TokenSeq body;
  for (const auto& t : context) {
    body.push_back(id_of(t.speaker == Speaker::user ? Special::user : Special::system));
    append(body, vocab.encode(spoken_text(t)));
    if (!t.acts.empty()) append(body, vocab.encode(serialize_acts(t.acts)));
  }
  const std::size_t fixed = (prompts ? 2 : 0) + 1;
  if (fixed > budget) {
    throw std::length_error("decoder input does not fit: " + std::to_string(fixed) +
                            " fixed tokens, budget " + std::to_string(budget));
  }
  if (fixed + body.size() > budget) {
    body.erase(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(fixed + body.size() - budget));
  }
  TokenSeq out;
  out.reserve(fixed + body.size());
  if (prompts) {
    out.push_back(prompts->ccto);
    out.push_back(prompts->ttnt);
  }
  append(out, body);
  out.push_back(id_of(Special::system));
  return out;
}

TokenSeq render_lm_target(const DialogueTurn& turn, TurnKind ttnt, const Vocab& vocab) {
  TokenSeq out = vocab.encode(turn.text);
  if (ttnt == TurnKind::transition) {
    if (!turn.transition_sentence) {
      throw std::invalid_argument("transition target requested for a turn without transition sentence");
    }
    out.push_back(id_of(Special::transition));
    append(out, vocab.encode(*turn.transition_sentence));
  }
  out.push_back(id_of(Special::end));
  return out;
}

RenderedLm render_lm_input(const LmExample& ex, const Vocab& vocab, bool discrete_prompts_on,
                           std::size_t max_len) {
  RenderedLm r;
  r.target = render_lm_target(ex.target_turn, ex.generation_mode.ttnt, vocab);
  if (r.target.size() >= max_len) {
    throw std::length_error("target of " + ex.dialogue_id + " turn " + std::to_string(ex.turn_index) +
                            " exceeds max length");
  }
  std::optional<PromptTokens> prompts;
  if (discrete_prompts_on) prompts = discrete_prompts(ex.generation_mode);
  r.input = render_lm_context(ex.context_turns, vocab, prompts, max_len - r.target.size());
  return r;
}

TokenSeq render_classifier_input(const std::vector<DialogueTurn>& history, const Vocab& vocab,
                                 std::size_t max_len) {
  if (history.empty()) throw std::invalid_argument("render_classifier_input: empty history");
  if (max_len < 1) throw std::invalid_argument("render_classifier_input: max_len must be >= 1");
  TokenSeq body;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i > 0) body.push_back(id_of(Special::sep));
    append(body, vocab.encode(spoken_text(history[i])));
  }
  if (body.size() + 1 > max_len) {
    body.erase(body.begin(), body.begin() + static_cast<std::ptrdiff_t>(body.size() + 1 - max_len));
  }
  TokenSeq out;
  out.reserve(body.size() + 1);
  out.push_back(id_of(Special::cls));
  append(out, body);
  return out;
}

}  // namespace modeswitch
