#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modeswitch {

enum class Speaker { user, system };
enum class Mode { chitchat, taskoriented };
enum class TurnKind { transition, normal };
enum class DialogueKind { prepended, appended, plain };
enum class Split { train, test, valid };

std::string to_string(Speaker s);
std::string to_string(Mode m);
std::string to_string(TurnKind t);
std::string to_string(DialogueKind k);
std::string to_string(Split s);

Speaker parse_speaker(const std::string& s);
Mode parse_mode(const std::string& s);
TurnKind parse_turn_kind(const std::string& s);
DialogueKind parse_dialogue_kind(const std::string& s);
Split parse_split(const std::string& s);

/// The (CCTO, TTNT) control pair. Exactly four values exist.
struct GenerationMode {
  Mode ccto = Mode::chitchat;
  TurnKind ttnt = TurnKind::normal;

  friend bool operator==(const GenerationMode&, const GenerationMode&) = default;
};

/// All four control combinations, CCTO-major.
std::vector<GenerationMode> all_generation_modes();

struct DialogueAct {
  std::string domain;
  std::string act;
  std::vector<std::pair<std::string, std::string>> slots;

  friend bool operator==(const DialogueAct&, const DialogueAct&) = default;
};

struct DialogueTurn {
  Speaker speaker = Speaker::user;
  std::string text;
  Mode mode = Mode::chitchat;
  std::vector<DialogueAct> acts;
  bool is_transition_turn = false;
  std::optional<std::string> transition_sentence;

  friend bool operator==(const DialogueTurn&, const DialogueTurn&) = default;
};

struct Dialogue {
  std::string id;
  DialogueKind kind = DialogueKind::plain;
  Split split = Split::train;
  std::set<std::string> domains;
  std::vector<DialogueTurn> turns;

  friend bool operator==(const Dialogue&, const Dialogue&) = default;
};

/// Raised when a corpus file or an in-memory dialogue breaks the data model.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(std::string dialogue_id, std::string field, const std::string& what);

  const std::string& dialogue_id() const { return dialogue_id_; }
  const std::string& field() const { return field_; }

 private:
  std::string dialogue_id_;
  std::string field_;
};

/// Throws CorpusError naming the dialogue and field when an invariant fails.
void check_dialogue(const Dialogue& d);

std::vector<Dialogue> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& ds);

/// Parses one corpus line. Unknown fields are rejected.
Dialogue parse_dialogue_line(const std::string& line);
std::string dialogue_to_line(const Dialogue& d);

// ---------------------------------------------------------------------------
// Augmentation checks

enum class ViolationKind {
  transition_count,     // wrong number of transition turns for the dialogue kind
  transition_position,  // transition turn is not the last system turn of the leading mode
  empty_transition,
  generic_transition,   // matched the blocklist
  missing_slot_overlap, // prepended chit-chat never mentions a first task slot value
};

std::string to_string(ViolationKind k);

struct Violation {
  std::string dialogue_id;
  ViolationKind kind;
  std::string detail;
};

struct ValidationOptions {
  std::vector<std::string> blocklist = {"anything else", "what else can i do",
                                        "do you need some recommendations"};
};

std::vector<Violation> validate_augmentation(const Dialogue& d,
                                             const ValidationOptions& opts = {});

// ---------------------------------------------------------------------------
// Statistics

struct CorpusStats {
  std::size_t total = 0;
  std::map<Split, std::size_t> per_split;
  std::map<DialogueKind, std::size_t> per_kind;
  std::map<std::string, std::size_t> per_domain;
  std::size_t task_samples = 0;        // N: task-oriented system turns in train
  std::size_t chitchat_samples = 0;    // M: chit-chat system turns in train
  std::size_t classifier_samples = 0;  // L: classifier examples in train
};

CorpusStats corpus_stats(const std::vector<Dialogue>& ds);

// ---------------------------------------------------------------------------
// Training examples

/// unified: one example per system turn, one user utterance of context.
/// prompted: two examples per transition turn, up to three turns of context.
/// all_turns: one example per system turn with its gold mode, up to three turns.
enum class ExampleStage { unified, prompted, all_turns };

inline constexpr std::size_t kPromptedWindow = 3;

struct LmExample {
  std::string dialogue_id;
  std::size_t turn_index = 0;  // index of target_turn within the dialogue
  std::vector<DialogueTurn> context_turns;
  DialogueTurn target_turn;
  GenerationMode generation_mode;
  ExampleStage stage = ExampleStage::unified;
};

struct LmExampleSet {
  std::vector<LmExample> examples;
  /// Set when stage=prompted found no transition turn at all.
  bool no_transition_turns = false;
};

LmExampleSet make_lm_examples(const std::vector<Dialogue>& ds, ExampleStage stage);

struct ClassifierExample {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  std::vector<DialogueTurn> history;
  Mode ccto = Mode::chitchat;
  TurnKind ttnt = TurnKind::normal;
};

std::vector<ClassifierExample> make_classifier_examples(const std::vector<Dialogue>& ds);

std::vector<Dialogue> filter_split(const std::vector<Dialogue>& ds, Split split);

/// Spoken text of a turn: the response followed by its transition sentence, if any.
std::string spoken_text(const DialogueTurn& t);

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Templated stand-in for an augmented dialogue corpus. Deterministic in seed.
std::vector<Dialogue> gen_synthetic_corpus(std::uint64_t seed, std::size_t n);

}  // namespace modeswitch
