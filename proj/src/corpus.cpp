#include "modeswitch/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace modeswitch {

using nlohmann::json;

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& s, const std::pair<const char*, Enum> (&table)[N],
                const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "'");
}

constexpr std::pair<const char*, Speaker> kSpeakers[] = {{"user", Speaker::user},
                                                         {"system", Speaker::system}};
constexpr std::pair<const char*, Mode> kModes[] = {{"chitchat", Mode::chitchat},
                                                   {"taskoriented", Mode::taskoriented}};
constexpr std::pair<const char*, TurnKind> kTurnKinds[] = {{"transition", TurnKind::transition},
                                                           {"normal", TurnKind::normal}};
constexpr std::pair<const char*, DialogueKind> kKinds[] = {{"prepended", DialogueKind::prepended},
                                                           {"appended", DialogueKind::appended},
                                                           {"plain", DialogueKind::plain}};
constexpr std::pair<const char*, Split> kSplits[] = {
    {"train", Split::train}, {"test", Split::test}, {"valid", Split::valid}};

template <typename Enum, std::size_t N>
std::string enum_name(Enum e, const std::pair<const char*, Enum> (&table)[N]) {
  for (const auto& [name, value] : table) {
    if (value == e) return name;
  }
  return "?";
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

// Lowercases, maps punctuation to spaces and pads with single spaces so that
// substring tests match whole words only.
std::string word_normalize(const std::string& s) {
  std::string out = " ";
  bool space = true;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '\'') {
      out.push_back(static_cast<char>(std::tolower(c)));
      space = false;
    } else if (!space) {
      out.push_back(' ');
      space = true;
    }
  }
  if (!space) out.push_back(' ');
  return out;
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& id,
                  const std::string& where) {
  if (!obj.is_object()) throw CorpusError(id, where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }) ==
        allowed.end()) {
      throw CorpusError(id, where + "." + key, "unknown field");
    }
  }
  for (const char* k : allowed) {
    if (!obj.contains(k)) throw CorpusError(id, where + "." + k, "missing field");
  }
}

template <typename T>
T get_as(const json& j, const std::string& id, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw CorpusError(id, field, std::string("wrong type: ") + e.what());
  }
}

template <typename Enum>
Enum get_enum(const json& j, const std::string& id, const std::string& field,
              Enum (*parse)(const std::string&)) {
  auto s = get_as<std::string>(j, id, field);
  try {
    return parse(s);
  } catch (const std::invalid_argument& e) {
    throw CorpusError(id, field, e.what());
  }
}

}  // namespace

std::string to_string(Speaker s) { return enum_name(s, kSpeakers); }
std::string to_string(Mode m) { return enum_name(m, kModes); }
std::string to_string(TurnKind t) { return enum_name(t, kTurnKinds); }
std::string to_string(DialogueKind k) { return enum_name(k, kKinds); }
std::string to_string(Split s) { return enum_name(s, kSplits); }

Speaker parse_speaker(const std::string& s) { return parse_enum(s, kSpeakers, "speaker"); }
Mode parse_mode(const std::string& s) { return parse_enum(s, kModes, "mode"); }
TurnKind parse_turn_kind(const std::string& s) { return parse_enum(s, kTurnKinds, "turn kind"); }
DialogueKind parse_dialogue_kind(const std::string& s) {
  return parse_enum(s, kKinds, "dialogue kind");
}
Split parse_split(const std::string& s) { return parse_enum(s, kSplits, "split"); }

std::vector<GenerationMode> all_generation_modes() {
  return {{Mode::chitchat, TurnKind::transition},
          {Mode::chitchat, TurnKind::normal},
          {Mode::taskoriented, TurnKind::transition},
          {Mode::taskoriented, TurnKind::normal}};
}

CorpusError::CorpusError(std::string dialogue_id, std::string field, const std::string& what)
    : std::runtime_error("dialogue '" + dialogue_id + "', field '" + field + "': " + what),
      dialogue_id_(std::move(dialogue_id)),
      field_(std::move(field)) {}

void check_dialogue(const Dialogue& d) {
  if (d.id.empty()) throw CorpusError(d.id, "id", "empty id");
  if (d.turns.empty()) throw CorpusError(d.id, "turns", "dialogue has no turns");

  int transitions = 0;
  int switches = 0;
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const auto& t = d.turns[i];
    const std::string where = "turns[" + std::to_string(i) + "]";
    const Speaker expected = i % 2 == 0 ? Speaker::user : Speaker::system;
    if (t.speaker != expected) {
      throw CorpusError(d.id, where + ".speaker", "turns must alternate user/system from user");
    }
    if (t.text.empty()) throw CorpusError(d.id, where + ".text", "empty utterance");
    if (t.mode == Mode::chitchat && !t.acts.empty()) {
      throw CorpusError(d.id, where + ".acts", "chit-chat turn carries dialogue acts");
    }
    for (std::size_t a = 0; a < t.acts.size(); ++a) {
      const auto& act = t.acts[a];
      const std::string aw = where + ".acts[" + std::to_string(a) + "]";
      if (act.domain.empty()) throw CorpusError(d.id, aw + ".domain", "empty domain");
      if (act.act.empty()) throw CorpusError(d.id, aw + ".act", "empty act");
      std::set<std::string> names;
      for (const auto& [name, _] : act.slots) {
        if (!names.insert(name).second) {
          throw CorpusError(d.id, aw + ".slots", "duplicate slot name '" + name + "'");
        }
      }
    }
    if (t.is_transition_turn && t.speaker != Speaker::system) {
      throw CorpusError(d.id, where + ".is_transition_turn", "only system turns can be transitions");
    }
    if (t.transition_sentence.has_value() != (t.is_transition_turn && t.speaker == Speaker::system)) {
      throw CorpusError(d.id, where + ".transition_sentence",
                        "transition_sentence must be present exactly on the transition turn");
    }
    if (t.is_transition_turn) ++transitions;
    if (i > 0 && t.mode != d.turns[i - 1].mode) ++switches;
  }
  if (switches > 1) throw CorpusError(d.id, "turns.mode", "dialogue mode switches more than once");
  if (transitions > 1) {
    throw CorpusError(d.id, "turns.is_transition_turn", "more than one transition turn");
  }
  const Mode first = d.turns.front().mode;
  switch (d.kind) {
    case DialogueKind::plain:
      if (switches != 0) throw CorpusError(d.id, "kind", "plain dialogue switches mode");
      break;
    case DialogueKind::prepended:
      if (switches != 1 || first != Mode::chitchat) {
        throw CorpusError(d.id, "kind", "prepended dialogue must go chit-chat -> task-oriented");
      }
      break;
    case DialogueKind::appended:
      if (switches != 1 || first != Mode::taskoriented) {
        throw CorpusError(d.id, "kind", "appended dialogue must go task-oriented -> chit-chat");
      }
      break;
  }
}

Dialogue parse_dialogue_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw CorpusError("", "", std::string("malformed JSON: ") + e.what());
  }
  std::string id;
  if (j.is_object() && j.contains("id") && j["id"].is_string()) id = j["id"].get<std::string>();
  require_keys(j, {"id", "kind", "split", "domains", "turns"}, id, "dialogue");

  Dialogue d;
  d.id = get_as<std::string>(j["id"], id, "id");
  d.kind = get_enum(j["kind"], id, "kind", parse_dialogue_kind);
  d.split = get_enum(j["split"], id, "split", parse_split);
  for (const auto& dom : get_as<std::vector<json>>(j["domains"], id, "domains")) {
    d.domains.insert(get_as<std::string>(dom, id, "domains"));
  }
  const auto turns = get_as<std::vector<json>>(j["turns"], id, "turns");
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const std::string where = "turns[" + std::to_string(i) + "]";
    const json& tj = turns[i];
    require_keys(tj, {"speaker", "text", "mode", "acts", "is_transition_turn", "transition_sentence"},
                 id, where);
    DialogueTurn t;
    t.speaker = get_enum(tj["speaker"], id, where + ".speaker", parse_speaker);
    t.text = get_as<std::string>(tj["text"], id, where + ".text");
    t.mode = get_enum(tj["mode"], id, where + ".mode", parse_mode);
    t.is_transition_turn = get_as<bool>(tj["is_transition_turn"], id, where + ".is_transition_turn");
    if (!tj["transition_sentence"].is_null()) {
      t.transition_sentence =
          get_as<std::string>(tj["transition_sentence"], id, where + ".transition_sentence");
    }
    const auto acts = get_as<std::vector<json>>(tj["acts"], id, where + ".acts");
    for (std::size_t a = 0; a < acts.size(); ++a) {
      const std::string aw = where + ".acts[" + std::to_string(a) + "]";
      require_keys(acts[a], {"domain", "act", "slots"}, id, aw);
      DialogueAct act;
      act.domain = get_as<std::string>(acts[a]["domain"], id, aw + ".domain");
      act.act = get_as<std::string>(acts[a]["act"], id, aw + ".act");
      for (const auto& slot : get_as<std::vector<json>>(acts[a]["slots"], id, aw + ".slots")) {
        auto pair = get_as<std::vector<std::string>>(slot, id, aw + ".slots");
        if (pair.size() != 2) throw CorpusError(id, aw + ".slots", "slot must be [name, value]");
        act.slots.emplace_back(pair[0], pair[1]);
      }
      t.acts.push_back(std::move(act));
    }
    d.turns.push_back(std::move(t));
  }
  check_dialogue(d);
  return d;
}

std::string dialogue_to_line(const Dialogue& d) {
  json turns = json::array();
  for (const auto& t : d.turns) {
    json acts = json::array();
    for (const auto& a : t.acts) {
      json slots = json::array();
      for (const auto& [n, v] : a.slots) slots.push_back(json::array({n, v}));
      acts.push_back(json{{"domain", a.domain}, {"act", a.act}, {"slots", slots}});
    }
    turns.push_back(json{{"speaker", to_string(t.speaker)},
                         {"text", t.text},
                         {"mode", to_string(t.mode)},
                         {"acts", acts},
                         {"is_transition_turn", t.is_transition_turn},
                         {"transition_sentence", t.transition_sentence
                                                     ? json(*t.transition_sentence)
                                                     : json(nullptr)}});
  }
  json j{{"id", d.id},
         {"kind", to_string(d.kind)},
         {"split", to_string(d.split)},
         {"domains", json(std::vector<std::string>(d.domains.begin(), d.domains.end()))},
         {"turns", turns}};
  return j.dump();
}

std::vector<Dialogue> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read corpus file " + path.string());
  std::vector<Dialogue> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Dialogue d;
    try {
      d = parse_dialogue_line(line);
    } catch (const CorpusError& e) {
      throw CorpusError(e.dialogue_id(), e.field(),
                        "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(d.id).second) throw CorpusError(d.id, "id", "duplicate dialogue id");
    out.push_back(std::move(d));
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Dialogue>& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file " + path.string());
  for (const auto& d : ds) out << dialogue_to_line(d) << '\n';
}

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::transition_count: return "transition_count";
    case ViolationKind::transition_position: return "transition_position";
    case ViolationKind::empty_transition: return "empty_transition";
    case ViolationKind::generic_transition: return "generic_transition";
    case ViolationKind::missing_slot_overlap: return "missing_slot_overlap";
  }
  return "?";
}

std::vector<Violation> validate_augmentation(const Dialogue& d, const ValidationOptions& opts) {
  std::vector<Violation> out;
  auto flag = [&](ViolationKind k, std::string detail) {
    out.push_back({d.id, k, std::move(detail)});
  };

  std::vector<std::size_t> transitions;
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    if (d.turns[i].is_transition_turn) transitions.push_back(i);
  }

  if (d.kind == DialogueKind::plain) {
    if (!transitions.empty()) {
      flag(ViolationKind::transition_count, "plain dialogue has a transition turn");
    }
  } else if (transitions.size() != 1) {
    flag(ViolationKind::transition_count,
         "expected exactly one transition turn, found " + std::to_string(transitions.size()));
  } else {
    const Mode leading = d.turns.front().mode;
    std::size_t last_leading_system = d.turns.size();
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      if (d.turns[i].speaker == Speaker::system && d.turns[i].mode == leading) {
        last_leading_system = i;
      }
    }
    if (transitions.front() != last_leading_system) {
      flag(ViolationKind::transition_position,
           "transition turn " + std::to_string(transitions.front()) +
               " is not the last system turn of the leading mode");
    }
  }

  for (std::size_t i : transitions) {
    const auto& sentence = d.turns[i].transition_sentence;
    if (!sentence || word_normalize(*sentence).find_first_not_of(' ') == std::string::npos) {
      flag(ViolationKind::empty_transition, "empty transition sentence");
      continue;
    }
    const std::string norm = word_normalize(*sentence);
    for (const auto& phrase : opts.blocklist) {
      if (norm.find(word_normalize(phrase)) != std::string::npos) {
        flag(ViolationKind::generic_transition, "generic phrase '" + phrase + "'");
      }
    }
  }

  if (d.kind == DialogueKind::prepended) {
    const DialogueTurn* first_task_user = nullptr;
    for (const auto& t : d.turns) {
      if (t.speaker == Speaker::user && t.mode == Mode::taskoriented) {
        first_task_user = &t;
        break;
      }
    }
    bool overlap = false;
    if (first_task_user != nullptr) {
      for (const auto& act : first_task_user->acts) {
        for (const auto& [_, value] : act.slots) {
          if (value.empty()) continue;
          const std::string v = lower(value);
          for (const auto& t : d.turns) {
            if (t.mode == Mode::chitchat && lower(spoken_text(t)).find(v) != std::string::npos) {
              overlap = true;
            }
          }
        }
      }
    }
    if (!overlap) {
      flag(ViolationKind::missing_slot_overlap,
           "no slot value of the first task-oriented user turn appears in the chit-chat");
    }
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<Dialogue>& ds) {
  CorpusStats s;
  s.total = ds.size();
  for (auto split : {Split::train, Split::test, Split::valid}) s.per_split[split] = 0;
  for (auto kind : {DialogueKind::prepended, DialogueKind::appended, DialogueKind::plain}) {
    s.per_kind[kind] = 0;
  }
  for (const auto& d : ds) {
    ++s.per_split[d.split];
    ++s.per_kind[d.kind];
    for (const auto& dom : d.domains) ++s.per_domain[dom];
    if (d.split != Split::train) continue;
    for (const auto& t : d.turns) {
      if (t.speaker != Speaker::system) continue;
      ++s.classifier_samples;
      if (t.mode == Mode::taskoriented) {
        ++s.task_samples;
      } else {
        ++s.chitchat_samples;
      }
    }
  }
  return s;
}

LmExampleSet make_lm_examples(const std::vector<Dialogue>& ds, ExampleStage stage) {
  LmExampleSet out;
  bool any_transition = false;
  for (const auto& d : ds) {
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& turn = d.turns[i];
      if (turn.speaker != Speaker::system) continue;
      auto window = [&](std::size_t n) {
        const std::size_t start = i >= n ? i - n : 0;
        return std::vector<DialogueTurn>(d.turns.begin() + static_cast<std::ptrdiff_t>(start),
                                         d.turns.begin() + static_cast<std::ptrdiff_t>(i));
      };
      LmExample ex;
      ex.dialogue_id = d.id;
      ex.turn_index = i;
      ex.target_turn = turn;
      ex.stage = stage;
      switch (stage) {
        case ExampleStage::unified:
          ex.context_turns = window(1);
          ex.generation_mode = {turn.mode, TurnKind::normal};
          out.examples.push_back(std::move(ex));
          break;
        case ExampleStage::prompted:
          if (!turn.is_transition_turn) break;
          any_transition = true;
          ex.context_turns = window(kPromptedWindow);
          ex.generation_mode = {turn.mode, TurnKind::transition};
          out.examples.push_back(ex);
          ex.generation_mode = {turn.mode, TurnKind::normal};
          out.examples.push_back(std::move(ex));
          break;
        case ExampleStage::all_turns:
          ex.context_turns = window(kPromptedWindow);
          ex.generation_mode = {turn.mode,
                                turn.is_transition_turn ? TurnKind::transition : TurnKind::normal};
          out.examples.push_back(std::move(ex));
          break;
      }
    }
  }
  out.no_transition_turns = stage == ExampleStage::prompted && !any_transition;
  return out;
}

std::vector<ClassifierExample> make_classifier_examples(const std::vector<Dialogue>& ds) {
  std::vector<ClassifierExample> out;
  for (const auto& d : ds) {
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const auto& turn = d.turns[i];
      if (turn.speaker != Speaker::system) continue;
      ClassifierExample ex;
      ex.dialogue_id = d.id;
      ex.turn_index = i;
      ex.history.assign(d.turns.begin(), d.turns.begin() + static_cast<std::ptrdiff_t>(i));
      ex.ccto = turn.mode;
      ex.ttnt = turn.is_transition_turn ? TurnKind::transition : TurnKind::normal;
      out.push_back(std::move(ex));
    }
  }
  return out;
}

std::vector<Dialogue> filter_split(const std::vector<Dialogue>& ds, Split split) {
  std::vector<Dialogue> out;
  std::copy_if(ds.begin(), ds.end(), std::back_inserter(out),
               [&](const Dialogue& d) { return d.split == split; });
  return out;
}

std::string spoken_text(const DialogueTurn& t) {
  if (t.transition_sentence && !t.transition_sentence->empty()) {
    return t.text + " " + *t.transition_sentence;
  }
  return t.text;
}

}  // namespace modeswitch
