#include <doctest.h>

#include <fstream>
#include <sstream>

#include "modeswitch/corpus.hpp"
#include "support.hpp"

using namespace modeswitch;
using testing::sys;
using testing::user;

namespace {

Dialogue police_appended() {
  Dialogue d;
  d.id = "police-1";
  d.kind = DialogueKind::appended;
  d.domains = {"police"};
  DialogueTurn u1 = user("i need the police station post code .", Mode::taskoriented);
  u1.acts = {{"police", "request", {{"post", "?"}}}};
  DialogueTurn s1 = sys("hello , i can provide the post code . it is cb11jg .", Mode::taskoriented);
  s1.acts = {{"police", "inform", {{"post", "CB11JG"}}}};
  s1.is_transition_turn = true;
  s1.transition_sentence = "what happened to you ?";
  d.turns = {u1, s1, user("someone stole my bike yesterday ."), sys("oh no , that is awful .")};
  return d;
}

}  // namespace

TEST_CASE("corpus file round trip") {
  testing::TempDir dir("corpus");
  const auto d = police_appended();
  save_corpus(dir / "c.jsonl", {d});
  const auto back = load_corpus(dir / "c.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0] == d);
  CHECK(back[0].kind == DialogueKind::appended);
  int transitions = 0;
  for (const auto& t : back[0].turns) transitions += t.is_transition_turn;
  CHECK(transitions == 1);
  CHECK(*back[0].turns[1].transition_sentence == "what happened to you ?");
}

TEST_CASE("two mode switches are rejected with the dialogue id") {
  auto d = police_appended();
  d.id = "twice";
  d.turns.push_back(user("book me a taxi .", Mode::taskoriented));
  d.turns.push_back(sys("which time ?", Mode::taskoriented));
  try {
    check_dialogue(d);
    FAIL("expected CorpusError");
  } catch (const CorpusError& e) {
    CHECK(std::string(e.what()).find("twice") != std::string::npos);
  }
  testing::TempDir dir("corpus-bad");
  {
    std::ofstream f(dir / "bad.jsonl");
    f << dialogue_to_line(d) << "\n";
  }
  CHECK_THROWS_AS(load_corpus(dir / "bad.jsonl"), CorpusError);
}

TEST_CASE("unknown fields and alternation are enforced") {
  auto line = dialogue_to_line(police_appended());
  line.insert(1, "\"bogus\":1,");
  CHECK_THROWS_AS(parse_dialogue_line(line), CorpusError);
  auto d = police_appended();
  std::swap(d.turns[2], d.turns[3]);
  CHECK_THROWS_AS(check_dialogue(d), CorpusError);
}

TEST_CASE("augmentation validator") {
  SUBCASE("blocklisted transition sentence") {
    auto d = police_appended();
    d.turns[1].transition_sentence = "Is there anything else I can do for you?";
    const auto v = validate_augmentation(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == ViolationKind::generic_transition);
  }
  SUBCASE("plain dialogue") {
    Dialogue d;
    d.id = "p";
    d.kind = DialogueKind::plain;
    d.turns = {user("hi"), sys("hello")};
    CHECK(validate_augmentation(d).empty());
  }
  SUBCASE("slot overlap removed from a passing prepended dialogue") {
    const auto ds = gen_synthetic_corpus(1, 40);
    const auto it = std::find_if(ds.begin(), ds.end(), [](const Dialogue& d) { return d.kind == DialogueKind::prepended; });
    REQUIRE(it != ds.end());
    Dialogue d = *it;
    REQUIRE(validate_augmentation(d).empty());
    // first task-oriented turn and its slot values
    std::vector<std::string> values;
    for (const auto& t : d.turns) {
      if (t.mode == Mode::taskoriented) {
        for (const auto& a : t.acts) {
          for (const auto& [k, v] : a.slots) values.push_back(v);
        }
        break;
      }
    }
    REQUIRE(!values.empty());
    for (auto& t : d.turns) {
      if (t.mode != Mode::chitchat) continue;
      t.text = "lovely weather today .";
      if (t.transition_sentence) t.transition_sentence = "would you like some help with a booking ?";
    }
    const auto v = validate_augmentation(d);
    REQUIRE(v.size() == 1);
    CHECK(v[0].kind == ViolationKind::missing_slot_overlap);
  }
}

TEST_CASE("corpus statistics") {
  CHECK(corpus_stats({}).total == 0);
  CHECK(corpus_stats({}).per_domain.empty());
  Dialogue a, b;
  a.id = "a";
  a.domains = {"hotel"};
  a.turns = {user("x"), sys("y")};
  b = a;
  b.id = "b";
  b.domains = {"hotel", "train"};
  const auto s = corpus_stats({a, b});
  CHECK(s.total == 2);
  CHECK(s.per_domain.at("hotel") == 2);
  CHECK(s.per_domain.at("train") == 1);
}

TEST_CASE("lm examples") {
  Dialogue plain;
  plain.id = "p";
  plain.turns = {user("a"), sys("b"), user("c"), sys("d")};
  CHECK(make_lm_examples({plain}, ExampleStage::unified).examples.size() == 2);
  for (const auto& e : make_lm_examples({plain}, ExampleStage::unified).examples) {
    CHECK(e.context_turns.size() == 1);
    CHECK(e.context_turns[0].speaker == Speaker::user);
  }

  const auto prompted = make_lm_examples({police_appended()}, ExampleStage::prompted).examples;
  REQUIRE(prompted.size() == 2);
  CHECK(prompted[0].generation_mode.ttnt != prompted[1].generation_mode.ttnt);
  CHECK(make_lm_examples({plain}, ExampleStage::prompted).no_transition_turns);

  Dialogue longer;
  longer.id = "l";
  longer.kind = DialogueKind::appended;
  longer.turns = {user("a", Mode::taskoriented), sys("b", Mode::taskoriented), user("c", Mode::taskoriented),
                  sys("d", Mode::taskoriented), user("e"), sys("f")};
  longer.turns[3].is_transition_turn = true;
  longer.turns[3].transition_sentence = "how are you ?";
  longer.turns[5].text = "g";
  longer.turns.insert(longer.turns.begin() + 4, {user("e2", Mode::taskoriented), sys("f2", Mode::taskoriented)});
  // transition now at index 3 with 3 preceding turns; move it later to get a 5-turn history
  longer.turns[3].is_transition_turn = false;
  longer.turns[3].transition_sentence.reset();
  longer.turns[5].is_transition_turn = true;
  longer.turns[5].transition_sentence = "how are you ?";
  check_dialogue(longer);
  const auto w = make_lm_examples({longer}, ExampleStage::prompted).examples;
  REQUIRE(w.size() == 2);
  CHECK(w[0].context_turns.size() == kPromptedWindow);
}

TEST_CASE("classifier labels") {
  Dialogue d;
  d.id = "c";
  d.kind = DialogueKind::prepended;
  d.turns = {user("hi"), sys("hello"), user("i am bored"), sys("fun"), user("find a hotel", Mode::taskoriented),
             sys("which area ?", Mode::taskoriented)};
  d.turns[3].is_transition_turn = true;
  d.turns[3].transition_sentence = "shall i find you a hotel ?";
  d.turns[4].acts = {{"hotel", "inform", {}}};
  d.turns[5].acts = {{"hotel", "request", {{"area", "?"}}}};
  const auto ex = make_classifier_examples({d});
  REQUIRE(ex.size() == 3);
  CHECK(ex[0].ttnt == TurnKind::normal);
  CHECK(ex[1].ttnt == TurnKind::transition);
  CHECK(ex[2].ttnt == TurnKind::normal);
  CHECK(ex[0].ccto == Mode::chitchat);
  CHECK(ex[2].ccto == Mode::taskoriented);
}

TEST_CASE("synthetic corpus") {
  CHECK(gen_synthetic_corpus(1, 1) == gen_synthetic_corpus(1, 1));
  CHECK(gen_synthetic_corpus(1, 5) != gen_synthetic_corpus(2, 5));
  const auto ds = gen_synthetic_corpus(1, 100);
  std::size_t violations = 0;
  for (const auto& d : ds) {
    check_dialogue(d);
    violations += validate_augmentation(d).size();
  }
  CHECK(violations == 0);

  const auto ex = make_classifier_examples(filter_split(gen_synthetic_corpus(1, 32), Split::train));
  const auto transitions = std::count_if(ex.begin(), ex.end(), [](const auto& e) { return e.ttnt == TurnKind::transition; });
  CHECK(transitions > 0);
  CHECK(transitions * 3 < static_cast<std::ptrdiff_t>(ex.size()));
}

TEST_CASE("spoken text appends the transition sentence") {
  auto t = sys("sure .");
  CHECK(spoken_text(t) == "sure .");
  t.is_transition_turn = true;
  t.transition_sentence = "how was your day ?";
  CHECK(spoken_text(t) == "sure . how was your day ?");
}
