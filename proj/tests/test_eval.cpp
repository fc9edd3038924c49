#include <doctest.h>

#include "modeswitch/eval.hpp"
#include "support.hpp"

using namespace modeswitch;

namespace {

double bleu(const std::string& h, std::vector<std::string> refs) { return bleu4(h, refs); }

}  // namespace

TEST_CASE("distinct-n") {
  const std::vector<std::string> aba = {"a b a"};
  CHECK(distinct_n(aba, 1) == doctest::Approx(200.0 / 3.0));
  CHECK(std::round(distinct_n(aba, 1) * 100) / 100 == 66.67);
  const std::vector<std::string> one = {"hello"};
  CHECK(distinct_n(one, 1) == 100.0);
  const std::vector<std::string> twice = {"a b", "a b"};
  CHECK(distinct_n(twice, 1) == doctest::Approx(50.0));
  const std::vector<std::string> ab = {"a b"};
  CHECK(distinct_n(ab, 1) == doctest::Approx(2.0 * distinct_n(twice, 1)));
  CHECK(distinct_n(ab, 2) == 100.0);
  CHECK_THROWS_AS(distinct_n(one, 2), std::invalid_argument);

  const std::vector<std::string> x = {"the cat sat", "a dog ran", "the cat ran"};
  const std::vector<std::string> y = {"a dog ran", "the cat ran", "the cat sat"};
  CHECK(distinct_n(x, 2) == distinct_n(y, 2));
  const double d = distinct_n(x, 1);
  CHECK(d > 0.0);
  CHECK(d <= 100.0);
}

// Reference values computed separately with an independent implementation
// (clipped n-gram counts, closest reference length, 1e-9 for empty orders).
TEST_CASE("bleu-4 against frozen oracle values") {
  CHECK(bleu("the cat sat on the mat near the red door", {"a cat sat on the mat near the red gate"}) ==
        doctest::Approx(75.9835685652).epsilon(1e-10));
  CHECK(bleu("the cat sat on the mat near the red door", {"the cat is sitting on the mat by the door"}) ==
        doctest::Approx(0.1428720215).epsilon(1e-9));
  CHECK(bleu("the cat sat on the mat", {"the cat sat on the mat near the red door"}) ==
        doctest::Approx(51.3417119033).epsilon(1e-10));
  CHECK(bleu("the cat sat on the mat near the red door", {"the cat sat on the mat"}) ==
        doctest::Approx(51.6973153957).epsilon(1e-10));
  CHECK(bleu("the the the cat sat on the mat", {"the cat sat on the mat", "a cat was on the mat today"}) ==
        doctest::Approx(68.0374933317).epsilon(1e-10));
}

TEST_CASE("bleu-4 edge cases") {
  CHECK(bleu("i would like a table for two", {"i would like a table for two"}) == doctest::Approx(100.0));
  CHECK(bleu("a b c d", {"e f g h"}) < 0.01);
  // hypothesis and reference roles are not interchangeable
  const std::string h = "the cat sat on the mat", r = "the cat sat on the mat near the red door";
  CHECK(bleu(h, {r}) != doctest::Approx(bleu(r, {h})));
  CHECK_THROWS_AS(bleu("", {"x"}), std::invalid_argument);
  CHECK_THROWS_AS(bleu("x", {}), std::invalid_argument);
}

TEST_CASE("corpus statistics accumulate") {
  const std::vector<std::string> h1 = tokenize("the cat sat on the mat"), r1 = tokenize("the cat sat on the mat");
  const std::vector<std::vector<std::string>> refs1 = {r1};
  BleuStats s = bleu_stats(h1, refs1);
  s += s;
  CHECK(s.score() == doctest::Approx(100.0));
  CHECK(s.hyp_len == 12);
}

TEST_CASE("transition accuracy") {
  const TokenId m = id_of(Special::transition);
  const std::vector<TokenSeq> all = {{12, m, 13}, {m}};
  CHECK(transition_accuracy(all) == 100.0);
  const std::vector<TokenSeq> half = {{12, m, 13}, {12, 13}};
  CHECK(transition_accuracy(half) == 50.0);
  CHECK_THROWS(transition_accuracy(std::vector<TokenSeq>{}));
}

TEST_CASE("eval report absent fields carry reasons") {
  EvalReport r;
  r.model = "discrete";
  r.split = "test";
  r.set("bleu4", 12.5);
  r.set("distinct1", std::nullopt, "no chit-chat turns");
  const Json j = r.to_json();
  CHECK(j["metrics"]["bleu4"] == 12.5);
  CHECK(j["metrics"]["distinct1"].is_null());
  CHECK(j["null_reasons"]["distinct1"] == "no chit-chat turns");
}

TEST_CASE("suite on a split without chit-chat omits distinct") {
  Dialogue d;
  d.id = "to";
  d.split = Split::test;
  d.turns = {testing::user("book a taxi .", Mode::taskoriented), testing::sys("what time ?", Mode::taskoriented)};
  d.turns[0].acts = {{"taxi", "inform", {}}};
  d.turns[1].acts = {{"taxi", "request", {{"leave", "?"}}}};
  const Vocab v = Vocab::build({d}, 1);
  const LmModel lm{"unified", v, Decoder(testing::toy_config(static_cast<std::int64_t>(v.size())), 1), 1, Json::object()};
  const SuiteModels m{"unified", &lm, nullptr, nullptr};
  const EvalReport a = evaluate_suite(m, {d}, Split::test, 3);
  const Json j = a.to_json();
  CHECK(j["metrics"]["distinct1"].is_null());
  CHECK(j["null_reasons"].contains("distinct1"));
  CHECK(j["metrics"]["bleu4"].is_number());
  CHECK(evaluate_suite(m, {d}, Split::test, 3).to_json().dump() == j.dump());
  CHECK_THROWS_AS(evaluate_suite(m, {d}, Split::valid, 3), std::invalid_argument);
}
