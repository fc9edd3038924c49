#include <doctest.h>

#include <random>

#include "modeswitch/unified_lm.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace modeswitch;

TEST_CASE("worked filtering examples") {
  const std::vector<double> d = {0.5, 0.3, 0.15, 0.05};
  const auto a = filter_logits(d, 2, 0.9);
  CHECK(a[0] == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(a[1] == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(a[2] == 0.0);
  CHECK(a[3] == 0.0);
  const auto b = filter_logits(d, 10, 0.5);
  CHECK(b == std::vector<double>{1.0, 0.0, 0.0, 0.0});
}

TEST_CASE("k = 1 is a point mass on the argmax, ties to the lower index") {
  const std::vector<double> d = {0.1, 0.4, 0.4, 0.1};
  CHECK(filter_logits(d, 1, 0.99) == std::vector<double>{0.0, 1.0, 0.0, 0.0});
  CHECK(filter_logits(d, 3, 1.0)[3] == 0.0);
}

TEST_CASE("filter matches a rank-based oracle on random distributions") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> kd(1, 25);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<double> d(20);
    double z = 0.0;
    for (auto& x : d) z += x = (trial % 3 == 0) ? std::floor(u(rng) * 4) + 1 : u(rng);  // every third draw has ties
    for (auto& x : d) x /= z;
    const int k = kd(rng);
    const double p = std::max(1e-3, u(rng));
    const auto got = filter_logits(d, k, p);
    const auto want = oracle::filter_by_rank(d, k, p);
    for (std::size_t i = 0; i < d.size(); ++i) {
      CHECK((got[i] > 0.0) == (want[i] > 0.0));
      CHECK(std::abs(got[i] - want[i]) < 1e-9);
    }
  }
}

TEST_CASE("invalid filter arguments") {
  const std::vector<double> d = {0.5, 0.5};
  CHECK_THROWS(filter_logits(d, 0, 0.5));
  CHECK_THROWS(filter_logits(d, 1, 0.0));
  CHECK_THROWS(filter_logits(d, 1, 1.5));
}

TEST_CASE("sampling determinism and boundaries") {
  const Decoder d(testing::toy_config(40), 1);
  const TokenSeq ctx = {id_of(Special::user), 12, 13, id_of(Special::system)};
  DecodeParams p{.top_k = 20, .top_p = 1.0, .max_new_tokens = 12, .seed = 5};
  const auto a = sample_response(d, ctx, p);
  CHECK(a.tokens == sample_response(d, ctx, p).tokens);
  int differing = 0;
  for (std::uint64_t s = 6; s < 16; ++s) {
    p.seed = s;
    differing += sample_response(d, ctx, p).tokens != a.tokens;
  }
  CHECK(differing > 0);
  p.max_new_tokens = 0;
  CHECK(sample_response(d, ctx, p).tokens.empty());
  p.max_new_tokens = 3;
  const auto t = sample_response(d, ctx, p);
  CHECK(t.tokens.size() <= 3);
}

TEST_CASE("greedy decoding reproduces a memorized target") {
  // one example, trained until memorized
  Dialogue dlg;
  dlg.id = "m";
  dlg.split = Split::train;
  dlg.turns = {testing::user("where is the station ?"), testing::sys("it is on the main road by the bridge .")};
  Dialogue valid = dlg;
  valid.id = "v";
  valid.split = Split::valid;
  const Vocab v = Vocab::build({dlg}, 1);
  TrainConfig tc;
  tc.lr = 1e-2;
  tc.batch_size = 1;
  tc.max_epochs = 60;
  tc.patience = 60;
  tc.seed = 1;
  auto [model, out] = train_unified({dlg, valid}, v, testing::toy_config(static_cast<std::int64_t>(v.size())), tc);
  CHECK(out.train_tally.accuracy() == 100.0);

  LmExample ex;
  ex.context_turns = {dlg.turns[0]};
  ex.target_turn = dlg.turns[1];
  const auto r = render_lm_input(ex, v, false, 64);
  nn::Tape t;
  const std::vector<RenderedLm> batch = {r};
  CHECK(lm_loss(t, model.decoder, batch, nullptr, {}).scalar() < 0.05);

  const auto s = sample_response(model.decoder, r.input, {.top_k = 1, .top_p = 1.0, .max_new_tokens = 30, .seed = 9});
  TokenSeq expect(r.target.begin(), r.target.end() - 1);
  CHECK(s.tokens == expect);
  CHECK_FALSE(s.truncated);
}
