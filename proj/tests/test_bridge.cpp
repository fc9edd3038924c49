#include <doctest.h>

#include <random>

#include "modeswitch/digest.hpp"
#include "modeswitch/nn/grad_check.hpp"
#include "modeswitch/prompt_bridge.hpp"
#include "support.hpp"

using namespace modeswitch;
using nn::Matrix;

namespace {

struct Toy {
  std::vector<Dialogue> corpus = gen_synthetic_corpus(1, 32);
  Vocab vocab = Vocab::build(corpus, 1);
  ClassifierModel cls{vocab, ModeClassifier(testing::toy_config(static_cast<std::int64_t>(vocab.size()), 16, 1, 256), 1), 1,
                      Json::object()};
  LmModel lm{"discrete", vocab, Decoder(testing::toy_config(static_cast<std::int64_t>(vocab.size()), 16, 1, 128), 2), 2,
             Json::object()};
};

std::vector<BridgeExample> few(const Toy& toy, std::size_t n) {
  auto ex = make_bridge_examples(filter_split(toy.corpus, Split::train), toy.vocab, toy.cls.max_input(),
                                 static_cast<std::size_t>(toy.lm.decoder.config().max_len));
  ex.resize(std::min(n, ex.size()));
  return ex;
}

}  // namespace

TEST_CASE("splitting at the transition marker") {
  const auto ds = std::vector<Dialogue>{
      {"d", DialogueKind::plain, Split::train, {}, {testing::user("x"), testing::sys("i see. if you want, i could help you book a train ticket.")}}};
  const Vocab v = Vocab::build(ds, 1);
  TokenSeq raw = v.encode("i see.");
  raw.push_back(id_of(Special::transition));
  const auto tail = v.encode("if you want, i could help you book a train ticket.");
  raw.insert(raw.end(), tail.begin(), tail.end());
  const auto s = split_transition(raw, v);
  CHECK(s.normal_part == "i see .");
  REQUIRE(s.transition_part);
  CHECK(*s.transition_part == "if you want , i could help you book a train ticket .");
  CHECK_FALSE(s.degenerate);

  const auto none = split_transition(v.encode("i see."), v);
  CHECK(none.normal_part == "i see .");
  CHECK_FALSE(none.transition_part);

  TokenSeq first = {id_of(Special::transition)};
  first.insert(first.end(), tail.begin(), tail.end());
  const auto deg = split_transition(first, v);
  CHECK(deg.normal_part.empty());
  CHECK(deg.degenerate);
  CHECK(deg.transition_part);
}

TEST_CASE("bridge shapes and left-to-right dependence") {
  const Bridge b(16, 3);
  auto run = [&](const Matrix& pc, const Matrix& pt) {
    nn::Tape t;
    return Matrix(b.forward(t, t.constant(pc), t.constant(pt), {}).value());
  };
  const Matrix pc = Matrix::Random(1, 16), pt = Matrix::Random(1, 16);
  const Matrix base = run(pc, pt);
  CHECK(base.rows() == 2);
  CHECK(base.cols() == 16);
  const Matrix t_changed = run(pc, Matrix::Random(1, 16));
  CHECK(t_changed.row(0) == base.row(0));
  CHECK(t_changed.row(1) != base.row(1));
  const Matrix c_changed = run(Matrix::Random(1, 16), pt);
  CHECK(c_changed.row(0) != base.row(0));
  CHECK(c_changed.row(1) != base.row(1));
}

TEST_CASE("bridge loss refuses trainable backbones and decomposes") {
  Toy toy;
  const Bridge b(16, 4);
  const auto batch = few(toy, 3);
  nn::Tape t;
  CHECK_THROWS_AS(bridge_loss(t, b, toy.cls.net, toy.lm.decoder, batch, {}), FrozenBackboneError);
  toy.cls.net.params().set_trainable(false);
  toy.lm.decoder.params().set_trainable(false);
  nn::Tape t2;
  const BridgeLoss l = bridge_loss(t2, b, toy.cls.net, toy.lm.decoder, batch, {});
  CHECK(l.total.scalar() == doctest::Approx(l.response.scalar() + l.ccto.scalar() + l.ttnt.scalar()).epsilon(1e-14));
  CHECK(l.prompt_logits.rows() == 2 * static_cast<nn::Index>(batch.size()));
}

TEST_CASE("bridge gradient is nonzero and passes the gradient check") {
  Toy toy;
  toy.cls.net.params().set_trainable(false);
  toy.lm.decoder.params().set_trainable(false);
  Bridge b(16, 5);
  const auto batch = few(toy, 2);
  b.params().zero_grad();
  nn::Tape t;
  t.backward(bridge_loss(t, b, toy.cls.net, toy.lm.decoder, batch, {}).total);
  double total = 0.0;
  for (const nn::Param* p : std::as_const(b.params()).params()) total += p->grad.cwiseAbs().sum();
  CHECK(total > 0.0);
  for (const nn::Param* p : std::as_const(toy.lm.decoder.params()).params()) CHECK(p->grad.isZero());

  // init-scale weights leave ReLU inputs within a finite-difference step of the kink
  nn::Rng rng(7);
  std::normal_distribution<double> wide(0.0, 0.5);
  for (nn::Param* p : b.params().params()) {
    for (nn::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = wide(rng);
  }
  const auto r = nn::grad_check(b.params(), [&](nn::Tape& tt) {
    return bridge_loss(tt, b, toy.cls.net, toy.lm.decoder, batch, {}).total;
  }, 1e-4, 6, 3);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("training the bridge leaves the backbones untouched") {
  Toy toy;
  const std::string cls_before = toy.cls.net.params().digest();
  const std::string lm_before = toy.lm.decoder.params().digest();
  TrainConfig cfg;
  cfg.lr = 1e-3;
  cfg.max_steps = 1;
  cfg.seed = 1;
  auto [bridge, out] = train_bridge(toy.cls, toy.lm, toy.corpus, cfg);
  CHECK(out.fit.steps == 1);
  CHECK(toy.cls.net.params().digest() == cls_before);
  CHECK(toy.lm.decoder.params().digest() == lm_before);
  CHECK(bridge.net.params().digest() != Bridge(16, mix_seed(1, "init")).params().digest());
  CHECK_NOTHROW(bridge.verify(toy.cls, toy.lm));

  testing::TempDir dir("bridge");
  bridge.save(dir / "b.ckpt");
  const auto back = BridgeModel::load(dir / "b.ckpt");
  CHECK(back.net.params().digest() == bridge.net.params().digest());
  CHECK_NOTHROW(back.verify(toy.cls, toy.lm));

  // a different decoder is refused
  LmModel other{"discrete", toy.vocab, Decoder(toy.lm.decoder.config(), 99), 99, Json::object()};
  CHECK_THROWS_AS(back.verify(toy.cls, other), CheckpointError);

  // same seed, same bridge
  Toy toy2;
  auto [bridge2, out2] = train_bridge(toy2.cls, toy2.lm, toy2.corpus, cfg);
  CHECK(bridge2.to_checkpoint().serialize() == bridge.to_checkpoint().serialize());
}

TEST_CASE("train_bridge rejects mismatched backbones") {
  Toy toy;
  toy.lm.kind = "unified";
  TrainConfig cfg;
  cfg.max_steps = 1;
  CHECK_THROWS_AS(train_bridge(toy.cls, toy.lm, toy.corpus, cfg), std::invalid_argument);
}
