#include <doctest.h>

#include <cmath>

#include "modeswitch/mode_classifier.hpp"
#include "modeswitch/nn/grad_check.hpp"
#include "support.hpp"

using namespace modeswitch;
using nn::Matrix;

namespace {

constexpr std::int64_t kV = 30;

std::vector<LabeledHistory> toy_batch() {
  return {{{id_of(Special::cls), 12, 13, id_of(Special::sep), 14}, 0, 1},
          {{id_of(Special::cls), 20, 21}, 1, 0},
          {{id_of(Special::cls), 15, 16, 17, 18}, 1, 1}};
}

double head_ce(const Matrix& logits, const std::vector<int>& gold) {
  double s = 0.0;
  for (nn::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    s += lse - logits(r, gold[static_cast<std::size_t>(r)]);
  }
  return s / static_cast<double>(logits.rows());
}

}  // namespace

TEST_CASE("pooled vectors have dimension E and differ between heads") {
  const ModeClassifier m(testing::toy_config(kV), 1);
  const auto o = m.classify({id_of(Special::cls), 12, 13});
  CHECK(o.p_ccto.size() == 16);
  CHECK(o.p_ttnt.size() == 16);
  CHECK((o.p_ccto - o.p_ttnt).cwiseAbs().maxCoeff() > 0.0);
  const auto again = m.classify({id_of(Special::cls), 12, 13});
  CHECK(again.p_ccto == o.p_ccto);
  CHECK(again.yhat_ttnt == o.yhat_ttnt);
}

TEST_CASE("loss is the sum of independently computed per-head cross entropies") {
  const ModeClassifier m(testing::toy_config(kV), 2);
  const auto batch = toy_batch();
  nn::Tape t;
  const double loss = classifier_loss(t, m, batch, {}).scalar();
  std::vector<TokenSeq> seqs;
  std::vector<int> gc, gt;
  for (const auto& b : batch) {
    seqs.push_back(b.tokens);
    gc.push_back(b.ccto);
    gt.push_back(b.ttnt);
  }
  nn::Tape t2;
  const auto h = m.forward(t2, seqs, {});
  CHECK(std::abs(loss - (head_ce(h.logits_ccto.value(), gc) + head_ce(h.logits_ttnt.value(), gt))) < 1e-9);
}

TEST_CASE("uniform heads give 2 ln 2") {
  ModeClassifier m(testing::toy_config(kV), 3);
  for (nn::Param* p : m.params().params()) {
    if (p->name.find(".out.") != std::string::npos) p->value.setZero();
  }
  nn::Tape t;
  CHECK(classifier_loss(t, m, toy_batch(), {}).scalar() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("one backward pass reaches both heads") {
  ModeClassifier m(testing::toy_config(kV), 4);
  m.params().zero_grad();
  nn::Tape t;
  t.backward(classifier_loss(t, m, toy_batch(), {}));
  for (const char* name : {"ccto.out.w", "ccto.out.b", "ttnt.out.w", "ttnt.out.b", "ccto.pool.w", "ttnt.pool.w"}) {
    CAPTURE(name);
    CHECK(m.params().at(name).grad.cwiseAbs().maxCoeff() > 0.0);
  }
}

TEST_CASE("classifier loss passes the gradient check") {
  ModeClassifier m(testing::toy_config(kV), 5);
  const auto batch = toy_batch();
  const auto r = nn::grad_check(m.params(), [&](nn::Tape& t) { return classifier_loss(t, m, batch, {}); }, 1e-5, 6, 2);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("metrics") {
  SUBCASE("all correct") {
    const std::vector<int> y = {0, 1, 1, 0};
    for (bool w : {false, true}) {
      const auto m = classifier_metrics(y, y, w);
      CHECK(m.accuracy == 100.0);
      CHECK(m.precision == 100.0);
      CHECK(m.recall == 100.0);
      CHECK(m.f1 == 100.0);
    }
  }
  SUBCASE("constant prediction, weighted") {
    const std::vector<int> preds = {0, 0, 0, 0}, golds = {0, 0, 1, 1};
    const auto m = classifier_metrics(preds, golds, true);
    CHECK(m.accuracy == doctest::Approx(50.0));
    CHECK(m.precision == doctest::Approx(25.0));
    CHECK(m.recall == doctest::Approx(50.0));
    CHECK(m.f1 == doctest::Approx(100.0 / 3.0));
    CHECK(m.zero_division);
  }
  SUBCASE("weighted and macro coincide on balanced golds with symmetric errors") {
    const std::vector<int> golds = {0, 0, 0, 0, 1, 1, 1, 1}, preds = {0, 0, 0, 1, 1, 1, 1, 0};
    const auto a = classifier_metrics(preds, golds, false);
    const auto b = classifier_metrics(preds, golds, true);
    CHECK(a.precision == doctest::Approx(b.precision));
    CHECK(a.recall == doctest::Approx(b.recall));
    CHECK(a.f1 == doctest::Approx(b.f1));
    CHECK(a.f1 == doctest::Approx(75.0));
  }
  SUBCASE("imbalanced golds separate macro from weighted") {
    const std::vector<int> golds = {0, 1, 1, 1, 1, 1, 1, 1, 1, 1}, preds = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
    CHECK(classifier_metrics(preds, golds, true).f1 > classifier_metrics(preds, golds, false).f1 + 30.0);
  }
}

TEST_CASE("trained toy classifier separates chit-chat from task talk") {
  const auto ds = gen_synthetic_corpus(1, 32);
  const Vocab v = Vocab::build(ds, 1);
  auto cfg = testing::toy_config(static_cast<std::int64_t>(v.size()), 16, 1, 256);
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.batch_size = 16;
  tc.max_epochs = 12;
  tc.patience = 12;
  tc.seed = 3;
  auto [model, out] = train_classifier(ds, v, cfg, tc);
  CHECK(out.train_report.ccto.accuracy > 90.0);
  const auto o = model.classify({testing::user("i am thinking about learning to play the guitar .")});
  CHECK(o.ccto == Mode::chitchat);

  testing::TempDir dir("cls");
  model.save(dir / "c.ckpt");
  const auto back = ClassifierModel::load(dir / "c.ckpt");
  CHECK(back.net.params().digest() == model.net.params().digest());
  CHECK(back.vocab == model.vocab);
}
