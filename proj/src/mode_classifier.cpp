#include "modeswitch/mode_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "modeswitch/digest.hpp"

namespace modeswitch {

using nn::Index;
using nn::Matrix;
using nn::Var;

namespace {
constexpr double kHeadDropout = 0.1;
}

ModeClassifier::ModeClassifier(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  enc_.emplace(cfg_, ps_, "enc.", seed);
  nn::Rng rng(mix_seed(seed, "heads"));
  const Index e = cfg_.embed_dim;
  nn::Linear::create(ps_, "ccto.pool", e, e, rng);
  nn::Linear::create(ps_, "ccto.out", e, 2, rng);
  nn::Linear::create(ps_, "ttnt.pool", e, e, rng);
  nn::Linear::create(ps_, "ttnt.out", e, 2, rng);
  bind();
}

ModeClassifier::ModeClassifier(const ModelConfig& cfg, const Checkpoint& ckpt) : ModeClassifier(cfg, 0) {
  ckpt.apply_to(ps_);
}

void ModeClassifier::bind() {
  pool_ccto_ = nn::Linear::bind(ps_, "ccto.pool");
  out_ccto_ = nn::Linear::bind(ps_, "ccto.out");
  pool_ttnt_ = nn::Linear::bind(ps_, "ttnt.pool");
  out_ttnt_ = nn::Linear::bind(ps_, "ttnt.out");
}

ModeClassifier::Heads ModeClassifier::forward(nn::Tape& t, std::span<const TokenSeq> batch,
                                              const nn::ForwardContext& ctx) const {
  Var v = enc_->forward(t, batch, ctx);
  std::vector<Index> cls_rows;
  Index off = 0;
  for (const auto& seq : batch) {
    cls_rows.push_back(off);
    off += static_cast<Index>(seq.size());
  }
  Var cls = nn::gather_rows(v, cls_rows);
  Heads h;
  h.p_ccto = pool_ccto_(t, cls);
  h.p_ttnt = pool_ttnt_(t, cls);
  h.logits_ccto = out_ccto_(t, nn::dropout(h.p_ccto, kHeadDropout, ctx));
  h.logits_ttnt = out_ttnt_(t, nn::dropout(h.p_ttnt, kHeadDropout, ctx));
  return h;
}

ClassifierOutput ModeClassifier::classify(const TokenSeq& tokens) const {
  nn::Tape t;
  const TokenSeq batch[1] = {tokens};
  const Heads h = forward(t, batch, {});
  ClassifierOutput o;
  o.p_ccto = h.p_ccto.value().row(0);
  o.p_ttnt = h.p_ttnt.value().row(0);
  const Matrix& lc = h.logits_ccto.value();
  const Matrix& lt = h.logits_ttnt.value();
  o.yhat_ccto = {lc(0, 0), lc(0, 1)};
  o.yhat_ttnt = {lt(0, 0), lt(0, 1)};
  // Ties resolve to the lower class index.
  o.ccto = lc(0, 1) > lc(0, 0) ? Mode::taskoriented : Mode::chitchat;
  o.ttnt = lt(0, 1) > lt(0, 0) ? TurnKind::normal : TurnKind::transition;
  return o;
}

std::vector<LabeledHistory> render_classifier_examples(std::span<const ClassifierExample> ex, const Vocab& vocab,
                                                       std::size_t max_len) {
  std::vector<LabeledHistory> out;
  out.reserve(ex.size());
  for (const auto& e : ex) {
    out.push_back({render_classifier_input(e.history, vocab, max_len), class_index(e.ccto), class_index(e.ttnt)});
  }
  return out;
}

Var classifier_loss(nn::Tape& t, const ModeClassifier& m, std::span<const LabeledHistory> batch,
                    const nn::ForwardContext& ctx) {
  if (batch.empty()) throw std::invalid_argument("classifier_loss: empty batch");
  std::vector<TokenSeq> inputs;
  std::vector<std::int32_t> yc, yt;
  for (const auto& b : batch) {
    inputs.push_back(b.tokens);
    yc.push_back(b.ccto);
    yt.push_back(b.ttnt);
  }
  const auto h = m.forward(t, inputs, ctx);
  return nn::add(nn::cross_entropy(h.logits_ccto, yc), nn::cross_entropy(h.logits_ttnt, yt));
}

Json ClassifierMetrics::to_json() const {
  return {{"accuracy", accuracy}, {"recall", recall},     {"precision", precision},
          {"f1", f1},             {"weighted", weighted}, {"zero_division", zero_division}};
}

ClassifierMetrics classifier_metrics(std::span<const int> preds, std::span<const int> golds, bool weighted,
                                     int num_classes) {
  if (preds.empty()) throw std::invalid_argument("classifier_metrics: empty input");
  if (preds.size() != golds.size()) throw std::invalid_argument("classifier_metrics: length mismatch");
  const auto k = static_cast<std::size_t>(num_classes);
  std::vector<double> tp(k, 0), pred_n(k, 0), gold_n(k, 0);
  double correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int p = preds[i], g = golds[i];
    if (p < 0 || p >= num_classes || g < 0 || g >= num_classes) {
      throw std::out_of_range("classifier_metrics: label out of range");
    }
    pred_n[static_cast<std::size_t>(p)] += 1;
    gold_n[static_cast<std::size_t>(g)] += 1;
    if (p == g) {
      tp[static_cast<std::size_t>(p)] += 1;
      correct += 1;
    }
  }
  const double n = static_cast<double>(preds.size());
  ClassifierMetrics m;
  m.weighted = weighted;
  m.accuracy = 100.0 * correct / n;
  for (std::size_t c = 0; c < k; ++c) {
    double prec = 0, rec = 0, f1 = 0;
    if (pred_n[c] > 0) prec = tp[c] / pred_n[c];
    else m.zero_division = true;
    if (gold_n[c] > 0) rec = tp[c] / gold_n[c];
    else m.zero_division = true;
    if (prec + rec > 0) f1 = 2 * prec * rec / (prec + rec);
    else m.zero_division = true;
    const double w = weighted ? gold_n[c] / n : 1.0 / static_cast<double>(k);
    m.precision += 100.0 * w * prec;
    m.recall += 100.0 * w * rec;
    m.f1 += 100.0 * w * f1;
  }
  return m;
}

Json ClassifierReport::to_json() const {
  return {{"ccto", ccto.to_json()}, {"ttnt", ttnt.to_json()}, {"mean_loss", mean_loss}};
}

std::size_t ClassifierModel::max_input() const {
  return std::min<std::size_t>(kClassifierMaxLen, static_cast<std::size_t>(net.config().max_len));
}

ClassifierOutput ClassifierModel::classify(const std::vector<DialogueTurn>& history) const {
  return net.classify(render_classifier_input(history, vocab, max_input()));
}

ClassifierReport ClassifierModel::evaluate(std::span<const ClassifierExample> ex) const {
  if (ex.empty()) throw std::invalid_argument("classifier evaluate: no examples");
  const auto rows = render_classifier_examples(ex, vocab, max_input());
  std::vector<int> pc, gc, pt, gt;
  double loss = 0.0;
  constexpr std::size_t kBatch = 32;
  for (std::size_t at = 0; at < rows.size(); at += kBatch) {
    const auto batch = std::span(rows).subspan(at, std::min(kBatch, rows.size() - at));
    nn::Tape t;
    std::vector<TokenSeq> inputs;
    for (const auto& b : batch) inputs.push_back(b.tokens);
    const auto h = net.forward(t, inputs, {});
    const Matrix& lc = h.logits_ccto.value();
    const Matrix& lt = h.logits_ttnt.value();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto r = static_cast<Index>(i);
      pc.push_back(lc(r, 1) > lc(r, 0) ? 1 : 0);
      pt.push_back(lt(r, 1) > lt(r, 0) ? 1 : 0);
      gc.push_back(batch[i].ccto);
      gt.push_back(batch[i].ttnt);
      auto nll = [](const Matrix& l, Index row, int y) {
        const double mx = l.row(row).maxCoeff();
        return mx + std::log((l.row(row).array() - mx).exp().sum()) - l(row, y);
      };
      loss += nll(lc, r, batch[i].ccto) + nll(lt, r, batch[i].ttnt);
    }
  }
  ClassifierReport rep;
  rep.ccto = classifier_metrics(pc, gc, false);
  rep.ttnt = classifier_metrics(pt, gt, true);
  rep.mean_loss = loss / static_cast<double>(rows.size());
  return rep;
}

Checkpoint ClassifierModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = "classifier";
  c.config = net.config().to_json();
  c.metadata = metadata;
  c.vocab = vocab.tokens();
  c.seed = seed;
  c.capture(net.params());
  return c;
}

ClassifierModel ClassifierModel::from_checkpoint(const Checkpoint& c) {
  if (c.kind != "classifier") throw CheckpointError("expected a classifier checkpoint, found kind '" + c.kind + "'");
  const ModelConfig cfg = ModelConfig::from_json(c.config);
  Vocab vocab = Vocab::from_tokens(c.vocab);
  if (static_cast<std::int64_t>(vocab.size()) != cfg.vocab_size) throw CheckpointError("vocab size disagrees with config");
  return ClassifierModel{std::move(vocab), ModeClassifier(cfg, c), c.seed, c.metadata};
}

std::pair<ClassifierModel, ClassifierOutcome> train_classifier(const std::vector<Dialogue>& corpus, const Vocab& vocab,
                                                               ModelConfig model_cfg, TrainConfig cfg,
                                                               const EpochHook& on_epoch) {
  const auto train_ex = make_classifier_examples(filter_split(corpus, Split::train));
  const auto valid_ex = make_classifier_examples(filter_split(corpus, Split::valid));
  if (train_ex.empty()) throw std::invalid_argument("train-classifier: no training examples");
  if (valid_ex.empty()) throw std::invalid_argument("train-classifier: no validation examples");
  model_cfg.vocab_size = static_cast<std::int64_t>(vocab.size());
  cfg.batch_size = std::min(cfg.batch_size, train_ex.size());

  ClassifierModel m{vocab, ModeClassifier(model_cfg, mix_seed(cfg.seed, "init")), cfg.seed, Json::object()};
  const auto train = render_classifier_examples(train_ex, vocab, m.max_input());
  ClassifierOutcome out;
  out.fit = fit(
      m.net.params(), train.size(),
      [&](nn::Tape& t, std::span<const std::size_t> idx, const nn::ForwardContext& ctx) {
        std::vector<LabeledHistory> batch;
        for (std::size_t i : idx) batch.push_back(train[i]);
        return classifier_loss(t, m.net, batch, ctx);
      },
      [&] { return m.evaluate(valid_ex).mean_loss; }, cfg, on_epoch);
  out.train_report = m.evaluate(train_ex);
  m.metadata = {{"train", cfg.to_json()}, {"fit", out.fit.to_json()}, {"train_report", out.train_report.to_json()}};
  return {std::move(m), std::move(out)};
}

}  // namespace modeswitch
