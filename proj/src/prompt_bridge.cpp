#include "modeswitch/prompt_bridge.hpp"

#include <algorithm>
#include <cmath>

#include "modeswitch/digest.hpp"

namespace modeswitch {

using nn::Index;
using nn::Matrix;
using nn::Var;

SplitResponse split_transition(std::span<const TokenId> raw, const Vocab& vocab) {
  const TokenId marker = id_of(Special::transition);
  const auto first = std::find(raw.begin(), raw.end(), marker);
  auto words = [&](auto b, auto e) {
    TokenSeq kept;
    for (auto it = b; it != e; ++it) {
      if (!is_special(*it)) kept.push_back(*it);
    }
    return vocab.decode(kept);
  };
  SplitResponse s;
  s.normal_part = words(raw.begin(), first);
  if (first != raw.end()) {
    s.transition_part = words(first + 1, raw.end());
    s.degenerate = first == raw.begin();
  }
  return s;
}

std::vector<DialogueTurn> recent_turns(const std::vector<DialogueTurn>& history, std::size_t n) {
  const std::size_t from = history.size() > n ? history.size() - n : 0;
  return {history.begin() + static_cast<std::ptrdiff_t>(from), history.end()};
}

std::size_t context_budget(const Decoder& d, const DecodeParams& params) {
  const auto max_len = static_cast<std::size_t>(d.config().max_len);
  const std::size_t reserve = std::min(params.max_new_tokens, max_len / 2);
  return std::max<std::size_t>(1, max_len - std::max<std::size_t>(reserve, 1));
}

namespace {

const std::array<TokenId, 5> kPromptTokens = {id_of(Special::chitchat), id_of(Special::taskoriented),
                                              id_of(Special::transition_turn), id_of(Special::normal_turn),
                                              id_of(Special::transition)};

LmModel clone(const LmModel& m, std::string kind) {
  return LmModel{std::move(kind), m.vocab, Decoder(m.decoder.config(), m.to_checkpoint()), m.seed, Json::object()};
}

Generation finish(const Vocab& vocab, Sampled s, GenerationMode mode) {
  Generation g;
  g.split = split_transition(s.tokens, vocab);
  g.split.truncated = s.truncated;
  g.raw = std::move(s.tokens);
  g.mode = mode;
  return g;
}

}  // namespace

std::pair<LmModel, TrainOutcome> train_discrete(const LmModel& unified, const std::vector<Dialogue>& corpus,
                                                const TrainConfig& cfg, bool ablation, const EpochHook& on_epoch) {
  if (unified.kind != "unified") throw std::invalid_argument("train-discrete: expected a unified checkpoint");
  const auto train_set = make_lm_examples(filter_split(corpus, Split::train), ExampleStage::prompted);
  if (train_set.no_transition_turns) throw std::invalid_argument("train-discrete: corpus has no transition turns");
  const auto valid_ex = make_lm_examples(filter_split(corpus, Split::valid), ExampleStage::prompted).examples;
  if (valid_ex.empty()) throw std::invalid_argument("train-discrete: validation split has no transition turns");

  LmModel m = clone(unified, ablation ? "ablation" : "discrete");
  m.seed = cfg.seed;
  m.decoder.reinit_embeddings(kPromptTokens, mix_seed(cfg.seed, "prompt-embeddings"));
  const auto max_len = static_cast<std::size_t>(m.decoder.config().max_len);
  const auto train = render_all(train_set.examples, m.vocab, !ablation, max_len);
  const auto valid = render_all(valid_ex, m.vocab, !ablation, max_len);

  TrainOutcome out;
  out.fit = fit(
      m.decoder.params(), train.size(),
      [&](nn::Tape& t, std::span<const std::size_t> idx, const nn::ForwardContext& ctx) {
        std::vector<RenderedLm> batch;
        for (std::size_t i : idx) batch.push_back(train[i]);
        return lm_loss(t, m.decoder, batch, nullptr, ctx);
      },
      [&] { return lm_tally(m.decoder, valid).mean_loss(); }, cfg, on_epoch);
  out.train_tally = lm_tally(m.decoder, train);
  m.metadata = {{"train", cfg.to_json()},
                {"fit", out.fit.to_json()},
                {"train_token_accuracy", out.train_tally.accuracy()},
                {"base_decoder_hash", unified.decoder.params().digest()}};
  return {std::move(m), std::move(out)};
}

Generation generate_discrete(const LmModel& m, const std::vector<DialogueTurn>& context, GenerationMode mode,
                             std::optional<DecodeParams> params, std::uint64_t seed) {
  if (!m.uses_prompts()) throw std::invalid_argument("generate_discrete: model was trained without prompt tokens");
  DecodeParams p = params.value_or(default_decode_params(mode.ccto));
  if (!params) p.seed = seed;
  const TokenSeq input =
      render_lm_context(recent_turns(context), m.vocab, discrete_prompts(mode), context_budget(m.decoder, p));
  return finish(m.vocab, sample_response(m.decoder, input, p), mode);
}

Generation generate_plain(const LmModel& m, const std::vector<DialogueTurn>& history, const DecodeParams& params) {
  std::vector<DialogueTurn> ctx;
  if (m.kind == "unified") {
    if (history.empty() || history.back().speaker != Speaker::user) {
      throw std::invalid_argument("generate: history must end with a user turn");
    }
    ctx.push_back(history.back());
  } else {
    ctx = recent_turns(history);
  }
  const TokenSeq input = render_lm_context(ctx, m.vocab, std::nullopt, context_budget(m.decoder, params));
  return finish(m.vocab, sample_response(m.decoder, input, params), {});
}

// --- bridge ---------------------------------------------------------------------

Bridge::Bridge(Index dim, std::uint64_t seed) : dim_(dim) {
  nn::Rng rng(seed);
  lstm_ = nn::Lstm::create(ps_, "lstm", dim, dim, rng);
  mlp_ = nn::Mlp2::create(ps_, "mlp", dim, dim, dim, rng);
}

Bridge::Bridge(Index dim, const Checkpoint& ckpt) : Bridge(dim, 0) { ckpt.apply_to(ps_); }

Var Bridge::forward(nn::Tape& t, const Var& p_ccto, const Var& p_ttnt, const nn::ForwardContext& ctx) const {
  if (p_ccto.cols() != dim_ || p_ttnt.cols() != dim_ || p_ccto.rows() != p_ttnt.rows()) {
    throw std::invalid_argument("bridge: expected two [B, " + std::to_string(dim_) + "] inputs");
  }
  const Var steps[2] = {p_ccto, p_ttnt};
  const auto hs = lstm_(t, steps);
  const Var both[2] = {hs[0], hs[1]};
  Var cp = mlp_(t, nn::dropout(nn::concat_rows(both), kDropout, ctx));
  const Index b = p_ccto.rows();
  std::vector<Index> order;
  for (Index i = 0; i < b; ++i) {
    order.push_back(i);
    order.push_back(b + i);
  }
  return nn::gather_rows(cp, order);
}

Matrix ContinuousPrompts::stacked() const {
  Matrix m(2, cp_ccto.size());
  m.row(0) = cp_ccto;
  m.row(1) = cp_ttnt;
  return m;
}

std::vector<BridgeExample> make_bridge_examples(const std::vector<Dialogue>& ds, const Vocab& vocab,
                                                std::size_t classifier_max, std::size_t decoder_max) {
  std::vector<Dialogue> augmented;
  std::copy_if(ds.begin(), ds.end(), std::back_inserter(augmented),
               [](const Dialogue& d) { return d.kind != DialogueKind::plain; });
  const auto lm = make_lm_examples(augmented, ExampleStage::all_turns).examples;
  std::vector<BridgeExample> out;
  out.reserve(lm.size());
  for (const auto& ex : lm) {
    const Dialogue& d = *std::find_if(augmented.begin(), augmented.end(),
                                      [&](const Dialogue& x) { return x.id == ex.dialogue_id; });
    BridgeExample b;
    const std::vector<DialogueTurn> history(d.turns.begin(), d.turns.begin() + static_cast<std::ptrdiff_t>(ex.turn_index));
    b.history = render_classifier_input(history, vocab, classifier_max);
    b.lm.target = render_lm_target(ex.target_turn, ex.generation_mode.ttnt, vocab);
    if (b.lm.target.size() >= decoder_max) throw std::length_error("bridge example target exceeds max length");
    b.lm.input = render_lm_context(ex.context_turns, vocab, reserved_prompts(), decoder_max - b.lm.target.size());
    b.gold_ccto = prompt_token(ex.generation_mode.ccto);
    b.gold_ttnt = prompt_token(ex.generation_mode.ttnt);
    out.push_back(std::move(b));
  }
  return out;
}

BridgeLoss bridge_loss(nn::Tape& t, const Bridge& bridge, const ModeClassifier& cls, const Decoder& dec,
                       std::span<const BridgeExample> batch, const nn::ForwardContext& ctx) {
  if (cls.params().any_trainable()) throw FrozenBackboneError("bridge_loss: classifier is not frozen");
  if (dec.params().any_trainable()) throw FrozenBackboneError("bridge_loss: decoder is not frozen");
  if (batch.empty()) throw std::invalid_argument("bridge_loss: empty batch");
  std::vector<TokenSeq> histories;
  std::vector<RenderedLm> lms;
  std::vector<std::int32_t> gold_ccto, gold_ttnt;
  for (const auto& b : batch) {
    histories.push_back(b.history);
    lms.push_back(b.lm);
    gold_ccto.push_back(b.gold_ccto);
    gold_ttnt.push_back(b.gold_ttnt);
  }
  const auto heads = cls.forward(t, histories, {});
  Var cp = bridge.forward(t, heads.p_ccto, heads.p_ttnt, ctx);
  BridgeLoss l;
  l.response = lm_loss(t, dec, lms, &cp, {}, &l.prompt_logits);
  std::vector<Index> even, odd;
  for (Index i = 0; i < static_cast<Index>(batch.size()); ++i) {
    even.push_back(2 * i);
    odd.push_back(2 * i + 1);
  }
  l.ccto = nn::cross_entropy(nn::gather_rows(l.prompt_logits, even), gold_ccto);
  l.ttnt = nn::cross_entropy(nn::gather_rows(l.prompt_logits, odd), gold_ttnt);
  l.total = nn::add(nn::add(l.response, l.ccto), l.ttnt);
  return l;
}

BridgeEval evaluate_bridge(const Bridge& bridge, const ModeClassifier& cls, const Decoder& dec,
                           std::span<const BridgeExample> ex) {
  if (ex.empty()) throw std::invalid_argument("evaluate_bridge: no examples");
  constexpr std::size_t kBatch = 16;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t at = 0; at < ex.size(); at += kBatch) {
    const auto batch = ex.subspan(at, std::min(kBatch, ex.size() - at));
    nn::Tape t;
    const BridgeLoss l = bridge_loss(t, bridge, cls, dec, batch, {});
    loss += l.total.scalar() * static_cast<double>(batch.size());
    const Matrix& pl = l.prompt_logits.value();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Index a = 0, b = 0;
      pl.row(static_cast<Index>(2 * i)).maxCoeff(&a);
      pl.row(static_cast<Index>(2 * i + 1)).maxCoeff(&b);
      correct += (a == batch[i].gold_ccto ? 1 : 0) + (b == batch[i].gold_ttnt ? 1 : 0);
    }
  }
  return {100.0 * static_cast<double>(correct) / static_cast<double>(2 * ex.size()),
          loss / static_cast<double>(ex.size())};
}

void BridgeModel::verify(const ClassifierModel& cls, const LmModel& lm) const {
  if (cls.net.params().digest() != classifier_hash) {
    throw CheckpointError("bridge was trained against a different classifier (hash mismatch)");
  }
  if (lm.decoder.params().digest() != decoder_hash) {
    throw CheckpointError("bridge was trained against a different decoder (hash mismatch)");
  }
}

ContinuousPrompts BridgeModel::prompts(const ClassifierOutput& out) const {
  nn::Tape t;
  const Var cp = net.forward(t, t.constant(out.p_ccto), t.constant(out.p_ttnt), {});
  return {cp.value().row(0), cp.value().row(1)};
}

Checkpoint BridgeModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = "bridge";
  c.config = {{"embed_dim", net.dim()}};
  c.metadata = metadata;
  c.metadata["frozen_classifier_hash"] = classifier_hash;
  c.metadata["frozen_decoder_hash"] = decoder_hash;
  c.seed = seed;
  c.capture(net.params());
  return c;
}

BridgeModel BridgeModel::from_checkpoint(const Checkpoint& c) {
  if (c.kind != "bridge") throw CheckpointError("expected a bridge checkpoint, found kind '" + c.kind + "'");
  try {
    const auto dim = c.config.at("embed_dim").get<Index>();
    Json meta = c.metadata;
    auto ch = meta.at("frozen_classifier_hash").get<std::string>();
    auto dh = meta.at("frozen_decoder_hash").get<std::string>();
    meta.erase("frozen_classifier_hash");
    meta.erase("frozen_decoder_hash");
    return BridgeModel{Bridge(dim, c), std::move(ch), std::move(dh), c.seed, std::move(meta)};
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bridge checkpoint: ") + e.what());
  }
}

std::pair<BridgeModel, BridgeOutcome> train_bridge(ClassifierModel& cls, LmModel& lm,
                                                   const std::vector<Dialogue>& corpus, const TrainConfig& cfg,
                                                   const EpochHook& on_epoch) {
  if (lm.kind != "discrete") throw std::invalid_argument("train-bridge: expected a discrete-prompt decoder");
  if (cls.net.config().embed_dim != lm.decoder.config().embed_dim) {
    throw std::invalid_argument("train-bridge: classifier and decoder embedding sizes differ (" +
                                std::to_string(cls.net.config().embed_dim) + " vs " +
                                std::to_string(lm.decoder.config().embed_dim) + ")");
  }
  if (!(cls.vocab == lm.vocab)) throw std::invalid_argument("train-bridge: classifier and decoder vocabularies differ");
  cls.net.params().set_trainable(false);
  lm.decoder.params().set_trainable(false);

  const auto dmax = static_cast<std::size_t>(lm.decoder.config().max_len);
  const auto train = make_bridge_examples(filter_split(corpus, Split::train), lm.vocab, cls.max_input(), dmax);
  const auto valid = make_bridge_examples(filter_split(corpus, Split::valid), lm.vocab, cls.max_input(), dmax);
  if (train.empty()) throw std::invalid_argument("train-bridge: no augmented training dialogues");
  if (valid.empty()) throw std::invalid_argument("train-bridge: no augmented validation dialogues");

  BridgeModel m{Bridge(lm.decoder.config().embed_dim, mix_seed(cfg.seed, "init")), cls.net.params().digest(),
                lm.decoder.params().digest(), cfg.seed, Json::object()};
  BridgeOutcome out;
  out.fit = fit(
      m.net.params(), train.size(),
      [&](nn::Tape& t, std::span<const std::size_t> idx, const nn::ForwardContext& ctx) {
        std::vector<BridgeExample> batch;
        for (std::size_t i : idx) batch.push_back(train[i]);
        return bridge_loss(t, m.net, cls.net, lm.decoder, batch, ctx).total;
      },
      [&] { return evaluate_bridge(m.net, cls.net, lm.decoder, valid).mean_loss; }, cfg, on_epoch);
  const BridgeEval ev = evaluate_bridge(m.net, cls.net, lm.decoder, train);
  out.prompt_accuracy = ev.prompt_accuracy;
  out.mean_loss = ev.mean_loss;
  m.metadata = {{"train", cfg.to_json()}, {"fit", out.fit.to_json()}, {"train_prompt_accuracy", ev.prompt_accuracy}};
  return {std::move(m), std::move(out)};
}

Generation generate_continuous(const ClassifierModel& cls, const BridgeModel& bridge, const LmModel& lm,
                               const std::vector<DialogueTurn>& history, std::optional<DecodeParams> params,
                               std::uint64_t seed) {
  if (history.empty()) throw std::invalid_argument("generate_continuous: empty history");
  const ClassifierOutput out = cls.classify(history);
  const GenerationMode mode{out.ccto, out.ttnt};
  DecodeParams p = params.value_or(default_decode_params(mode.ccto));
  if (!params) p.seed = seed;
  const TokenSeq input =
      render_lm_context(recent_turns(history), lm.vocab, reserved_prompts(), context_budget(lm.decoder, p));
  return finish(lm.vocab, sample_response(lm.decoder, input, p, bridge.prompts(out).stacked()), mode);
}

}  // namespace modeswitch
