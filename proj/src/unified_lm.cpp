#include "modeswitch/unified_lm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "modeswitch/digest.hpp"

namespace modeswitch {

using nn::Index;
using nn::Matrix;
using nn::Var;

void DecodeParams::validate() const {
  if (top_k < 1) throw std::invalid_argument("decode: top_k must be >= 1");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw std::invalid_argument("decode: top_p must be in (0, 1]");
}

Json DecodeParams::to_json() const {
  return {{"top_k", top_k}, {"top_p", top_p}, {"max_new_tokens", max_new_tokens}, {"seed", seed}};
}

DecodeParams DecodeParams::from_json(const Json& j, const DecodeParams& d) {
  DecodeParams p = d;
  p.top_k = j.value("top_k", d.top_k);
  p.top_p = j.value("top_p", d.top_p);
  p.max_new_tokens = j.value("max_new_tokens", d.max_new_tokens);
  p.seed = j.value("seed", d.seed);
  return p;
}

DecodeParams default_decode_params(Mode m) {
  DecodeParams p;
  if (m == Mode::taskoriented) {
    p.top_k = 10;
    p.top_p = 0.5;
  }
  return p;
}

std::vector<double> filter_logits(std::span<const double> dist, int k, double p) {
  if (k < 1) throw std::invalid_argument("filter_logits: k must be >= 1");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("filter_logits: p must be in (0, 1]");
  std::vector<std::size_t> order(dist.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t keep_k = std::min(order.size(), static_cast<std::size_t>(k));
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep_k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] > dist[b] || (dist[a] == dist[b] && a < b); });
  std::size_t keep = 0;
  double mass = 0.0;
  while (keep < keep_k) {
    mass += dist[order[keep]];
    ++keep;
    if (mass >= p) break;
  }
  std::vector<double> out(dist.size(), 0.0);
  if (mass <= 0.0) {
    out[order.front()] = 1.0;
    return out;
  }
  for (std::size_t i = 0; i < keep; ++i) out[order[i]] = dist[order[i]] / mass;
  return out;
}

Sampled sample_response(const Decoder& d, const TokenSeq& context, const DecodeParams& params,
                        const std::optional<Matrix>& prompt_override) {
  params.validate();
  const auto max_len = static_cast<std::size_t>(d.config().max_len);
  if (context.empty()) throw std::invalid_argument("sample_response: empty context");
  if (context.size() > max_len - 1) throw std::length_error("sample_response: context exceeds max_len - 1");
  Sampled out;
  if (params.max_new_tokens == 0) return out;
  nn::Rng rng(params.seed);
  Decoder::Session s(d, prompt_override);
  nn::RowVector logits = s.feed(context);
  std::vector<double> probs(static_cast<std::size_t>(logits.size()));
  while (true) {
    const double mx = logits.maxCoeff();
    double z = 0.0;
    for (Index i = 0; i < logits.size(); ++i) z += probs[static_cast<std::size_t>(i)] = std::exp(logits(i) - mx);
    for (double& v : probs) v /= z;
    const auto filtered = filter_logits(probs, params.top_k, params.top_p);
    std::discrete_distribution<TokenId> pick(filtered.begin(), filtered.end());
    const TokenId next = pick(rng);
    if (next == id_of(Special::end)) return out;
    out.tokens.push_back(next);
    if (out.tokens.size() >= params.max_new_tokens || static_cast<std::size_t>(s.length()) >= max_len) {
      out.truncated = true;
      return out;
    }
    logits = s.feed(next);
  }
}

LmRows lm_rows(const RenderedLm& r) {
  if (r.input.empty() || r.target.empty()) throw std::invalid_argument("lm_rows: empty input or target");
  LmRows rows;
  rows.input = r.input;
  rows.input.insert(rows.input.end(), r.target.begin(), r.target.end() - 1);
  rows.labels.assign(rows.input.size(), nn::kIgnoreTarget);
  for (std::size_t j = 0; j < r.target.size(); ++j) rows.labels[r.input.size() - 1 + j] = r.target[j];
  return rows;
}

namespace {

struct Flattened {
  std::vector<TokenSeq> inputs;
  std::vector<Index> target_rows;  // rows of the concatenated batch with a label
  std::vector<std::int32_t> labels;
  std::vector<Index> prompt_rows;  // positions 0 and 1 of every sequence
};

Flattened flatten(std::span<const RenderedLm> batch) {
  Flattened f;
  Index offset = 0;
  for (const RenderedLm& r : batch) {
    LmRows rows = lm_rows(r);
    for (std::size_t i = 0; i < rows.labels.size(); ++i) {
      if (rows.labels[i] == nn::kIgnoreTarget) continue;
      f.target_rows.push_back(offset + static_cast<Index>(i));
      f.labels.push_back(rows.labels[i]);
    }
    f.prompt_rows.push_back(offset);
    f.prompt_rows.push_back(offset + 1);
    offset += static_cast<Index>(rows.input.size());
    f.inputs.push_back(std::move(rows.input));
  }
  return f;
}

}  // namespace

Var lm_loss(nn::Tape& t, const Decoder& d, std::span<const RenderedLm> batch, const Var* prompt_override,
            const nn::ForwardContext& ctx, Var* prompt_logits) {
  if (batch.empty()) throw std::invalid_argument("lm_loss: empty batch");
  const Flattened f = flatten(batch);
  Var h = d.hidden(t, f.inputs, prompt_override, ctx);
  if (prompt_logits != nullptr) *prompt_logits = d.head(t, nn::gather_rows(h, f.prompt_rows));
  Var logits = d.head(t, nn::gather_rows(h, f.target_rows));
  return nn::cross_entropy(logits, f.labels);
}

TokenTally lm_tally(const Decoder& d, std::span<const RenderedLm> examples, std::size_t batch_size) {
  TokenTally tally;
  for (std::size_t at = 0; at < examples.size(); at += batch_size) {
    const auto batch = examples.subspan(at, std::min(batch_size, examples.size() - at));
    const Flattened f = flatten(batch);
    nn::Tape t;
    Var h = d.hidden(t, f.inputs, nullptr, {});
    const Matrix& logits = d.head(t, nn::gather_rows(h, f.target_rows)).value();
    for (Index r = 0; r < logits.rows(); ++r) {
      Index best = 0;
      const double mx = logits.row(r).maxCoeff(&best);
      const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
      const auto label = f.labels[static_cast<std::size_t>(r)];
      tally.loss_sum += lse - logits(r, label);
      tally.correct += best == label ? 1 : 0;
      ++tally.total;
    }
  }
  return tally;
}

std::vector<RenderedLm> render_all(std::span<const LmExample> examples, const Vocab& vocab, bool discrete_prompts,
                                   std::size_t max_len) {
  std::vector<RenderedLm> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(render_lm_input(ex, vocab, discrete_prompts, max_len));
  return out;
}

Checkpoint LmModel::to_checkpoint() const {
  Checkpoint c;
  c.kind = kind;
  c.config = decoder.config().to_json();
  c.metadata = metadata;
  c.vocab = vocab.tokens();
  c.seed = seed;
  c.capture(decoder.params());
  return c;
}

LmModel LmModel::from_checkpoint(const Checkpoint& c) {
  if (c.kind != "unified" && c.kind != "discrete" && c.kind != "ablation") {
    throw CheckpointError("expected a language-model checkpoint, found kind '" + c.kind + "'");
  }
  const ModelConfig cfg = ModelConfig::from_json(c.config);
  Vocab vocab = Vocab::from_tokens(c.vocab);
  if (static_cast<std::int64_t>(vocab.size()) != cfg.vocab_size) throw CheckpointError("vocab size disagrees with config");
  return LmModel{c.kind, std::move(vocab), Decoder(cfg, c), c.seed, c.metadata};
}

std::pair<LmModel, TrainOutcome> train_unified(const std::vector<Dialogue>& corpus, const Vocab& vocab,
                                               ModelConfig model_cfg, const TrainConfig& cfg,
                                               const EpochHook& on_epoch) {
  const auto train_ex = make_lm_examples(filter_split(corpus, Split::train), ExampleStage::unified).examples;
  const auto valid_ex = make_lm_examples(filter_split(corpus, Split::valid), ExampleStage::unified).examples;
  if (train_ex.empty()) throw std::invalid_argument("train-unified: no training examples");
  if (valid_ex.empty()) throw std::invalid_argument("train-unified: no validation examples");
  model_cfg.vocab_size = static_cast<std::int64_t>(vocab.size());
  const auto max_len = static_cast<std::size_t>(model_cfg.max_len);
  const auto train = render_all(train_ex, vocab, false, max_len);
  const auto valid = render_all(valid_ex, vocab, false, max_len);

  LmModel m{"unified", vocab, Decoder(model_cfg, mix_seed(cfg.seed, "init")), cfg.seed, Json::object()};
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
  m.metadata = {{"train", cfg.to_json()}, {"fit", out.fit.to_json()}, {"train_token_accuracy", out.train_tally.accuracy()}};
  return {std::move(m), std::move(out)};
}

}  // namespace modeswitch
