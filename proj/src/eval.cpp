#include "modeswitch/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

#include "modeswitch/digest.hpp"

namespace modeswitch {

namespace {

using Gram = std::vector<std::string>;

std::map<Gram, double> count_grams(std::span<const std::string> toks, std::size_t n) {
  std::map<Gram, double> c;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) c[Gram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                                            toks.begin() + static_cast<std::ptrdiff_t>(i + n))] += 1;
  return c;
}

}  // namespace

double distinct_n(std::span<const std::string> texts, int n) {
  if (n < 1) throw std::invalid_argument("distinct_n: n must be >= 1");
  std::set<Gram> distinct;
  std::size_t total = 0;
  for (const auto& text : texts) {
    const auto toks = tokenize(text);
    for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= toks.size(); ++i) {
      distinct.emplace(toks.begin() + static_cast<std::ptrdiff_t>(i), toks.begin() + static_cast<std::ptrdiff_t>(i) + n);
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("distinct_n: no n-grams");
  return 100.0 * static_cast<double>(distinct.size()) / static_cast<double>(total);
}

BleuStats& BleuStats::operator+=(const BleuStats& o) {
  for (std::size_t i = 0; i < 4; ++i) {
    matches[i] += o.matches[i];
    totals[i] += o.totals[i];
  }
  hyp_len += o.hyp_len;
  ref_len += o.ref_len;
  return *this;
}

double BleuStats::score() const {
  if (hyp_len <= 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double m = matches[i] > 0 ? matches[i] : kBleuEpsilon;
    const double t = totals[i] > 0 ? totals[i] : 1.0;
    log_sum += std::log(m / t);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return 100.0 * bp * std::exp(log_sum / 4.0);
}

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::vector<std::string>> refs) {
  if (refs.empty()) throw std::invalid_argument("bleu: no references");
  BleuStats s;
  s.hyp_len = static_cast<double>(hyp.size());
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return std::abs(static_cast<double>(len) - s.hyp_len); };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  s.ref_len = static_cast<double>(best);
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto h = count_grams(hyp, n);
    std::map<Gram, double> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, c] : count_grams(r, n)) max_ref[g] = std::max(max_ref[g], c);
    }
    for (const auto& [g, c] : h) {
      const auto it = max_ref.find(g);
      s.matches[n - 1] += std::min(c, it == max_ref.end() ? 0.0 : it->second);
      s.totals[n - 1] += c;
    }
  }
  return s;
}

double bleu4(const std::string& hypothesis, std::span<const std::string> references) {
  const auto hyp = tokenize(hypothesis);
  if (hyp.empty()) throw std::invalid_argument("bleu4: empty hypothesis");
  if (references.empty()) throw std::invalid_argument("bleu4: no references");
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) {
    refs.push_back(tokenize(r));
    if (refs.back().empty()) throw std::invalid_argument("bleu4: empty reference");
  }
  return bleu_stats(hyp, refs).score();
}

double transition_accuracy(std::span<const TokenSeq> outputs) {
  if (outputs.empty()) throw std::invalid_argument("transition_accuracy: no outputs");
  const auto hit = std::count_if(outputs.begin(), outputs.end(), [](const TokenSeq& s) {
    return std::find(s.begin(), s.end(), id_of(Special::transition)) != s.end();
  });
  return 100.0 * static_cast<double>(hit) / static_cast<double>(outputs.size());
}

void EvalReport::set(const std::string& name, std::optional<double> value, const std::string& reason_if_null) {
  if (value) {
    metrics[name] = *value;
  } else {
    metrics[name] = nullptr;
    null_reasons[name] = reason_if_null;
  }
}

Json EvalReport::to_json() const {
  return {{"model", model}, {"split", split}, {"metrics", metrics}, {"null_reasons", null_reasons}, {"seed", seed}};
}

DecodeParams DecodeSettings::for_mode(Mode m, std::uint64_t seed) const {
  DecodeParams p = m == Mode::chitchat ? chitchat : taskoriented;
  p.seed = seed;
  return p;
}

TurnOutput generate_for_turn(const SuiteModels& m, const Dialogue& d, std::size_t turn_index,
                             const DecodeSettings& decode, std::uint64_t seed, std::optional<GenerationMode> force) {
  if (m.lm == nullptr) throw std::invalid_argument("evaluate: no language model");
  const DialogueTurn& gold = d.turns.at(turn_index);
  if (gold.speaker != Speaker::system) throw std::invalid_argument("evaluate: not a system turn");
  const std::vector<DialogueTurn> history(d.turns.begin(), d.turns.begin() + static_cast<std::ptrdiff_t>(turn_index));
  const GenerationMode gold_mode{gold.mode, gold.is_transition_turn ? TurnKind::transition : TurnKind::normal};
  const std::uint64_t turn_seed = mix_seed(seed, d.id + "#" + std::to_string(turn_index));
  TurnOutput out{d.id, turn_index, {}};
  if (m.id == "continuous") {
    if (m.cls == nullptr || m.bridge == nullptr) throw std::invalid_argument("evaluate: continuous model incomplete");
    out.gen = generate_continuous(*m.cls, *m.bridge, *m.lm, history, std::nullopt, turn_seed);
  } else if (m.id == "discrete") {
    const GenerationMode mode = force.value_or(gold_mode);
    out.gen = generate_discrete(*m.lm, history, mode, decode.for_mode(mode.ccto, turn_seed));
  } else {
    out.gen = generate_plain(*m.lm, history, decode.for_mode(gold.mode, turn_seed));
    out.gen.mode = gold_mode;
  }
  return out;
}

EvalReport evaluate_suite(const SuiteModels& m, const std::vector<Dialogue>& corpus, Split split, std::uint64_t seed,
                          const DecodeSettings& decode) {
  const auto ds = filter_split(corpus, split);
  if (ds.empty()) throw std::invalid_argument("evaluate: split " + to_string(split) + " is empty");
  EvalReport rep;
  rep.model = m.id;
  rep.split = to_string(split);
  rep.seed = seed;

  std::vector<std::string> cc_texts;
  BleuStats to_bleu, tr_bleu;
  std::size_t to_count = 0, tr_count = 0, normal_count = 0, spurious = 0;
  std::vector<TokenSeq> transition_outputs;
  for (const Dialogue& d : ds) {
    for (std::size_t i = 0; i < d.turns.size(); ++i) {
      const DialogueTurn& gold = d.turns[i];
      if (gold.speaker != Speaker::system) continue;
      const TurnOutput out = generate_for_turn(m, d, i, decode, seed);
      const SplitResponse& s = out.gen.split;
      // Pools follow the gold mode so one response never lands in both.
      if (gold.mode == Mode::chitchat) {
        cc_texts.push_back(s.normal_part);
      } else {
        const std::vector<std::vector<std::string>> refs = {tokenize(gold.text)};
        to_bleu += bleu_stats(tokenize(s.normal_part), refs);
        ++to_count;
      }
      if (gold.is_transition_turn) {
        transition_outputs.push_back(out.gen.raw);
        const std::vector<std::vector<std::string>> refs = {tokenize(gold.transition_sentence.value_or(""))};
        tr_bleu += bleu_stats(tokenize(s.transition_part.value_or("")), refs);
        ++tr_count;
      } else {
        ++normal_count;
        if (s.transition_part) ++spurious;
      }
    }
  }

  auto guarded_distinct = [&](int n) -> std::optional<double> {
    try {
      return distinct_n(cc_texts, n);
    } catch (const std::invalid_argument&) {
      return std::nullopt;
    }
  };
  const std::string no_cc = cc_texts.empty() ? "no chit-chat turns in split" : "chit-chat outputs have no n-grams";
  rep.set("distinct1", guarded_distinct(1), no_cc);
  rep.set("distinct2", guarded_distinct(2), no_cc);
  rep.set("bleu4", to_count ? std::optional(to_bleu.score()) : std::nullopt, "no task-oriented turns in split");
  rep.set("bleu4_transition", tr_count ? std::optional(tr_bleu.score()) : std::nullopt, "no transition turns in split");
  rep.set("transition_accuracy", tr_count ? std::optional(transition_accuracy(transition_outputs)) : std::nullopt,
          "no transition turns in split");
  rep.set("spurious_transition_rate",
          normal_count ? std::optional(100.0 * static_cast<double>(spurious) / static_cast<double>(normal_count))
                       : std::nullopt,
          "no normal turns in split");
  rep.set("meteor", std::nullopt, "requires external resources");
  rep.set("bertscore", std::nullopt, "requires external resources");

  if (m.id == "continuous" && m.cls != nullptr) {
    const auto cex = make_classifier_examples(ds);
    const ClassifierReport cr = m.cls->evaluate(cex);
    rep.set("classifier_ccto_accuracy", cr.ccto.accuracy);
    rep.set("classifier_ccto_f1", cr.ccto.f1);
    rep.set("classifier_ttnt_accuracy", cr.ttnt.accuracy);
    rep.set("classifier_ttnt_weighted_precision", cr.ttnt.precision);
    rep.set("classifier_ttnt_weighted_recall", cr.ttnt.recall);
    rep.set("classifier_ttnt_weighted_f1", cr.ttnt.f1);
  }
  rep.set("chitchat_turns", static_cast<double>(cc_texts.size()));
  rep.set("taskoriented_turns", static_cast<double>(to_count));
  rep.set("transition_turns", static_cast<double>(tr_count));
  return rep;
}

}  // namespace modeswitch
