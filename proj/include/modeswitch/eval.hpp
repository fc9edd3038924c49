#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modeswitch/prompt_bridge.hpp"

namespace modeswitch {

/// Distinct n-grams over all n-grams of the codec-tokenized texts, percent.
/// Throws std::invalid_argument when there are no n-grams.
double distinct_n(std::span<const std::string> texts, int n);

inline constexpr double kBleuEpsilon = 1e-9;

struct BleuStats {
  std::array<double, 4> matches{};  // clipped
  std::array<double, 4> totals{};
  double hyp_len = 0;
  double ref_len = 0;  // closest reference length, shorter on ties

  BleuStats& operator+=(const BleuStats& o);
  /// Percent; zero-match orders use kBleuEpsilon as their count.
  double score() const;
};

BleuStats bleu_stats(std::span<const std::string> hyp, std::span<const std::vector<std::string>> refs);

/// Sentence BLEU-4 of codec-tokenized text, percent.
double bleu4(const std::string& hypothesis, std::span<const std::string> references);

/// Percent of outputs holding at least one [TRANSITION].
double transition_accuracy(std::span<const TokenSeq> outputs);

struct EvalReport {
  std::string model;
  std::string split;
  Json metrics = Json::object();       // name -> number or null
  Json null_reasons = Json::object();  // name -> reason
  std::uint64_t seed = 0;

  void set(const std::string& name, std::optional<double> value, const std::string& reason_if_null = {});
  Json to_json() const;
};

/// Models under evaluation. `lm` is always required; the continuous model
/// also needs `cls` and `bridge`.
struct SuiteModels {
  std::string id;  // "unified", "discrete", "ablation" or "continuous"
  const LmModel* lm = nullptr;
  const ClassifierModel* cls = nullptr;
  const BridgeModel* bridge = nullptr;
};

/// Per-mode decode settings used when a model does not choose its own.
struct DecodeSettings {
  DecodeParams chitchat = default_decode_params(Mode::chitchat);
  DecodeParams taskoriented = default_decode_params(Mode::taskoriented);

  DecodeParams for_mode(Mode m, std::uint64_t seed) const;
};

struct TurnOutput {
  std::string dialogue_id;
  std::size_t turn_index = 0;
  Generation gen;
};

/// Generates a response for one system turn given its history and gold labels.
TurnOutput generate_for_turn(const SuiteModels& m, const Dialogue& d, std::size_t turn_index,
                             const DecodeSettings& decode, std::uint64_t seed, std::optional<GenerationMode> force = {});

/// Scores generated responses for every system turn of the split. Per-turn
/// seeds derive from (seed, dialogue id, turn index).
EvalReport evaluate_suite(const SuiteModels& m, const std::vector<Dialogue>& corpus, Split split, std::uint64_t seed,
                          const DecodeSettings& decode = {});

}  // namespace modeswitch
