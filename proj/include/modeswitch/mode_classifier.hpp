#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "modeswitch/corpus.hpp"
#include "modeswitch/encoder.hpp"
#include "modeswitch/text_codec.hpp"
#include "modeswitch/training.hpp"

namespace modeswitch {

// Class indices: ccto chitchat=0, taskoriented=1; ttnt transition=0, normal=1.
inline int class_index(Mode m) { return static_cast<int>(m); }
inline int class_index(TurnKind k) { return static_cast<int>(k); }

struct ClassifierOutput {
  nn::RowVector p_ccto;  // pooled, before dropout
  nn::RowVector p_ttnt;
  std::array<double, 2> yhat_ccto{};
  std::array<double, 2> yhat_ttnt{};
  Mode ccto = Mode::chitchat;
  TurnKind ttnt = TurnKind::normal;
};

/// One pooled projection and one output layer per head, over a shared
/// encoder trunk.
class ModeClassifier {
 public:
  ModeClassifier(const ModelConfig& cfg, std::uint64_t seed);
  ModeClassifier(const ModelConfig& cfg, const Checkpoint& ckpt);
  ModeClassifier(ModeClassifier&&) noexcept = default;
  ModeClassifier& operator=(ModeClassifier&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }

  struct Heads {
    nn::Var p_ccto, p_ttnt;            // [B, E]
    nn::Var logits_ccto, logits_ttnt;  // [B, 2]
  };
  Heads forward(nn::Tape& t, std::span<const TokenSeq> batch, const nn::ForwardContext& ctx) const;

  /// Eval-mode classification of one rendered history.
  ClassifierOutput classify(const TokenSeq& tokens) const;

 private:
  void bind();

  ModelConfig cfg_;
  nn::ParamStore ps_;
  std::optional<Encoder> enc_;
  nn::Linear pool_ccto_, out_ccto_, pool_ttnt_, out_ttnt_;
};

struct LabeledHistory {
  TokenSeq tokens;
  int ccto = 0;
  int ttnt = 0;
};

std::vector<LabeledHistory> render_classifier_examples(std::span<const ClassifierExample> ex, const Vocab& vocab,
                                                       std::size_t max_len);

/// CE(ccto) + CE(ttnt), each averaged over the batch.
nn::Var classifier_loss(nn::Tape& t, const ModeClassifier& m, std::span<const LabeledHistory> batch,
                        const nn::ForwardContext& ctx);

struct ClassifierMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool weighted = false;
  /// Some class had an undefined precision, recall or F1 and contributed 0.
  bool zero_division = false;

  Json to_json() const;
};

/// Percent scores over class labels 0..num_classes-1. Unweighted scores are
/// macro averages; weighted ones weight each class by its gold frequency.
ClassifierMetrics classifier_metrics(std::span<const int> preds, std::span<const int> golds, bool weighted,
                                     int num_classes = 2);

struct ClassifierReport {
  ClassifierMetrics ccto;  // unweighted
  ClassifierMetrics ttnt;  // weighted
  double mean_loss = 0.0;

  Json to_json() const;
};

struct ClassifierModel {
  Vocab vocab;
  ModeClassifier net;
  std::uint64_t seed = 0;
  Json metadata = Json::object();

  std::size_t max_input() const;
  ClassifierOutput classify(const std::vector<DialogueTurn>& history) const;
  ClassifierReport evaluate(std::span<const ClassifierExample> ex) const;

  Checkpoint to_checkpoint() const;
  static ClassifierModel from_checkpoint(const Checkpoint& c);
  void save(const std::filesystem::path& path) const { to_checkpoint().save(path); }
  static ClassifierModel load(const std::filesystem::path& path) { return from_checkpoint(Checkpoint::load(path)); }
};

struct ClassifierOutcome {
  FitResult fit;
  ClassifierReport train_report;
};

/// Batch size is capped by the training set size.
std::pair<ClassifierModel, ClassifierOutcome> train_classifier(const std::vector<Dialogue>& corpus, const Vocab& vocab,
                                                               ModelConfig model_cfg, TrainConfig cfg,
                                                               const EpochHook& on_epoch = {});

}  // namespace modeswitch
