#include "modeswitch/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <unistd.h>

namespace modeswitch {

std::filesystem::path RunLayout::report(const std::string& model, Split split) const {
  return dir / "reports" / (model + "." + to_string(split) + ".json");
}

ServeLock::ServeLock(std::filesystem::path path) : path_(std::move(path)) {
  std::filesystem::create_directories(path_.parent_path());
  std::ofstream f(path_, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create lock file " + path_.string());
  f << ::getpid() << "\n";
}

ServeLock::~ServeLock() {
  std::error_code ec;
  std::filesystem::remove(path_, ec);
}

Pipeline::Pipeline(RunConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) { cfg_.validate(); }

std::vector<Dialogue> Pipeline::corpus() const {
  if (!std::filesystem::exists(cfg_.corpus)) throw MissingPrerequisite("this stage", cfg_.corpus);
  return load_corpus(cfg_.corpus);
}

Vocab Pipeline::vocab() const {
  require("this stage", layout().vocab());
  return Vocab::load(layout().vocab());
}

void Pipeline::require(const std::string& stage, const std::filesystem::path& p) const {
  if (!std::filesystem::exists(p)) throw MissingPrerequisite(stage, p);
}

void Pipeline::ensure_unlocked() const {
  if (std::filesystem::exists(layout().lock())) {
    throw OutputLocked("output directory " + cfg_.out.string() + " is being served (" + layout().lock().string() +
                       "); stop the server before training");
  }
  std::filesystem::create_directories(cfg_.out);
}

void Pipeline::write_log(const std::string& kind, const Json& j) const {
  write_file_atomic(layout().train_log(kind), j.dump(2) + "\n");
}

EpochHook Pipeline::hook(const std::string& stage) const {
  return [this, stage](const EpochLog& e) {
    log_ << stage << " epoch " << e.epoch << " train_loss " << std::setprecision(5) << e.train_loss << " valid_loss "
         << e.valid_loss << std::endl;
  };
}

void Pipeline::gen_data(std::size_t n) {
  const auto ds = gen_synthetic_corpus(cfg_.seed, n);
  if (cfg_.corpus.has_parent_path()) std::filesystem::create_directories(cfg_.corpus.parent_path());
  save_corpus(cfg_.corpus, ds);
  log_ << "wrote " << ds.size() << " dialogues to " << cfg_.corpus.string() << std::endl;
}

void Pipeline::prepare() {
  ensure_unlocked();
  const auto ds = corpus();
  std::size_t violations = 0;
  for (const auto& d : ds) {
    for (const auto& v : validate_augmentation(d)) {
      log_ << "warning: " << v.dialogue_id << ": " << to_string(v.kind) << " " << v.detail << std::endl;
      ++violations;
    }
  }
  const Vocab v = Vocab::build(ds, cfg_.min_freq);
  v.save(layout().vocab());
  const CorpusStats s = corpus_stats(ds);
  Json j;
  j["dialogues"] = s.total;
  for (const auto& [k, n] : s.per_split) j["per_split"][to_string(k)] = n;
  for (const auto& [k, n] : s.per_kind) j["per_kind"][to_string(k)] = n;
  for (const auto& [k, n] : s.per_domain) j["per_domain"][k] = n;
  j["task_samples"] = s.task_samples;
  j["chitchat_samples"] = s.chitchat_samples;
  j["classifier_samples"] = s.classifier_samples;
  j["vocab_size"] = v.size();
  j["augmentation_violations"] = violations;
  write_file_atomic(layout().stats(), j.dump(2) + "\n");
  log_ << "vocab " << v.size() << " tokens, " << s.total << " dialogues" << std::endl;
}

void Pipeline::train_unified() {
  ensure_unlocked();
  const auto ds = corpus();
  const Vocab v = vocab();
  auto [m, out] = modeswitch::train_unified(ds, v, cfg_.decoder, cfg_.train.unified, hook("unified"));
  m.save(layout().checkpoint("unified"));
  write_log("unified", {{"fit", out.fit.to_json()},
                        {"train_token_accuracy", out.train_tally.accuracy()},
                        {"train_token_loss", out.train_tally.mean_loss()}});
  log_ << "unified: train token accuracy " << out.train_tally.accuracy() << "%" << std::endl;
}

void Pipeline::train_classifier() {
  ensure_unlocked();
  const auto ds = corpus();
  const Vocab v = vocab();
  auto [m, out] = modeswitch::train_classifier(ds, v, cfg_.encoder, cfg_.train.classifier, hook("classifier"));
  m.save(layout().checkpoint("classifier"));
  write_log("classifier", {{"fit", out.fit.to_json()}, {"train", out.train_report.to_json()}});
  log_ << "classifier: ccto accuracy " << out.train_report.ccto.accuracy << "%, ttnt weighted f1 "
       << out.train_report.ttnt.f1 << "%" << std::endl;
}

void Pipeline::train_discrete(bool ablation) {
  ensure_unlocked();
  const std::string kind = ablation ? "ablation" : "discrete";
  const std::string stage = ablation ? "train-discrete --ablation" : "train-discrete";
  require(stage, layout().checkpoint("unified"));
  const auto ds = corpus();
  const LmModel unified = LmModel::load(layout().checkpoint("unified"));
  auto [m, out] = modeswitch::train_discrete(unified, ds, cfg_.train.discrete, ablation, hook(kind));
  m.save(layout().checkpoint(kind));
  write_log(kind, {{"fit", out.fit.to_json()},
                   {"train_token_accuracy", out.train_tally.accuracy()},
                   {"train_token_loss", out.train_tally.mean_loss()}});
  log_ << kind << ": train token accuracy " << out.train_tally.accuracy() << "%" << std::endl;
}

void Pipeline::train_bridge() {
  ensure_unlocked();
  require("train-bridge", layout().checkpoint("discrete"));
  require("train-bridge", layout().checkpoint("classifier"));
  const auto ds = corpus();
  ClassifierModel cls = ClassifierModel::load(layout().checkpoint("classifier"));
  LmModel lm = LmModel::load(layout().checkpoint("discrete"));
  auto [m, out] = modeswitch::train_bridge(cls, lm, ds, cfg_.train.bridge, hook("bridge"));
  m.save(layout().checkpoint("bridge"));
  write_log("bridge", {{"fit", out.fit.to_json()},
                       {"train_prompt_accuracy", out.prompt_accuracy},
                       {"train_loss", out.mean_loss}});
  log_ << "bridge: train prompt accuracy " << out.prompt_accuracy << "%" << std::endl;
}

EvalReport Pipeline::evaluate(const std::string& model, Split split) {
  const auto ds = corpus();
  const RunLayout l = layout();
  const std::string stage = "evaluate --model " + model;
  std::optional<LmModel> lm;
  std::optional<ClassifierModel> cls;
  std::optional<BridgeModel> bridge;
  if (model == "unified" || model == "discrete" || model == "ablation") {
    require(stage, l.checkpoint(model));
    lm = LmModel::load(l.checkpoint(model));
  } else if (model == "continuous") {
    for (const char* k : {"discrete", "classifier", "bridge"}) require(stage, l.checkpoint(k));
    lm = LmModel::load(l.checkpoint("discrete"));
    cls = ClassifierModel::load(l.checkpoint("classifier"));
    bridge = BridgeModel::load(l.checkpoint("bridge"));
    bridge->verify(*cls, *lm);
  } else {
    throw std::invalid_argument("unknown model '" + model + "' (expected unified, discrete, ablation or continuous)");
  }
  SuiteModels m{model, &*lm, cls ? &*cls : nullptr, bridge ? &*bridge : nullptr};
  EvalReport r = evaluate_suite(m, ds, split, cfg_.seed, cfg_.decode);
  std::filesystem::create_directories(l.report(model, split).parent_path());
  write_file_atomic(l.report(model, split), r.to_json().dump(2) + "\n");
  log_ << "wrote " << l.report(model, split).string() << std::endl;
  return r;
}

}  // namespace modeswitch
