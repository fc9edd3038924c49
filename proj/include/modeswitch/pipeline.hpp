#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "modeswitch/chat.hpp"
#include "modeswitch/config.hpp"

namespace modeswitch {

/// A stage was asked to run before the checkpoint it builds on exists.
class MissingPrerequisite : public std::runtime_error {
 public:
  MissingPrerequisite(const std::string& stage, const std::filesystem::path& needed)
      : std::runtime_error(stage + " requires " + needed.string() + " (run the earlier stage first)"),
        needed_(needed) {}
  const std::filesystem::path& needed() const { return needed_; }

 private:
  std::filesystem::path needed_;
};

/// Training refused because a server holds the output directory.
class OutputLocked : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Files under the output directory.
struct RunLayout {
  std::filesystem::path dir;

  std::filesystem::path vocab() const { return dir / "vocab.json"; }
  std::filesystem::path stats() const { return dir / "corpus_stats.json"; }
  std::filesystem::path checkpoint(const std::string& kind) const { return dir / (kind + ".ckpt"); }
  std::filesystem::path train_log(const std::string& kind) const { return dir / (kind + ".train.json"); }
  std::filesystem::path report(const std::string& model, Split split) const;
  std::filesystem::path lock() const { return dir / "serve.lock"; }
  std::filesystem::path sessions() const { return dir / "sessions"; }
};

/// Held by a running server; removed on destruction.
class ServeLock {
 public:
  explicit ServeLock(std::filesystem::path path);
  ~ServeLock();
  ServeLock(const ServeLock&) = delete;
  ServeLock& operator=(const ServeLock&) = delete;

 private:
  std::filesystem::path path_;
};

/// Progress lines go to `log`; artifacts go under cfg.out.
class Pipeline {
 public:
  Pipeline(RunConfig cfg, std::ostream& log);

  const RunConfig& config() const { return cfg_; }
  RunLayout layout() const { return {cfg_.out}; }

  /// Writes the seeded synthetic corpus to cfg.corpus.
  void gen_data(std::size_t n);
  /// Validates the corpus, then writes the vocabulary and corpus statistics.
  void prepare();
  void train_unified();
  void train_classifier();
  void train_discrete(bool ablation);
  void train_bridge();
  /// `model` is unified, discrete, ablation or continuous.
  EvalReport evaluate(const std::string& model, Split split);

 private:
  std::vector<Dialogue> corpus() const;
  Vocab vocab() const;
  void require(const std::string& stage, const std::filesystem::path& p) const;
  void ensure_unlocked() const;
  void write_log(const std::string& kind, const Json& j) const;
  EpochHook hook(const std::string& stage) const;

  RunConfig cfg_;
  std::ostream& log_;
};

}  // namespace modeswitch
