#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "modeswitch/corpus.hpp"
#include "modeswitch/model_config.hpp"

namespace testing {

/// Fresh directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("modeswitch-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline modeswitch::ModelConfig toy_config(std::int64_t vocab, std::int64_t dim = 16, int layers = 2,
                                         std::int64_t max_len = 64) {
  modeswitch::ModelConfig c;
  c.vocab_size = vocab;
  c.embed_dim = dim;
  c.layers = layers;
  c.heads = 2;
  c.ff_dim = 2 * dim;
  c.max_len = max_len;
  c.dropout = 0.1;
  return c;
}

inline modeswitch::DialogueTurn user(std::string text, modeswitch::Mode m = modeswitch::Mode::chitchat) {
  modeswitch::DialogueTurn t;
  t.speaker = modeswitch::Speaker::user;
  t.text = std::move(text);
  t.mode = m;
  return t;
}

inline modeswitch::DialogueTurn sys(std::string text, modeswitch::Mode m = modeswitch::Mode::chitchat) {
  modeswitch::DialogueTurn t = user(std::move(text), m);
  t.speaker = modeswitch::Speaker::system;
  return t;
}

}  // namespace testing
