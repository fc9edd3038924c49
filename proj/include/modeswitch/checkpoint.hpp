#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "modeswitch/nn/tape.hpp"

namespace modeswitch {

using Json = nlohmann::ordered_json;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container: 8-byte magic, u32 version, u64 header size, JSON header,
/// then every tensor as little-endian f64 in table order.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::string kind;  // "unified", "discrete", "classifier", "bridge"
  Json config = Json::object();
  Json metadata = Json::object();
  std::vector<std::string> vocab;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, nn::Matrix>> tensors;

  /// Copies every parameter of the store.
  void capture(const nn::ParamStore& ps);
  /// Writes tensors into an existing store. Names and shapes must match
  /// exactly, in both directions.
  void apply_to(nn::ParamStore& ps) const;

  std::string serialize() const;
  static Checkpoint deserialize(const std::string& bytes);

  /// Atomic: writes a sibling temp file then renames.
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

/// Reads a whole file; throws CheckpointError when unreadable.
std::string read_file(const std::filesystem::path& path);
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace modeswitch
