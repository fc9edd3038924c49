#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace modeswitch {

/// Incremental SHA-256, hex-encoded on finish.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size);
  void update(std::string_view s) { update(s.data(), s.size()); }
  std::string hex();

 private:
  void* ctx_;
};

std::string sha256_hex(std::string_view bytes);

/// splitmix64 finalizer; derives independent seeds from (base, key) pairs.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t key);
std::uint64_t mix_seed(std::uint64_t base, std::string_view key);

}  // namespace modeswitch
