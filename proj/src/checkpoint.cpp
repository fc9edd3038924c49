#include "modeswitch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace modeswitch {

namespace {

constexpr char kMagic[8] = {'M', 'S', 'C', 'K', 'P', 'T', '\0', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw CheckpointError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void Checkpoint::capture(const nn::ParamStore& ps) {
  tensors.clear();
  for (const nn::Param* p : ps.params()) tensors.emplace_back(p->name, p->value);
}

void Checkpoint::apply_to(nn::ParamStore& ps) const {
  if (tensors.size() != ps.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) + " tensors, model expects " +
                          std::to_string(ps.size()));
  }
  for (const auto& [name, value] : tensors) {
    if (!ps.contains(name)) throw CheckpointError("unexpected tensor " + name);
    nn::Param& p = ps.at(name);
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols()) {
      throw CheckpointError("shape mismatch for " + name + ": file [" + std::to_string(value.rows()) + "," +
                            std::to_string(value.cols()) + "], model [" + std::to_string(p.value.rows()) + "," +
                            std::to_string(p.value.cols()) + "]");
    }
    p.value = value;
  }
}

std::string Checkpoint::serialize() const {
  Json header;
  header["kind"] = kind;
  header["config"] = config;
  header["metadata"] = metadata;
  header["vocab"] = vocab;
  header["seed"] = seed;
  Json table = Json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, value] : tensors) {
    table.push_back({{"name", name}, {"shape", {value.rows(), value.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(value.size());
  }
  header["tensors"] = table;
  const std::string h = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, h.size());
  out += h;
  out.reserve(out.size() + offset * sizeof(double));
  for (const auto& t : tensors) {
    out.append(reinterpret_cast<const char*>(t.second.data()), sizeof(double) * static_cast<std::size_t>(t.second.size()));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = get<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw CheckpointError("checkpoint header truncated");
  Json header;
  try {
    header = Json::parse(bytes.substr(pos, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  pos += hlen;

  Checkpoint c;
  try {
    c.kind = header.at("kind").get<std::string>();
    c.config = header.at("config");
    c.metadata = header.at("metadata");
    c.vocab = header.at("vocab").get<std::vector<std::string>>();
    c.seed = header.at("seed").get<std::uint64_t>();
    const std::size_t payload = pos;
    for (const auto& entry : header.at("tensors")) {
      const auto rows = entry.at("shape").at(0).get<nn::Index>();
      const auto cols = entry.at("shape").at(1).get<nn::Index>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      if (rows < 0 || cols < 0) throw CheckpointError("negative tensor shape");
      const std::size_t begin = payload + offset * sizeof(double);
      const std::size_t len = static_cast<std::size_t>(rows * cols) * sizeof(double);
      if (begin + len > bytes.size()) throw CheckpointError("tensor data truncated");
      nn::Matrix m(rows, cols);
      std::memcpy(m.data(), bytes.data() + begin, len);
      c.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("bad checkpoint header: ") + e.what());
  }
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void Checkpoint::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

Checkpoint Checkpoint::load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace modeswitch
