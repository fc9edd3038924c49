#include <doctest.h>

#include <fstream>

#include "modeswitch/unified_lm.hpp"
#include "support.hpp"

using namespace modeswitch;

namespace {

LmModel toy_lm() {
  const auto ds = gen_synthetic_corpus(1, 4);
  const Vocab v = Vocab::build(ds, 1);
  return {"unified", v, Decoder(testing::toy_config(static_cast<std::int64_t>(v.size())), 3), 3, {{"note", "x"}}};
}

}  // namespace

TEST_CASE("checkpoint round trip is exact") {
  testing::TempDir dir("ckpt");
  const LmModel m = toy_lm();
  m.save(dir / "m.ckpt");
  const LmModel back = LmModel::load(dir / "m.ckpt");
  CHECK(back.kind == "unified");
  CHECK(back.vocab == m.vocab);
  CHECK(back.seed == 3);
  CHECK(back.decoder.config() == m.decoder.config());
  CHECK(back.decoder.params().digest() == m.decoder.params().digest());
  CHECK(back.to_checkpoint().serialize() == m.to_checkpoint().serialize());
  const TokenSeq s = {0, 12, 13, 1};
  CHECK(back.decoder.logits(s) == m.decoder.logits(s));
}

TEST_CASE("corrupt or mismatched checkpoints are refused") {
  const LmModel m = toy_lm();
  std::string bytes = m.to_checkpoint().serialize();
  CHECK_THROWS_AS(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 8)), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(Checkpoint::deserialize(bad_magic), CheckpointError);

  Checkpoint c = m.to_checkpoint();
  c.tensors.erase(c.tensors.begin());
  CHECK_THROWS_AS(LmModel::from_checkpoint(c), CheckpointError);

  Checkpoint k = m.to_checkpoint();
  k.kind = "classifier";
  CHECK_THROWS_AS(LmModel::from_checkpoint(k), CheckpointError);
}

TEST_CASE("writes are atomic and leave no temporary files") {
  testing::TempDir dir("atomic");
  write_file_atomic(dir / "f.bin", "abc");
  write_file_atomic(dir / "f.bin", "defg");
  CHECK(read_file(dir / "f.bin") == "defg");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  CHECK(files == 1);
}
