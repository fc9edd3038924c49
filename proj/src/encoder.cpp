#include "modeswitch/encoder.hpp"

#include <stdexcept>
#include <string>

namespace modeswitch {

using nn::Index;
using nn::Var;

Encoder::Encoder(const ModelConfig& cfg, nn::ParamStore& ps, const std::string& prefix, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  wte_ = &ps.add_normal(prefix + "wte", cfg_.vocab_size, cfg_.embed_dim, nn::kInitStd, rng);
  wpe_ = &ps.add_normal(prefix + "wpe", cfg_.max_len, cfg_.embed_dim, nn::kInitStd, rng);
  ln_emb_ = nn::LayerNorm::create(ps, prefix + "ln_emb", cfg_.embed_dim);
  for (int i = 0; i < cfg_.layers; ++i) {
    blocks_.push_back(nn::TransformerBlock::create(ps, prefix + "h" + std::to_string(i), cfg_.embed_dim, cfg_.heads,
                                                   cfg_.ff_dim, nn::NormPlacement::post, cfg_.dropout, rng));
  }
}

Encoder::Encoder(const ModelConfig& cfg, nn::ParamStore& ps, const std::string& prefix) : cfg_(cfg) {
  cfg_.validate();
  wte_ = &ps.at(prefix + "wte");
  wpe_ = &ps.at(prefix + "wpe");
  ln_emb_ = nn::LayerNorm::bind(ps, prefix + "ln_emb");
  for (int i = 0; i < cfg_.layers; ++i) {
    blocks_.push_back(nn::TransformerBlock::bind(ps, prefix + "h" + std::to_string(i), cfg_.heads,
                                                 nn::NormPlacement::post, cfg_.dropout));
  }
}

Var Encoder::forward(nn::Tape& t, std::span<const TokenSeq> batch, const nn::ForwardContext& ctx) const {
  if (batch.empty()) throw std::invalid_argument("encoder: empty batch");
  std::vector<TokenId> ids, positions;
  std::vector<nn::Segment> segs;
  for (const TokenSeq& seq : batch) {
    if (seq.empty() || seq.front() != id_of(Special::cls)) throw std::invalid_argument("encoder: input must start with [CLS]");
    if (static_cast<std::int64_t>(seq.size()) > cfg_.max_len) throw std::length_error("encoder: input exceeds max_len");
    segs.push_back({static_cast<Index>(ids.size()), static_cast<Index>(seq.size())});
    ids.insert(ids.end(), seq.begin(), seq.end());
    for (std::size_t i = 0; i < seq.size(); ++i) positions.push_back(static_cast<TokenId>(i));
  }
  Var x = nn::add(nn::embedding(t.param(*wte_), ids), nn::embedding(t.param(*wpe_), positions));
  x = nn::dropout(ln_emb_(t, x), cfg_.dropout, ctx);
  for (const auto& b : blocks_) x = b(t, x, segs, false, ctx);
  return x;
}

}  // namespace modeswitch
