#include "modeswitch/decoder.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace modeswitch {

using nn::Index;
using nn::Matrix;
using nn::Var;

Decoder::Decoder(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  ps_.add_normal("wte", cfg_.vocab_size, cfg_.embed_dim, nn::kInitStd, rng);
  ps_.add_normal("wpe", cfg_.max_len, cfg_.embed_dim, nn::kInitStd, rng);
  for (int i = 0; i < cfg_.layers; ++i) {
    nn::TransformerBlock::create(ps_, "h" + std::to_string(i), cfg_.embed_dim, cfg_.heads, cfg_.ff_dim,
                                 nn::NormPlacement::pre, cfg_.dropout, rng);
  }
  nn::LayerNorm::create(ps_, "ln_f", cfg_.embed_dim);
  bind();
}

Decoder::Decoder(const ModelConfig& cfg, const Checkpoint& ckpt) : Decoder(cfg, 0) { ckpt.apply_to(ps_); }

void Decoder::bind() {
  wte_ = &ps_.at("wte");
  wpe_ = &ps_.at("wpe");
  blocks_.clear();
  for (int i = 0; i < cfg_.layers; ++i) {
    blocks_.push_back(
        nn::TransformerBlock::bind(ps_, "h" + std::to_string(i), cfg_.heads, nn::NormPlacement::pre, cfg_.dropout));
  }
  ln_f_ = nn::LayerNorm::bind(ps_, "ln_f");
}

Var Decoder::hidden(nn::Tape& t, std::span<const TokenSeq> batch, const Var* prompt_override,
                    const nn::ForwardContext& ctx) const {
  if (batch.empty()) throw std::invalid_argument("decoder: empty batch");
  std::vector<TokenId> ids;
  std::vector<TokenId> positions;
  std::vector<nn::Segment> segs;
  std::vector<Index> prompt_rows;
  for (const TokenSeq& seq : batch) {
    if (seq.empty()) throw std::invalid_argument("decoder: empty sequence");
    if (static_cast<std::int64_t>(seq.size()) > cfg_.max_len) {
      throw std::length_error("decoder: sequence of " + std::to_string(seq.size()) + " tokens exceeds max_len " +
                              std::to_string(cfg_.max_len));
    }
    if (prompt_override != nullptr && seq.size() < 2) {
      throw std::invalid_argument("decoder: prompt override needs at least 2 positions");
    }
    const auto start = static_cast<Index>(ids.size());
    segs.push_back({start, static_cast<Index>(seq.size())});
    prompt_rows.push_back(start);
    prompt_rows.push_back(start + 1);
    ids.insert(ids.end(), seq.begin(), seq.end());
    for (std::size_t i = 0; i < seq.size(); ++i) positions.push_back(static_cast<TokenId>(i));
  }
  Var x = nn::embedding(t.param(*wte_), ids);
  if (prompt_override != nullptr) {
    if (prompt_override->rows() != static_cast<Index>(2 * batch.size()) || prompt_override->cols() != cfg_.embed_dim) {
      throw std::invalid_argument("decoder: prompt override must be [2 * batch, embed_dim]");
    }
    x = nn::overwrite_rows(x, prompt_rows, *prompt_override);
  }
  x = nn::add(x, nn::embedding(t.param(*wpe_), positions));
  x = nn::dropout(x, cfg_.dropout, ctx);
  for (const auto& b : blocks_) x = b(t, x, segs, true, ctx);
  return ln_f_(t, x);
}

Var Decoder::head(nn::Tape& t, const Var& h) const { return nn::matmul_nt(h, t.param(*wte_)); }

Matrix Decoder::logits(const TokenSeq& tokens, const std::optional<Matrix>& prompt_override) const {
  nn::Tape t;
  const TokenSeq batch[1] = {tokens};
  if (prompt_override) {
    Var o = t.constant(*prompt_override);
    return head(t, hidden(t, batch, &o, {})).value();
  }
  return head(t, hidden(t, batch, nullptr, {})).value();
}

Matrix Decoder::word_embeddings(std::span<const TokenId> ids) const {
  Matrix m(static_cast<Index>(ids.size()), cfg_.embed_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) m.row(static_cast<Index>(i)) = wte_->value.row(ids[i]);
  return m;
}

void Decoder::reinit_embeddings(std::span<const TokenId> ids, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<double> dist(0.0, nn::kInitStd);
  for (TokenId id : ids) {
    if (id < 0 || id >= wte_->value.rows()) throw std::out_of_range("reinit_embeddings: bad token id");
    for (Index c = 0; c < wte_->value.cols(); ++c) wte_->value(id, c) = dist(rng);
  }
}

// --- incremental inference -------------------------------------------------------

Decoder::Session::Session(const Decoder& d, std::optional<Matrix> prompt_override)
    : d_(&d), override_(std::move(prompt_override)) {
  if (override_ && (override_->rows() != 2 || override_->cols() != d.cfg_.embed_dim)) {
    throw std::invalid_argument("decoder session: prompt override must be [2, embed_dim]");
  }
  k_.assign(d.blocks_.size(), Matrix(0, d.cfg_.embed_dim));
  v_.assign(d.blocks_.size(), Matrix(0, d.cfg_.embed_dim));
}

nn::RowVector Decoder::Session::feed(std::span<const TokenId> tokens) {
  const Decoder& d = *d_;
  const Index n = static_cast<Index>(tokens.size());
  if (n == 0) throw std::invalid_argument("decoder session: nothing to feed");
  if (len_ + n > d.cfg_.max_len) throw std::length_error("decoder session: exceeds max_len");
  const Index e = d.cfg_.embed_dim;
  Matrix x(n, e);
  for (Index i = 0; i < n; ++i) {
    const Index pos = len_ + i;
    const TokenId id = tokens[static_cast<std::size_t>(i)];
    if (id < 0 || id >= d.wte_->value.rows()) throw std::out_of_range("decoder session: token id out of range");
    x.row(i) = (override_ && pos < 2) ? override_->row(pos) : d.wte_->value.row(id);
    x.row(i) += d.wpe_->value.row(pos);
  }
  const int heads = d.cfg_.heads;
  const Index hd = e / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
  for (std::size_t l = 0; l < d.blocks_.size(); ++l) {
    const auto& b = d.blocks_[l];
    const Matrix qkv = b.attn.qkv.apply(b.ln1.apply(x));
    Matrix& kc = k_[l];
    Matrix& vc = v_[l];
    kc.conservativeResize(len_ + n, Eigen::NoChange);
    vc.conservativeResize(len_ + n, Eigen::NoChange);
    kc.bottomRows(n) = qkv.middleCols(e, e);
    vc.bottomRows(n) = qkv.middleCols(2 * e, e);
    Matrix att(n, e);
    for (int h = 0; h < heads; ++h) {
      const Index c0 = h * hd;
      Matrix s = (qkv.block(0, c0, n, hd) * kc.middleCols(c0, hd).transpose()) * sc;
      for (Index i = 0; i < n; ++i) {
        const Index lim = len_ + i + 1;
        const double mx = s.row(i).head(lim).maxCoeff();
        s.row(i).head(lim) = (s.row(i).head(lim).array() - mx).exp();
        s.row(i).head(lim) /= s.row(i).head(lim).sum();
        if (lim < s.cols()) s.row(i).tail(s.cols() - lim).setZero();
      }
      att.middleCols(c0, hd) = s * vc.middleCols(c0, hd);
    }
    x += b.attn.out.apply(att);
    x += b.ff.apply(b.ln2.apply(x));
  }
  len_ += n;
  const Matrix last = d.ln_f_.apply(x.bottomRows(1));
  return last * d.wte_->value.transpose();
}

}  // namespace modeswitch
