#include "modeswitch/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "modeswitch/digest.hpp"

namespace modeswitch::nn {

// --- ParamStore ---------------------------------------------------------------

Param& ParamStore::add(const std::string& name, Index rows, Index cols, bool decay) {
  if (by_name_.contains(name)) throw std::invalid_argument("duplicate parameter: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Matrix::Zero(rows, cols);
  p->grad = Matrix::Zero(rows, cols);
  p->decay = decay;
  Param& ref = *p;
  by_name_.emplace(name, p.get());
  params_.push_back(std::move(p));
  return ref;
}

Param& ParamStore::add_normal(const std::string& name, Index rows, Index cols, double stddev, Rng& rng) {
  Param& p = add(name, rows, cols, true);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = dist(rng);
  return p;
}

Param& ParamStore::at(std::string_view name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return *it->second;
}

const Param& ParamStore::at(std::string_view name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw std::out_of_range("no parameter named " + std::string(name));
  return *it->second;
}

bool ParamStore::contains(std::string_view name) const { return by_name_.find(name) != by_name_.end(); }

std::vector<Param*> ParamStore::params() {
  std::vector<Param*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Param*> ParamStore::params() const {
  std::vector<const Param*> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

void ParamStore::set_trainable(bool trainable) {
  for (auto& p : params_) p->trainable = trainable;
}

bool ParamStore::any_trainable() const {
  return std::any_of(params_.begin(), params_.end(), [](const auto& p) { return p->trainable; });
}

std::string ParamStore::digest() const {
  Sha256 h;
  for (const auto& p : params_) {
    h.update(p->name);
    h.update("\0", 1);
    const std::int64_t shape[2] = {p->value.rows(), p->value.cols()};
    h.update(shape, sizeof shape);
    h.update(p->value.data(), sizeof(double) * static_cast<std::size_t>(p->value.size()));
  }
  return h.hex();
}

std::vector<Matrix> ParamStore::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParamStore::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params_[i]->value.rows() || values[i].cols() != params_[i]->value.cols()) {
      throw std::invalid_argument("snapshot shape mismatch for " + params_[i]->name);
    }
    params_[i]->value = values[i];
  }
}

// --- Tape ---------------------------------------------------------------------

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("use of an empty Var");
  return tape_->value(*this);
}

Var Tape::constant(Matrix m) { return push(std::move(m), false, nullptr); }

Var Tape::input(Matrix m) { return push(std::move(m), true, nullptr); }

Var Tape::param(Param& p) {
  Node n;
  n.ref = &p.value;
  n.param = &p;
  n.requires_grad = p.trainable;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Tape::value(const Var& v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id_));
  return n.ref != nullptr ? *n.ref : n.value;
}

const Matrix& Tape::grad(const Var& v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id_));
  return n.grad.size() == 0 ? empty_ : n.grad;
}

bool Tape::requires_grad(const Var& v) const { return nodes_.at(static_cast<std::size_t>(v.id_)).requires_grad; }

Var Tape::push(Matrix value, bool requires_grad, Backward pullback) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.pullback = std::move(pullback);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Matrix& Tape::grad_acc(const Var& v) {
  Node& n = nodes_.at(static_cast<std::size_t>(v.id_));
  if (n.grad.size() == 0) {
    const Matrix& val = n.ref != nullptr ? *n.ref : n.value;
    n.grad = Matrix::Zero(val.rows(), val.cols());
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw std::invalid_argument("loss belongs to another tape");
  const Matrix& lv = value(loss);
  if (lv.rows() != 1 || lv.cols() != 1) throw std::invalid_argument("backward needs a scalar loss");
  if (!requires_grad(loss)) return;
  grad_acc(loss).setOnes();
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->trainable) {
        if (n.param->grad.size() == 0) n.param->grad = Matrix::Zero(n.grad.rows(), n.grad.cols());
        n.param->grad += n.grad;
      }
    } else if (n.pullback) {
      n.pullback(*this, n.value, n.grad);
    }
  }
}

// --- ops ------------------------------------------------------------------------

namespace {

Tape& same_tape(const Var& a, const Var& b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) throw std::invalid_argument("vars on different tapes");
  return *a.tape();
}

bool any_grad(const Var& a) { return a.tape()->requires_grad(a); }
bool any_grad(const Var& a, const Var& b) { return any_grad(a) || any_grad(b); }

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

template <class F, class D>
Var unary(const Var& a, F f, D dydx) {
  Tape& t = *a.tape();
  return t.push(a.value().unaryExpr(f), any_grad(a), [a, dydx](Tape& tp, const Matrix& y, const Matrix& g) {
    if (!tp.requires_grad(a)) return;
    const Matrix& x = a.value();
    Matrix& ga = tp.grad_acc(a);
    for (Index i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * dydx(x.data()[i], y.data()[i]);
  });
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix y = a.value() * b.value();
  return t.push(std::move(y), any_grad(a, b), [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(a)) tp.grad_acc(a).noalias() += g * b.value().transpose();
    if (tp.requires_grad(b)) tp.grad_acc(b).noalias() += a.value().transpose() * g;
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
  Matrix y = a.value() * b.value().transpose();
  return t.push(std::move(y), any_grad(a, b), [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(a)) tp.grad_acc(a).noalias() += g * b.value();
    if (tp.requires_grad(b)) tp.grad_acc(b).noalias() += g.transpose() * a.value();
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "add");
  return t.push(a.value() + b.value(), any_grad(a, b), [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(a)) tp.grad_acc(a) += g;
    if (tp.requires_grad(b)) tp.grad_acc(b) += g;
  });
}

Var add_row(const Var& a, const Var& row) {
  Tape& t = same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  Matrix y = a.value().rowwise() + row.value().row(0);
  return t.push(std::move(y), any_grad(a, row), [a, row](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(a)) tp.grad_acc(a) += g;
    if (tp.requires_grad(row)) tp.grad_acc(row) += g.colwise().sum();
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b);
  check_same_shape(a.value(), b.value(), "mul");
  Matrix y = a.value().cwiseProduct(b.value());
  return t.push(std::move(y), any_grad(a, b), [a, b](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(a)) tp.grad_acc(a) += g.cwiseProduct(b.value());
    if (tp.requires_grad(b)) tp.grad_acc(b) += g.cwiseProduct(a.value());
  });
}

Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  return t.push(a.value() * s, any_grad(a), [a, s](Tape& tp, const Matrix&, const Matrix& g) {
    tp.grad_acc(a) += g * s;
  });
}

Var gelu(const Var& a) {
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double th = std::tanh(kGeluC * (x + 0.044715 * x * x * x));
        return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  Tape& t = same_tape(x, gamma);
  const Matrix& xv = x.value();
  const Index n = xv.rows(), c = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw std::invalid_argument("layer_norm: gamma/beta must be [1, cols]");
  }
  auto xhat = std::make_shared<Matrix>(n, c);
  auto rstd = std::make_shared<Eigen::VectorXd>(n);
  for (Index i = 0; i < n; ++i) {
    const double mean = xv.row(i).mean();
    const double var = (xv.row(i).array() - mean).square().mean();
    (*rstd)(i) = 1.0 / std::sqrt(var + eps);
    xhat->row(i) = (xv.row(i).array() - mean) * (*rstd)(i);
  }
  Matrix y = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  const bool rg = any_grad(x) || any_grad(gamma) || any_grad(beta);
  return t.push(std::move(y), rg, [x, gamma, beta, xhat, rstd](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(gamma)) tp.grad_acc(gamma) += g.cwiseProduct(*xhat).colwise().sum();
    if (tp.requires_grad(beta)) tp.grad_acc(beta) += g.colwise().sum();
    if (!tp.requires_grad(x)) return;
    Matrix& gx = tp.grad_acc(x);
    const double c = static_cast<double>(g.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      const RowVector dxhat = g.row(i).cwiseProduct(gamma.value().row(0));
      const double s1 = dxhat.sum();
      const double s2 = dxhat.dot(xhat->row(i));
      gx.row(i).array() += ((*rstd)(i) / c) * (c * dxhat.array() - s1 - xhat->row(i).array() * s2);
    }
  });
}

Var dropout(const Var& x, double rate, const ForwardContext& ctx) {
  if (!ctx.dropout_active() || rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout rate must be < 1");
  Tape& t = *x.tape();
  auto mask = std::make_shared<Matrix>(x.rows(), x.cols());
  std::bernoulli_distribution keep(1.0 - rate);
  const double inv = 1.0 / (1.0 - rate);
  for (Index i = 0; i < mask->size(); ++i) mask->data()[i] = keep(*ctx.rng) ? inv : 0.0;
  return t.push(x.value().cwiseProduct(*mask), any_grad(x), [x, mask](Tape& tp, const Matrix&, const Matrix& g) {
    tp.grad_acc(x) += g.cwiseProduct(*mask);
  });
}

Var sum(const Var& a) {
  Tape& t = *a.tape();
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return t.push(std::move(y), any_grad(a), [a](Tape& tp, const Matrix&, const Matrix& g) {
    tp.grad_acc(a).array() += g(0, 0);
  });
}

Var embedding(const Var& table, std::span<const std::int32_t> ids) {
  Tape& t = *table.tape();
  const Matrix& tv = table.value();
  Matrix y(static_cast<Index>(ids.size()), tv.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= tv.rows()) throw std::out_of_range("embedding: token id out of range");
    y.row(static_cast<Index>(i)) = tv.row(ids[i]);
  }
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return t.push(std::move(y), any_grad(table), [table, idv = std::move(idv)](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix& gt = tp.grad_acc(table);
    for (std::size_t i = 0; i < idv.size(); ++i) gt.row(idv[i]) += g.row(static_cast<Index>(i));
  });
}

Var gather_rows(const Var& x, std::span<const Index> rows) {
  Tape& t = *x.tape();
  const Matrix& xv = x.value();
  Matrix y(static_cast<Index>(rows.size()), xv.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= xv.rows()) throw std::out_of_range("gather_rows: row out of range");
    y.row(static_cast<Index>(i)) = xv.row(rows[i]);
  }
  std::vector<Index> rv(rows.begin(), rows.end());
  return t.push(std::move(y), any_grad(x), [x, rv = std::move(rv)](Tape& tp, const Matrix&, const Matrix& g) {
    Matrix& gx = tp.grad_acc(x);
    for (std::size_t i = 0; i < rv.size(); ++i) gx.row(rv[i]) += g.row(static_cast<Index>(i));
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Tape& t = *parts.front().tape();
  const Index c = parts.front().cols();
  Index n = 0;
  bool rg = false;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw std::invalid_argument("vars on different tapes");
    if (p.cols() != c) throw std::invalid_argument("concat_rows: column mismatch");
    n += p.rows();
    rg = rg || any_grad(p);
  }
  Matrix y(n, c);
  Index r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> pv(parts.begin(), parts.end());
  return t.push(std::move(y), rg, [pv = std::move(pv)](Tape& tp, const Matrix&, const Matrix& g) {
    Index off = 0;
    for (const Var& p : pv) {
      if (tp.requires_grad(p)) tp.grad_acc(p) += g.middleRows(off, p.rows());
      off += p.rows();
    }
  });
}

Var slice_cols(const Var& x, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > x.cols()) throw std::out_of_range("slice_cols: bad range");
  Tape& t = *x.tape();
  Matrix y = x.value().middleCols(start, count);
  return t.push(std::move(y), any_grad(x), [x, start, count](Tape& tp, const Matrix&, const Matrix& g) {
    tp.grad_acc(x).middleCols(start, count) += g;
  });
}

Var overwrite_rows(const Var& x, std::span<const Index> rows, const Var& src) {
  Tape& t = same_tape(x, src);
  if (static_cast<Index>(rows.size()) != src.rows() || src.cols() != x.cols()) {
    throw std::invalid_argument("overwrite_rows: shape mismatch");
  }
  Matrix y = x.value();
  std::vector<Index> rv(rows.begin(), rows.end());
  for (std::size_t i = 0; i < rv.size(); ++i) {
    if (rv[i] < 0 || rv[i] >= y.rows()) throw std::out_of_range("overwrite_rows: row out of range");
    y.row(rv[i]) = src.value().row(static_cast<Index>(i));
  }
  return t.push(std::move(y), any_grad(x, src), [x, src, rv = std::move(rv)](Tape& tp, const Matrix&, const Matrix& g) {
    if (tp.requires_grad(x)) {
      Matrix gx = g;
      for (Index r : rv) gx.row(r).setZero();
      tp.grad_acc(x) += gx;
    }
    if (tp.requires_grad(src)) {
      Matrix& gs = tp.grad_acc(src);
      for (std::size_t i = 0; i < rv.size(); ++i) gs.row(static_cast<Index>(i)) += g.row(rv[i]);
    }
  });
}

Var attention(const Var& q, const Var& k, const Var& v, std::span<const Segment> segments, int heads,
              bool causal) {
  Tape& t = same_tape(q, k);
  const Index n = q.rows(), width = q.cols();
  if (heads <= 0 || width % heads != 0) throw std::invalid_argument("attention: width not divisible by heads");
  if (k.rows() != n || v.rows() != n || k.cols() != width || v.cols() != width) {
    throw std::invalid_argument("attention: q/k/v shape mismatch");
  }
  const Index d = width / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(d));
  const Matrix& qv = q.value();
  const Matrix& kv = k.value();
  const Matrix& vv = v.value();
  std::vector<Segment> segs(segments.begin(), segments.end());
  // Softmax weights per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>();
  probs->reserve(segs.size() * static_cast<std::size_t>(heads));
  Matrix y = Matrix::Zero(n, width);
  for (const Segment& s : segs) {
    if (s.start < 0 || s.length <= 0 || s.start + s.length > n) throw std::out_of_range("attention: bad segment");
    for (int h = 0; h < heads; ++h) {
      const Index c0 = h * d;
      Matrix sm = (qv.block(s.start, c0, s.length, d) * kv.block(s.start, c0, s.length, d).transpose()) * sc;
      for (Index i = 0; i < s.length; ++i) {
        const Index lim = causal ? i + 1 : s.length;
        const double mx = sm.row(i).head(lim).maxCoeff();
        double z = 0.0;
        for (Index j = 0; j < lim; ++j) {
          sm(i, j) = std::exp(sm(i, j) - mx);
          z += sm(i, j);
        }
        sm.row(i).head(lim) /= z;
        if (lim < s.length) sm.row(i).tail(s.length - lim).setZero();
      }
      y.block(s.start, c0, s.length, d).noalias() = sm * vv.block(s.start, c0, s.length, d);
      probs->push_back(std::move(sm));
    }
  }
  const bool rg = any_grad(q) || any_grad(k) || any_grad(v);
  return t.push(std::move(y), rg, [q, k, v, segs = std::move(segs), probs, heads, d, sc](Tape& tp, const Matrix&,
                                                                                        const Matrix& g) {
    const bool gq = tp.requires_grad(q), gk = tp.requires_grad(k), gv = tp.requires_grad(v);
    Matrix dummy;
    Matrix& dq = gq ? tp.grad_acc(q) : dummy;
    Matrix& dk = gk ? tp.grad_acc(k) : dummy;
    Matrix& dv = gv ? tp.grad_acc(v) : dummy;
    const Matrix& qv = q.value();
    const Matrix& kv = k.value();
    const Matrix& vv = v.value();
    std::size_t pi = 0;
    for (const Segment& s : segs) {
      for (int h = 0; h < heads; ++h, ++pi) {
        const Index c0 = h * d;
        const Matrix& p = (*probs)[pi];
        const auto go = g.block(s.start, c0, s.length, d);
        if (gv) dv.block(s.start, c0, s.length, d).noalias() += p.transpose() * go;
        if (!gq && !gk) continue;
        Matrix dp = go * vv.block(s.start, c0, s.length, d).transpose();
        const Eigen::VectorXd rs = dp.cwiseProduct(p).rowwise().sum();
        Matrix ds = p.cwiseProduct(dp.colwise() - rs);
        ds *= sc;
        if (gq) dq.block(s.start, c0, s.length, d).noalias() += ds * kv.block(s.start, c0, s.length, d);
        if (gk) dk.block(s.start, c0, s.length, d).noalias() += ds.transpose() * qv.block(s.start, c0, s.length, d);
      }
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets) {
  std::vector<bool> mask(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) mask[i] = targets[i] != kIgnoreTarget;
  return cross_entropy(logits, targets, mask);
}

Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets, const std::vector<bool>& mask) {
  Tape& t = *logits.tape();
  const Matrix& lv = logits.value();
  if (static_cast<Index>(targets.size()) != lv.rows() || mask.size() != targets.size()) {
    throw std::invalid_argument("cross_entropy: one target per row required");
  }
  std::vector<Index> rows;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!mask[i]) continue;
    if (targets[i] < 0 || targets[i] >= lv.cols()) throw std::out_of_range("cross_entropy: target out of range");
    rows.push_back(static_cast<Index>(i));
  }
  if (rows.empty()) throw std::invalid_argument("cross_entropy: every row is masked");
  auto probs = std::make_shared<Matrix>(static_cast<Index>(rows.size()), lv.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto row = lv.row(rows[r]);
    const double mx = row.maxCoeff();
    auto e = (row.array() - mx).exp();
    const double z = e.sum();
    probs->row(static_cast<Index>(r)) = e / z;
    total += -(row(targets[static_cast<std::size_t>(rows[r])]) - mx - std::log(z));
  }
  const double count = static_cast<double>(rows.size());
  Matrix y(1, 1);
  y(0, 0) = total / count;
  std::vector<std::int32_t> tg(targets.begin(), targets.end());
  return t.push(std::move(y), any_grad(logits),
                [logits, probs, rows = std::move(rows), tg = std::move(tg), count](Tape& tp, const Matrix&,
                                                                                   const Matrix& g) {
                  Matrix& gl = tp.grad_acc(logits);
                  const double s = g(0, 0) / count;
                  for (std::size_t r = 0; r < rows.size(); ++r) {
                    gl.row(rows[r]) += probs->row(static_cast<Index>(r)) * s;
                    gl(rows[r], tg[static_cast<std::size_t>(rows[r])]) -= s;
                  }
                });
}

}  // namespace modeswitch::nn
