#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Reverse-mode differentiation over row-major matrices. Rows are positions
// (tokens, batch items), columns are features.

namespace modeswitch::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;
  bool decay = true;  // subject to weight decay
};

/// Owns parameters with stable addresses, in insertion order.
class ParamStore {
 public:
  ParamStore() = default;
  ParamStore(ParamStore&&) noexcept = default;
  ParamStore& operator=(ParamStore&&) noexcept = default;
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Param& add(const std::string& name, Index rows, Index cols, bool decay = true);
  /// Normal(0, stddev) initialization.
  Param& add_normal(const std::string& name, Index rows, Index cols, double stddev, Rng& rng);

  Param& at(std::string_view name);
  const Param& at(std::string_view name) const;
  bool contains(std::string_view name) const;

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  void set_trainable(bool trainable);
  bool any_trainable() const;

  /// SHA-256 over names, shapes and raw values.
  std::string digest() const;

  std::vector<Matrix> snapshot() const;
  void restore(const std::vector<Matrix>& values);

 private:
  std::vector<std::unique_ptr<Param>> params_;
  std::map<std::string, Param*, std::less<>> by_name_;
};

/// Dropout is active only when `train` is set and an RNG is supplied.
struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;

  bool dropout_active() const { return train && rng != nullptr; }
};

class Tape;

class Var {
 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* t, int id) : tape_(t), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Receives the node's own value and accumulated gradient.
  using Backward = std::function<void(Tape&, const Matrix& out, const Matrix& gout)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix m);
  /// A free input that collects gradient (for checks on non-parameter inputs).
  Var input(Matrix m);
  /// Leaf bound to a parameter; gradient accumulates into Param::grad if trainable.
  Var param(Param& p);

  const Matrix& value(const Var& v) const;
  /// Accumulated gradient; zero-sized when none reached this node.
  const Matrix& grad(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Seeds d(loss)/d(loss) = 1 for a 1x1 node and runs all pullbacks.
  void backward(const Var& loss);

  // --- op authoring ---
  Var push(Matrix value, bool requires_grad, Backward pullback);
  /// Gradient buffer of `v`, zero-initialized on first use.
  Matrix& grad_acc(const Var& v);

 private:
  struct Node {
    Matrix value;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Param* param = nullptr;
    Backward pullback;
  };
  std::deque<Node> nodes_;
  Matrix empty_;
};

// --- ops -------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);     // a[n,k] * b[k,m]
Var matmul_nt(const Var& a, const Var& b);  // a[n,k] * b[m,k]^T
Var add(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);  // broadcast a [1,c] row over rows of a
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var gelu(const Var& a);  // tanh approximation
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var dropout(const Var& x, double rate, const ForwardContext& ctx);
Var sum(const Var& a);

/// Gathers table rows by id.
Var embedding(const Var& table, std::span<const std::int32_t> ids);
Var gather_rows(const Var& x, std::span<const Index> rows);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& x, Index start, Index count);
/// x with rows[i] replaced by src row i.
Var overwrite_rows(const Var& x, std::span<const Index> rows, const Var& src);

/// A run of rows forming one sequence.
struct Segment {
  Index start = 0;
  Index length = 0;
};

/// Scaled dot-product self-attention over q,k,v [N, heads*d], independently per
/// segment. `causal` masks keys after the query position.
Var attention(const Var& q, const Var& k, const Var& v, std::span<const Segment> segments, int heads,
              bool causal);

inline constexpr std::int32_t kIgnoreTarget = -1;

/// Mean negative log-likelihood of softmax(logits) over rows whose target is
/// not kIgnoreTarget. Throws std::invalid_argument when every row is ignored.
Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets);
/// Boolean-mask form: rows with mask=false are excluded.
Var cross_entropy(const Var& logits, std::span<const std::int32_t> targets,
                  const std::vector<bool>& mask);

}  // namespace modeswitch::nn
