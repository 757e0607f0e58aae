#pragma once

#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "ttpp/tensor.hpp"

namespace ttpp {

using Rng = std::mt19937_64;

enum class Mode { train, eval };

/// One value on the define-by-run tape. Created by the ops below; a fresh
/// graph is built on every forward pass and discarded after backward.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  void accumulate(const Tensor& g);
  Tensor& grad_buffer();
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;

  static Var leaf(Tensor value, bool requires_grad = true);
  static Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const Tensor& grad() const { return node_->grad; }
  void zero_grad();
  void clear_grad();

  /// Reverse sweep from a scalar output; gradients accumulate into every
  /// reachable node that requires them.
  void backward() const;

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const std::shared_ptr<Node>& node() const { return node_; }

  static Var from_op(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

// Linear algebra and elementwise ops. All operands are rank-2.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& x);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& x, double s);
/// x[m×n] + b[1×n] broadcast over rows.
Var add_row(const Var& x, const Var& b);
Var linear(const Var& x, const Var& weight, const Var& bias);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(const Var& x, std::size_t begin, std::size_t count);
Var slice_rows(const Var& x, std::size_t begin, std::size_t count);

/// Row-wise softmax with max subtraction.
Var softmax(const Var& x);
/// Row-wise standardization followed by gain/bias (both 1×n).
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
Var relu(const Var& x);
/// Inverted dropout: survivors are scaled by 1/(1-rate). Identity in eval mode.
Var dropout(const Var& x, double rate, Mode mode, Rng& rng);
Var relu_dropout(const Var& x, double rate, Mode mode, Rng& rng);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
/// log(max(x, floor)); gradient is zero where the clamp is active.
Var log_clamped(const Var& x, double floor = 1e-12);

Var sum(const Var& x);
Var sum_squares(const Var& x);

}  // namespace ttpp
