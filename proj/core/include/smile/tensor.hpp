#pragma once

// Dense float64 tensors with define-by-run reverse-mode differentiation.
//
// Operations record onto the Tape that is active on the calling thread, and
// only when at least one operand requires a gradient. Without an active tape
// every operation is a plain forward computation, which is what evaluation
// uses.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace smile {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tape;

class Tensor {
 public:
  Tensor() = default;

  // Leaf holding values that never receive a gradient.
  static Tensor constant(Shape shape, std::vector<double> data);
  // Leaf that accumulates a gradient whenever a backward pass reaches it.
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  // Leading / trailing extent of a rank-2 tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct write access for optimizers and finite-difference probes.
  std::span<double> mutable_data();
  double item() const;
  double operator[](std::size_t i) const { return data()[i]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  // Zeros of the right shape when no gradient has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Same tensor identity (shared node), not value equality.
  bool same_as(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape;
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Ordered record of the operations of one forward pass. Constructing a Tape
// makes it the active tape of the current thread until it is destroyed;
// tapes nest, the innermost one wins.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Propagates d(loss)/d(node) to every node recorded on this tape, visiting
  // nodes once each in reverse recording order. Intermediate gradients are
  // recomputed from scratch; leaf gradients accumulate across calls.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  static Tape* active();

 private:
  friend struct TensorAccess;
  void record(std::shared_ptr<detail::Node> node);

  std::vector<std::shared_ptr<detail::Node>> nodes_;
  Tape* previous_ = nullptr;
};

// Suspends recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

// Floor applied to the argument of log().
inline constexpr double kLogFloor = 1e-12;

Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise binary operations accept equal shapes or a single-element
// operand on either side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
// log(max(x, kLogFloor)); the gradient is zero where the floor is active.
Tensor log(const Tensor& x);

enum class ElementwiseKind { add, sub, mul, tanh, sigmoid, relu, exp, log };
// Dispatching form; unary kinds ignore `b`.
Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b = {});

// Softmax over the last dimension, max-subtracted.
Tensor softmax(const Tensor& logits);

enum class ReduceKind { sum, mean };
// Reduces all elements to shape {1} when `axis` is negative, otherwise drops
// that axis (a rank-1 result of size 1 when nothing remains).
Tensor reduce(ReduceKind kind, const Tensor& t, int axis = -1);
Tensor sum(const Tensor& t, int axis = -1);
Tensor mean(const Tensor& t, int axis = -1);
// Sum of equally-shaped tensors.
Tensor add_n(std::span<const Tensor> terms);

// Embedding lookup: rows of a V x d table.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> indices);
// One element per row of an n x K matrix, result shape {n}.
Tensor pick(const Tensor& matrix, std::span<const std::size_t> columns);

// Structural helpers.
Tensor reshape(const Tensor& t, Shape shape);
Tensor row(const Tensor& matrix, std::size_t i);
Tensor element(const Tensor& t, std::size_t i);
Tensor slice_cols(const Tensor& matrix, std::size_t begin, std::size_t count);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(std::span<const Tensor> rows);
// Stacks n copies of a 1 x d row.
Tensor repeat_rows(const Tensor& row_vector, std::size_t n);

}  // namespace smile
