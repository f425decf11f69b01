#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hdsrnn/tensor.hpp"

namespace hdsrnn::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  Leaf,
  Add,
  Sub,
  Mul,
  Scale,
  MatMul,
  MatVec,
  VecMat,
  Tanh,
  Sigmoid,
  Softmax,
  Concat,
  Slice,
  Sum,
  MseLoss,
  AddToColumns,
  StackColumns,
};

/// Dynamic reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so the node list is always
/// topologically sorted and backward() is a single reverse sweep. A tape is
/// single-threaded; build one per forward pass.
class Tape {
 public:
  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that never receives a gradient.
  Var constant(Tensor value);
  /// Leaf whose gradient is populated by backward().
  Var variable(Tensor value);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  void backward(Var loss);

  const Tensor& value(Var v) const;
  /// Gradient of the last backward() loss w.r.t. v; zeros when v was unreachable.
  Tensor gradient(Var v) const;
  bool requires_grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  // Recording interface used by the operator free functions.
  Var record(OpKind op, std::vector<std::uint32_t> inputs, Tensor value, double scalar = 0.0,
             std::size_t aux0 = 0, std::size_t aux1 = 0);

 private:
  struct Node {
    OpKind op = OpKind::Leaf;
    bool requires_grad = false;
    double scalar = 0.0;
    std::size_t aux0 = 0;
    std::size_t aux1 = 0;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    std::vector<double> grad;
  };

  void check_owned(Var v) const;
  void propagate(std::uint32_t id);
  std::vector<double>& grad_buffer(std::uint32_t id);

  std::vector<Node> nodes_;
};

enum class ElementwiseOp { Add, Sub, Mul };

/// a + b, a - b or a * b on identical shapes. Mul additionally accepts one
/// single-element operand, broadcast as a scalar.
Var elementwise(Var a, Var b, ElementwiseOp op);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

/// [p x q] x [q x r] -> [p x r]
Var matmul(Var a, Var b);
/// [p x q] x [q] -> [p]
Var matvec(Var m, Var x);
/// [l]^T x [l x n] -> [n]
Var vecmat(Var v, Var m);

Var tanh(Var x);
Var sigmoid(Var x);
/// Softmax over all elements of a rank-1 tensor, max-shifted.
Var softmax(Var x);

Var concat(Var a, Var b, std::size_t axis = 0);
Var concat(std::span<const Var> parts, std::size_t axis = 0);
/// Contiguous range [offset, offset + length) of a rank-1 tensor.
Var slice(Var x, std::size_t offset, std::size_t length);
Var sum(Var x);
/// mean((pred - truth)^2) over all elements.
Var mse_loss(Var pred, Var truth);
/// out[i][j] = m[i][j] + v[i]
Var add_to_columns(Var m, Var v);
/// Stacks k vectors of length p into a [p x k] matrix, one column each.
Var stack_columns(std::span<const Var> columns);

}  // namespace hdsrnn::ad
