#pragma once

#include <string>
#include <vector>

#include "sbrl/tensor.hpp"

namespace sbrl {

// Handle to a node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Define-by-run reverse-mode autodiff tape. Ops compute their value as they
// are recorded (forward is implicit), so the node list is acyclic by
// construction: inputs always precede the node that consumes them. One
// backward() pass populates a gradient for every grad-requiring leaf
// reachable from the output. Tapes are single-owner and rebuilt per training
// step; Tensors are immutable values and safe to share across threads.
class Tape {
 public:
  // Leaves. `constant` never receives a gradient.
  Var leaf(Tensor value, bool requires_grad);
  Var leaf(Tensor value) {
    const bool rg = value.requires_grad;
    return leaf(std::move(value), rg);
  }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Elementwise; operands must have identical shapes.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);

  // Dense matrix product [n,k] x [k,m] -> [n,m].
  Var matmul(Var a, Var b);

  // Elementwise unaries.
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var exp(Var a);
  // Natural log with the argument clamped below at kLogClamp; the adjoint is
  // zero wherever the clamp is active.
  Var log(Var a);
  Var square(Var a);

  // Reductions to a scalar (shape [1]).
  Var sum(Var a);
  Var mean(Var a);

  // Broadcast-add a rank-1 bias of length c to every row of an [r,c] matrix.
  Var add_bias(Var matrix, Var bias);

  // Affine helpers: value * c and value + c with a compile-time constant.
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);

  // Column-wise concatenation [n,k1] ++ [n,k2] -> [n,k1+k2].
  Var concat_cols(Var a, Var b);

  const Tensor& value(Var v) const;

  // Reverse pass from a scalar output. Throws ContractError if the output is
  // not a single element. May be called again (gradients are reset).
  void backward(Var output);

  // Gradient of the last backward() output w.r.t. `v`. Zero tensor if `v`
  // was not reached. ContractError before any backward().
  Tensor grad(Var v) const;

  int node_count() const { return static_cast<int>(nodes_.size()); }

  static constexpr double kLogClamp = 1e-12;

 private:
  enum class Op {
    leaf, add, sub, mul, matmul, tanh, sigmoid, softplus, exp, log,
    square, sum, mean, add_bias, scale, add_scalar, concat_cols,
  };

  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;  // scale / add_scalar constant
    bool requires_grad = false;
    Tensor value;
    Tensor grad;
    bool grad_live = false;
  };

  Var push(Op op, int a, int b, double c, Tensor value);
  const Node& node(Var v) const;
  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  Tensor& grad_buffer(int id);
  void accumulate(int id, const Tensor& g);
  static const char* op_name(Op op);
  void check_finite(const Tensor& t, Op op) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  Tensor zero_scalar_ = Tensor::scalar(0.0);
};

}  // namespace sbrl
