#include "sbrl/tape.hpp"

#include <cmath>
#include <utility>

#include "sbrl/errors.hpp"
#include "sbrl/kernels.hpp"

namespace sbrl {

namespace {

std::vector<double> copy_data(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace

const char* Tape::op_name(Op op) {
  switch (op) {
    case Op::leaf: return "leaf";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::matmul: return "matmul";
    case Op::tanh: return "tanh";
    case Op::sigmoid: return "sigmoid";
    case Op::softplus: return "softplus";
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::square: return "square";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::add_bias: return "add_bias";
    case Op::scale: return "scale";
    case Op::add_scalar: return "add_scalar";
    case Op::concat_cols: return "concat_cols";
  }
  return "?";
}

void Tape::check_finite(const Tensor& t, Op op) const {
  if (!t.all_finite())
    throw NumericError(std::string("non-finite intermediate in op '") + op_name(op) + "'");
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= node_count()) throw ContractError("invalid tape handle");
  return nodes_[static_cast<std::size_t>(v.id)];
}

Var Tape::push(Op op, int a, int b, double c, Tensor value) {
  check_finite(value, op);
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.c = c;
  n.requires_grad = (a >= 0 && needs_grad(a)) || (b >= 0 && needs_grad(b));
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{node_count() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite leaf binding");
  Node n;
  n.op = Op::leaf;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{node_count() - 1};
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

Var Tape::add(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y))
    throw ShapeError("add: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  std::vector<double> out = copy_data(x);
  for (int i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] += y[i];
  return push(Op::add, a.id, b.id, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::sub(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y))
    throw ShapeError("sub: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  std::vector<double> out = copy_data(x);
  for (int i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] -= y[i];
  return push(Op::sub, a.id, b.id, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::mul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y))
    throw ShapeError("mul: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  std::vector<double> out = copy_data(x);
  for (int i = 0; i < y.size(); ++i) out[static_cast<std::size_t>(i)] *= y[i];
  return push(Op::mul, a.id, b.id, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.rows())
    throw ShapeError("matmul: incompatible shapes " + x.shape_str() + " vs " + y.shape_str());
  std::vector<double> out(static_cast<std::size_t>(x.rows()) * y.cols());
  detail::matmul(x.data().data(), x.rows(), x.cols(), y.data().data(), y.cols(), out.data());
  return push(Op::matmul, a.id, b.id, 0.0,
              Tensor::unchecked({x.rows(), y.cols()}, std::move(out)));
}

Var Tape::tanh(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = std::tanh(v);
  return push(Op::tanh, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::sigmoid(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = detail::sigmoid(v);
  return push(Op::sigmoid, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::softplus(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = detail::softplus(v);
  return push(Op::softplus, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::exp(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = std::exp(v);
  return push(Op::exp, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::log(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = std::log(v < kLogClamp ? kLogClamp : v);
  return push(Op::log, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::square(Var a) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v = v * v;
  return push(Op::square, a.id, -1, 0.0, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::sum(Var a) {
  const Tensor& x = value(a);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return push(Op::sum, a.id, -1, 0.0, Tensor::unchecked({1}, {acc}));
}

Var Tape::mean(Var a) {
  const Tensor& x = value(a);
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return push(Op::mean, a.id, -1, 0.0, Tensor::unchecked({1}, {acc / x.size()}));
}

Var Tape::add_bias(Var matrix, Var bias) {
  const Tensor& m = value(matrix);
  const Tensor& b = value(bias);
  if (m.rank() != 2 || b.rank() != 1 || b.size() != m.cols())
    throw ShapeError("add_bias: shape mismatch " + m.shape_str() + " vs " + b.shape_str());
  std::vector<double> out = copy_data(m);
  const int r = m.rows(), c = m.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[static_cast<std::size_t>(i) * c + j] += b[j];
  return push(Op::add_bias, matrix.id, bias.id, 0.0, Tensor::unchecked(m.shape(), std::move(out)));
}

Var Tape::scale(Var a, double c) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v *= c;
  return push(Op::scale, a.id, -1, c, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::add_scalar(Var a, double c) {
  const Tensor& x = value(a);
  std::vector<double> out = copy_data(x);
  for (double& v : out) v += c;
  return push(Op::add_scalar, a.id, -1, c, Tensor::unchecked(x.shape(), std::move(out)));
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (x.rank() != 2 || y.rank() != 2 || x.rows() != y.rows())
    throw ShapeError("concat_cols: shape mismatch " + x.shape_str() + " vs " + y.shape_str());
  const int r = x.rows(), cx = x.cols(), cy = y.cols();
  std::vector<double> out(static_cast<std::size_t>(r) * (cx + cy));
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < cx; ++j) out[static_cast<std::size_t>(i) * (cx + cy) + j] = x.at(i, j);
    for (int j = 0; j < cy; ++j) out[static_cast<std::size_t>(i) * (cx + cy) + cx + j] = y.at(i, j);
  }
  return push(Op::concat_cols, a.id, b.id, 0.0, Tensor::unchecked({r, cx + cy}, std::move(out)));
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.value.shape());
    n.grad_live = true;
  }
  return n.grad;
}

void Tape::accumulate(int id, const Tensor& g) {
  Tensor& buf = grad_buffer(id);
  for (int i = 0; i < g.size(); ++i) buf[i] += g[i];
}

void Tape::backward(Var output) {
  const Node& out = node(output);
  if (out.value.size() != 1)
    throw ContractError("backward: output must be scalar, got " + out.value.shape_str());

  for (Node& n : nodes_) n.grad_live = false;
  backward_done_ = true;
  if (!out.requires_grad) return;  // no differentiable leaves reachable
  grad_buffer(output.id)[0] = 1.0;

  for (int id = output.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || !n.grad_live) continue;
    const Tensor& g = n.grad;
    const int a = n.a, b = n.b;
    const bool ga = a >= 0 && needs_grad(a);
    const bool gb = b >= 0 && needs_grad(b);
    switch (n.op) {
      case Op::leaf:
        break;
      case Op::add:
        if (ga) accumulate(a, g);
        if (gb) accumulate(b, g);
        break;
      case Op::sub:
        if (ga) accumulate(a, g);
        if (gb) {
          Tensor& buf = grad_buffer(b);
          for (int i = 0; i < g.size(); ++i) buf[i] -= g[i];
        }
        break;
      case Op::mul: {
        const Tensor& xa = nodes_[static_cast<std::size_t>(a)].value;
        const Tensor& xb = nodes_[static_cast<std::size_t>(b)].value;
        if (ga) {
          Tensor& buf = grad_buffer(a);
          for (int i = 0; i < g.size(); ++i) buf[i] += g[i] * xb[i];
        }
        if (gb) {
          Tensor& buf = grad_buffer(b);
          for (int i = 0; i < g.size(); ++i) buf[i] += g[i] * xa[i];
        }
        break;
      }
      case Op::matmul: {
        const Tensor& xa = nodes_[static_cast<std::size_t>(a)].value;
        const Tensor& xb = nodes_[static_cast<std::size_t>(b)].value;
        if (ga)
          detail::matmul_acc_nt(g.data().data(), xa.rows(), xb.cols(),
                                xb.data().data(), xa.cols(),
                                grad_buffer(a).data().data());
        if (gb)
          detail::matmul_acc_tn(xa.data().data(), xa.rows(), xa.cols(),
                                g.data().data(), xb.cols(),
                                grad_buffer(b).data().data());
        break;
      }
      case Op::tanh: {
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          buf[i] += g[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::sigmoid: {
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value[i];
          buf[i] += g[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::softplus: {
        const Tensor& x = nodes_[static_cast<std::size_t>(a)].value;
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) buf[i] += g[i] * detail::sigmoid(x[i]);
        break;
      }
      case Op::exp: {
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) buf[i] += g[i] * n.value[i];
        break;
      }
      case Op::log: {
        const Tensor& x = nodes_[static_cast<std::size_t>(a)].value;
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i)
          if (x[i] >= kLogClamp) buf[i] += g[i] / x[i];
        break;
      }
      case Op::square: {
        const Tensor& x = nodes_[static_cast<std::size_t>(a)].value;
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) buf[i] += 2.0 * x[i] * g[i];
        break;
      }
      case Op::sum: {
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < buf.size(); ++i) buf[i] += g[0];
        break;
      }
      case Op::mean: {
        Tensor& buf = grad_buffer(a);
        const double gv = g[0] / buf.size();
        for (int i = 0; i < buf.size(); ++i) buf[i] += gv;
        break;
      }
      case Op::add_bias: {
        if (ga) accumulate(a, g);
        if (gb) {
          Tensor& buf = grad_buffer(b);
          const int r = g.rows(), c = g.cols();
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) buf[j] += g.at(i, j);
        }
        break;
      }
      case Op::scale: {
        Tensor& buf = grad_buffer(a);
        for (int i = 0; i < g.size(); ++i) buf[i] += n.c * g[i];
        break;
      }
      case Op::add_scalar:
        accumulate(a, g);
        break;
      case Op::concat_cols: {
        const Tensor& xa = nodes_[static_cast<std::size_t>(a)].value;
        const int r = g.rows(), cx = xa.cols(), cy = g.cols() - cx;
        if (ga) {
          Tensor& buf = grad_buffer(a);
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < cx; ++j) buf.at(i, j) += g.at(i, j);
        }
        if (gb) {
          Tensor& buf = grad_buffer(b);
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < cy; ++j) buf.at(i, j) += g.at(i, cx + j);
        }
        break;
      }
    }
  }
}

Tensor Tape::grad(Var v) const {
  if (!backward_done_) throw ContractError("grad requested before backward");
  const Node& n = node(v);
  if (!n.grad_live) return Tensor::zeros(n.value.shape());
  return n.grad;
}

}  // namespace sbrl
