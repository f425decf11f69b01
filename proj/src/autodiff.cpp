#include "hdsrnn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hdsrnn/errors.hpp"

namespace hdsrnn::ad {

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw ContractViolation("operation on an unbound Var");
  return *a.tape();
}

Tape& common_tape(Var a, Var b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw ContractViolation("operands recorded on different tapes");
  return t;
}

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + a.str() + " and " + b.str());
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Splits a shape around `axis` into (outer, axis extent, inner) block sizes.
struct AxisBlocks {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisBlocks blocks_of(const Shape& s, std::size_t axis) {
  AxisBlocks b;
  for (std::size_t i = 0; i < axis; ++i) b.outer *= s[i];
  b.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.rank(); ++i) b.inner *= s[i];
  return b;
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractViolation("value() on an unbound Var");
  return tape_->value(*this);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::record(OpKind op, std::vector<std::uint32_t> inputs, Tensor value, double scalar,
                 std::size_t aux0, std::size_t aux1) {
  Node n;
  n.op = op;
  n.scalar = scalar;
  n.aux0 = aux0;
  n.aux1 = aux1;
  for (std::uint32_t in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

void Tape::check_owned(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractViolation("Var does not belong to this tape");
  }
}

const Tensor& Tape::value(Var v) const {
  check_owned(v);
  return nodes_[v.id()].value;
}

bool Tape::requires_grad(Var v) const {
  check_owned(v);
  return nodes_[v.id()].requires_grad;
}

Tensor Tape::gradient(Var v) const {
  check_owned(v);
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return Tensor(n.value.shape(), n.grad);
}

std::vector<double>& Tape::grad_buffer(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  check_owned(loss);
  if (nodes_[loss.id()].value.size() != 1) {
    throw ContractViolation("backward() needs a scalar loss, got shape " +
                            nodes_[loss.id()].value.shape().str());
  }
  for (Node& n : nodes_) n.grad.clear();
  grad_buffer(loss.id())[0] = 1.0;
  for (std::uint32_t id = loss.id() + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (n.op == OpKind::Leaf || !n.requires_grad || n.grad.empty()) continue;
    propagate(id);
  }
}

void Tape::propagate(std::uint32_t id) {
  // Copy out what we need: grad_buffer() may not reallocate nodes_, but keep
  // references local and explicit.
  const Node& node = nodes_[id];
  const std::vector<double>& g = node.grad;
  const Tensor& out = node.value;
  const auto& in = node.inputs;
  auto wants = [&](std::size_t k) { return nodes_[in[k]].requires_grad; };

  switch (node.op) {
    case OpKind::Leaf:
      break;
    case OpKind::Add:
    case OpKind::Sub: {
      if (wants(0)) {
        auto& ga = grad_buffer(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (wants(1)) {
        auto& gb = grad_buffer(in[1]);
        const double sign = node.op == OpKind::Add ? 1.0 : -1.0;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sign * g[i];
      }
      break;
    }
    case OpKind::Mul: {
      const Tensor& a = nodes_[in[0]].value;
      const Tensor& b = nodes_[in[1]].value;
      for (std::size_t side = 0; side < 2; ++side) {
        if (!wants(side)) continue;
        const Tensor& self = side == 0 ? a : b;
        const Tensor& other = side == 0 ? b : a;
        auto& gs = grad_buffer(in[side]);
        if (self.size() == g.size() && other.size() == g.size()) {
          for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i] * other[i];
        } else if (self.size() == g.size()) {
          const double c = other[0];
          for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i] * c;
        } else {
          double acc = 0.0;
          for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * other[i];
          gs[0] += acc;
        }
      }
      break;
    }
    case OpKind::Scale: {
      auto& ga = grad_buffer(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += node.scalar * g[i];
      break;
    }
    case OpKind::MatMul: {
      const Tensor& a = nodes_[in[0]].value;
      const Tensor& b = nodes_[in[1]].value;
      const std::size_t p = a.rows(), q = a.cols(), r = b.cols();
      if (wants(0)) {
        auto& ga = grad_buffer(in[0]);
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < r; ++j) acc += g[i * r + j] * b[k * r + j];
            ga[i * q + k] += acc;
          }
      }
      if (wants(1)) {
        auto& gb = grad_buffer(in[1]);
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t k = 0; k < q; ++k) {
            const double aik = a[i * q + k];
            for (std::size_t j = 0; j < r; ++j) gb[k * r + j] += aik * g[i * r + j];
          }
      }
      break;
    }
    case OpKind::MatVec: {
      const Tensor& m = nodes_[in[0]].value;
      const Tensor& x = nodes_[in[1]].value;
      const std::size_t p = m.rows(), q = m.cols();
      if (wants(0)) {
        auto& gm = grad_buffer(in[0]);
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < q; ++j) gm[i * q + j] += g[i] * x[j];
      }
      if (wants(1)) {
        auto& gx = grad_buffer(in[1]);
        for (std::size_t i = 0; i < p; ++i)
          for (std::size_t j = 0; j < q; ++j) gx[j] += m[i * q + j] * g[i];
      }
      break;
    }
    case OpKind::VecMat: {
      const Tensor& v = nodes_[in[0]].value;
      const Tensor& m = nodes_[in[1]].value;
      const std::size_t l = m.rows(), n = m.cols();
      if (wants(0)) {
        auto& gv = grad_buffer(in[0]);
        for (std::size_t i = 0; i < l; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += m[i * n + j] * g[j];
          gv[i] += acc;
        }
      }
      if (wants(1)) {
        auto& gm = grad_buffer(in[1]);
        for (std::size_t i = 0; i < l; ++i)
          for (std::size_t j = 0; j < n; ++j) gm[i * n + j] += v[i] * g[j];
      }
      break;
    }
    case OpKind::Tanh: {
      auto& ga = grad_buffer(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - out[i] * out[i]);
      break;
    }
    case OpKind::Sigmoid: {
      auto& ga = grad_buffer(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * out[i] * (1.0 - out[i]);
      break;
    }
    case OpKind::Softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dot += g[i] * out[i];
      auto& ga = grad_buffer(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += out[i] * (g[i] - dot);
      break;
    }
    case OpKind::Concat: {
      const std::size_t axis = node.aux0;
      const AxisBlocks ob = blocks_of(out.shape(), axis);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const AxisBlocks pb = blocks_of(nodes_[in[k]].value.shape(), axis);
        if (wants(k)) {
          auto& gp = grad_buffer(in[k]);
          const std::size_t chunk = pb.extent * pb.inner;
          for (std::size_t o = 0; o < ob.outer; ++o) {
            const double* src = g.data() + o * ob.extent * ob.inner + offset * ob.inner;
            for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += src[i];
          }
        }
        offset += pb.extent;
      }
      break;
    }
    case OpKind::Slice: {
      auto& ga = grad_buffer(in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[node.aux0 + i] += g[i];
      break;
    }
    case OpKind::Sum: {
      auto& ga = grad_buffer(in[0]);
      for (double& v : ga) v += g[0];
      break;
    }
    case OpKind::MseLoss: {
      const Tensor& p = nodes_[in[0]].value;
      const Tensor& t = nodes_[in[1]].value;
      const double c = 2.0 * g[0] / static_cast<double>(p.size());
      if (wants(0)) {
        auto& gp = grad_buffer(in[0]);
        for (std::size_t i = 0; i < p.size(); ++i) gp[i] += c * (p[i] - t[i]);
      }
      if (wants(1)) {
        auto& gt = grad_buffer(in[1]);
        for (std::size_t i = 0; i < p.size(); ++i) gt[i] -= c * (p[i] - t[i]);
      }
      break;
    }
    case OpKind::AddToColumns: {
      const std::size_t rows = out.rows(), cols = out.cols();
      if (wants(0)) {
        auto& gm = grad_buffer(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) gm[i] += g[i];
      }
      if (wants(1)) {
        auto& gv = grad_buffer(in[1]);
        for (std::size_t i = 0; i < rows; ++i) {
          double acc = 0.0;
          for (std::size_t j = 0; j < cols; ++j) acc += g[i * cols + j];
          gv[i] += acc;
        }
      }
      break;
    }
    case OpKind::StackColumns: {
      const std::size_t rows = out.rows(), cols = out.cols();
      for (std::size_t j = 0; j < cols; ++j) {
        if (!wants(j)) continue;
        auto& gc = grad_buffer(in[j]);
        for (std::size_t i = 0; i < rows; ++i) gc[i] += g[i * cols + j];
      }
      break;
    }
  }
}

Var elementwise(Var a, Var b, ElementwiseOp op) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  switch (op) {
    case ElementwiseOp::Add:
    case ElementwiseOp::Sub: {
      if (!(x.shape() == y.shape())) shape_mismatch(op == ElementwiseOp::Add ? "add" : "sub", x.shape(), y.shape());
      Tensor r(x.shape());
      if (op == ElementwiseOp::Add) {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] + y[i];
      } else {
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] - y[i];
      }
      return t.record(op == ElementwiseOp::Add ? OpKind::Add : OpKind::Sub, {a.id(), b.id()}, std::move(r));
    }
    case ElementwiseOp::Mul: {
      if (x.shape() == y.shape()) {
        Tensor r(x.shape());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = x[i] * y[i];
        return t.record(OpKind::Mul, {a.id(), b.id()}, std::move(r));
      }
      if (x.size() == 1 || y.size() == 1) {
        const Tensor& big = x.size() == 1 ? y : x;
        const double c = x.size() == 1 ? x[0] : y[0];
        Tensor r(big.shape());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = big[i] * c;
        return t.record(OpKind::Mul, {a.id(), b.id()}, std::move(r));
      }
      shape_mismatch("mul", x.shape(), y.shape());
    }
  }
  throw ContractViolation("unknown elementwise op");
}

Var add(Var a, Var b) { return elementwise(a, b, ElementwiseOp::Add); }
Var sub(Var a, Var b) { return elementwise(a, b, ElementwiseOp::Sub); }
Var mul(Var a, Var b) { return elementwise(a, b, ElementwiseOp::Mul); }

Var scale(Var a, double c) {
  Tape& t = tape_of(a);
  Tensor r = a.value();
  for (double& v : r.values()) v *= c;
  return t.record(OpKind::Scale, {a.id()}, std::move(r), c);
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  if (!x.shape().is_matrix() || !y.shape().is_matrix() || x.cols() != y.rows()) {
    shape_mismatch("matmul", x.shape(), y.shape());
  }
  const std::size_t p = x.rows(), q = x.cols(), r = y.cols();
  Tensor out(Shape{p, r});
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t k = 0; k < q; ++k) {
      const double xik = x[i * q + k];
      for (std::size_t j = 0; j < r; ++j) out[i * r + j] += xik * y[k * r + j];
    }
  return t.record(OpKind::MatMul, {a.id(), b.id()}, std::move(out));
}

Var matvec(Var m, Var v) {
  Tape& t = common_tape(m, v);
  const Tensor& w = m.value();
  const Tensor& x = v.value();
  if (!w.shape().is_matrix() || !x.shape().is_vector() || w.cols() != x.size()) {
    shape_mismatch("matvec", w.shape(), x.shape());
  }
  const std::size_t p = w.rows(), q = w.cols();
  Tensor out(Shape{p});
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < q; ++j) acc += w[i * q + j] * x[j];
    out[i] = acc;
  }
  return t.record(OpKind::MatVec, {m.id(), v.id()}, std::move(out));
}

Var vecmat(Var v, Var m) {
  Tape& t = common_tape(v, m);
  const Tensor& x = v.value();
  const Tensor& w = m.value();
  if (!w.shape().is_matrix() || !x.shape().is_vector() || w.rows() != x.size()) {
    shape_mismatch("vecmat", x.shape(), w.shape());
  }
  const std::size_t l = w.rows(), n = w.cols();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < l; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += x[i] * w[i * n + j];
  return t.record(OpKind::VecMat, {v.id(), m.id()}, std::move(out));
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  Tensor r = x.value();
  for (double& v : r.values()) v = std::tanh(v);
  return t.record(OpKind::Tanh, {x.id()}, std::move(r));
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Tensor r = x.value();
  for (double& v : r.values()) v = stable_sigmoid(v);
  return t.record(OpKind::Sigmoid, {x.id()}, std::move(r));
}

Var softmax(Var x) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  if (!in.shape().is_vector()) {
    throw DimensionError("softmax: expected a rank-1 tensor, got " + in.shape().str());
  }
  Tensor r = in;
  const double mx = *std::max_element(r.values().begin(), r.values().end());
  double total = 0.0;
  for (double& v : r.values()) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : r.values()) v /= total;
  return t.record(OpKind::Softmax, {x.id()}, std::move(r));
}

Var concat(Var a, Var b, std::size_t axis) {
  const Var parts[2] = {a, b};
  return concat(std::span<const Var>(parts), axis);
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  Tape& t = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  if (axis >= first.rank()) {
    throw DimensionError("concat: axis " + std::to_string(axis) + " out of range for " + first.str());
  }
  std::size_t extent = 0;
  std::vector<std::uint32_t> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    if (p.tape() != &t) throw ContractViolation("concat: operands recorded on different tapes");
    const Shape& s = p.shape();
    if (s.rank() != first.rank()) shape_mismatch("concat", first, s);
    for (std::size_t d = 0; d < s.rank(); ++d) {
      if (d != axis && s[d] != first[d]) shape_mismatch("concat", first, s);
    }
    extent += s[axis];
    ids.push_back(p.id());
  }
  std::vector<std::size_t> dims(first.dims().begin(), first.dims().end());
  dims[axis] = extent;
  Tensor out{Shape(std::span<const std::size_t>(dims))};
  const AxisBlocks ob = blocks_of(out.shape(), axis);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    const AxisBlocks pb = blocks_of(v.shape(), axis);
    const std::size_t chunk = pb.extent * pb.inner;
    for (std::size_t o = 0; o < ob.outer; ++o) {
      std::copy_n(v.values().begin() + o * chunk, chunk,
                  out.values().begin() + o * ob.extent * ob.inner + offset * ob.inner);
    }
    offset += pb.extent;
  }
  return t.record(OpKind::Concat, std::move(ids), std::move(out), 0.0, axis);
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  Tape& t = tape_of(x);
  const Tensor& in = x.value();
  if (!in.shape().is_vector() || length == 0 || offset + length > in.size()) {
    throw DimensionError("slice: range [" + std::to_string(offset) + ", " +
                         std::to_string(offset + length) + ") invalid for " + in.shape().str());
  }
  std::vector<double> v(in.values().begin() + offset, in.values().begin() + offset + length);
  return t.record(OpKind::Slice, {x.id()}, Tensor::vector(std::move(v)), 0.0, offset);
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return t.record(OpKind::Sum, {x.id()}, Tensor::scalar(acc));
}

Var mse_loss(Var pred, Var truth) {
  Tape& t = common_tape(pred, truth);
  const Tensor& p = pred.value();
  const Tensor& y = truth.value();
  if (p.size() != y.size()) shape_mismatch("mse_loss", p.shape(), y.shape());
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = p[i] - y[i];
    acc += d * d;
  }
  return t.record(OpKind::MseLoss, {pred.id(), truth.id()},
                  Tensor::scalar(acc / static_cast<double>(p.size())));
}

Var add_to_columns(Var m, Var v) {
  Tape& t = common_tape(m, v);
  const Tensor& a = m.value();
  const Tensor& b = v.value();
  if (!a.shape().is_matrix() || !b.shape().is_vector() || a.rows() != b.size()) {
    shape_mismatch("add_to_columns", a.shape(), b.shape());
  }
  Tensor r = a;
  const std::size_t cols = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) r[i * cols + j] += b[i];
  return t.record(OpKind::AddToColumns, {m.id(), v.id()}, std::move(r));
}

Var stack_columns(std::span<const Var> columns) {
  if (columns.empty()) throw DimensionError("stack_columns: no inputs");
  Tape& t = tape_of(columns[0]);
  const std::size_t rows = columns[0].size();
  const std::size_t cols = columns.size();
  Tensor out(Shape{rows, cols});
  std::vector<std::uint32_t> ids;
  ids.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const Var& c = columns[j];
    if (c.tape() != &t) throw ContractViolation("stack_columns: operands recorded on different tapes");
    if (!c.shape().is_vector() || c.size() != rows) shape_mismatch("stack_columns", columns[0].shape(), c.shape());
    const Tensor& v = c.value();
    for (std::size_t i = 0; i < rows; ++i) out[i * cols + j] = v[i];
    ids.push_back(c.id());
  }
  return t.record(OpKind::StackColumns, std::move(ids), std::move(out));
}

}  // namespace hdsrnn::ad
