#include "oversmooth/tape.hpp"

#include <cmath>
#include <stdexcept>

namespace oversmooth {

int Tape::check(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::runtime_error("Tape: variable does not belong to this tape");
  return v.id;
}

Var Tape::push(Node n) {
  if (!n.value.all_finite())
    throw std::runtime_error("Tape: non-finite forward value");
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Tensor value, std::string name) {
  Node n;
  n.op = Op::kLeaf;
  n.value = std::move(value);
  n.needs_grad = true;
  n.name = std::move(name);
  return push(std::move(n));
}

Var Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConstant;
  n.value = std::move(value);
  return push(std::move(n));
}

#define OVERSMOOTH_BINARY(fn, opcode)                            \
  Var Tape::fn(Var a, Var b) {                                   \
    Node n;                                                      \
    n.op = opcode;                                               \
    n.in = {check(a), check(b)};                                 \
    n.value = kernel::fn(nodes_[a.id].value, nodes_[b.id].value); \
    n.needs_grad = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad; \
    return push(std::move(n));                                   \
  }

OVERSMOOTH_BINARY(matmul, Op::kMatmul)
OVERSMOOTH_BINARY(add, Op::kAdd)
OVERSMOOTH_BINARY(mul, Op::kMul)
#undef OVERSMOOTH_BINARY

#define OVERSMOOTH_UNARY(fn, opcode)                 \
  Var Tape::fn(Var a) {                              \
    Node n;                                          \
    n.op = opcode;                                   \
    n.in = {check(a)};                               \
    n.value = kernel::fn(nodes_[a.id].value);        \
    n.needs_grad = nodes_[a.id].needs_grad;          \
    return push(std::move(n));                       \
  }

OVERSMOOTH_UNARY(sigmoid, Op::kSigmoid)
OVERSMOOTH_UNARY(tanh, Op::kTanh)
OVERSMOOTH_UNARY(relu, Op::kRelu)
OVERSMOOTH_UNARY(exp, Op::kExp)
OVERSMOOTH_UNARY(log_softmax, Op::kLogSoftmax)
OVERSMOOTH_UNARY(reduce_sum, Op::kReduceSum)
OVERSMOOTH_UNARY(reduce_mean, Op::kReduceMean)
OVERSMOOTH_UNARY(transpose, Op::kTranspose)
#undef OVERSMOOTH_UNARY

Var Tape::concat_rows(const std::vector<Var>& parts) {
  Node n;
  n.op = Op::kConcatRows;
  std::vector<const Tensor*> ptrs;
  for (Var p : parts) {
    n.in.push_back(check(p));
    ptrs.push_back(&nodes_[p.id].value);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  n.value = kernel::concat_rows(ptrs);
  return push(std::move(n));
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  Node n;
  n.op = Op::kConcatCols;
  std::vector<const Tensor*> ptrs;
  for (Var p : parts) {
    n.in.push_back(check(p));
    ptrs.push_back(&nodes_[p.id].value);
    n.needs_grad = n.needs_grad || nodes_[p.id].needs_grad;
  }
  n.value = kernel::concat_cols(ptrs);
  return push(std::move(n));
}

Var Tape::slice(Var a, int r0, int r1, int c0, int c1) {
  Node n;
  n.op = Op::kSlice;
  n.in = {check(a)};
  n.r0 = r0; n.r1 = r1; n.c0 = c0; n.c1 = c1;
  n.value = kernel::slice(nodes_[a.id].value, r0, r1, c0, c1);
  n.needs_grad = nodes_[a.id].needs_grad;
  return push(std::move(n));
}

Var Tape::gather_rows(Var table, std::vector<int> idx) {
  Node n;
  n.op = Op::kGatherRows;
  n.in = {check(table)};
  n.value = kernel::gather_rows(nodes_[table.id].value, idx);
  n.idx = std::move(idx);
  n.needs_grad = nodes_[table.id].needs_grad;
  return push(std::move(n));
}

Var Tape::scale(Var a, double alpha) {
  Node n;
  n.op = Op::kScale;
  n.in = {check(a)};
  n.alpha = alpha;
  n.value = kernel::scale(nodes_[a.id].value, alpha);
  n.needs_grad = nodes_[a.id].needs_grad;
  return push(std::move(n));
}

Var Tape::dropout_mask(Var a, Tensor mask) {
  Node n;
  n.op = Op::kDropoutMask;
  n.in = {check(a)};
  n.value = kernel::mul(nodes_[a.id].value, mask);
  n.mask = std::move(mask);
  n.needs_grad = nodes_[a.id].needs_grad;
  return push(std::move(n));
}

const Tensor& Tape::grad(Var v) const {
  const Node& n = nodes_[check(v)];
  if (!backward_done_ || n.adjoint.v.empty())
    throw std::runtime_error("Tape: no gradient recorded for this variable");
  return n.adjoint;
}

Gradients Tape::backward(Var output) {
  const int out = check(output);
  const Node& o = nodes_[out];
  if (o.value.rows != 1 || o.value.cols != 1)
    throw std::runtime_error("backward: output must be scalar, got " + std::to_string(o.value.rows) + "x" +
                             std::to_string(o.value.cols));
  if (!o.needs_grad)
    throw std::runtime_error("backward: output is detached from every parameter");

  for (int i = 0; i <= out; ++i)
    if (nodes_[i].needs_grad) nodes_[i].adjoint = Tensor::zeros(nodes_[i].value.rows, nodes_[i].value.cols);
  nodes_[out].adjoint = Tensor::scalar(1.0);

  for (int i = out; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.adjoint.v.empty()) continue;
    const Tensor& g = n.adjoint;
    auto acc = [&](int in_id, const Tensor& delta) {
      Node& src = nodes_[in_id];
      if (!src.needs_grad) return;
      for (size_t k = 0; k < delta.v.size(); ++k) src.adjoint.v[k] += delta.v[k];
    };
    switch (n.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kMatmul: {
        const Tensor& a = nodes_[n.in[0]].value;
        const Tensor& b = nodes_[n.in[1]].value;
        if (nodes_[n.in[0]].needs_grad) {
          // dA = g * B^T
          Tensor da(a.rows, a.cols);
          for (int r = 0; r < a.rows; ++r)
            for (int c = 0; c < a.cols; ++c) {
              double s = 0.0;
              for (int j = 0; j < b.cols; ++j) s += g.at(r, j) * b.at(c, j);
              da.at(r, c) = s;
            }
          acc(n.in[0], da);
        }
        if (nodes_[n.in[1]].needs_grad) {
          // dB = A^T * g
          Tensor db(b.rows, b.cols);
          for (int r = 0; r < b.rows; ++r)
            for (int c = 0; c < b.cols; ++c) {
              double s = 0.0;
              for (int j = 0; j < a.rows; ++j) s += a.at(j, r) * g.at(j, c);
              db.at(r, c) = s;
            }
          acc(n.in[1], db);
        }
        break;
      }
      case Op::kAdd:
        acc(n.in[0], g);
        acc(n.in[1], g);
        break;
      case Op::kMul:
        acc(n.in[0], kernel::mul(g, nodes_[n.in[1]].value));
        acc(n.in[1], kernel::mul(g, nodes_[n.in[0]].value));
        break;
      case Op::kConcatRows: {
        int r = 0;
        for (int in_id : n.in) {
          const Tensor& part = nodes_[in_id].value;
          acc(in_id, kernel::slice(g, r, r + part.rows, 0, g.cols));
          r += part.rows;
        }
        break;
      }
      case Op::kConcatCols: {
        int c = 0;
        for (int in_id : n.in) {
          const Tensor& part = nodes_[in_id].value;
          acc(in_id, kernel::slice(g, 0, g.rows, c, c + part.cols));
          c += part.cols;
        }
        break;
      }
      case Op::kSlice: {
        Node& src = nodes_[n.in[0]];
        if (src.needs_grad)
          for (int r = n.r0; r < n.r1; ++r)
            for (int c = n.c0; c < n.c1; ++c) src.adjoint.at(r, c) += g.at(r - n.r0, c - n.c0);
        break;
      }
      case Op::kSigmoid: {
        Tensor d = g;
        for (size_t k = 0; k < d.v.size(); ++k) {
          const double y = n.value.v[k];
          d.v[k] *= y * (1.0 - y);
        }
        acc(n.in[0], d);
        break;
      }
      case Op::kTanh: {
        Tensor d = g;
        for (size_t k = 0; k < d.v.size(); ++k) {
          const double y = n.value.v[k];
          d.v[k] *= 1.0 - y * y;
        }
        acc(n.in[0], d);
        break;
      }
      case Op::kRelu: {
        Tensor d = g;
        const Tensor& x = nodes_[n.in[0]].value;
        for (size_t k = 0; k < d.v.size(); ++k)
          if (x.v[k] <= 0.0) d.v[k] = 0.0;
        acc(n.in[0], d);
        break;
      }
      case Op::kExp:
        acc(n.in[0], kernel::mul(g, n.value));
        break;
      case Op::kLogSoftmax: {
        // dX[i,j] = g[i,j] - softmax(x)[i,j] * sum_j g[i,j]
        Tensor d = g;
        for (int r = 0; r < g.rows; ++r) {
          double rowsum = 0.0;
          for (int c = 0; c < g.cols; ++c) rowsum += g.at(r, c);
          for (int c = 0; c < g.cols; ++c) d.at(r, c) -= std::exp(n.value.at(r, c)) * rowsum;
        }
        acc(n.in[0], d);
        break;
      }
      case Op::kGatherRows: {
        Node& src = nodes_[n.in[0]];
        if (src.needs_grad)
          for (size_t r = 0; r < n.idx.size(); ++r)
            for (int c = 0; c < g.cols; ++c) src.adjoint.at(n.idx[r], c) += g.at(static_cast<int>(r), c);
        break;
      }
      case Op::kReduceSum: {
        const Tensor& x = nodes_[n.in[0]].value;
        acc(n.in[0], Tensor::full(x.rows, x.cols, g.v[0]));
        break;
      }
      case Op::kReduceMean: {
        const Tensor& x = nodes_[n.in[0]].value;
        acc(n.in[0], Tensor::full(x.rows, x.cols, g.v[0] / static_cast<double>(x.size())));
        break;
      }
      case Op::kScale:
        acc(n.in[0], kernel::scale(g, n.alpha));
        break;
      case Op::kTranspose:
        acc(n.in[0], kernel::transpose(g));
        break;
      case Op::kDropoutMask:
        acc(n.in[0], kernel::mul(g, n.mask));
        break;
    }
  }

  backward_done_ = true;
  Gradients grads;
  for (const Node& n : nodes_)
    if (n.op == Op::kLeaf && !n.name.empty() && !n.adjoint.v.empty()) grads[n.name] = n.adjoint;
  return grads;
}

Tensor Tape::eval_node(const Node& n, const std::vector<Tensor>& vals) const {
  auto in = [&](int k) -> const Tensor& { return vals[n.in[k]]; };
  switch (n.op) {
    case Op::kLeaf:
    case Op::kConstant:
      return n.value;
    case Op::kMatmul: return kernel::matmul(in(0), in(1));
    case Op::kAdd: return kernel::add(in(0), in(1));
    case Op::kMul: return kernel::mul(in(0), in(1));
    case Op::kConcatRows:
    case Op::kConcatCols: {
      std::vector<const Tensor*> ptrs;
      for (int id : n.in) ptrs.push_back(&vals[id]);
      return n.op == Op::kConcatRows ? kernel::concat_rows(ptrs) : kernel::concat_cols(ptrs);
    }
    case Op::kSlice: return kernel::slice(in(0), n.r0, n.r1, n.c0, n.c1);
    case Op::kSigmoid: return kernel::sigmoid(in(0));
    case Op::kTanh: return kernel::tanh(in(0));
    case Op::kRelu: return kernel::relu(in(0));
    case Op::kExp: return kernel::exp(in(0));
    case Op::kLogSoftmax: return kernel::log_softmax(in(0));
    case Op::kGatherRows: return kernel::gather_rows(in(0), n.idx);
    case Op::kReduceSum: return kernel::reduce_sum(in(0));
    case Op::kReduceMean: return kernel::reduce_mean(in(0));
    case Op::kScale: return kernel::scale(in(0), n.alpha);
    case Op::kTranspose: return kernel::transpose(in(0));
    case Op::kDropoutMask: return kernel::mul(in(0), n.mask);
  }
  throw std::logic_error("eval_node: unknown op");
}

bool Tape::replay_matches() const {
  std::vector<Tensor> vals;
  vals.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    Tensor v = eval_node(n, vals);
    if (!(v == n.value)) return false;
    vals.push_back(std::move(v));
  }
  return true;
}

double grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                  const std::vector<Tensor>& params, double epsilon) {
  if (epsilon <= 0.0) throw std::invalid_argument("grad_check: epsilon must be positive");

  auto eval = [&](const std::vector<Tensor>& p) {
    Tape t;
    std::vector<Var> leaves;
    leaves.reserve(p.size());
    for (size_t i = 0; i < p.size(); ++i) leaves.push_back(t.leaf(p[i], "p" + std::to_string(i)));
    Var out = build(t, leaves);
    const Tensor& v = t.value(out);
    if (v.rows != 1 || v.cols != 1 || !std::isfinite(v.v[0]))
      throw std::runtime_error("grad_check: function value is not a finite scalar");
    return v.v[0];
  };

  // Analytic pass.
  Tape t;
  std::vector<Var> leaves;
  for (size_t i = 0; i < params.size(); ++i) leaves.push_back(t.leaf(params[i], "p" + std::to_string(i)));
  Var out = build(t, leaves);
  if (!std::isfinite(t.value(out).v[0])) throw std::runtime_error("grad_check: non-finite function value");
  t.backward(out);

  double worst = 0.0;
  std::vector<Tensor> work = params;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& analytic = t.grad(leaves[i]);
    for (size_t k = 0; k < params[i].v.size(); ++k) {
      const double saved = work[i].v[k];
      work[i].v[k] = saved + epsilon;
      const double fp = eval(work);
      work[i].v[k] = saved - epsilon;
      const double fm = eval(work);
      work[i].v[k] = saved;
      const double numeric = (fp - fm) / (2.0 * epsilon);
      const double a = analytic.v[k];
      const double err = std::abs(a - numeric) / std::max(1e-12, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace oversmooth
