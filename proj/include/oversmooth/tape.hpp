#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "oversmooth/tensor.hpp"

namespace oversmooth {

// Gradient of a scalar output with respect to each named leaf.
using Gradients = std::map<std::string, Tensor>;

enum class Op {
  kLeaf,
  kConstant,
  kMatmul,
  kAdd,
  kMul,
  kConcatRows,
  kConcatCols,
  kSlice,
  kSigmoid,
  kTanh,
  kRelu,
  kExp,
  kLogSoftmax,
  kGatherRows,
  kReduceSum,
  kReduceMean,
  kScale,
  kTranspose,
  kDropoutMask,
};

// Handle into a Tape. Valid only for the tape that produced it.
struct Var {
  int id = -1;
};

// Reverse-mode tape. Records one node per primitive application in
// topological order; backward() accumulates adjoints in reverse.
// Single-owner: one thread per forward/backward pass.
class Tape {
 public:
  // Leaves are differentiable parameters; named leaves appear in the
  // Gradients map returned by backward().
  Var leaf(Tensor value, std::string name = "");
  Var constant(Tensor value);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var mul(Var a, Var b);
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice(Var a, int r0, int r1, int c0, int c1);
  Var sigmoid(Var a);
  Var tanh(Var a);
  Var relu(Var a);
  Var exp(Var a);
  Var log_softmax(Var a);
  Var gather_rows(Var table, std::vector<int> idx);
  Var reduce_sum(Var a);
  Var reduce_mean(Var a);
  Var scale(Var a, double alpha);
  Var transpose(Var a);
  // Elementwise product with a fixed (non-differentiated) mask; the mask
  // carries the 1/(1-p) inverted-dropout scaling.
  Var dropout_mask(Var a, Tensor mask);

  const Tensor& value(Var v) const { return nodes_[check(v)].value; }
  const Tensor& grad(Var v) const;

  // Reverse sweep from a scalar output. Fills per-node adjoints and
  // returns gradients for all named leaves reachable from `output`.
  Gradients backward(Var output);

  // Recomputes every node's forward value from the leaves and checks the
  // result against the recorded values bit-exactly.
  bool replay_matches() const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Op op;
    std::vector<int> in;
    Tensor value;
    Tensor adjoint;      // lazily sized in backward
    bool needs_grad = false;
    std::string name;    // leaves only
    double alpha = 0.0;  // kScale
    int r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // kSlice
    std::vector<int> idx;                // kGatherRows
    Tensor mask;                         // kDropoutMask
  };

  int check(Var v) const;
  Var push(Node n);
  Tensor eval_node(const Node& n, const std::vector<Tensor>& vals) const;

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Max relative error between the analytic gradient of `build` (reverse
// mode) and central finite differences, over every coordinate of every
// parameter. `build` constructs the scalar function on a fresh tape from
// leaves created for `params`, so it can be re-evaluated at perturbed
// points. Error metric: |a - n| / max(1e-12, |a| + |n|).
double grad_check(const std::function<Var(Tape&, const std::vector<Var>&)>& build,
                  const std::vector<Tensor>& params, double epsilon);

}  // namespace oversmooth
