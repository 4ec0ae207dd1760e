#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace oversmooth {

// Error thrown when operand shapes do not conform to an operation's
// signature. Message names the operation and the offending extents.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

// Dense row-major matrix of doubles. Scalars are 1x1, row vectors 1xN.
// Immutable by convention once handed to a Tape.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {
    if (r <= 0 || c <= 0) throw ShapeError("Tensor: non-positive extent " + std::to_string(r) + "x" + std::to_string(c));
  }
  Tensor(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
    if (r <= 0 || c <= 0 || v.size() != static_cast<size_t>(r) * c)
      throw ShapeError("Tensor: data size does not match " + std::to_string(r) + "x" + std::to_string(c));
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }
  static Tensor full(int r, int c, double x) {
    Tensor t(r, c);
    for (auto& e : t.v) e = x;
    return t;
  }
  static Tensor scalar(double x) { return full(1, 1, x); }

  double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return v.size(); }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor& o) const { return rows == o.rows && cols == o.cols && v == o.v; }

  bool all_finite() const;
};

// Forward kernels. Pure functions; every taped primitive routes through
// these so that tape replay and inference-mode evaluation are bit-exact.
namespace kernel {

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor concat_rows(const std::vector<const Tensor*>& parts);
Tensor concat_cols(const std::vector<const Tensor*>& parts);
Tensor slice(const Tensor& a, int r0, int r1, int c0, int c1);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
// Numerically stable log-softmax over the last axis (each row).
Tensor log_softmax(const Tensor& a);
Tensor gather_rows(const Tensor& table, const std::vector<int>& idx);
Tensor reduce_sum(const Tensor& a);
Tensor reduce_mean(const Tensor& a);
Tensor scale(const Tensor& a, double alpha);
Tensor transpose(const Tensor& a);

}  // namespace kernel

}  // namespace oversmooth
