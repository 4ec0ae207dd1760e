#include "oversmooth/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace oversmooth {

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

namespace kernel {

namespace {
std::string shape_str(const Tensor& t) {
  return std::to_string(t.rows) + "x" + std::to_string(t.cols);
}
void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner extents differ, " + shape_str(a) + " * " + shape_str(b));
  Tensor c(a.rows, b.cols);
  const int n = a.rows, k = a.cols, m = b.cols;
  for (int i = 0; i < n; ++i) {
    double* crow = &c.v[static_cast<size_t>(i) * m];
    for (int p = 0; p < k; ++p) {
      const double aip = a.v[static_cast<size_t>(i) * k + p];
      if (aip == 0.0) continue;
      const double* brow = &b.v[static_cast<size_t>(p) * m];
      for (int j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor c = a;
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] += b.v[i];
  return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("elementwise-mul", a, b);
  Tensor c = a;
  for (size_t i = 0; i < c.v.size(); ++i) c.v[i] *= b.v[i];
  return c;
}

Tensor concat_rows(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  int rows = 0;
  const int cols = parts[0]->cols;
  for (const Tensor* p : parts) {
    if (p->cols != cols)
      throw ShapeError("concat rows: column mismatch " + std::to_string(p->cols) + " vs " + std::to_string(cols));
    rows += p->rows;
  }
  Tensor c(rows, cols);
  double* out = c.v.data();
  for (const Tensor* p : parts) {
    std::copy(p->v.begin(), p->v.end(), out);
    out += p->v.size();
  }
  return c;
}

Tensor concat_cols(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const int rows = parts[0]->rows;
  int cols = 0;
  for (const Tensor* p : parts) {
    if (p->rows != rows)
      throw ShapeError("concat cols: row mismatch " + std::to_string(p->rows) + " vs " + std::to_string(rows));
    cols += p->cols;
  }
  Tensor c(rows, cols);
  for (int i = 0; i < rows; ++i) {
    double* out = &c.v[static_cast<size_t>(i) * cols];
    for (const Tensor* p : parts) {
      const double* src = &p->v[static_cast<size_t>(i) * p->cols];
      out = std::copy(src, src + p->cols, out);
    }
  }
  return c;
}

Tensor slice(const Tensor& a, int r0, int r1, int c0, int c1) {
  if (r0 < 0 || r1 > a.rows || c0 < 0 || c1 > a.cols || r0 >= r1 || c0 >= c1)
    throw ShapeError("slice: bounds [" + std::to_string(r0) + "," + std::to_string(r1) + ")x[" +
                     std::to_string(c0) + "," + std::to_string(c1) + ") out of " + shape_str(a));
  Tensor c(r1 - r0, c1 - c0);
  for (int i = r0; i < r1; ++i)
    for (int j = c0; j < c1; ++j) c.at(i - r0, j - c0) = a.at(i, j);
  return c;
}

Tensor sigmoid(const Tensor& a) {
  Tensor c = a;
  for (double& x : c.v) x = 1.0 / (1.0 + std::exp(-x));
  return c;
}

Tensor tanh(const Tensor& a) {
  Tensor c = a;
  for (double& x : c.v) x = std::tanh(x);
  return c;
}

Tensor relu(const Tensor& a) {
  Tensor c = a;
  for (double& x : c.v) x = x > 0.0 ? x : 0.0;
  return c;
}

Tensor exp(const Tensor& a) {
  Tensor c = a;
  for (double& x : c.v) x = std::exp(x);
  return c;
}

Tensor log_softmax(const Tensor& a) {
  Tensor c = a;
  for (int i = 0; i < a.rows; ++i) {
    double* row = &c.v[static_cast<size_t>(i) * a.cols];
    double mx = row[0];
    for (int j = 1; j < a.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < a.cols; ++j) sum += std::exp(row[j] - mx);
    const double lse = mx + std::log(sum);
    for (int j = 0; j < a.cols; ++j) row[j] -= lse;
  }
  return c;
}

Tensor gather_rows(const Tensor& table, const std::vector<int>& idx) {
  if (idx.empty()) throw ShapeError("gather: empty index list");
  Tensor c(static_cast<int>(idx.size()), table.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table.rows)
      throw ShapeError("gather: index " + std::to_string(idx[i]) + " out of " + std::to_string(table.rows) + " rows");
    const double* src = &table.v[static_cast<size_t>(idx[i]) * table.cols];
    std::copy(src, src + table.cols, &c.v[i * table.cols]);
  }
  return c;
}

Tensor reduce_sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.v) s += x;
  return Tensor::scalar(s);
}

Tensor reduce_mean(const Tensor& a) {
  double s = 0.0;
  for (double x : a.v) s += x;
  return Tensor::scalar(s / static_cast<double>(a.v.size()));
}

Tensor scale(const Tensor& a, double alpha) {
  Tensor c = a;
  for (double& x : c.v) x *= alpha;
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor c(a.cols, a.rows);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) c.at(j, i) = a.at(i, j);
  return c;
}

}  // namespace kernel
}  // namespace oversmooth
