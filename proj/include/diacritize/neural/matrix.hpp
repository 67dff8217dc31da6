#pragma once

// Dense row-major matrices and the forward kernels shared by the tape.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "diacritize/error.hpp"

namespace diacritize::neural {

template <typename T>
class Matrix {
public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                       " does not match " + shape_string());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
  const T* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
  std::span<T> row(std::size_t r) { return {row_ptr(r), cols_}; }
  std::span<const T> row(std::size_t r) const { return {row_ptr(r), cols_}; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  std::string shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Matrix& operator+=(const Matrix& o) {
    check_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  void check_same(const Matrix& o, const char* op) const {
    if (!same_shape(o)) {
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_string() + " vs " +
                       o.shape_string());
    }
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
[[noreturn]] void shape_mismatch(const char* op, const Matrix<T>& a, const Matrix<T>& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                   b.shape_string());
}

// ---------------------------------------------------------------------------
// Kernels. Each accumulates into `out` so backward passes can reuse them.

/// out += a * b
template <typename T>
void gemm_nn(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    T* o = out.row_ptr(i);
    const T* ar = a.row_ptr(i);
    for (std::size_t p = 0; p < k; ++p) {
      const T av = ar[p];
      const T* br = b.row_ptr(p);
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

/// out += a * b^T
template <typename T>
void gemm_nt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  // Transposing b first keeps the inner loop a vectorizable axpy.
  Matrix<T> bt(b.cols(), b.rows());
  for (std::size_t r = 0; r < b.rows(); ++r) {
    const T* br = b.row_ptr(r);
    for (std::size_t c = 0; c < b.cols(); ++c) bt(c, r) = br[c];
  }
  gemm_nn(a, bt, out);
}

/// out += a^T * b
template <typename T>
void gemm_tn(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const T* ar = a.row_ptr(r);
    const T* br = b.row_ptr(r);
    for (std::size_t i = 0; i < k; ++i) {
      const T av = ar[i];
      if (av == T(0)) continue;
      T* o = out.row_ptr(i);
      for (std::size_t j = 0; j < m; ++j) o[j] += av * br[j];
    }
  }
}

// ---------------------------------------------------------------------------
// Forward operations

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  Matrix<T> out(a.rows(), b.cols());
  gemm_nn(a, b, out);
  return out;
}

/// Adds the 1 x cols row vector `b` to every row of `a`.
template <typename T>
Matrix<T> add_rowwise(const Matrix<T>& a, const Matrix<T>& b) {
  if (b.rows() != 1 || b.cols() != a.cols()) shape_mismatch("add_rowwise", a, b);
  Matrix<T> out = a;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    T* o = out.row_ptr(r);
    for (std::size_t c = 0; c < out.cols(); ++c) o[c] += b[c];
  }
  return out;
}

template <typename T>
Matrix<T> concat_cols(const Matrix<T>& a, const Matrix<T>& b) {
  if (a.rows() != b.rows()) shape_mismatch("concat_cols", a, b);
  Matrix<T> out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::copy_n(a.row_ptr(r), a.cols(), out.row_ptr(r));
    std::copy_n(b.row_ptr(r), b.cols(), out.row_ptr(r) + a.cols());
  }
  return out;
}

template <typename T>
T sigmoid(T x) {
  // split branches keep exp() from overflowing
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& a) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = sigmoid(a[i]);
  return out;
}

template <typename T>
Matrix<T> tanh(const Matrix<T>& a) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  return out;
}

/// Row-wise softmax with max subtraction.
template <typename T>
void softmax_row(std::span<const T> in, std::span<T> out) {
  const T mx = *std::max_element(in.begin(), in.end());
  T sum = T(0);
  for (std::size_t c = 0; c < in.size(); ++c) {
    out[c] = std::exp(in[c] - mx);
    sum += out[c];
  }
  for (auto& v : out) v /= sum;
}

template <typename T>
Matrix<T> softmax_rows(const Matrix<T>& a) {
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) softmax_row<T>(a.row(r), out.row(r));
  return out;
}

/// Log-softmax of one row.
template <typename T>
void log_softmax_row(std::span<const T> in, std::span<T> out) {
  const T mx = *std::max_element(in.begin(), in.end());
  T sum = T(0);
  for (T v : in) sum += std::exp(v - mx);
  const T lse = mx + std::log(sum);
  for (std::size_t c = 0; c < in.size(); ++c) out[c] = in[c] - lse;
}

/// Marks a position excluded from the loss.
inline constexpr std::size_t kIgnoreIndex = static_cast<std::size_t>(-1);

/// Mean negative log-probability of `targets` (one per row). Rows whose
/// target is kIgnoreIndex are masked out.
template <typename T>
T cross_entropy(const Matrix<T>& logits, std::span<const std::size_t> targets) {
  if (targets.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     logits.shape_string() + " logits");
  }
  std::vector<T> lp(logits.cols());
  T total = T(0);
  std::size_t count = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    if (targets[r] == kIgnoreIndex) continue;
    if (targets[r] >= logits.cols()) {
      throw InputError("cross_entropy: target index " + std::to_string(targets[r]) +
                       " out of range for " + std::to_string(logits.cols()) + " classes");
    }
    log_softmax_row<T>(logits.row(r), lp);
    total -= lp[targets[r]];
    ++count;
  }
  return count ? total / static_cast<T>(count) : T(0);
}

}  // namespace diacritize::neural
