#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mgn/errors.hpp"

namespace mgn::nn {

/// Dense row-major matrix. Templated on the scalar so the same layer code
/// runs in float for training and in double for finite-difference checks.
template <typename T>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<T> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, T(0)) {}
  Mat(int r, int c, T fill)
      : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
  T operator()(int r, int c) const {
    return v[static_cast<size_t>(r) * cols + c];
  }

  std::span<T> row(int r) {
    return std::span<T>(v.data() + static_cast<size_t>(r) * cols, cols);
  }
  std::span<const T> row(int r) const {
    return std::span<const T>(v.data() + static_cast<size_t>(r) * cols, cols);
  }

  size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  void fill(T x) { std::fill(v.begin(), v.end(), x); }
  void zero() { fill(T(0)); }

  bool same_shape(const Mat& o) const {
    return rows == o.rows && cols == o.cols;
  }

  bool all_finite() const {
    for (T x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Mat<U> cast() const {
    Mat<U> out(rows, cols);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

inline void check_shape(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// C = A * B, A is r x k, B is k x c.
template <typename T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  check_shape(a.cols == b.rows, "matmul: inner dimensions differ");
  Mat<T> c(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    T* crow = c.v.data() + static_cast<size_t>(i) * c.cols;
    for (int k = 0; k < a.cols; ++k) {
      T aik = a(i, k);
      if (aik == T(0)) continue;
      const T* brow = b.v.data() + static_cast<size_t>(k) * b.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

/// C = A * B^T, A is r x k, B is c x k. Row-by-row dot products.
template <typename T>
Mat<T> matmul_nt(const Mat<T>& a, const Mat<T>& b) {
  check_shape(a.cols == b.cols, "matmul_nt: inner dimensions differ");
  Mat<T> c(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const T* arow = a.v.data() + static_cast<size_t>(i) * a.cols;
    for (int j = 0; j < b.rows; ++j) {
      const T* brow = b.v.data() + static_cast<size_t>(j) * b.cols;
      T acc = T(0);
      for (int k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
      c(i, j) = acc;
    }
  }
  return c;
}

/// C = A^T * B, A is n x r, B is n x c.
template <typename T>
Mat<T> matmul_tn(const Mat<T>& a, const Mat<T>& b) {
  check_shape(a.rows == b.rows, "matmul_tn: outer dimensions differ");
  Mat<T> c(a.cols, b.cols);
  for (int n = 0; n < a.rows; ++n) {
    const T* arow = a.v.data() + static_cast<size_t>(n) * a.cols;
    const T* brow = b.v.data() + static_cast<size_t>(n) * b.cols;
    for (int i = 0; i < a.cols; ++i) {
      T ani = arow[i];
      if (ani == T(0)) continue;
      T* crow = c.v.data() + static_cast<size_t>(i) * c.cols;
      for (int j = 0; j < b.cols; ++j) crow[j] += ani * brow[j];
    }
  }
  return c;
}

/// Adds a 1 x c row vector to every row of A in place.
template <typename T>
void add_row_inplace(Mat<T>& a, const Mat<T>& row) {
  check_shape(row.rows == 1 && row.cols == a.cols, "add_row_inplace: bad bias");
  for (int i = 0; i < a.rows; ++i) {
    T* arow = a.v.data() + static_cast<size_t>(i) * a.cols;
    for (int j = 0; j < a.cols; ++j) arow[j] += row.v[j];
  }
}

/// Column sums as a 1 x c matrix.
template <typename T>
Mat<T> colsum(const Mat<T>& a) {
  Mat<T> s(1, a.cols);
  for (int i = 0; i < a.rows; ++i)
    for (int j = 0; j < a.cols; ++j) s.v[j] += a(i, j);
  return s;
}

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  T acc = T(0);
  for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace mgn::nn
