#pragma once

#include <stdexcept>
#include <vector>

namespace gpnas::linalg {

// Dense row-major matrix of doubles; just enough for the predictor.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {
    if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
  }

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }

  bool same_shape(const Matrix& other) const {
    return rows == other.rows && cols == other.cols;
  }

  bool operator==(const Matrix&) const = default;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
  Matrix out(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    for (int k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

// aT * b
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw std::invalid_argument("matmul_tn: shape mismatch");
  Matrix out(a.cols, b.cols);
  for (int k = 0; k < a.rows; ++k) {
    for (int i = 0; i < a.cols; ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (int j = 0; j < b.cols; ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

// a * bT
inline Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: shape mismatch");
  Matrix out(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    for (int j = 0; j < b.rows; ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  }
  return out;
}

inline void add_scaled(Matrix& target, const Matrix& delta, double scale) {
  if (!target.same_shape(delta)) throw std::invalid_argument("add_scaled: shape mismatch");
  for (std::size_t i = 0; i < target.data.size(); ++i) target.data[i] += scale * delta.data[i];
}

inline Matrix relu(const Matrix& m) {
  Matrix out = m;
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

// dL/dZ given dL/dY where Y = relu(Z); masks by the cached pre-activation.
inline Matrix relu_backward(const Matrix& upstream, const Matrix& pre_activation) {
  if (!upstream.same_shape(pre_activation))
    throw std::invalid_argument("relu_backward: shape mismatch");
  Matrix out = upstream;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    if (pre_activation.data[i] <= 0.0) out.data[i] = 0.0;
  return out;
}

}  // namespace gpnas::linalg
