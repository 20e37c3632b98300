#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedlsm {

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  std::size_t size() const noexcept { return data.size(); }
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

// out = a * b^T (+ bias broadcast over rows). a: n x k, b: m x k.
Matrix matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias = {});

// out = a * b. a: n x k, b: k x m.
Matrix matmul_nn(const Matrix& a, const Matrix& b);

// acc += a^T * b. a: n x m, b: n x k, acc: m x k.
void accumulate_tn(Matrix& acc, const Matrix& a, const Matrix& b);

// Stacks rows of the given matrices; all must share the column count.
Matrix vstack(std::span<const Matrix* const> parts);

} // namespace fedlsm
