#include "fedlsm/matrix.hpp"

#include "fedlsm/errors.hpp"
#include "fedlsm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedlsm {

bool Matrix::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul_nt(const Matrix& a, const Matrix& b, std::span<const double> bias) {
  if (a.cols != b.cols)
    throw ShapeError("matmul_nt: inner dimensions " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.cols));
  if (!bias.empty() && bias.size() != b.rows)
    throw ShapeError("matmul_nt: bias length mismatch");
  const auto& k = kernels::active();
  Matrix out(a.rows, b.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* ai = a.data.data() + i * a.cols;
    double* oi = out.data.data() + i * out.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double d = k.dot(ai, b.data.data() + j * b.cols, a.cols);
      oi[j] = bias.empty() ? d : d + bias[j];
    }
  }
  return out;
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul_nn: inner dimensions " + std::to_string(a.cols) + " vs " +
                     std::to_string(b.rows));
  const auto& k = kernels::active();
  Matrix out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* oi = out.data.data() + i * out.cols;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double s = a(i, j);
      if (s != 0.0)
        k.axpy(oi, s, b.data.data() + j * b.cols, b.cols);
    }
  }
  return out;
}

void accumulate_tn(Matrix& acc, const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || acc.rows != a.cols || acc.cols != b.cols)
    throw ShapeError("accumulate_tn: shape mismatch");
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* bi = b.data.data() + i * b.cols;
    for (std::size_t j = 0; j < a.cols; ++j) {
      const double s = a(i, j);
      if (s != 0.0)
        k.axpy(acc.data.data() + j * acc.cols, s, bi, b.cols);
    }
  }
}

Matrix vstack(std::span<const Matrix* const> parts) {
  std::size_t rows = 0;
  std::size_t cols = parts.empty() ? 0 : parts.front()->cols;
  for (const Matrix* p : parts) {
    if (p->cols != cols && p->rows != 0)
      throw ShapeError("vstack: column mismatch");
    rows += p->rows;
  }
  Matrix out(rows, cols);
  auto it = out.data.begin();
  for (const Matrix* p : parts)
    it = std::copy(p->data.begin(), p->data.end(), it);
  return out;
}

} // namespace fedlsm
