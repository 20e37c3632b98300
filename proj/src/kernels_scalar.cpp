#include "fedlsm/kernels.hpp"

#include <cmath>

namespace fedlsm::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += a[i] * b[i];
  return acc;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += x[i];
  return acc;
}

void axpy_scalar(double* y, double a, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] = y[i] + a * x[i];
}

void scale_scalar(double* y, double a, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    y[i] = y[i] * a;
}

void ema_scalar(double* t, const double* s, double decay, std::size_t n) {
  const double keep = 1.0 - decay;
  for (std::size_t i = 0; i < n; ++i)
    t[i] = decay * t[i] + keep * s[i];
}

void adam_scalar(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
                 double beta1, double beta2, double eps, double bc1, double bc2) {
  const double one_b1 = 1.0 - beta1;
  const double one_b2 = 1.0 - beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + one_b1 * g[i];
    v[i] = beta2 * v[i] + one_b2 * (g[i] * g[i]);
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] = p[i] - lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

} // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar, "scalar",     dot_scalar, sum_scalar,
                                 axpy_scalar, scale_scalar, ema_scalar, adam_scalar};
  return table;
}

} // namespace fedlsm::kernels
