#pragma once

// Data-parallel inner loops used by the network, the optimizer and the
// aggregators. Every kernel has a scalar reference implementation; SIMD
// variants are selected once at startup from what the CPU supports.
//
// Elementwise kernels (axpy, scale, ema, adam) produce bit-identical results in
// every variant. Reductions (dot, sum) may differ in the last few ulps because
// the summation order changes with the vector width.

#include <cstddef>
#include <span>
#include <string_view>

namespace fedlsm::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // y += a * x
  void (*axpy)(double* y, double a, const double* x, std::size_t n);
  // y *= a
  void (*scale)(double* y, double a, std::size_t n);
  // t = decay * t + (1 - decay) * s
  void (*ema)(double* t, const double* s, double decay, std::size_t n);
  // Bias-corrected Adam; bc1 = 1 - beta1^t, bc2 = 1 - beta2^t.
  void (*adam)(double* p, double* m, double* v, const double* g, std::size_t n, double lr,
               double beta1, double beta2, double eps, double bc1, double bc2);
};

const KernelTable& scalar_table();

// Null when the variant was not compiled in or the CPU lacks the extension.
const KernelTable* avx2_table();

// The table used by the span wrappers below. Defaults to the widest supported
// variant; FEDLSM_SIMD=scalar in the environment forces the reference path.
const KernelTable& active();

// Returns false if the requested variant is unavailable.
bool select(Isa isa);

std::string_view active_name();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double sum(std::span<const double> x) { return active().sum(x.data(), x.size()); }

inline void axpy(std::span<double> y, double a, std::span<const double> x) {
  active().axpy(y.data(), a, x.data(), y.size());
}

inline void scale(std::span<double> y, double a) { active().scale(y.data(), a, y.size()); }

inline void ema(std::span<double> t, std::span<const double> s, double decay) {
  active().ema(t.data(), s.data(), decay, t.size());
}

} // namespace fedlsm::kernels
