#include "fedlsm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace fedlsm::kernels {

#ifdef FEDLSM_WITH_AVX2
const KernelTable& avx2_table_impl();
#endif

namespace {

bool cpu_has_avx2() {
#if defined(FEDLSM_WITH_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* pick_default() {
  const char* env = std::getenv("FEDLSM_SIMD");
  if (env != nullptr && std::string_view(env) == "scalar")
    return &scalar_table();
  if (const KernelTable* t = avx2_table())
    return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{pick_default()};
  return table;
}

} // namespace

const KernelTable* avx2_table() {
#ifdef FEDLSM_WITH_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &avx2_table_impl() : nullptr;
#else
  (void)cpu_has_avx2;
  return nullptr;
#endif
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

bool select(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (t == nullptr)
    return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

std::string_view active_name() { return active().name; }

} // namespace fedlsm::kernels
