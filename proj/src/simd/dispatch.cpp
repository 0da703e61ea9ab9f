#include "isomctl/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace isomctl::simd {

#if defined(ISOMCTL_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

const KernelTable* avx2_kernels() {
#if defined(ISOMCTL_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* pick() {
  if (const char* env = std::getenv("ISOMCTL_SIMD"); env && std::string(env) == "scalar") {
    return &scalar_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{pick()};
  return table;
}

}  // namespace

const KernelTable& kernels() { return *active().load(std::memory_order_relaxed); }

void force_level(Level level) {
  if (level == Level::Avx2 && avx2_kernels()) {
    active().store(avx2_kernels());
  } else {
    active().store(&scalar_kernels());
  }
}

std::string_view level_name(Level level) { return level == Level::Avx2 ? "avx2" : "scalar"; }

}  // namespace isomctl::simd
