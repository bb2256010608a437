#include <atomic>
#include <cstdlib>
#include <string>

#include "wassreg/errors.hpp"
#include "wassreg/simd.hpp"

namespace wassreg::simd {

#if defined(WASSREG_HAVE_AVX2)
const KernelTable* avx2_kernels_impl();
#endif

const KernelTable* avx2_kernels() {
#if defined(WASSREG_HAVE_AVX2)
  return avx2_kernels_impl();
#else
  return nullptr;
#endif
}

bool avx2_available() {
#if defined(WASSREG_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

namespace {

const KernelTable* resolve(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") {
    if (!avx2_available()) throw ValidationError("AVX2 kernels requested but not available on this CPU/build");
    return avx2_kernels();
  }
  if (name == "auto" || name.empty()) return avx2_available() ? avx2_kernels() : &scalar_kernels();
  throw ValidationError("unknown SIMD kernel set '" + std::string(name) + "'");
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    const char* env = std::getenv("WASSREG_SIMD");
    t = resolve(env ? std::string_view(env) : std::string_view("auto"));
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void select(std::string_view name) { g_active.store(resolve(name), std::memory_order_release); }

}  // namespace wassreg::simd
