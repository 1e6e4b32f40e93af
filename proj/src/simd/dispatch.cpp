#include <atomic>
#include <cstdlib>
#include <string_view>

#include "siren/simd/kernels.hpp"

namespace siren::simd {

#if defined(SIREN_HAVE_AVX2)
const KernelTable& avx2_kernels_unchecked();
#endif

const KernelTable* avx2_kernels() {
#if defined(SIREN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? &avx2_kernels_unchecked() : nullptr;
#else
    return nullptr;
#endif
}

namespace {

const KernelTable* select_default() {
    if (const char* env = std::getenv("SIREN_SIMD")) {
        const std::string_view want(env);
        if (want == "scalar") return &scalar_kernels();
        if (want == "avx2" && avx2_kernels()) return avx2_kernels();
        if (want == "neon" && neon_kernels()) return neon_kernels();
    }
    if (const auto* t = avx2_kernels()) return t;
    if (const auto* t = neon_kernels()) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
    static std::atomic<const KernelTable*> current{select_default()};
    return current;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

void set_active(const KernelTable& table) { slot().store(&table, std::memory_order_relaxed); }

}  // namespace siren::simd
