#pragma once

// Inner-loop arithmetic shared by k-means, cosine retrieval and the ESU
// training path. Every kernel has a portable scalar reference and, where the
// target supports it, a vectorized variant. The active table is chosen once
// at first use from CPU features; SIREN_SIMD=scalar|avx2|neon overrides it.
//
// Single-precision kernels accumulate in double. Rankings built on cosine
// scores then agree between variants up to ~1e-15 relative error instead of
// float rounding, which keeps exact top-K selection stable across dispatch.

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

namespace siren::simd {

struct KernelTable {
    std::string_view name;
    double (*dot_f32)(const float* a, const float* b, std::size_t n);
    double (*sqnorm_f32)(const float* a, std::size_t n);
    double (*l2sq_f32)(const float* a, const float* b, std::size_t n);
    double (*dot_f64)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy_f64)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

const KernelTable& active();

// Replaces the active table; used by tests and benchmarks that compare
// variants. Not thread-safe with concurrent kernel calls.
void set_active(const KernelTable& table);

inline double dot(std::span<const float> a, std::span<const float> b) {
    assert(a.size() == b.size());
    return active().dot_f32(a.data(), b.data(), a.size());
}

inline double squared_norm(std::span<const float> a) {
    return active().sqnorm_f32(a.data(), a.size());
}

inline double squared_l2(std::span<const float> a, std::span<const float> b) {
    assert(a.size() == b.size());
    return active().l2sq_f32(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return active().dot_f64(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active().axpy_f64(alpha, x.data(), y.data(), x.size());
}

}  // namespace siren::simd
