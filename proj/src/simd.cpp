#include "cfqp/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <mutex>

#include "cfqp/errors.hpp"

namespace cfqp::simd {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares_scalar(const double* a, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

namespace {

struct Kernels {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum_squares)(const double*, std::size_t);
};

bool cpu_supports(Variant v) {
    switch (v) {
        case Variant::scalar:
            return true;
        case Variant::avx2:
#if defined(CFQP_BUILD_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Variant::neon:
#if defined(CFQP_BUILD_NEON)
            return true;  // baseline on aarch64
#else
            return false;
#endif
    }
    return false;
}

Kernels kernels_for(Variant v) {
    switch (v) {
#if defined(CFQP_BUILD_AVX2)
        case Variant::avx2:
            return {dot_avx2, sum_squares_avx2};
#endif
#if defined(CFQP_BUILD_NEON)
        case Variant::neon:
            return {dot_neon, sum_squares_neon};
#endif
        default:
            return {dot_scalar, sum_squares_scalar};
    }
}

std::mutex g_mutex;
Variant g_variant = Variant::scalar;
Kernels g_kernels = {dot_scalar, sum_squares_scalar};
std::atomic<bool> g_resolved{false};

Variant resolve_default() {
    if (const char* env = std::getenv("CFQP_SIMD")) {
        if (std::strcmp(env, "scalar") == 0) return Variant::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_supports(Variant::avx2)) return Variant::avx2;
        if (std::strcmp(env, "neon") == 0 && cpu_supports(Variant::neon)) return Variant::neon;
        // Unknown or unusable override falls through to auto-detection.
    }
    if (cpu_supports(Variant::avx2)) return Variant::avx2;
    if (cpu_supports(Variant::neon)) return Variant::neon;
    return Variant::scalar;
}

void ensure_resolved() {
    if (g_resolved.load(std::memory_order_acquire)) return;
    std::lock_guard<std::mutex> lock(g_mutex);
    if (g_resolved.load(std::memory_order_relaxed)) return;
    g_variant = resolve_default();
    g_kernels = kernels_for(g_variant);
    g_resolved.store(true, std::memory_order_release);
}

}  // namespace

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::scalar: return "scalar";
        case Variant::avx2: return "avx2";
        case Variant::neon: return "neon";
    }
    return "unknown";
}

std::vector<Variant> compiled_variants() {
    std::vector<Variant> out{Variant::scalar};
#if defined(CFQP_BUILD_AVX2)
    out.push_back(Variant::avx2);
#endif
#if defined(CFQP_BUILD_NEON)
    out.push_back(Variant::neon);
#endif
    return out;
}

bool variant_usable(Variant v) { return cpu_supports(v); }

Variant active_variant() {
    ensure_resolved();
    return g_variant;
}

void force_variant(Variant v) {
    if (!cpu_supports(v)) {
        throw ConfigError(std::string("SIMD variant not usable on this host: ") + variant_name(v));
    }
    std::lock_guard<std::mutex> lock(g_mutex);
    g_variant = v;
    g_kernels = kernels_for(v);
    g_resolved.store(true, std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) {
    ensure_resolved();
    return g_kernels.dot(a, b, n);
}

double sum_squares(const double* a, std::size_t n) {
    ensure_resolved();
    return g_kernels.sum_squares(a, n);
}

}  // namespace cfqp::simd
