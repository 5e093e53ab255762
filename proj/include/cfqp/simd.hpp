#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cfqp::simd {

enum class Variant { scalar, avx2, neon };

const char* variant_name(Variant v);

// Variants compiled into this binary (scalar always present).
std::vector<Variant> compiled_variants();

// Compiled in and usable on this CPU.
bool variant_usable(Variant v);

// The variant the dispatcher resolved to. Resolution order: CFQP_SIMD env
// override if set, otherwise the widest usable variant.
Variant active_variant();

// Force a specific variant (tests / benchmarking). Throws ConfigError if the
// variant is not usable.
void force_variant(Variant v);

// Dispatched kernels.
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* a, std::size_t n);

// Direct entry points, for equivalence tests.
double dot_scalar(const double* a, const double* b, std::size_t n);
double sum_squares_scalar(const double* a, std::size_t n);
#if defined(CFQP_BUILD_AVX2)
double dot_avx2(const double* a, const double* b, std::size_t n);
double sum_squares_avx2(const double* a, std::size_t n);
#endif
#if defined(CFQP_BUILD_NEON)
double dot_neon(const double* a, const double* b, std::size_t n);
double sum_squares_neon(const double* a, std::size_t n);
#endif

}  // namespace cfqp::simd
