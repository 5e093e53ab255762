// AVX2+FMA kernels. Compiled with -mavx2 -mfma in this translation unit only;
// callers must check variant_usable(Variant::avx2) before dispatching here.

#include <immintrin.h>

#include <cstddef>

#include "cfqp/simd.hpp"

namespace cfqp::simd {

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    __m256d acc = _mm256_add_pd(acc0, acc1);
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d sum2 = _mm_add_pd(lo, hi);
    __m128d sum1 = _mm_add_sd(sum2, _mm_unpackhi_pd(sum2, sum2));
    double total = _mm_cvtsd_f64(sum1);
    for (; i < n; ++i) total += a[i] * b[i];
    return total;
}

double sum_squares_avx2(const double* a, std::size_t n) {
    return dot_avx2(a, a, n);
}

}  // namespace cfqp::simd
