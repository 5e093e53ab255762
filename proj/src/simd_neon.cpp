// NEON kernels for aarch64, where NEON is baseline.

#include <arm_neon.h>

#include <cstddef>

#include "cfqp/simd.hpp"

namespace cfqp::simd {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    for (; i + 2 <= n; i += 2) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
    }
    double total = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) total += a[i] * b[i];
    return total;
}

double sum_squares_neon(const double* a, std::size_t n) {
    return dot_neon(a, a, n);
}

}  // namespace cfqp::simd
