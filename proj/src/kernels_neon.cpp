// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/kernels.hpp"

#if defined(__ARM_NEON)

#include <arm_neon.h>

#include <algorithm>

namespace bconv::kernels {
namespace {

void axpy_i32_neon(int64_t* acc, const int32_t* x, int32_t w, size_t n) {
    const int32x2_t vw = vdup_n_s32(w);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const int32x4_t vx = vld1q_s32(x + i);
        const int64x2_t lo = vmull_s32(vget_low_s32(vx), vw);
        const int64x2_t hi = vmull_s32(vget_high_s32(vx), vw);
        vst1q_s64(acc + i, vaddq_s64(vld1q_s64(acc + i), lo));
        vst1q_s64(acc + i + 2, vaddq_s64(vld1q_s64(acc + i + 2), hi));
    }
    for (; i < n; ++i) acc[i] += static_cast<int64_t>(w) * x[i];
}

void axpy_f64_neon(double* acc, const double* x, double w, size_t n) {
    size_t i = 0;
#if defined(__aarch64__)
    const float64x2_t vw = vdupq_n_f64(w);
    for (; i + 2 <= n; i += 2) {
        const float64x2_t p = vmulq_f64(vw, vld1q_f64(x + i));
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i), p));
    }
#endif
    for (; i < n; ++i) {
        const double p = w * x[i];
        acc[i] = acc[i] + p;
    }
}

void add_sat_i32_neon(int32_t* dst, const int32_t* a, const int32_t* b, size_t n, int32_t lo,
                      int32_t hi) {
    const int32x4_t vlo = vdupq_n_s32(lo);
    const int32x4_t vhi = vdupq_n_s32(hi);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const int32x4_t s = vaddq_s32(vld1q_s32(a + i), vld1q_s32(b + i));
        vst1q_s32(dst + i, vminq_s32(vmaxq_s32(s, vlo), vhi));
    }
    for (; i < n; ++i) {
        const int64_t s = static_cast<int64_t>(a[i]) + b[i];
        dst[i] = static_cast<int32_t>(std::clamp<int64_t>(s, lo, hi));
    }
}

void add_f64_neon(double* dst, const double* a, const double* b, size_t n) {
    size_t i = 0;
#if defined(__aarch64__)
    for (; i + 2 <= n; i += 2) vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
#endif
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

} // namespace

const KernelTable& neon_table() {
    static const KernelTable t{axpy_i32_neon, axpy_f64_neon, add_sat_i32_neon, add_f64_neon};
    return t;
}

} // namespace bconv::kernels

#endif
