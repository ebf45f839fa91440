// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>

#define BCONV_AVX2 __attribute__((target("avx2")))

namespace bconv::kernels {
namespace {

// Products of two 16-bit operands fit in 32 bits, so the multiply runs on
// eight lanes and only the accumulation is widened.
BCONV_AVX2 void axpy_i32_avx2(int64_t* acc, const int32_t* x, int32_t w, size_t n) {
    const __m256i vw = _mm256_set1_epi32(w);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256i vx = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(x + i));
        const __m256i p = _mm256_mullo_epi32(vx, vw);
        const __m256i lo = _mm256_cvtepi32_epi64(_mm256_castsi256_si128(p));
        const __m256i hi = _mm256_cvtepi32_epi64(_mm256_extracti128_si256(p, 1));
        __m256i* a0 = reinterpret_cast<__m256i*>(acc + i);
        __m256i* a1 = reinterpret_cast<__m256i*>(acc + i + 4);
        _mm256_storeu_si256(a0, _mm256_add_epi64(_mm256_loadu_si256(a0), lo));
        _mm256_storeu_si256(a1, _mm256_add_epi64(_mm256_loadu_si256(a1), hi));
    }
    for (; i < n; ++i) acc[i] += static_cast<int64_t>(w) * x[i];
}

BCONV_AVX2 void axpy_f64_avx2(double* acc, const double* x, double w, size_t n) {
    const __m256d vw = _mm256_set1_pd(w);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_mul_pd(vw, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), p));
    }
    for (; i < n; ++i) {
        const double p = w * x[i];
        acc[i] = acc[i] + p;
    }
}

BCONV_AVX2 void add_sat_i32_avx2(int32_t* dst, const int32_t* a, const int32_t* b, size_t n,
                                 int32_t lo, int32_t hi) {
    // Operands are at most 16-bit codes, so the 32-bit sum cannot wrap.
    const __m256i vlo = _mm256_set1_epi32(lo);
    const __m256i vhi = _mm256_set1_epi32(hi);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        const __m256i s = _mm256_min_epi32(_mm256_max_epi32(_mm256_add_epi32(va, vb), vlo), vhi);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), s);
    }
    for (; i < n; ++i) {
        const int64_t s = static_cast<int64_t>(a[i]) + b[i];
        dst[i] = static_cast<int32_t>(std::clamp<int64_t>(s, lo, hi));
    }
}

BCONV_AVX2 void add_f64_avx2(double* dst, const double* a, const double* b, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

} // namespace

const KernelTable& avx2_table() {
    static const KernelTable t{axpy_i32_avx2, axpy_f64_avx2, add_sat_i32_avx2, add_f64_avx2};
    return t;
}

} // namespace bconv::kernels

#endif
