// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "blockconv/kernels.hpp"

namespace bconv::kernels {
namespace {

void axpy_i32_ref(int64_t* acc, const int32_t* x, int32_t w, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] += static_cast<int64_t>(w) * x[i];
}

void axpy_f64_ref(double* acc, const double* x, double w, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        const double p = w * x[i];
        acc[i] = acc[i] + p;
    }
}

void add_sat_i32_ref(int32_t* dst, const int32_t* a, const int32_t* b, size_t n, int32_t lo,
                     int32_t hi) {
    for (size_t i = 0; i < n; ++i) {
        const int64_t s = static_cast<int64_t>(a[i]) + b[i];
        dst[i] = static_cast<int32_t>(std::clamp<int64_t>(s, lo, hi));
    }
}

void add_f64_ref(double* dst, const double* a, const double* b, size_t n) {
    for (size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable t{axpy_i32_ref, axpy_f64_ref, add_sat_i32_ref, add_f64_ref};
    return t;
}

} // namespace bconv::kernels
