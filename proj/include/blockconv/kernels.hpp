// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

// Row primitives used by the convolution and element-wise paths. Every ISA
// variant must be bit-exact with the scalar reference: the integer kernels
// are exact by construction, and the f64 kernels perform one rounded multiply
// and one rounded add per element (no fused multiply-add).

namespace bconv::kernels {

enum class Isa { scalar, avx2, neon };

const char* to_string(Isa isa);

struct KernelTable {
    /// acc[i] += w * x[i]. |w|, |x[i]| must fit in 16 bits.
    void (*axpy_i32)(int64_t* acc, const int32_t* x, int32_t w, size_t n);
    /// acc[i] += w * x[i].
    void (*axpy_f64)(double* acc, const double* x, double w, size_t n);
    /// dst[i] = clamp(a[i] + b[i], lo, hi).
    void (*add_sat_i32)(int32_t* dst, const int32_t* a, const int32_t* b, size_t n, int32_t lo,
                        int32_t hi);
    /// dst[i] = a[i] + b[i].
    void (*add_f64)(double* dst, const double* a, const double* b, size_t n);
};

const KernelTable& scalar_table();
#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_table();
#endif
#if defined(__ARM_NEON)
const KernelTable& neon_table();
#endif

/// Whether `isa` is compiled in and supported by the running CPU.
bool isa_available(Isa isa);
const KernelTable& table(Isa isa);

/// The table selected at startup: the widest available ISA.
const KernelTable& active();
Isa active_isa();
/// Overrides the runtime selection (tests and benchmarking). Throws if unavailable.
void force_isa(Isa isa);

} // namespace bconv::kernels
