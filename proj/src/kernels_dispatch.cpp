// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "blockconv/kernels.hpp"
#include "blockconv/tensor.hpp"

namespace bconv::kernels {
namespace {

Isa detect() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
#if defined(__ARM_NEON)
    return Isa::neon;
#endif
    return Isa::scalar;
}

// BLOCKCONV_ISA=scalar|avx2|neon overrides detection when that ISA is usable.
Isa initial() {
    const char* env = std::getenv("BLOCKCONV_ISA");
    if (env) {
        const std::string_view v(env);
        for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon})
            if (v == to_string(isa) && isa_available(isa)) return isa;
    }
    return detect();
}

std::atomic<Isa>& selected() {
    static std::atomic<Isa> isa{initial()};
    return isa;
}

} // namespace

const char* to_string(Isa isa) {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    case Isa::neon: return "neon";
    }
    return "scalar";
}

bool isa_available(Isa isa) {
    switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
        return __builtin_cpu_supports("avx2");
#else
        return false;
#endif
    case Isa::neon:
#if defined(__ARM_NEON)
        return true;
#else
        return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!isa_available(isa))
        throw Error(std::string("ISA not available on this machine: ") + to_string(isa));
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
    case Isa::avx2: return avx2_table();
#endif
#if defined(__ARM_NEON)
    case Isa::neon: return neon_table();
#endif
    default: return scalar_table();
    }
}

const KernelTable& active() { return table(selected().load(std::memory_order_relaxed)); }

Isa active_isa() { return selected().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
    if (!isa_available(isa))
        throw Error(std::string("ISA not available on this machine: ") + to_string(isa));
    selected().store(isa, std::memory_order_relaxed);
}

} // namespace bconv::kernels
