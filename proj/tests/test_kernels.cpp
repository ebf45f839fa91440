// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <cstring>
#include <random>
#include <vector>

#include "blockconv/block.hpp"
#include "blockconv/kernels.hpp"
#include "blockconv/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bconv;
namespace k = bconv::kernels;

namespace {

std::vector<k::Isa> available() {
    std::vector<k::Isa> v;
    for (auto i : {k::Isa::scalar, k::Isa::avx2, k::Isa::neon})
        if (k::isa_available(i)) v.push_back(i);
    return v;
}

struct IsaGuard {
    k::Isa saved = k::active_isa();
    ~IsaGuard() { k::force_isa(saved); }
};

} // namespace

TEST_CASE("scalar is always available and active is the widest") {
    CHECK(k::isa_available(k::Isa::scalar));
    const auto v = available();
    if (!std::getenv("BLOCKCONV_ISA")) CHECK(k::active_isa() == v.back());
    MESSAGE("active ISA: " << std::string(k::to_string(k::active_isa())));
}

TEST_CASE("row primitives agree with scalar for every length and offset") {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int32_t> code(-32768, 32767);
    std::uniform_real_distribution<double> real(-4.0, 4.0);
    const auto& ref = k::scalar_table();
    for (auto isa : available()) {
        const auto& t = k::table(isa);
        for (size_t n = 0; n <= 67; ++n)
            for (size_t off = 0; off < 3; ++off) {
                std::vector<int32_t> x(n + off), a(n + off), b(n + off);
                std::vector<double> xf(n + off), af(n + off), bf(n + off);
                for (size_t i = 0; i < n + off; ++i) {
                    x[i] = code(rng), a[i] = code(rng), b[i] = code(rng);
                    xf[i] = real(rng), af[i] = real(rng), bf[i] = real(rng);
                }
                const int32_t w = code(rng);
                const double wf = real(rng);

                std::vector<int64_t> acc0(n + off, 7), acc1(n + off, 7);
                ref.axpy_i32(acc0.data() + off, x.data() + off, w, n);
                t.axpy_i32(acc1.data() + off, x.data() + off, w, n);
                CHECK(acc0 == acc1);

                std::vector<double> d0(n + off, 0.5), d1(n + off, 0.5);
                ref.axpy_f64(d0.data() + off, xf.data() + off, wf, n);
                t.axpy_f64(d1.data() + off, xf.data() + off, wf, n);
                CHECK(std::memcmp(d0.data(), d1.data(), d0.size() * sizeof(double)) == 0);

                std::vector<int32_t> s0(n + off), s1(n + off);
                ref.add_sat_i32(s0.data() + off, a.data() + off, b.data() + off, n, -128, 127);
                t.add_sat_i32(s1.data() + off, a.data() + off, b.data() + off, n, -128, 127);
                CHECK(s0 == s1);

                ref.add_f64(d0.data() + off, af.data() + off, bf.data() + off, n);
                t.add_f64(d1.data() + off, af.data() + off, bf.data() + off, n);
                CHECK(std::memcmp(d0.data(), d1.data(), d0.size() * sizeof(double)) == 0);
            }
    }
}

TEST_CASE("saturating add clamps into range") {
    for (auto isa : available()) {
        const auto& t = k::table(isa);
        std::vector<int32_t> a{100, -100, 3, 32767}, b{100, -100, -4, 1}, d(4);
        t.add_sat_i32(d.data(), a.data(), b.data(), 4, -128, 127);
        CHECK(d == std::vector<int32_t>{127, -128, -1, 127});
    }
}

TEST_CASE("convolution and block convolution are ISA independent") {
    IsaGuard guard;
    std::mt19937_64 rng(4);
    const auto af = ScalarFormat::fixed(8, 4), wf = ScalarFormat::fixed(8, 6);
    for (int i = 0; i < 10; ++i) {
        const Tensor4D x = oracle::random_fixed({1, 4, 19, 23}, af, rng, -128, 127);
        const Tensor4D w = oracle::random_fixed({5, 4, 3, 3}, wf, rng, -64, 63);
        const Tensor4D xr = oracle::random_real({1, 4, 19, 23}, rng), wr = oracle::random_real({5, 4, 3, 3}, rng);
        const std::vector<double> bias{0.25, -0.5, 0, 1, -1};
        ConvParams cp;
        cp.pad = Padding4::uniform(1);
        cp.pad_mode = static_cast<PadMode>(i % 3);
        const BlockGrid g = BlockGrid::fixed(19, 23, 8, 8);
        const BlockPadding bp = make_block_padding(g, 3, 1, cp.pad, cp.pad_mode);
        std::vector<Tensor4D> outs;
        for (auto isa : available()) {
            k::force_isa(isa);
            outs.push_back(conv2d_ref(x, w, bias, cp));
            outs.push_back(conv2d_ref(xr, wr, bias, cp));
            outs.push_back(block_conv2d(x, w, bias, g, bp, {}));
            outs.push_back(eltwise_add(x, x));
        }
        for (size_t j = 4; j < outs.size(); ++j) {
            const Tensor4D& a = outs[j % 4];
            const Tensor4D& b = outs[j];
            if (a.is_fixed()) {
                CHECK(a == b);
            } else {
                CHECK(std::memcmp(a.real_data().data(), b.real_data().data(), a.size() * sizeof(double)) == 0);
            }
        }
    }
}
