// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>

#include "blockconv/ops.hpp"
#include "blockconv/tensor_io.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bconv;

namespace {

bool same(const Tensor4D& a, const Tensor4D& b) { return a.dims() == b.dims() && a.format() == b.format() && a == b; }

bool close(const Tensor4D& a, const Tensor4D& b, double tol) {
    if (!(a.dims() == b.dims())) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (std::abs(a.value(i) - b.value(i)) > tol) return false;
    return true;
}

} // namespace

TEST_CASE("fixed formats") {
    const auto f8 = ScalarFormat::fixed(8, 4);
    CHECK(f8.min_value() == -128);
    CHECK(f8.max_value() == 127);
    CHECK(ScalarFormat::fixed(4, 3).max_value() == 7);
    CHECK(ScalarFormat::fixed(16, 8).min_value() == -32768);
    CHECK(f8.storage_bits() == 8);
    CHECK(ScalarFormat::real64().storage_bits() == 64);
    CHECK_THROWS_AS(ScalarFormat::fixed(12, 2), Error);
    CHECK_THROWS_AS(ScalarFormat::fixed(8, 9), Error);
}

TEST_CASE("rounding and saturation") {
    CHECK(round_half_away(2.5) == 3);
    CHECK(round_half_away(-2.5) == -3);
    CHECK(round_half_away(2.4999) == 2);
    CHECK(saturate(300, ScalarFormat::fixed(8, 0)) == 127);
    CHECK(saturate(-300, ScalarFormat::fixed(8, 0)) == -128);
    CHECK(quantize(0.5, ScalarFormat::fixed(8, 4)) == 8);
    CHECK(quantize(100.0, ScalarFormat::fixed(8, 4)) == 127);

    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int64_t> acc(-(int64_t{1} << 24), int64_t{1} << 24);
    std::uniform_int_distribution<int> sh(-3, 14);
    for (const auto& f : {ScalarFormat::fixed(4, 2), ScalarFormat::fixed(8, 4), ScalarFormat::fixed(16, 8)})
        for (int i = 0; i < 2000; ++i) {
            const int64_t a = acc(rng);
            const int s = sh(rng);
            CHECK(requantize(a, s, f) == oracle::clamp_to(oracle::shift_round(a, s), f));
        }
    // Exact halves round away from zero.
    CHECK(requantize(3, 1, ScalarFormat::fixed(8, 0)) == 2);
    CHECK(requantize(-3, 1, ScalarFormat::fixed(8, 0)) == -2);
}

TEST_CASE("tensor value access and conversion") {
    Tensor4D t({1, 2, 2, 2}, ScalarFormat::fixed(8, 4));
    t.set_raw(0, 16);
    t.set_raw(1, 500);
    CHECK(t.value(0) == doctest::Approx(1.0));
    CHECK(t.q(0, 0, 0, 1) == 127);
    CHECK(t.in_range());
    const Tensor4D r = t.to_real();
    CHECK(r.r(0, 0, 0, 0) == 1.0);
    CHECK(same(r.to_fixed(t.format()), t));
}

TEST_CASE("tensor container round trip") {
    std::mt19937_64 rng(3);
    const auto dir = std::filesystem::temp_directory_path();
    for (const auto& f : {ScalarFormat::fixed(4, 3), ScalarFormat::fixed(8, 4), ScalarFormat::fixed(16, 14)}) {
        const int lo = static_cast<int>(f.min_value()), hi = static_cast<int>(f.max_value());
        const Tensor4D t = oracle::random_fixed({2, 3, 5, 7}, f, rng, lo, hi);
        CHECK(same(decode_tensor(encode_tensor(t)), t));
        const auto path = (dir / "bconv_rt.bct").string();
        save_tensor(t, path);
        CHECK(same(load_tensor(path), t));
        std::remove(path.c_str());
    }
    const Tensor4D r = oracle::random_real({1, 2, 3, 4}, rng);
    CHECK(same(decode_tensor(encode_tensor(r)), r));

    auto bytes = encode_tensor(r);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "BCT1");
    bytes[0] = 'X';
    CHECK_THROWS_AS(decode_tensor(bytes), Error);
    auto shortened = encode_tensor(r);
    shortened.pop_back();
    CHECK_THROWS_AS(decode_tensor(shortened), Error);
}

TEST_CASE("pad modes match mirror/clamp oracle") {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> ext(2, 9), amt(0, 3), mode(0, 2);
    for (int i = 0; i < 60; ++i) {
        const int h = ext(rng), w = ext(rng);
        const auto m = static_cast<PadMode>(mode(rng));
        Padding4 p{amt(rng), amt(rng), amt(rng), amt(rng)};
        if (m == PadMode::reflect) {
            p.top = std::min(p.top, h - 1), p.bottom = std::min(p.bottom, h - 1);
            p.left = std::min(p.left, w - 1), p.right = std::min(p.right, w - 1);
        }
        const Tensor4D t = oracle::random_fixed({1, 2, h, w}, ScalarFormat::fixed(8, 4), rng, -128, 127);
        CHECK(same(pad(t, p, m), oracle::pad(t, p.top, p.bottom, p.left, p.right, m)));
    }
    const Tensor4D t({1, 1, 2, 2}, ScalarFormat::fixed(8, 4));
    CHECK_THROWS_AS(pad(t, Padding4::uniform(2), PadMode::reflect), Error);
    CHECK(pad_source_index(-1, 5, PadMode::reflect) == 1);
    CHECK(pad_source_index(5, 5, PadMode::reflect) == 3);
    CHECK(pad_source_index(-2, 5, PadMode::replicate) == 0);
    CHECK(pad_source_index(-1, 5, PadMode::zero) == -1);
}

TEST_CASE("conv2d_ref matches the direct loop oracle") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> ext(3, 10), ch(1, 4), kk(0, 2), st(1, 2), pp(0, 2), mode(0, 2), coin(0, 1);
    const int ks[] = {1, 3, 5};
    for (int i = 0; i < 120; ++i) {
        const int k = ks[kk(rng)], s = st(rng), c = ch(rng);
        const bool dw = coin(rng) == 1;
        const int m = dw ? c : ch(rng);
        const int h = ext(rng) + k, w = ext(rng) + k;
        const auto pm = static_cast<PadMode>(mode(rng));
        ConvParams cp;
        cp.stride = s;
        cp.pad = {pp(rng), pp(rng), pp(rng), pp(rng)};
        cp.pad_mode = pm;
        cp.depthwise = dw;
        std::vector<double> bias(m);
        for (auto& b : bias) b = std::uniform_int_distribution<int>(-64, 64)(rng) / 64.0;
        const Dims wd{m, dw ? 1 : c, k, k};
        if (coin(rng)) {
            const auto af = ScalarFormat::fixed(8, 4), wf = ScalarFormat::fixed(8, 6);
            const Tensor4D x = oracle::random_fixed({1, c, h, w}, af, rng, -128, 127);
            const Tensor4D wt = oracle::random_fixed(wd, wf, rng, -40, 40);
            CHECK(same(conv2d_ref(x, wt, bias, cp),
                       oracle::conv(x, wt, bias, s, cp.pad.top, cp.pad.bottom, cp.pad.left, cp.pad.right, pm, dw, af)));
        } else {
            const Tensor4D x = oracle::random_real({1, c, h, w}, rng), wt = oracle::random_real(wd, rng);
            CHECK(close(conv2d_ref(x, wt, bias, cp),
                        oracle::conv(x, wt, bias, s, cp.pad.top, cp.pad.bottom, cp.pad.left, cp.pad.right, pm, dw,
                                     ScalarFormat::real64()),
                        1e-12));
        }
    }
}

TEST_CASE("conv2d_ref output format and shape errors") {
    const auto af = ScalarFormat::fixed(16, 8);
    Tensor4D x({1, 2, 6, 6}, af), w({3, 2, 3, 3}, ScalarFormat::fixed(16, 14));
    ConvParams cp;
    cp.pad = Padding4::uniform(1);
    cp.out_format = ScalarFormat::fixed(8, 4);
    const Tensor4D y = conv2d_ref(x, w, {}, cp);
    CHECK(y.dims() == Dims{1, 3, 6, 6});
    CHECK(y.format() == ScalarFormat::fixed(8, 4));
    Tensor4D bad({3, 4, 3, 3}, ScalarFormat::fixed(16, 14));
    CHECK_THROWS_AS(conv2d_ref(x, bad, {}, cp), Error);
    CHECK(conv_out_extent(8, 1, 1, 3, 1) == 8);
    CHECK(conv_out_extent(8, 0, 1, 3, 2) == 4);
}

TEST_CASE("maxpool and eltwise") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 30; ++i) {
        const Tensor4D x = oracle::random_fixed({1, 3, 8, 10}, ScalarFormat::fixed(8, 4), rng, -128, 127);
        CHECK(same(maxpool2d(x, 2, 2), oracle::maxpool(x, 2, 2)));
        CHECK(same(maxpool2d(x, 3, 2), oracle::maxpool(x, 3, 2)));
    }
    const auto f = ScalarFormat::fixed(8, 4);
    Tensor4D a({1, 1, 1, 3}, f), b({1, 1, 1, 3}, f);
    a.set_raw(0, 100), b.set_raw(0, 100);
    a.set_raw(1, -100), b.set_raw(1, -100);
    a.set_raw(2, 5), b.set_raw(2, -7);
    const Tensor4D s = eltwise_add(a, b);
    CHECK(s.q(0, 0, 0, 0) == 127);
    CHECK(s.q(0, 0, 0, 1) == -128);
    CHECK(s.q(0, 0, 0, 2) == -2);
    CHECK_THROWS_AS(eltwise_add(a, Tensor4D({1, 1, 1, 4}, f)), Error);
}

TEST_CASE("kernel application count of an 8x8x3 conv") {
    ConvShape s;
    s.input = {1, 3, 8, 8};
    s.out_channels = 1;
    s.k = 3;
    s.pad = Padding4::uniform(1);
    const MacCount mc = mac_count(s);
    CHECK(mc.kernel_applications == 8 * 8 * 3);
    CHECK(mc.macs == 8 * 8 * 3 * 9);
    s.depthwise = true;
    s.out_channels = 3;
    CHECK(mac_count(s).kernel_applications == 8 * 8 * 3);
}
