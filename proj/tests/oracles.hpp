// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Independent re-derivations used as test oracles. Nothing here calls the
// library's arithmetic; only the container types are shared.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "blockconv/block.hpp"
#include "blockconv/tensor.hpp"

namespace oracle {

using bconv::Dims;
using bconv::PadMode;
using bconv::ScalarFormat;
using bconv::Tensor4D;

/// Mirror/clamp index into [0, n); -1 means a zero sample.
inline int mirror_clamp(int i, int n, PadMode m) {
    if (i >= 0 && i < n) return i;
    if (m == PadMode::zero) return -1;
    if (m == PadMode::replicate) return i < 0 ? 0 : n - 1;
    // Reflect about the edge pixel; valid while the overhang is < n.
    return i < 0 ? -i : 2 * (n - 1) - i;
}

inline int64_t shift_round(int64_t acc, int shift) {
    if (shift <= 0) return acc * (int64_t{1} << -shift);
    const int64_t mag = acc < 0 ? -acc : acc;
    const int64_t q = (mag + (int64_t{1} << (shift - 1))) >> shift;
    return acc < 0 ? -q : q;
}

inline int64_t clamp_to(int64_t v, const ScalarFormat& f) {
    const int64_t hi = (int64_t{1} << (f.bitwidth - 1)) - 1, lo = -(int64_t{1} << (f.bitwidth - 1));
    return std::clamp(v, lo, hi);
}

/// Sample of channel c at padded coordinate (y, x) of a batch-0 tensor.
inline double sample(const Tensor4D& t, int c, int y, int x, PadMode m) {
    const int sy = mirror_clamp(y, t.dims().h, m), sx = mirror_clamp(x, t.dims().w, m);
    if (sy < 0 || sx < 0) return 0.0;
    return t.is_fixed() ? t.q(0, c, sy, sx) : t.r(0, c, sy, sx);
}

/// Explicitly padded copy built element by element.
inline Tensor4D pad(const Tensor4D& t, int top, int bottom, int left, int right, PadMode m) {
    const Dims d = t.dims();
    Tensor4D out({d.n, d.c, d.h + top + bottom, d.w + left + right}, t.format());
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < out.dims().h; ++y)
                for (int x = 0; x < out.dims().w; ++x) {
                    const int sy = mirror_clamp(y - top, d.h, m), sx = mirror_clamp(x - left, d.w, m);
                    const size_t i = out.index(n, c, y, x);
                    if (sy < 0 || sx < 0) continue;
                    if (t.is_fixed())
                        out.fixed_data()[i] = t.q(n, c, sy, sx);
                    else
                        out.real_data()[i] = t.r(n, c, sy, sx);
                }
    return out;
}

/// Seven-loop direct convolution, batch 1. Fixed path: int64 accumulation of
/// raw codes, bias at accumulator scale, one rounding shift, saturation.
inline Tensor4D conv(const Tensor4D& in, const Tensor4D& w, const std::vector<double>& bias, int stride,
                     int top, int bottom, int left, int right, PadMode m, bool depthwise,
                     const ScalarFormat& out_fmt) {
    const Dims d = in.dims();
    const int k = w.dims().h, M = w.dims().n;
    const int oh = (d.h + top + bottom - k) / stride + 1, ow = (d.w + left + right - k) / stride + 1;
    Tensor4D out({1, M, oh, ow}, in.is_fixed() ? out_fmt : ScalarFormat::real64());
    const int acc_frac = in.format().fraction_bits + w.format().fraction_bits;
    for (int o = 0; o < M; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                int64_t ai = 0;
                double ar = 0;
                if (!bias.empty()) {
                    if (in.is_fixed())
                        ai = std::llround(std::ldexp(bias[o], acc_frac));
                    else
                        ar = bias[o];
                }
                const int c0 = depthwise ? o : 0, c1 = depthwise ? o + 1 : d.c;
                for (int c = c0; c < c1; ++c)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const double v = sample(in, c, y * stride + ky - top, x * stride + kx - left, m);
                            const int wc = depthwise ? 0 : c;
                            if (in.is_fixed())
                                ai += static_cast<int64_t>(v) * w.q(o, wc, ky, kx);
                            else
                                ar += v * w.r(o, wc, ky, kx);
                        }
                if (in.is_fixed())
                    out.q(0, o, y, x) =
                        static_cast<int32_t>(clamp_to(shift_round(ai, acc_frac - out_fmt.fraction_bits), out_fmt));
                else
                    out.r(0, o, y, x) = ar;
            }
    return out;
}

/// Max over each k x k window with stride s.
inline Tensor4D maxpool(const Tensor4D& in, int k, int s) {
    const Dims d = in.dims();
    const int oh = (d.h - k) / s + 1, ow = (d.w - k) / s + 1;
    Tensor4D out({d.n, d.c, oh, ow}, in.format());
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double best = -INFINITY;
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < k; ++j) {
                            const double v =
                                in.is_fixed() ? in.q(n, c, y * s + i, x * s + j) : in.r(n, c, y * s + i, x * s + j);
                            best = std::max(best, v);
                        }
                    out.set_raw(out.index(n, c, y, x), best);
                }
    return out;
}

/// Block convolution by explicit slicing: every block is cut out, padded on
/// its own (zero/replicate/reflect from its own pixels) and convolved.
inline Tensor4D block_conv(const Tensor4D& in, const Tensor4D& w, const std::vector<double>& bias,
                           const std::vector<int>& row_ext, const std::vector<int>& col_ext,
                           const std::vector<std::pair<int, int>>& row_pad,
                           const std::vector<std::pair<int, int>>& col_pad, int stride, PadMode m, bool depthwise,
                           const ScalarFormat& out_fmt) {
    std::vector<std::vector<Tensor4D>> outs(row_ext.size());
    int y0 = 0;
    for (size_t r = 0; r < row_ext.size(); ++r) {
        int x0 = 0;
        for (size_t c = 0; c < col_ext.size(); ++c) {
            Tensor4D blk({1, in.dims().c, row_ext[r], col_ext[c]}, in.format());
            for (int ch = 0; ch < in.dims().c; ++ch)
                for (int y = 0; y < row_ext[r]; ++y)
                    for (int x = 0; x < col_ext[c]; ++x)
                        blk.set_raw(blk.index(0, ch, y, x), in.is_fixed() ? in.q(0, ch, y0 + y, x0 + x)
                                                                           : in.r(0, ch, y0 + y, x0 + x));
            outs[r].push_back(conv(blk, w, bias, stride, row_pad[r].first, row_pad[r].second, col_pad[c].first,
                                   col_pad[c].second, m, depthwise, out_fmt));
            x0 += col_ext[c];
        }
        y0 += row_ext[r];
    }
    int H = 0, W = 0;
    for (auto& row : outs) H += row[0].dims().h;
    for (auto& b : outs[0]) W += b.dims().w;
    Tensor4D out({1, outs[0][0].dims().c, H, W}, outs[0][0].format());
    int oy = 0;
    for (auto& row : outs) {
        int ox = 0;
        for (auto& b : row) {
            for (int ch = 0; ch < b.dims().c; ++ch)
                for (int y = 0; y < b.dims().h; ++y)
                    for (int x = 0; x < b.dims().w; ++x)
                        if (b.is_fixed())
                            out.q(0, ch, oy + y, ox + x) = b.q(0, ch, y, x);
                        else
                            out.r(0, ch, oy + y, ox + x) = b.r(0, ch, y, x);
            ox += b.dims().w;
        }
        oy += row[0].dims().h;
    }
    return out;
}

/// Cycle count of one conv layer: phases * (Tr+K-1) * (Tc+K-1) * Tm / n_pe,
/// tiles clamped to the layer extents, one ceiling at the end.
inline uint64_t cycles(long M, long N, long R, long C, long K, long Tr, long Tc, long Tm, long Tn, long n_pe) {
    Tr = std::min(Tr, R), Tc = std::min(Tc, C), Tm = std::min(Tm, M), Tn = std::min(Tn, N);
    const long phases = (M + Tm - 1) / Tm * ((N + Tn - 1) / Tn) * ((R + Tr - 1) / Tr) * ((C + Tc - 1) / Tc);
    return static_cast<uint64_t>((phases * (Tr + K - 1) * (Tc + K - 1) * Tm + n_pe - 1) / n_pe);
}

/// Random fixed tensor with codes in [lo, hi].
inline Tensor4D random_fixed(Dims d, ScalarFormat f, std::mt19937_64& rng, int lo, int hi) {
    Tensor4D t(d, f);
    std::uniform_int_distribution<int> u(lo, hi);
    for (auto& v : t.fixed_data()) v = u(rng);
    return t;
}

inline Tensor4D random_real(Dims d, std::mt19937_64& rng) {
    Tensor4D t(d, ScalarFormat::real64());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : t.real_data()) v = u(rng);
    return t;
}

} // namespace oracle
