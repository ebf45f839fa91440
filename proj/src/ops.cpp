// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/ops.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "blockconv/kernels.hpp"

namespace bconv {

int conv_out_extent(int extent, int lead, int trail, int k, int s) {
    const int span = extent + lead + trail - k;
    if (span < 0) return 0;
    return span / s + 1;
}

int pad_source_index(int i, int n, PadMode mode) {
    if (i >= 0 && i < n) return i;
    switch (mode) {
    case PadMode::zero: return -1;
    case PadMode::replicate: return i < 0 ? 0 : n - 1;
    case PadMode::reflect: {
        if (n == 1) return 0;
        const int period = 2 * (n - 1);
        int m = i % period;
        if (m < 0) m += period;
        return m < n ? m : period - m;
    }
    }
    return -1;
}

Tensor4D pad(const Tensor4D& input, const Padding4& amounts, PadMode mode) {
    const Dims& d = input.dims();
    if (amounts.top < 0 || amounts.bottom < 0 || amounts.left < 0 || amounts.right < 0)
        throw Error("negative pad amount");
    if (mode == PadMode::reflect) {
        if (amounts.top >= d.h || amounts.bottom >= d.h || amounts.left >= d.w ||
            amounts.right >= d.w)
            throw Error("reflect pad amount must be smaller than the extent (" + d.to_string() +
                        ")");
    }
    if (mode == PadMode::replicate && (d.h == 0 || d.w == 0) && !amounts.is_zero())
        throw Error("cannot replicate-pad an empty tensor");

    Dims od = d;
    od.h = d.h + amounts.top + amounts.bottom;
    od.w = d.w + amounts.left + amounts.right;
    Tensor4D out(od, input.format());

    std::vector<int> col_src(od.w);
    for (int x = 0; x < od.w; ++x) col_src[x] = pad_source_index(x - amounts.left, d.w, mode);

    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < od.h; ++y) {
                const int sy = pad_source_index(y - amounts.top, d.h, mode);
                if (sy < 0) continue;
                for (int x = 0; x < od.w; ++x) {
                    const int sx = col_src[x];
                    if (sx < 0) continue;
                    if (input.is_fixed())
                        out.q(n, c, y, x) = input.q(n, c, sy, sx);
                    else
                        out.r(n, c, y, x) = input.r(n, c, sy, sx);
                }
            }
    return out;
}

namespace {

void check_conv(const Tensor4D& input, const Tensor4D& weights, std::span<const double> bias,
                const ConvParams& params) {
    const Dims& in = input.dims();
    const Dims& wd = weights.dims();
    if (params.stride <= 0) throw Error("stride must be positive");
    if (wd.h != wd.w) throw Error("weights must be square, got " + wd.to_string());
    if (wd.h <= 0) throw Error("empty kernel");
    if (params.depthwise) {
        if (wd.n != in.c || wd.c != 1)
            throw Error("depthwise weights must be (C,1,k,k) with C=" + std::to_string(in.c) +
                        ", got " + wd.to_string());
    } else if (wd.c != in.c) {
        throw Error("weight input channels " + std::to_string(wd.c) + " != input channels " +
                    std::to_string(in.c));
    }
    if (!bias.empty() && bias.size() != static_cast<size_t>(wd.n))
        throw Error("bias length does not match output channels");
    if (input.is_fixed() != weights.is_fixed())
        throw Error("input and weights must both be fixed or both real64");
    if (params.out_format && params.out_format->is_fixed() != input.is_fixed())
        throw Error("output format kind must match input kind");
    const Padding4& p = params.pad;
    if (p.top < 0 || p.bottom < 0 || p.left < 0 || p.right < 0) throw Error("negative padding");
    if (wd.h > in.h + p.top + p.bottom || wd.w > in.w + p.left + p.right)
        throw Error("kernel larger than padded extent");
}

// Strided rows are gathered so the same contiguous row primitive applies.
const int32_t* row_view(const int32_t* base, int offset, int stride, int count,
                        std::vector<int32_t>& scratch) {
    if (stride == 1) return base + offset;
    scratch.resize(count);
    for (int i = 0; i < count; ++i) scratch[i] = base[offset + i * stride];
    return scratch.data();
}

const double* row_view(const double* base, int offset, int stride, int count,
                       std::vector<double>& scratch) {
    if (stride == 1) return base + offset;
    scratch.resize(count);
    for (int i = 0; i < count; ++i) scratch[i] = base[offset + i * stride];
    return scratch.data();
}

} // namespace

Tensor4D conv2d_ref(const Tensor4D& input, const Tensor4D& weights, std::span<const double> bias,
                    const ConvParams& params) {
    check_conv(input, weights, bias, params);
    const Tensor4D padded = params.pad.is_zero() ? input : pad(input, params.pad, params.pad_mode);
    const Dims& pd = padded.dims();
    const int k = weights.dims().h;
    const int s = params.stride;
    const int kout = weights.dims().n;
    const int kin = params.depthwise ? 1 : input.dims().c;

    Dims od{pd.n, kout, (pd.h - k) / s + 1, (pd.w - k) / s + 1};
    const ScalarFormat ofmt = params.out_format.value_or(input.format());
    Tensor4D out(od, ofmt);
    const auto& kt = kernels::active();
    const size_t plane = static_cast<size_t>(pd.h) * pd.w;

    if (input.is_fixed()) {
        const int acc_frac = input.format().fraction_bits + weights.format().fraction_bits;
        const int shift = acc_frac - ofmt.fraction_bits;
        std::vector<int64_t> acc(od.w);
        std::vector<int32_t> scratch;
        const int32_t* src = padded.fixed_data().data();
        for (int n = 0; n < od.n; ++n)
            for (int oc = 0; oc < kout; ++oc) {
                const int64_t b0 = bias.empty() ? 0 : round_half_away(std::ldexp(bias[oc], acc_frac));
                for (int oy = 0; oy < od.h; ++oy) {
                    std::fill(acc.begin(), acc.end(), b0);
                    for (int ic = 0; ic < kin; ++ic) {
                        const int src_c = params.depthwise ? oc : ic;
                        const int32_t* chan = src + (static_cast<size_t>(n) * pd.c + src_c) * plane;
                        for (int ky = 0; ky < k; ++ky) {
                            const int32_t* row = chan + static_cast<size_t>(oy * s + ky) * pd.w;
                            for (int kx = 0; kx < k; ++kx) {
                                const int32_t w = weights.q(oc, ic, ky, kx);
                                if (w == 0) continue;
                                kt.axpy_i32(acc.data(), row_view(row, kx, s, od.w, scratch), w, od.w);
                            }
                        }
                    }
                    for (int ox = 0; ox < od.w; ++ox)
                        out.q(n, oc, oy, ox) = requantize(acc[ox], shift, ofmt);
                }
            }
        return out;
    }

    std::vector<double> acc(od.w);
    std::vector<double> scratch;
    const double* src = padded.real_data().data();
    for (int n = 0; n < od.n; ++n)
        for (int oc = 0; oc < kout; ++oc)
            for (int oy = 0; oy < od.h; ++oy) {
                std::fill(acc.begin(), acc.end(), 0.0);
                for (int ic = 0; ic < kin; ++ic) {
                    const int src_c = params.depthwise ? oc : ic;
                    const double* chan = src + (static_cast<size_t>(n) * pd.c + src_c) * plane;
                    for (int ky = 0; ky < k; ++ky) {
                        const double* row = chan + static_cast<size_t>(oy * s + ky) * pd.w;
                        for (int kx = 0; kx < k; ++kx)
                            kt.axpy_f64(acc.data(), row_view(row, kx, s, od.w, scratch),
                                        weights.r(oc, ic, ky, kx), od.w);
                    }
                }
                const double b0 = bias.empty() ? 0.0 : bias[oc];
                for (int ox = 0; ox < od.w; ++ox) out.r(n, oc, oy, ox) = acc[ox] + b0;
            }
    return out;
}

Tensor4D maxpool2d(const Tensor4D& input, int k, int s) {
    const Dims& d = input.dims();
    if (k <= 0 || s <= 0) throw Error("pool window and stride must be positive");
    if (k > d.h || k > d.w) throw Error("pool window larger than input " + d.to_string());
    Dims od{d.n, d.c, (d.h - k) / s + 1, (d.w - k) / s + 1};
    Tensor4D out(od, input.format());
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int oy = 0; oy < od.h; ++oy)
                for (int ox = 0; ox < od.w; ++ox) {
                    if (input.is_fixed()) {
                        int32_t m = input.q(n, c, oy * s, ox * s);
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                m = std::max(m, input.q(n, c, oy * s + ky, ox * s + kx));
                        out.q(n, c, oy, ox) = m;
                    } else {
                        double m = input.r(n, c, oy * s, ox * s);
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx)
                                m = std::max(m, input.r(n, c, oy * s + ky, ox * s + kx));
                        out.r(n, c, oy, ox) = m;
                    }
                }
    return out;
}

Tensor4D eltwise_add(const Tensor4D& a, const Tensor4D& b) {
    if (!(a.dims() == b.dims())) throw Error("eltwise_add shape mismatch: " + a.dims().to_string() +
                                             " vs " + b.dims().to_string());
    if (!(a.format() == b.format())) throw Error("eltwise_add format mismatch");
    Tensor4D out(a.dims(), a.format());
    const auto& kt = kernels::active();
    if (a.is_fixed()) {
        kt.add_sat_i32(out.fixed_data().data(), a.fixed_data().data(), b.fixed_data().data(),
                       a.size(), static_cast<int32_t>(a.format().min_value()),
                       static_cast<int32_t>(a.format().max_value()));
    } else {
        kt.add_f64(out.real_data().data(), a.real_data().data(), b.real_data().data(), a.size());
    }
    return out;
}

MacCount mac_count(const ConvShape& shape) {
    const int ho = conv_out_extent(shape.input.h, shape.pad.top, shape.pad.bottom, shape.k,
                                   shape.stride);
    const int wo = conv_out_extent(shape.input.w, shape.pad.left, shape.pad.right, shape.k,
                                   shape.stride);
    const int64_t per_out = shape.depthwise ? 1 : shape.input.c;
    MacCount m;
    m.kernel_applications = static_cast<int64_t>(shape.input.n) * ho * wo * per_out *
                            shape.out_channels;
    m.macs = m.kernel_applications * shape.k * shape.k;
    return m;
}

} // namespace bconv
