// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sim_kernels.hpp"

#include <cmath>
#include <vector>

#include "blockconv/kernels.hpp"
#include "blockconv/ops.hpp"

namespace bconv::detail {
namespace {

template <typename T>
const T* plane_of(const Tensor4D& t, int c);

template <>
const int32_t* plane_of<int32_t>(const Tensor4D& t, int c) {
    return t.fixed_data().data() + t.index(0, c, 0, 0);
}
template <>
const double* plane_of<double>(const Tensor4D& t, int c) {
    return t.real_data().data() + t.index(0, c, 0, 0);
}

void axpy(int64_t* acc, const int32_t* x, int32_t w, size_t n) { kernels::active().axpy_i32(acc, x, w, n); }
void axpy(double* acc, const double* x, double w, size_t n) { kernels::active().axpy_f64(acc, x, w, n); }

int32_t weight_at(const Tensor4D& w, int oc, int ic, int ky, int kx, int32_t*) { return w.q(oc, ic, ky, kx); }
double weight_at(const Tensor4D& w, int oc, int ic, int ky, int kx, double*) { return w.r(oc, ic, ky, kx); }

template <typename T, typename Acc>
void accumulate(const Tensor4D& src, const Padding4& pad, PadMode mode, const Tensor4D& weights, int oc,
                int ic0, int ic1, bool depthwise, int s, const ConvWindow& win, Acc* acc) {
    const int k = weights.dims().h;
    const int H = src.dims().h, W = src.dims().w;
    const int span = (win.ow - 1) * s + k;
    std::vector<int> col_src(span);
    for (int i = 0; i < span; ++i) col_src[i] = pad_source_index(win.ox0 * s + i - pad.left, W, mode);
    std::vector<T> row(span), strided(win.ow);
    if (depthwise) {
        ic0 = 0;
        ic1 = 1;
    }
    for (int y = 0; y < win.oh; ++y) {
        Acc* a = acc + static_cast<size_t>(y) * win.ow;
        const int oy = win.oy0 + y;
        for (int ic = ic0; ic < ic1; ++ic) {
            const T* plane = plane_of<T>(src, depthwise ? oc : ic);
            for (int ky = 0; ky < k; ++ky) {
                const int sy = pad_source_index(oy * s + ky - pad.top, H, mode);
                if (sy < 0) continue;
                const T* src_row = plane + static_cast<size_t>(sy) * W;
                for (int i = 0; i < span; ++i) row[i] = col_src[i] < 0 ? T{} : src_row[col_src[i]];
                for (int kx = 0; kx < k; ++kx) {
                    const auto w = weight_at(weights, oc, ic, ky, kx, static_cast<T*>(nullptr));
                    if constexpr (std::is_integral_v<T>)
                        if (w == 0) continue;
                    const T* x = row.data() + kx;
                    if (s != 1) {
                        for (int i = 0; i < win.ow; ++i) strided[i] = row[kx + i * s];
                        x = strided.data();
                    }
                    axpy(a, x, w, win.ow);
                }
            }
        }
    }
}

} // namespace

void accumulate_window(const Tensor4D& src, const Padding4& pad, PadMode mode, const Tensor4D& weights,
                       int oc, int ic0, int ic1, bool depthwise, int stride, const ConvWindow& win,
                       int64_t* acc) {
    accumulate<int32_t>(src, pad, mode, weights, oc, ic0, ic1, depthwise, stride, win, acc);
}

void accumulate_window(const Tensor4D& src, const Padding4& pad, PadMode mode, const Tensor4D& weights,
                       int oc, int ic0, int ic1, bool depthwise, int stride, const ConvWindow& win,
                       double* acc) {
    accumulate<double>(src, pad, mode, weights, oc, ic0, ic1, depthwise, stride, win, acc);
}

int64_t bias_to_acc(double bias, int acc_frac) { return round_half_away(std::ldexp(bias, acc_frac)); }

Tensor4D conv_remapped(const Tensor4D& src, const Tensor4D& weights, std::span<const double> bias,
                       const Padding4& pad, PadMode mode, int stride, bool depthwise,
                       const ScalarFormat& out_format) {
    const Dims& d = src.dims();
    if (d.n != 1) throw Error("remapped convolution supports batch 1 only");
    const int k = weights.dims().h;
    const int kout = weights.dims().n;
    const int kin = depthwise ? 1 : d.c;
    if (depthwise ? (kout != d.c || weights.dims().c != 1) : weights.dims().c != d.c)
        throw Error("weights " + weights.dims().to_string() + " do not match input " + d.to_string());
    ConvWindow win{0, conv_out_extent(d.h, pad.top, pad.bottom, k, stride), 0,
                   conv_out_extent(d.w, pad.left, pad.right, k, stride)};
    if (win.oh <= 0 || win.ow <= 0) throw Error("block smaller than kernel");
    Tensor4D out({1, kout, win.oh, win.ow}, out_format);
    const size_t n = static_cast<size_t>(win.oh) * win.ow;
    if (src.is_fixed()) {
        const int acc_frac = src.format().fraction_bits + weights.format().fraction_bits;
        const int shift = acc_frac - out_format.fraction_bits;
        std::vector<int64_t> acc(n);
        for (int oc = 0; oc < kout; ++oc) {
            std::fill(acc.begin(), acc.end(), bias.empty() ? 0 : bias_to_acc(bias[oc], acc_frac));
            accumulate_window(src, pad, mode, weights, oc, 0, kin, depthwise, stride, win, acc.data());
            int32_t* o = out.fixed_data().data() + out.index(0, oc, 0, 0);
            for (size_t i = 0; i < n; ++i) o[i] = requantize(acc[i], shift, out_format);
        }
    } else {
        std::vector<double> acc(n);
        for (int oc = 0; oc < kout; ++oc) {
            std::fill(acc.begin(), acc.end(), 0.0);
            accumulate_window(src, pad, mode, weights, oc, 0, kin, depthwise, stride, win, acc.data());
            const double b = bias.empty() ? 0.0 : bias[oc];
            double* o = out.real_data().data() + out.index(0, oc, 0, 0);
            for (size_t i = 0; i < n; ++i) o[i] = acc[i] + b;
        }
    }
    return out;
}

} // namespace bconv::detail
