// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bconv {

ScalarFormat ScalarFormat::fixed(int bitwidth, int fraction_bits) {
    if (bitwidth != 4 && bitwidth != 8 && bitwidth != 16)
        throw Error("fixed bitwidth must be 4, 8 or 16, got " + std::to_string(bitwidth));
    if (fraction_bits < 0 || fraction_bits > bitwidth)
        throw Error("fraction_bits out of range: " + std::to_string(fraction_bits));
    return {ScalarKind::fixed, bitwidth, fraction_bits};
}

int64_t ScalarFormat::min_value() const {
    if (!is_fixed()) return std::numeric_limits<int64_t>::min();
    return -(int64_t{1} << (bitwidth - 1));
}

int64_t ScalarFormat::max_value() const {
    if (!is_fixed()) return std::numeric_limits<int64_t>::max();
    return (int64_t{1} << (bitwidth - 1)) - 1;
}

std::string ScalarFormat::to_string() const {
    if (!is_fixed()) return "real64";
    return "fixed" + std::to_string(bitwidth) + "." + std::to_string(fraction_bits);
}

std::string Dims::to_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
}

const char* to_string(PadMode mode) {
    switch (mode) {
    case PadMode::zero: return "zero";
    case PadMode::replicate: return "replicate";
    case PadMode::reflect: return "reflect";
    }
    return "zero";
}

PadMode pad_mode_from_string(const std::string& s) {
    if (s == "zero") return PadMode::zero;
    if (s == "replicate") return PadMode::replicate;
    if (s == "reflect") return PadMode::reflect;
    throw Error("unknown pad mode '" + s + "'");
}

int32_t saturate(int64_t v, const ScalarFormat& fmt) {
    return static_cast<int32_t>(std::clamp(v, fmt.min_value(), fmt.max_value()));
}

int64_t round_half_away(double x) {
    return static_cast<int64_t>(std::round(x));
}

int32_t requantize(int64_t acc, int shift, const ScalarFormat& fmt) {
    if (shift > 0) {
        const int64_t half = int64_t{1} << (shift - 1);
        const int64_t mag = acc < 0 ? -acc : acc;
        const int64_t q = (mag + half) >> shift;
        return saturate(acc < 0 ? -q : q, fmt);
    }
    if (shift < 0) {
        // Anything beyond 2^40 saturates every supported format anyway.
        const int64_t limit = int64_t{1} << 40;
        const int64_t clamped = std::clamp(acc, -limit, limit);
        return saturate(clamped * (int64_t{1} << -shift), fmt);
    }
    return saturate(acc, fmt);
}

int32_t quantize(double x, const ScalarFormat& fmt) {
    const double scaled = std::ldexp(x, fmt.fraction_bits);
    const double lo = static_cast<double>(fmt.min_value()) - 1.0;
    const double hi = static_cast<double>(fmt.max_value()) + 1.0;
    return saturate(round_half_away(std::clamp(scaled, lo, hi)), fmt);
}

Tensor4D::Tensor4D(Dims dims, ScalarFormat fmt) : dims_(dims), fmt_(fmt) {
    if (dims.n < 0 || dims.c < 0 || dims.h < 0 || dims.w < 0)
        throw Error("negative tensor extent: " + dims.to_string());
    if (fmt.is_fixed())
        fixed_.assign(dims.count(), 0);
    else
        real_.assign(dims.count(), 0.0);
}

double Tensor4D::value(size_t i) const {
    if (is_fixed()) return std::ldexp(static_cast<double>(fixed_[i]), -fmt_.fraction_bits);
    return real_[i];
}

void Tensor4D::set_raw(size_t i, double v) {
    if (is_fixed())
        fixed_[i] = saturate(static_cast<int64_t>(v), fmt_);
    else
        real_[i] = v;
}

Tensor4D Tensor4D::to_real() const {
    Tensor4D out(dims_, ScalarFormat::real64());
    for (size_t i = 0; i < size(); ++i) out.real_[i] = value(i);
    return out;
}

Tensor4D Tensor4D::to_fixed(const ScalarFormat& fmt) const {
    if (!fmt.is_fixed()) throw Error("to_fixed needs a fixed target format");
    Tensor4D out(dims_, fmt);
    for (size_t i = 0; i < size(); ++i) out.fixed_[i] = quantize(value(i), fmt);
    return out;
}

bool Tensor4D::in_range() const {
    if (!is_fixed()) return true;
    return std::all_of(fixed_.begin(), fixed_.end(), [&](int32_t v) {
        return v >= fmt_.min_value() && v <= fmt_.max_value();
    });
}

bool operator==(const Tensor4D& a, const Tensor4D& b) {
    return a.dims_ == b.dims_ && a.fmt_ == b.fmt_ && a.fixed_ == b.fixed_ && a.real_ == b.real_;
}

} // namespace bconv
