// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "blockconv/tensor.hpp"

namespace bconv {

struct ConvParams {
    int stride = 1;
    Padding4 pad{};
    PadMode pad_mode = PadMode::zero;
    /// Weights are (C, 1, k, k) and channel c only sees input channel c.
    bool depthwise = false;
    /// Output format for fixed convolutions; defaults to the input format.
    std::optional<ScalarFormat> out_format;
};

/// Output extent of a strided window over a padded axis:
/// floor((extent + lead + trail - k) / s) + 1. Returns <= 0 when the window
/// does not fit.
int conv_out_extent(int extent, int lead, int trail, int k, int s);

/// Direct convolution. Fixed inputs accumulate in int64 at scale
/// 2^-(in_frac + w_frac) and are requantized into the output format;
/// `bias` holds real values added at accumulator scale (one per output channel).
Tensor4D conv2d_ref(const Tensor4D& input, const Tensor4D& weights, std::span<const double> bias,
                    const ConvParams& params);

Tensor4D maxpool2d(const Tensor4D& input, int k, int s);

/// Element-wise sum, saturating for fixed formats.
Tensor4D eltwise_add(const Tensor4D& a, const Tensor4D& b);

/// Spatial padding with the given mode. Reflect mirrors about the boundary
/// pixel, so every amount must be smaller than the corresponding extent.
Tensor4D pad(const Tensor4D& input, const Padding4& amounts, PadMode mode);

/// Source index along an axis of length `n` for padded coordinate `i`
/// (may be negative or >= n). Returns -1 for zero padding outside the axis.
int pad_source_index(int i, int n, PadMode mode);

struct MacCount {
    /// k x k kernel applications: H_out * W_out * C_in (per group) * C_out.
    int64_t kernel_applications = 0;
    int64_t macs = 0;
    friend bool operator==(const MacCount&, const MacCount&) = default;
};

struct ConvShape {
    Dims input{};
    int out_channels = 0;
    int k = 1;
    int stride = 1;
    Padding4 pad{};
    bool depthwise = false;
};

MacCount mac_count(const ConvShape& shape);

} // namespace bconv
