// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Internal: convolution over output windows with padding realized by index
// remapping instead of a materialized padded tensor. Accumulation order per
// output (input channel, kernel row, kernel column) matches conv2d_ref.

#pragma once

#include <cstdint>
#include <span>

#include "blockconv/tensor.hpp"

namespace bconv::detail {

struct ConvWindow {
    int oy0 = 0;
    int oh = 0;
    int ox0 = 0;
    int ow = 0;
};

/// acc[(y - oy0) * ow + (x - ox0)] += sum over input channels [ic0, ic1) of
/// output channel `oc`; batch 0 only. Depthwise reads input channel `oc`.
void accumulate_window(const Tensor4D& src, const Padding4& pad, PadMode mode, const Tensor4D& weights,
                       int oc, int ic0, int ic1, bool depthwise, int stride, const ConvWindow& win,
                       int64_t* acc);
void accumulate_window(const Tensor4D& src, const Padding4& pad, PadMode mode, const Tensor4D& weights,
                       int oc, int ic0, int ic1, bool depthwise, int stride, const ConvWindow& win,
                       double* acc);

/// Bias in accumulator units.
int64_t bias_to_acc(double bias, int acc_frac);

/// Whole-block convolution through the remapped view.
Tensor4D conv_remapped(const Tensor4D& src, const Tensor4D& weights, std::span<const double> bias,
                       const Padding4& pad, PadMode mode, int stride, bool depthwise,
                       const ScalarFormat& out_format);

} // namespace bconv::detail
