// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "blockconv/blocking_plan.hpp"
#include "blockconv/network.hpp"
#include "blockconv/tensor.hpp"

namespace bconv {

struct LayerWeights {
    Tensor4D weights;  // (out, in or 1, k, k); empty for non-conv layers
    std::vector<double> bias;
};

/// Parameters for every layer of a network, indexed like NetworkDesc::layers.
class NetworkWeights {
public:
    NetworkWeights() = default;
    explicit NetworkWeights(std::vector<LayerWeights> layers) : layers_(std::move(layers)) {}

    const LayerWeights& at(size_t layer) const { return layers_.at(layer); }
    size_t size() const { return layers_.size(); }
    /// Total weight bits for conv layers (bias excluded).
    uint64_t weight_bits() const;

private:
    std::vector<LayerWeights> layers_;
};

/// Deterministic pseudo-random parameters from a 64-bit seed. Fixed weight
/// codes are scaled by 1/sqrt(fan_in) to keep activations away from the rails;
/// biases are exact multiples of the accumulator step.
NetworkWeights make_random_weights(const NetworkDesc& net, uint64_t seed);

/// Deterministic pseudo-random input tensor in the network's activation format.
Tensor4D make_random_input(const NetworkDesc& net, uint64_t seed);

/// Weight tensor dims of a conv layer.
Dims conv_weight_dims(const ConvDesc& c);

/// Plain layer-by-layer evaluation with conv2d_ref.
Tensor4D run_reference(const NetworkDesc& net, const NetworkWeights& weights, const Tensor4D& input);

/// Layer-by-layer evaluation where each blocked conv runs through
/// block_conv2d with the plan's grid and padding; pools and element-wise
/// layers run on the whole map.
Tensor4D run_blocked_reference(const NetworkDesc& net, const NetworkWeights& weights,
                               const BlockingPlan& plan, const Tensor4D& input);

} // namespace bconv
