// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockconv/tensor.hpp"

namespace bconv {

enum class LayerKind { conv, maxpool, eltwise_add, input, output };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& s);

struct ConvDesc {
    int k = 3;
    int stride = 1;
    Padding4 pad{};
    int in_ch = 0;
    int out_ch = 0;
    bool depthwise = false;
    bool bias = true;
    friend bool operator==(const ConvDesc&, const ConvDesc&) = default;
};

struct PoolDesc {
    int k = 2;
    int stride = 2;
    friend bool operator==(const PoolDesc&, const PoolDesc&) = default;
};

/// One node of the chain. `input` and `output` kinds only appear in JSON;
/// NetworkDesc::layers holds conv, maxpool and eltwise_add nodes.
struct LayerDesc {
    std::string id;
    LayerKind kind = LayerKind::conv;
    ConvDesc conv{};
    PoolDesc pool{};
    /// Second operand of eltwise_add: an earlier layer id or the network input id.
    std::string residual_source;

    bool is_conv() const { return kind == LayerKind::conv; }
    friend bool operator==(const LayerDesc&, const LayerDesc&) = default;
};

/// Ordered layer chain. Each layer consumes the previous layer's output (the
/// network input for layer 0); eltwise_add additionally reads residual_source.
struct NetworkDesc {
    std::string name;
    std::string input_id = "input";
    Dims input_shape{1, 0, 0, 0};
    ScalarFormat activation_format = ScalarFormat::fixed(8, 4);
    ScalarFormat weight_format = ScalarFormat::fixed(8, 6);
    std::vector<LayerDesc> layers;

    /// Index of a layer id; -1 for the network input. Throws for unknown ids.
    int index_of(const std::string& id) const;
    size_t conv_count() const;

    friend bool operator==(const NetworkDesc&, const NetworkDesc&) = default;
};

struct LayerShape {
    Dims in{};
    Dims out{};
};

/// Shape inference over the chain. Throws on channel mismatches, residual
/// mismatches and non-positive extents.
std::vector<LayerShape> infer_shapes(const NetworkDesc& net);

/// Checks ids, kinds and residual edges (sources must precede consumers), then
/// runs shape inference. Errors name the offending layer.
void validate(const NetworkDesc& net);

/// Binary megabit (2^20 bits).
constexpr double kMbit = 1048576.0;

struct LayerVolume {
    std::string id;
    LayerKind kind = LayerKind::conv;
    Dims out{};
    uint64_t bits = 0;
    double mbits() const { return static_cast<double>(bits) / kMbit; }
    /// Binary megabytes (2^20 bytes).
    double mbytes() const { return static_cast<double>(bits) / 8.0 / kMbit; }
};

/// Output feature-map volume of every layer: c * h * w * activation bits.
std::vector<LayerVolume> feature_map_volumes(const NetworkDesc& net);

NetworkDesc load_network_json(const std::string& text);
NetworkDesc load_network_file(const std::string& path);
std::string network_to_json(const NetworkDesc& net, int indent = 2);

/// Built-in networks: vgg16-conv, vdsr, resnet18-conv, mobilenet-v1-conv.
NetworkDesc preset(const std::string& name);
std::vector<std::string> preset_names();

/// Returns `net` with activations switched to `bits`-bit fixed point
/// (fraction bits = bits / 2).
NetworkDesc with_activation_bits(NetworkDesc net, int bits);

/// `preset:<name>` selects a preset; anything else is a JSON file path.
NetworkDesc resolve_network(const std::string& spec);

} // namespace bconv
