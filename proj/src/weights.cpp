// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/weights.hpp"

#include <cmath>
#include <random>

#include "blockconv/ops.hpp"

namespace bconv {

uint64_t NetworkWeights::weight_bits() const {
    uint64_t bits = 0;
    for (const auto& l : layers_)
        bits += static_cast<uint64_t>(l.weights.size()) * l.weights.format().storage_bits();
    return bits;
}

Dims conv_weight_dims(const ConvDesc& c) {
    return {c.out_ch, c.depthwise ? 1 : c.in_ch, c.k, c.k};
}

NetworkWeights make_random_weights(const NetworkDesc& net, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<LayerWeights> out;
    const ScalarFormat& wf = net.weight_format;
    const ScalarFormat& af = net.activation_format;
    for (const auto& layer : net.layers) {
        LayerWeights lw;
        if (layer.is_conv()) {
            const ConvDesc& c = layer.conv;
            lw.weights = Tensor4D(conv_weight_dims(c), wf);
            const int fan_in = (c.depthwise ? 1 : c.in_ch) * c.k * c.k;
            if (wf.is_fixed()) {
                const auto span = std::max<int64_t>(
                    1, static_cast<int64_t>(wf.max_value() / std::sqrt(static_cast<double>(fan_in))));
                std::uniform_int_distribution<int64_t> dist(-span, span);
                for (auto& v : lw.weights.fixed_data()) v = saturate(dist(rng), wf);
            } else {
                std::uniform_real_distribution<double> dist(-1.0, 1.0);
                const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
                for (auto& v : lw.weights.real_data()) v = dist(rng) * scale;
            }
            if (c.bias) {
                const int acc_frac = (af.is_fixed() ? af.fraction_bits : 0) +
                                     (wf.is_fixed() ? wf.fraction_bits : 0);
                const int64_t range = int64_t{1} << acc_frac;
                std::uniform_int_distribution<int64_t> dist(-range, range);
                for (int i = 0; i < c.out_ch; ++i)
                    lw.bias.push_back(std::ldexp(static_cast<double>(dist(rng)), -acc_frac));
            }
        }
        out.push_back(std::move(lw));
    }
    return NetworkWeights(std::move(out));
}

Tensor4D make_random_input(const NetworkDesc& net, uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    Tensor4D t(net.input_shape, net.activation_format);
    if (t.is_fixed()) {
        std::uniform_int_distribution<int64_t> dist(net.activation_format.min_value(),
                                                    net.activation_format.max_value());
        for (auto& v : t.fixed_data()) v = static_cast<int32_t>(dist(rng));
    } else {
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (auto& v : t.real_data()) v = dist(rng);
    }
    return t;
}

namespace {

void check_input(const NetworkDesc& net, const Tensor4D& input) {
    if (!(input.dims() == net.input_shape))
        throw Error("input tensor " + input.dims().to_string() + " does not match network input " +
                    net.input_shape.to_string());
    if (!(input.format() == net.activation_format))
        throw Error("input format " + input.format().to_string() + " does not match activation format " +
                    net.activation_format.to_string());
}

template <typename ConvFn>
Tensor4D run_chain(const NetworkDesc& net, const Tensor4D& input, ConvFn&& conv) {
    check_input(net, input);
    std::vector<Tensor4D> outputs;
    outputs.reserve(net.layers.size());
    const Tensor4D* cur = &input;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerDesc& l = net.layers[i];
        switch (l.kind) {
        case LayerKind::conv: outputs.push_back(conv(i, *cur)); break;
        case LayerKind::maxpool: outputs.push_back(maxpool2d(*cur, l.pool.k, l.pool.stride)); break;
        case LayerKind::eltwise_add: {
            const int src = net.index_of(l.residual_source);
            outputs.push_back(eltwise_add(*cur, src < 0 ? input : outputs[src]));
            break;
        }
        default: throw Error("unexpected layer kind");
        }
        cur = &outputs.back();
    }
    return *cur;
}

} // namespace

Tensor4D run_reference(const NetworkDesc& net, const NetworkWeights& weights, const Tensor4D& input) {
    return run_chain(net, input, [&](size_t i, const Tensor4D& x) {
        const ConvDesc& c = net.layers[i].conv;
        ConvParams p;
        p.stride = c.stride;
        p.pad = c.pad;
        p.depthwise = c.depthwise;
        p.out_format = net.activation_format;
        return conv2d_ref(x, weights.at(i).weights, weights.at(i).bias, p);
    });
}

Tensor4D run_blocked_reference(const NetworkDesc& net, const NetworkWeights& weights,
                               const BlockingPlan& plan, const Tensor4D& input) {
    validate_blocking_plan(net, plan);
    return run_chain(net, input, [&](size_t i, const Tensor4D& x) {
        const ConvDesc& c = net.layers[i].conv;
        const LayerBlocking& lb = plan.layers[i];
        BlockConvParams p{c.stride, c.depthwise, net.activation_format};
        return block_conv2d(x, weights.at(i).weights, weights.at(i).bias, lb.grid, lb.padding, p);
    });
}

} // namespace bconv
