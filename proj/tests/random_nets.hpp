// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded random small networks and fusion plans shared by the simulator tests
// and the acceptance binary.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blockconv/planner.hpp"

namespace randnet {

using namespace bconv;

inline LayerDesc conv_layer(const std::string& id, int in, int out, int k, bool dw = false) {
    LayerDesc l;
    l.id = id;
    l.conv = {k, 1, Padding4::uniform(k / 2), in, dw ? in : out, dw, true};
    return l;
}

/// Random chain of <= 6 layers, <= 16 channels, <= 32x32. `force` = 1 adds a
/// residual edge, 2 a depthwise conv.
inline NetworkDesc random_net(std::mt19937_64& rng, int force) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    NetworkDesc net;
    net.name = "rand";
    const int c0 = u(1, 4);
    net.input_shape = {1, c0, 2 * u(4, 16), 2 * u(4, 16)};
    const int fmt = u(0, 5);
    net.activation_format = fmt == 0 ? ScalarFormat::fixed(16, 8) : fmt == 1 ? ScalarFormat::fixed(4, 2)
                                                                             : ScalarFormat::fixed(8, 4);
    const int n = u(2, 6);
    int c = c0;
    bool pooled = false, has_res = false, has_dw = false;
    std::vector<std::pair<std::string, int>> same_shape{{net.input_id, c0}};
    for (int i = 0; i < n; ++i) {
        const std::string id = "l" + std::to_string(i);
        int kind = u(0, 9);
        if (force == 1 && i == n - 1 && !has_res) kind = 9;
        if (force == 2 && i == 0) kind = 7;
        if (kind <= 5) {
            const int ks[] = {1, 3, 3, 5};
            const int out = u(1, 16);
            net.layers.push_back(conv_layer(id, c, out, ks[u(0, 3)]));
            c = out;
        } else if (kind <= 7) {
            net.layers.push_back(conv_layer(id, c, c, 3, true));
            has_dw = true;
        } else if (kind == 8 && !pooled) {
            LayerDesc p;
            p.id = id;
            p.kind = LayerKind::maxpool;
            net.layers.push_back(p);
            pooled = true;
            same_shape.clear();
            same_shape.push_back({id, c});
            continue;
        } else {
            std::vector<std::string> src;
            for (const auto& [sid, sc] : same_shape)
                if (sc == c && (net.layers.empty() || sid != net.layers.back().id)) src.push_back(sid);
            if (src.empty() || net.layers.empty()) {
                net.layers.push_back(conv_layer(id, c, c, 3));
            } else {
                LayerDesc a;
                a.id = id;
                a.kind = LayerKind::eltwise_add;
                a.residual_source = src[u(0, static_cast<int>(src.size()) - 1)];
                net.layers.push_back(a);
                has_res = true;
            }
        }
        same_shape.push_back({id, c});
    }
    if (force == 1 && !has_res) {
        LayerDesc a;
        a.id = "res";
        a.kind = LayerKind::eltwise_add;
        a.residual_source = net.layers.back().id;
        net.layers.push_back(conv_layer("pre", c, c, 3));
        net.layers.push_back(a);
    }
    if (force == 2 && !has_dw) throw Error("depthwise layer missing");
    validate(net);
    return net;
}

/// Random grouping and tiles; retries until the plan is shape-consistent.
inline std::optional<FusionPlan> random_plan(const NetworkDesc& net, std::mt19937_64& rng) {
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    const int units = static_cast<int>(fusion_units(net).size());
    const auto groupings = enumerate_groupings(units);
    for (int attempt = 0; attempt < 50; ++attempt) {
        const auto& g = groupings[u(0, static_cast<int>(groupings.size()) - 1)];
        std::vector<Tile> tiles;
        for (size_t i = 0; i < g.size(); ++i) {
            const int tr = u(0, 2) == 0 ? 64 : 2 * u(2, 8), tc = u(0, 2) == 0 ? 64 : 2 * u(2, 8);
            tiles.push_back({tr, tc});
        }
        FusionOptions fo;
        fo.boundary = u(0, 1) ? BoundaryMode::spill : BoundaryMode::onchip;
        fo.pad_mode = static_cast<PadMode>(u(0, 2));
        fo.prefetch = u(0, 3) == 0;
        fo.max_channel_tile = u(0, 1) ? 64 : 4;
        try {
            return make_fusion_plan(net, g, tiles, fo);
        } catch (const Error&) {
        }
    }
    return std::nullopt;
}

/// Largest per-phase weight chunk of a plan, in bits.
inline uint64_t max_weight_chunk(const NetworkDesc& net, const FusionPlan& plan) {
    uint64_t chunk = 0;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        if (!l.is_conv()) continue;
        const ChannelTile ct = plan.channel_tiles[i];
        chunk = std::max<uint64_t>(chunk, static_cast<uint64_t>(ct.m) * (l.conv.depthwise ? 1 : ct.n) * l.conv.k *
                                              l.conv.k * net.weight_format.storage_bits());
    }
    return chunk;
}

} // namespace randnet
