// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "blockconv/block.hpp"
#include "blockconv/network.hpp"

namespace bconv {

/// Blocking of one layer, expressed over the layer's input plane.
struct LayerBlocking {
    BlockGrid grid;
    /// Conv layers only; one pair per block row / column.
    BlockPadding padding;
    /// Whether the layer is block-convolved (conv layers inside the pattern's scope).
    bool blocked = false;
    friend bool operator==(const LayerBlocking&, const LayerBlocking&) = default;
};

/// One LayerBlocking per network layer (parallel to NetworkDesc::layers).
struct BlockingPlan {
    PadMode mode = PadMode::zero;
    std::vector<LayerBlocking> layers;
    friend bool operator==(const BlockingPlan&, const BlockingPlan&) = default;
};

enum class BlockingKind { fixed, hierarchical };

/// fixed(a = block rows, b = block cols): constant block size; after pooling
/// the smaller blocks merge back to the fixed size.
/// hierarchical(a = rows, b = cols): constant block count.
/// A conv layer is in scope when its input is at least min_h x min_w.
struct BlockingPattern {
    BlockingKind kind = BlockingKind::fixed;
    int a = 28;
    int b = 28;
    int min_h = 0;
    int min_w = 0;
    PadMode mode = PadMode::zero;

    static BlockingPattern fixed(int block_h, int block_w, PadMode mode = PadMode::zero) {
        return {BlockingKind::fixed, block_h, block_w, block_h, block_w, mode};
    }
    static BlockingPattern hierarchical(int rows, int cols, PadMode mode = PadMode::zero) {
        return {BlockingKind::hierarchical, rows, cols, 1, 1, mode};
    }
};

/// Grid of a layer's output given its input blocking. Conv grids follow the
/// per-block padding; pools divide cut positions by the stride; element-wise
/// layers keep the grid.
BlockGrid layer_output_grid(const LayerDesc& layer, const LayerBlocking& lb, const Dims& out);

/// Per-layer grids and block padding for a pattern. Throws naming the layer
/// when the pattern cannot be realized there.
BlockingPlan make_blocking_plan(const NetworkDesc& net, const BlockingPattern& pattern);

/// Plan with every layer unblocked (1 x 1 grid, original padding).
BlockingPlan trivial_blocking_plan(const NetworkDesc& net, PadMode mode = PadMode::zero);

/// Checks that the plan matches the network: grids cover each layer's input
/// plane and conv block padding reproduces the unblocked output shape.
void validate_blocking_plan(const NetworkDesc& net, const BlockingPlan& plan);

/// Fraction of conv layers that are blocked.
double blocking_ratio(const NetworkDesc& net, const BlockingPlan& plan);

std::string blocking_plan_to_json(const NetworkDesc& net, const BlockingPlan& plan, int indent = 2);
BlockingPlan blocking_plan_from_json(const NetworkDesc& net, const std::string& text);

/// Replaces every conv with stride s > 1 by a stride-1 conv followed by an
/// s x s / s max pool. The pool takes over the conv's id so residual edges
/// keep pointing at the same tensor; the conv becomes "<id>_s1".
NetworkDesc stride_to_pool_rewrite(const NetworkDesc& net);

} // namespace bconv
