// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Internal: per-group blocking evaluation and boundary/residual analysis
// shared by the planner and the fused simulator.

#pragma once

#include <vector>

#include "blockconv/planner.hpp"

namespace bconv::detail {

struct GroupEval {
    std::vector<LayerBlocking> blocking;  // per layer of the group
    std::vector<BlockGrid> out_grids;
    std::vector<Tile> tiles;
    std::vector<ChannelTile> channel_tiles;
    std::vector<ConvCycleParams> cycle_terms;  // conv layers only, n_pe unset
    uint64_t max_block_elems = 0;              // largest in/out block tensor
    uint64_t first_in_elems = 0;               // largest first-layer input block
};

GroupEval eval_group(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                     const std::vector<int>& layers, Tile tile, PadMode mode, int max_channel_tile);

uint64_t max_block_elems(const BlockGrid& g, int channels);

struct BoundaryInfo {
    BoundaryMode mode = BoundaryMode::onchip;
    /// Next group's first grid coarsens this group's output grid.
    bool coarsens = false;
    uint64_t map_elems = 0;
    /// Extra buffer size when on-chip: one next-group block, or the whole map.
    uint64_t block_elems = 0;
    int next_first = 0;
};

enum class ResidualKind { same_group, group_input, dram };

struct ResidualInfo {
    int layer = 0;
    int source = -1;
    ResidualKind kind = ResidualKind::same_group;
    uint64_t block_elems = 0;
    uint64_t map_elems = 0;
};

struct PlanAnalysis {
    std::vector<int> group_of;
    std::vector<BoundaryInfo> boundaries;
    std::vector<ResidualInfo> residuals;
};

/// Throws when a residual operand cannot be placed.
PlanAnalysis analyze_plan(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                          const std::vector<std::vector<int>>& groups,
                          const std::vector<BoundaryMode>& boundaries,
                          const std::vector<const BlockGrid*>& in_grids,
                          const std::vector<const BlockGrid*>& out_grids);

} // namespace bconv::detail
