// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockconv/blocking_plan.hpp"
#include "blockconv/network.hpp"

namespace bconv {

struct HardwareBudget {
    int bram_blocks = 1090;
    int bram_block_bits = 18432;
    int n_pe = 4;
    int activation_bits = 8;
    /// Reserved for weights; not co-optimized with the data buffers.
    uint64_t weight_buffer_bits = 256ull * 18432;
    int max_channel_tile = 64;

    uint64_t bram_bits() const { return static_cast<uint64_t>(bram_blocks) * bram_block_bits; }

    /// Zynq ZC706: 1090 x 18Kb BRAM.
    static HardwareBudget zc706(int n_pe = 4, int activation_bits = 8);
};

/// Throws unless every field is positive (bram_blocks may be 0).
void validate(const HardwareBudget& b);
HardwareBudget budget_from_json(const std::string& text);
std::string budget_to_json(const HardwareBudget& b, int indent = 2);
/// `zc706` or a JSON file path.
HardwareBudget resolve_budget(const std::string& spec);

struct Tile {
    int r = 0;
    int c = 0;
    std::string to_string() const { return std::to_string(r) + "x" + std::to_string(c); }
    friend bool operator==(const Tile&, const Tile&) = default;
};
/// Parses "RxC"; a bare "N" means NxN.
Tile parse_tile(const std::string& s);
std::vector<Tile> parse_tile_list(const std::string& s);

struct ChannelTile {
    int m = 0;  // output channels per phase
    int n = 0;  // input channels per phase
    friend bool operator==(const ChannelTile&, const ChannelTile&) = default;
};

/// Full channel count when it is <= max_tile, else its largest divisor <= max_tile.
int choose_channel_tile(int channels, int max_tile);

struct ConvCycleParams {
    int m = 0;     // output channels
    int n_ch = 0;  // input channels per output (1 for depthwise)
    int r = 0;     // output rows
    int c = 0;     // output cols
    int k = 3;
    int tr = 0;
    int tc = 0;
    int tm = 0;
    int tn = 0;
    int n_pe = 1;
};

/// ceil(M/Tm) * ceil(N/Tn) * ceil(R/Tr) * ceil(C/Tc), tiles clamped to the extents.
uint64_t estimate_phases(const ConvCycleParams& p);
/// phases * (Tr + k - 1) * (Tc + k - 1) * Tm / n_pe, rounded up.
uint64_t estimate_cycles(const ConvCycleParams& p);

/// How a group hands its output to the next group. `onchip` keeps it in an
/// extra buffer (one block of the next group when the next grid coarsens the
/// current output grid, else the whole map); `spill` writes it to DRAM.
enum class BoundaryMode { onchip, spill };
const char* to_string(BoundaryMode m);
BoundaryMode boundary_mode_from_string(const std::string& s);

enum class BufferRole { intermediate_1, intermediate_2, intermediate_3, extra, weight, input, output };
const char* to_string(BufferRole r);
BufferRole buffer_role_from_string(const std::string& s);

struct BufferSpec {
    BufferRole role = BufferRole::extra;
    /// Unique within a plan, e.g. "intermediate_1", "extra:conv2_1", "skip:sum".
    std::string name;
    uint64_t bits = 0;
    friend bool operator==(const BufferSpec&, const BufferSpec&) = default;
};

struct FusionGroup {
    std::vector<int> layers;  // consecutive layer indices
    /// Block size over the group's first-layer input.
    Tile tile;
    friend bool operator==(const FusionGroup&, const FusionGroup&) = default;
};

struct FusionPlan {
    std::vector<FusionGroup> groups;
    std::vector<BoundaryMode> boundaries;  // groups.size() - 1 entries
    /// Per layer: largest block extent of the layer's input grid.
    std::vector<Tile> tile_sizes;
    std::vector<ChannelTile> channel_tiles;
    PadMode pad_mode = PadMode::zero;
    /// Reserve a third intermediate buffer for the next group input block.
    bool prefetch = false;
    std::vector<BufferSpec> buffer_alloc;

    const BufferSpec* buffer(const std::string& name) const;
    friend bool operator==(const FusionPlan&, const FusionPlan&) = default;
};

struct PlanScore {
    uint64_t cycles = 0;
    /// Sum of buffer sizes rounded up to BRAM blocks.
    uint64_t onchip_bits = 0;
    /// Feature-map DRAM traffic: input, output, spilled maps and DRAM residual reads.
    uint64_t offchip_bits = 0;
    /// Spilled intermediate maps, written and read.
    uint64_t intermediate_offchip_bits = 0;
    bool fits_onchip = false;
    friend bool operator==(const PlanScore&, const PlanScore&) = default;
};

struct FusionOptions {
    BoundaryMode boundary = BoundaryMode::onchip;
    PadMode pad_mode = PadMode::zero;
    bool prefetch = false;
    int max_channel_tile = 64;
};

/// Conv layers with their trailing non-conv layers; leading non-conv layers
/// join the first unit.
std::vector<std::vector<int>> fusion_units(const NetworkDesc& net);

/// All 2^(L-1) compositions of L units, as group lengths. Throws when L > max_units.
std::vector<std::vector<int>> enumerate_groupings(int units, int max_units = 20);

/// Builds a plan from group lengths (in units) and one tile per group. Inside
/// a group each layer inherits the previous layer's output grid, so tiles
/// halve after pools. Throws when the grouping is not shape-consistent.
FusionPlan make_fusion_plan(const NetworkDesc& net, const std::vector<int>& unit_lengths,
                            const std::vector<Tile>& group_tiles, const FusionOptions& opt = {});

/// Same, from explicit layer groups.
FusionPlan make_fusion_plan_from_groups(const NetworkDesc& net, std::vector<FusionGroup> groups,
                                        std::vector<BoundaryMode> boundaries,
                                        const FusionOptions& opt = {});

/// Group lengths in conv layers, e.g. "2,2,3,3,3".
std::string grouping_string(const NetworkDesc& net, const FusionPlan& plan);
/// Grouping, group tiles and any spill boundaries; unique per plan.
std::string plan_id(const NetworkDesc& net, const FusionPlan& plan);

/// Per-layer grids and block padding implied by the plan.
BlockingPlan blocking_from_fusion(const NetworkDesc& net, const FusionPlan& plan);

/// Checks groups, boundaries and residual placement against a blocking plan.
/// Residual operands must come from the same group, the group input, the
/// network input, or a group output that is spilled to DRAM.
void check_fusion_plan(const NetworkDesc& net, const FusionPlan& plan, const BlockingPlan& blocking);

/// Buffer sizes: two intermediate buffers of the largest block tensor, an
/// optional third, one extra buffer per on-chip boundary, one skip buffer per
/// residual edge, and the reserved weight buffer.
std::vector<BufferSpec> estimate_memory(const FusionPlan& plan, const NetworkDesc& net,
                                        const HardwareBudget& budget);
uint64_t onchip_bits(const std::vector<BufferSpec>& buffers, const HardwareBudget& budget);

/// Fills plan.buffer_alloc and returns the score.
PlanScore score_plan(FusionPlan& plan, const NetworkDesc& net, const HardwareBudget& budget);

struct PlanSummary {
    std::string id;
    std::string grouping;
    std::vector<int> unit_lengths;
    std::vector<Tile> group_tiles;
    PlanScore score;
    bool pareto = false;
};

struct ExploreOptions {
    FusionOptions fusion;
    /// Restrict per-group tiles to non-increasing area along the network.
    bool monotone_tiles = true;
    int max_units = 20;
    uint64_t max_plans = 2'000'000;
};

struct ExploreResult {
    /// Sorted by (cycles, onchip_bits, id).
    std::vector<PlanSummary> plans;
    /// Candidate plans rejected as shape-inconsistent.
    uint64_t skipped = 0;
    size_t fits_count() const;
    /// First fitting plan in sort order, or nullptr.
    const PlanSummary* best_fit() const;
};

/// Brute-force exploration over groupings and per-group tiles. Throws when
/// the plan count exceeds opt.max_plans or the candidate set is empty.
ExploreResult explore(const NetworkDesc& net, const HardwareBudget& budget,
                      const std::vector<Tile>& candidates, const ExploreOptions& opt = {});

/// Indices of points not dominated in (cycles, onchip_bits).
std::vector<size_t> pareto_front(const std::vector<PlanScore>& scores);

/// One row per plan: id, grouping, group_tiles, cycles, onchip_bits,
/// offchip_bits, intermediate_offchip_bits, fits_onchip, pareto.
std::string plans_to_csv(const ExploreResult& result);

std::string fusion_plan_to_json(const NetworkDesc& net, const FusionPlan& plan,
                                const PlanScore* score = nullptr, int indent = 2);
/// Rebuilds the plan from its groups, tiles and boundaries; buffer sizes are
/// taken from the file when present.
FusionPlan fusion_plan_from_json(const NetworkDesc& net, const std::string& text);

} // namespace bconv
