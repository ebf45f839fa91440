// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/planner.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "plan_analysis.hpp"

using nlohmann::json;

namespace bconv {

// ---------------------------------------------------------------------------
// Budget, tiles, cycle model

HardwareBudget HardwareBudget::zc706(int n_pe, int activation_bits) {
    HardwareBudget b;
    b.n_pe = n_pe;
    b.activation_bits = activation_bits;
    return b;
}

void validate(const HardwareBudget& b) {
    if (b.bram_blocks < 0) throw Error("budget: bram_blocks must be >= 0");
    if (b.bram_block_bits <= 0 || b.n_pe <= 0 || b.activation_bits <= 0 || b.max_channel_tile <= 0 ||
        b.weight_buffer_bits == 0)
        throw Error("budget: bram_block_bits, n_pe, activation_bits, weight_buffer_bits and "
                    "max_channel_tile must be positive");
}

HardwareBudget budget_from_json(const std::string& text) {
    HardwareBudget b;
    try {
        const json j = json::parse(text);
        b.bram_blocks = j.value("bram_blocks", b.bram_blocks);
        b.bram_block_bits = j.value("bram_block_bits", b.bram_block_bits);
        b.n_pe = j.value("n_pe", b.n_pe);
        b.activation_bits = j.value("activation_bits", b.activation_bits);
        b.weight_buffer_bits = j.value("weight_buffer_bits", b.weight_buffer_bits);
        b.max_channel_tile = j.value("max_channel_tile", b.max_channel_tile);
    } catch (const json::exception& e) {
        throw Error(std::string("budget JSON error: ") + e.what());
    }
    validate(b);
    return b;
}

std::string budget_to_json(const HardwareBudget& b, int indent) {
    json j{{"bram_blocks", b.bram_blocks},
           {"bram_block_bits", b.bram_block_bits},
           {"n_pe", b.n_pe},
           {"activation_bits", b.activation_bits},
           {"weight_buffer_bits", b.weight_buffer_bits},
           {"max_channel_tile", b.max_channel_tile}};
    return j.dump(indent);
}

HardwareBudget resolve_budget(const std::string& spec) {
    if (spec == "zc706") return HardwareBudget::zc706();
    std::ifstream f(spec);
    if (!f) throw Error("cannot open budget file '" + spec + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return budget_from_json(ss.str());
}

Tile parse_tile(const std::string& s) {
    Tile t;
    const auto x = s.find_first_of("xX");
    try {
        size_t used = 0;
        if (x == std::string::npos) {
            t.r = t.c = std::stoi(s, &used);
            if (used != s.size()) throw Error("");
        } else {
            t.r = std::stoi(s.substr(0, x), &used);
            if (used != x) throw Error("");
            const std::string rest = s.substr(x + 1);
            t.c = std::stoi(rest, &used);
            if (used != rest.size()) throw Error("");
        }
    } catch (const std::exception&) {
        throw Error("invalid tile '" + s + "' (expected RxC)");
    }
    if (t.r <= 0 || t.c <= 0) throw Error("tile sizes must be positive: '" + s + "'");
    return t;
}

std::vector<Tile> parse_tile_list(const std::string& s) {
    std::vector<Tile> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(parse_tile(item));
    return out;
}

int choose_channel_tile(int channels, int max_tile) {
    if (channels <= 0 || max_tile <= 0) throw Error("channel tile: non-positive argument");
    if (channels <= max_tile) return channels;
    for (int t = max_tile; t > 1; --t)
        if (channels % t == 0) return t;
    return 1;
}

namespace {

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

} // namespace

uint64_t estimate_phases(const ConvCycleParams& p) {
    if (p.tr <= 0 || p.tc <= 0 || p.tm <= 0 || p.tn <= 0)
        throw Error("estimate_cycles: tile dims must be positive");
    if (p.m <= 0 || p.n_ch <= 0 || p.r <= 0 || p.c <= 0 || p.k <= 0 || p.n_pe <= 0)
        throw Error("estimate_cycles: layer dims and n_pe must be positive");
    return ceil_div(p.m, std::min(p.tm, p.m)) * ceil_div(p.n_ch, std::min(p.tn, p.n_ch)) *
           ceil_div(p.r, std::min(p.tr, p.r)) * ceil_div(p.c, std::min(p.tc, p.c));
}

uint64_t estimate_cycles(const ConvCycleParams& p) {
    const uint64_t phases = estimate_phases(p);
    const uint64_t tr = std::min(p.tr, p.r), tc = std::min(p.tc, p.c), tm = std::min(p.tm, p.m);
    return ceil_div(phases * (tr + p.k - 1) * (tc + p.k - 1) * tm, p.n_pe);
}

const char* to_string(BoundaryMode m) { return m == BoundaryMode::onchip ? "onchip" : "spill"; }

BoundaryMode boundary_mode_from_string(const std::string& s) {
    if (s == "onchip") return BoundaryMode::onchip;
    if (s == "spill") return BoundaryMode::spill;
    throw Error("unknown boundary mode '" + s + "'");
}

const char* to_string(BufferRole r) {
    switch (r) {
    case BufferRole::intermediate_1: return "intermediate_1";
    case BufferRole::intermediate_2: return "intermediate_2";
    case BufferRole::intermediate_3: return "intermediate_3";
    case BufferRole::extra: return "extra";
    case BufferRole::weight: return "weight";
    case BufferRole::input: return "input";
    case BufferRole::output: return "output";
    }
    return "?";
}

BufferRole buffer_role_from_string(const std::string& s) {
    for (auto r : {BufferRole::intermediate_1, BufferRole::intermediate_2, BufferRole::intermediate_3,
                   BufferRole::extra, BufferRole::weight, BufferRole::input, BufferRole::output})
        if (s == to_string(r)) return r;
    throw Error("unknown buffer role '" + s + "'");
}

const BufferSpec* FusionPlan::buffer(const std::string& name) const {
    for (const auto& b : buffer_alloc)
        if (b.name == name) return &b;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Group evaluation

namespace detail {

namespace {
int max_of(const std::vector<int>& v) { return *std::max_element(v.begin(), v.end()); }
} // namespace

uint64_t max_block_elems(const BlockGrid& g, int channels) {
    return static_cast<uint64_t>(max_of(g.row_extents())) * max_of(g.col_extents()) * channels;
}

GroupEval eval_group(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                     const std::vector<int>& layers, Tile tile, PadMode mode, int max_channel_tile) {
    GroupEval ev;
    if (layers.empty()) throw Error("empty fusion group");
    const Dims& in0 = shapes[layers.front()].in;
    BlockGrid grid = BlockGrid::fixed(in0.h, in0.w, tile.r, tile.c);
    for (int i : layers) {
        const LayerDesc& l = net.layers[i];
        const LayerShape& sh = shapes[i];
        LayerBlocking lb;
        lb.grid = grid;
        try {
            if (l.is_conv()) {
                lb.padding = make_block_padding(grid, l.conv.k, l.conv.stride, l.conv.pad, mode);
                lb.blocked = !grid.is_trivial();
            }
            grid = layer_output_grid(l, lb, sh.out);
            if (grid.block_rows() != lb.grid.block_rows() || grid.block_cols() != lb.grid.block_cols())
                throw Error("block count changes across the layer");
        } catch (const Error& e) {
            throw Error("layer '" + l.id + "': " + e.what());
        }
        const auto re = lb.grid.row_extents(), ce = lb.grid.col_extents();
        ev.tiles.push_back({max_of(re), max_of(ce)});
        ev.max_block_elems = std::max({ev.max_block_elems, max_block_elems(lb.grid, sh.in.c),
                                       max_block_elems(grid, sh.out.c)});
        if (l.is_conv()) {
            const ChannelTile ct{choose_channel_tile(l.conv.out_ch, max_channel_tile),
                                 l.conv.depthwise ? 1 : choose_channel_tile(l.conv.in_ch, max_channel_tile)};
            ev.channel_tiles.push_back(ct);
            ConvCycleParams p;
            p.m = l.conv.out_ch;
            p.n_ch = l.conv.depthwise ? 1 : l.conv.in_ch;
            p.r = sh.out.h;
            p.c = sh.out.w;
            p.k = l.conv.k;
            p.tr = max_of(grid.row_extents());
            p.tc = max_of(grid.col_extents());
            p.tm = ct.m;
            p.tn = ct.n;
            p.n_pe = 1;
            ev.cycle_terms.push_back(p);
        } else {
            ev.channel_tiles.push_back({choose_channel_tile(sh.in.c, max_channel_tile),
                                        choose_channel_tile(sh.in.c, max_channel_tile)});
        }
        if (ev.blocking.empty()) ev.first_in_elems = max_block_elems(lb.grid, sh.in.c);
        ev.blocking.push_back(std::move(lb));
        ev.out_grids.push_back(grid);
    }
    return ev;
}

PlanAnalysis analyze_plan(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                          const std::vector<std::vector<int>>& groups,
                          const std::vector<BoundaryMode>& boundaries,
                          const std::vector<const BlockGrid*>& in_grids,
                          const std::vector<const BlockGrid*>& out_grids) {
    PlanAnalysis a;
    a.group_of.assign(net.layers.size(), -1);
    for (size_t g = 0; g < groups.size(); ++g)
        for (int i : groups[g]) a.group_of[i] = static_cast<int>(g);

    for (size_t b = 0; b + 1 < groups.size(); ++b) {
        const int last = groups[b].back();
        const int first = groups[b + 1].front();
        BoundaryInfo info;
        info.mode = boundaries[b];
        info.coarsens = in_grids[first]->coarsens(*out_grids[last]);
        const Dims& d = shapes[last].out;
        info.map_elems = static_cast<uint64_t>(d.c) * d.h * d.w;
        info.block_elems = info.coarsens ? max_block_elems(*in_grids[first], d.c) : info.map_elems;
        info.next_first = first;
        a.boundaries.push_back(info);
    }

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerDesc& l = net.layers[i];
        if (l.kind != LayerKind::eltwise_add) continue;
        ResidualInfo r;
        r.layer = static_cast<int>(i);
        r.source = net.index_of(l.residual_source);
        const int g = a.group_of[i];
        const int first = groups[g].front();
        const Dims& d = shapes[i].in;
        r.block_elems = max_block_elems(*in_grids[i], d.c);
        r.map_elems = static_cast<uint64_t>(d.c) * d.h * d.w;
        const bool src_is_group_input =
            (r.source < 0 && g == 0) || (r.source >= 0 && g > 0 && r.source == groups[g - 1].back());
        const bool src_in_dram =
            r.source < 0 ||
            (a.group_of[r.source] + 1 < static_cast<int>(groups.size()) &&
             r.source == groups[a.group_of[r.source]].back() &&
             boundaries[a.group_of[r.source]] == BoundaryMode::spill);
        if (r.source >= 0 && a.group_of[r.source] == g) {
            if (!(*out_grids[r.source] == *in_grids[i]))
                throw Error("layer '" + l.id + "': residual source '" + l.residual_source +
                            "' is blocked differently from the add");
            r.kind = ResidualKind::same_group;
        } else if (src_is_group_input && *in_grids[first] == *in_grids[i]) {
            r.kind = ResidualKind::group_input;
        } else if (src_in_dram) {
            r.kind = ResidualKind::dram;
        } else {
            throw Error("layer '" + l.id + "': residual source '" + l.residual_source +
                        "' is neither in the add's group, its group input, nor spilled to DRAM");
        }
        a.residuals.push_back(r);
    }
    return a;
}

} // namespace detail

using detail::GroupEval;

std::vector<std::vector<int>> fusion_units(const NetworkDesc& net) {
    std::vector<std::vector<int>> units;
    std::vector<int> pending;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].is_conv()) {
            if (!units.empty() || !pending.empty()) {
                if (units.empty()) {
                    units.push_back(pending);
                    units.back().push_back(static_cast<int>(i));
                    pending.clear();
                    continue;
                }
            }
            units.push_back({static_cast<int>(i)});
        } else if (units.empty()) {
            pending.push_back(static_cast<int>(i));
        } else {
            units.back().push_back(static_cast<int>(i));
        }
    }
    if (units.empty() && !pending.empty()) units.push_back(pending);
    return units;
}

std::vector<std::vector<int>> enumerate_groupings(int units, int max_units) {
    if (units < 0) throw Error("negative unit count");
    if (units > max_units)
        throw Error("grouping enumeration cap exceeded: " + std::to_string(units) + " units > " +
                    std::to_string(max_units));
    std::vector<std::vector<int>> out;
    if (units == 0) {
        out.emplace_back();
        return out;
    }
    // Bit b of the mask set = cut after unit b.
    const uint64_t n = uint64_t{1} << (units - 1);
    for (uint64_t mask = 0; mask < n; ++mask) {
        std::vector<int> lengths;
        int len = 1;
        for (int b = 0; b < units - 1; ++b) {
            if (mask >> b & 1) {
                lengths.push_back(len);
                len = 1;
            } else {
                ++len;
            }
        }
        lengths.push_back(len);
        out.push_back(std::move(lengths));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    return out;
}

namespace {

std::vector<std::vector<int>> layers_from_units(const NetworkDesc& net, const std::vector<int>& lengths) {
    const auto units = fusion_units(net);
    int total = 0;
    for (int l : lengths) {
        if (l <= 0) throw Error("group lengths must be positive");
        total += l;
    }
    if (total != static_cast<int>(units.size()))
        throw Error("grouping covers " + std::to_string(total) + " units, network has " +
                    std::to_string(units.size()));
    std::vector<std::vector<int>> groups;
    size_t u = 0;
    for (int l : lengths) {
        std::vector<int> g;
        for (int j = 0; j < l; ++j, ++u) g.insert(g.end(), units[u].begin(), units[u].end());
        groups.push_back(std::move(g));
    }
    return groups;
}

void check_groups(const NetworkDesc& net, const std::vector<FusionGroup>& groups,
                  const std::vector<BoundaryMode>& boundaries) {
    int next = 0;
    for (const auto& g : groups) {
        if (g.layers.empty()) throw Error("fusion plan has an empty group");
        for (int i : g.layers)
            if (i != next++) throw Error("fusion groups must cover the layers once, in order");
        if (g.tile.r <= 0 || g.tile.c <= 0) throw Error("group tile must be positive");
    }
    if (next != static_cast<int>(net.layers.size()))
        throw Error("fusion groups cover " + std::to_string(next) + " of " +
                    std::to_string(net.layers.size()) + " layers");
    const size_t want = groups.empty() ? 0 : groups.size() - 1;
    if (boundaries.size() != want) throw Error("fusion plan needs one boundary mode per group boundary");
}

void collect_grids(const std::vector<const GroupEval*>& evals, std::vector<const BlockGrid*>& in,
                   std::vector<const BlockGrid*>& out) {
    for (const GroupEval* e : evals)
        for (size_t j = 0; j < e->blocking.size(); ++j) {
            in.push_back(&e->blocking[j].grid);
            out.push_back(&e->out_grids[j]);
        }
}

detail::PlanAnalysis analyze(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                             const std::vector<FusionGroup>& groups,
                             const std::vector<BoundaryMode>& boundaries,
                             const std::vector<const GroupEval*>& evals) {
    std::vector<std::vector<int>> layer_groups;
    for (const auto& g : groups) layer_groups.push_back(g.layers);
    std::vector<const BlockGrid*> in, out;
    collect_grids(evals, in, out);
    return detail::analyze_plan(net, shapes, layer_groups, boundaries, in, out);
}

std::vector<BufferSpec> buffers_for(const NetworkDesc& net, const std::vector<const GroupEval*>& evals,
                                    const detail::PlanAnalysis& a, bool prefetch,
                                    const HardwareBudget& budget) {
    const uint64_t ab = budget.activation_bits;
    uint64_t inter = 0, first_in = 0;
    for (size_t g = 0; g < evals.size(); ++g) {
        inter = std::max(inter, evals[g]->max_block_elems);
        first_in = std::max(first_in, evals[g]->first_in_elems);
    }
    std::vector<BufferSpec> out;
    out.push_back({BufferRole::intermediate_1, "intermediate_1", inter * ab});
    out.push_back({BufferRole::intermediate_2, "intermediate_2", inter * ab});
    if (prefetch) out.push_back({BufferRole::intermediate_3, "intermediate_3", first_in * ab});
    for (const auto& b : a.boundaries)
        if (b.mode == BoundaryMode::onchip)
            out.push_back({BufferRole::extra, "extra:" + net.layers[b.next_first].id, b.block_elems * ab});
    for (const auto& r : a.residuals)
        out.push_back({BufferRole::extra, "skip:" + net.layers[r.layer].id, r.block_elems * ab});
    out.push_back({BufferRole::weight, "weights", budget.weight_buffer_bits});
    return out;
}

PlanScore score_from(const NetworkDesc& net, const std::vector<LayerShape>& shapes,
                     const std::vector<const GroupEval*>& evals, const detail::PlanAnalysis& a,
                     const std::vector<BufferSpec>& buffers, const HardwareBudget& budget) {
    PlanScore s;
    uint64_t max_weight_chunk = 0;
    const uint64_t wb = net.weight_format.storage_bits();
    for (const GroupEval* e : evals)
        for (ConvCycleParams p : e->cycle_terms) {
            p.n_pe = budget.n_pe;
            s.cycles += estimate_cycles(p);
            max_weight_chunk = std::max<uint64_t>(
                max_weight_chunk, static_cast<uint64_t>(std::min(p.tm, p.m)) * std::min(p.tn, p.n_ch) *
                                      p.k * p.k * wb);
        }
    const uint64_t ab = budget.activation_bits;
    if (!net.layers.empty()) {
        s.offchip_bits += net.input_shape.c * static_cast<uint64_t>(net.input_shape.h) *
                          net.input_shape.w * ab;
        const Dims& o = shapes.back().out;
        s.offchip_bits += static_cast<uint64_t>(o.c) * o.h * o.w * ab;
    }
    for (const auto& b : a.boundaries)
        if (b.mode == BoundaryMode::spill) s.intermediate_offchip_bits += 2 * b.map_elems * ab;
    s.offchip_bits += s.intermediate_offchip_bits;
    for (const auto& r : a.residuals)
        if (r.kind == detail::ResidualKind::dram) s.offchip_bits += r.map_elems * ab;
    s.onchip_bits = onchip_bits(buffers, budget);
    s.fits_onchip = s.onchip_bits <= budget.bram_bits() && max_weight_chunk <= budget.weight_buffer_bits;
    return s;
}

std::string id_from(const std::vector<int>& unit_lengths, const std::vector<Tile>& tiles,
                    const std::vector<BoundaryMode>& boundaries) {
    std::string id;
    for (size_t i = 0; i < unit_lengths.size(); ++i) id += (i ? "-" : "") + std::to_string(unit_lengths[i]);
    id += ":";
    for (size_t i = 0; i < tiles.size(); ++i) id += (i ? "-" : "") + tiles[i].to_string();
    if (std::any_of(boundaries.begin(), boundaries.end(),
                    [](BoundaryMode m) { return m == BoundaryMode::spill; })) {
        id += ":";
        for (auto m : boundaries) id += m == BoundaryMode::spill ? 's' : 'o';
    }
    return id;
}

std::string grouping_from(const std::vector<int>& unit_lengths) {
    std::string s;
    for (size_t i = 0; i < unit_lengths.size(); ++i) s += (i ? "," : "") + std::to_string(unit_lengths[i]);
    return s;
}

std::vector<int> unit_lengths_of(const NetworkDesc& net, const FusionPlan& plan) {
    std::vector<int> out;
    for (const auto& g : plan.groups) {
        int convs = 0;
        for (int i : g.layers) convs += net.layers[i].is_conv();
        out.push_back(convs);
    }
    return out;
}

} // namespace

FusionPlan make_fusion_plan_from_groups(const NetworkDesc& net, std::vector<FusionGroup> groups,
                                        std::vector<BoundaryMode> boundaries, const FusionOptions& opt) {
    check_groups(net, groups, boundaries);
    const auto shapes = infer_shapes(net);
    FusionPlan plan;
    plan.pad_mode = opt.pad_mode;
    plan.prefetch = opt.prefetch;
    std::vector<GroupEval> evals;
    for (const auto& g : groups)
        evals.push_back(detail::eval_group(net, shapes, g.layers, g.tile, opt.pad_mode, opt.max_channel_tile));
    std::vector<const GroupEval*> ptrs;
    for (const auto& e : evals) ptrs.push_back(&e);
    analyze(net, shapes, groups, boundaries, ptrs);
    for (const auto& e : evals) {
        plan.tile_sizes.insert(plan.tile_sizes.end(), e.tiles.begin(), e.tiles.end());
        plan.channel_tiles.insert(plan.channel_tiles.end(), e.channel_tiles.begin(), e.channel_tiles.end());
    }
    plan.groups = std::move(groups);
    plan.boundaries = std::move(boundaries);
    return plan;
}

FusionPlan make_fusion_plan(const NetworkDesc& net, const std::vector<int>& unit_lengths,
                            const std::vector<Tile>& group_tiles, const FusionOptions& opt) {
    if (group_tiles.size() != unit_lengths.size())
        throw Error("need one tile per group (" + std::to_string(unit_lengths.size()) + "), got " +
                    std::to_string(group_tiles.size()));
    const auto layer_groups = layers_from_units(net, unit_lengths);
    std::vector<FusionGroup> groups;
    for (size_t g = 0; g < layer_groups.size(); ++g) groups.push_back({layer_groups[g], group_tiles[g]});
    std::vector<BoundaryMode> boundaries(groups.empty() ? 0 : groups.size() - 1, opt.boundary);
    return make_fusion_plan_from_groups(net, std::move(groups), std::move(boundaries), opt);
}

std::string grouping_string(const NetworkDesc& net, const FusionPlan& plan) {
    return grouping_from(unit_lengths_of(net, plan));
}

std::string plan_id(const NetworkDesc& net, const FusionPlan& plan) {
    std::vector<Tile> tiles;
    for (const auto& g : plan.groups) tiles.push_back(g.tile);
    return id_from(unit_lengths_of(net, plan), tiles, plan.boundaries);
}

BlockingPlan blocking_from_fusion(const NetworkDesc& net, const FusionPlan& plan) {
    check_groups(net, plan.groups, plan.boundaries);
    const auto shapes = infer_shapes(net);
    BlockingPlan bp;
    bp.mode = plan.pad_mode;
    for (const auto& g : plan.groups) {
        auto ev = detail::eval_group(net, shapes, g.layers, g.tile, plan.pad_mode, 64);
        for (auto& lb : ev.blocking) bp.layers.push_back(std::move(lb));
    }
    return bp;
}

void check_fusion_plan(const NetworkDesc& net, const FusionPlan& plan, const BlockingPlan& blocking) {
    check_groups(net, plan.groups, plan.boundaries);
    validate_blocking_plan(net, blocking);
    const auto shapes = infer_shapes(net);
    if (plan.channel_tiles.size() != net.layers.size())
        throw Error("fusion plan needs one channel tile per layer");
    std::vector<BlockGrid> outs;
    for (size_t i = 0; i < net.layers.size(); ++i)
        outs.push_back(layer_output_grid(net.layers[i], blocking.layers[i], shapes[i].out));
    for (const auto& g : plan.groups)
        for (size_t j = 1; j < g.layers.size(); ++j)
            if (!(blocking.layers[g.layers[j]].grid == outs[g.layers[j - 1]]))
                throw Error("layer '" + net.layers[g.layers[j]].id +
                            "': grid does not continue the previous layer's output grid within its group");
    std::vector<std::vector<int>> lg;
    for (const auto& g : plan.groups) lg.push_back(g.layers);
    std::vector<const BlockGrid*> in, out;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        in.push_back(&blocking.layers[i].grid);
        out.push_back(&outs[i]);
    }
    detail::analyze_plan(net, shapes, lg, plan.boundaries, in, out);
}

uint64_t onchip_bits(const std::vector<BufferSpec>& buffers, const HardwareBudget& budget) {
    uint64_t total = 0;
    for (const auto& b : buffers) total += ceil_div(b.bits, budget.bram_block_bits) * budget.bram_block_bits;
    return total;
}

std::vector<BufferSpec> estimate_memory(const FusionPlan& plan, const NetworkDesc& net,
                                        const HardwareBudget& budget) {
    check_groups(net, plan.groups, plan.boundaries);
    const auto shapes = infer_shapes(net);
    std::vector<GroupEval> evals;
    for (const auto& g : plan.groups)
        evals.push_back(detail::eval_group(net, shapes, g.layers, g.tile, plan.pad_mode, budget.max_channel_tile));
    std::vector<const GroupEval*> ptrs;
    for (const auto& e : evals) ptrs.push_back(&e);
    const auto a = analyze(net, shapes, plan.groups, plan.boundaries, ptrs);
    return buffers_for(net, ptrs, a, plan.prefetch, budget);
}

PlanScore score_plan(FusionPlan& plan, const NetworkDesc& net, const HardwareBudget& budget) {
    validate(budget);
    check_groups(net, plan.groups, plan.boundaries);
    const auto shapes = infer_shapes(net);
    std::vector<GroupEval> evals;
    for (const auto& g : plan.groups)
        evals.push_back(detail::eval_group(net, shapes, g.layers, g.tile, plan.pad_mode, budget.max_channel_tile));
    std::vector<const GroupEval*> ptrs;
    for (auto& e : evals) ptrs.push_back(&e);
    // Channel tiles recorded in the plan take precedence.
    size_t li = 0;
    for (auto& e : evals)
        for (size_t j = 0, ci = 0; j < e.blocking.size(); ++j, ++li) {
            if (li < plan.channel_tiles.size() && net.layers[li].is_conv()) {
                e.cycle_terms[ci].tm = plan.channel_tiles[li].m;
                e.cycle_terms[ci].tn = plan.channel_tiles[li].n;
            }
            if (net.layers[li].is_conv()) ++ci;
        }
    const auto a = analyze(net, shapes, plan.groups, plan.boundaries, ptrs);
    plan.buffer_alloc = buffers_for(net, ptrs, a, plan.prefetch, budget);
    return score_from(net, shapes, ptrs, a, plan.buffer_alloc, budget);
}

// ---------------------------------------------------------------------------
// Exploration

size_t ExploreResult::fits_count() const {
    return static_cast<size_t>(std::count_if(plans.begin(), plans.end(),
                                             [](const PlanSummary& p) { return p.score.fits_onchip; }));
}

const PlanSummary* ExploreResult::best_fit() const {
    for (const auto& p : plans)
        if (p.score.fits_onchip) return &p;
    return nullptr;
}

std::vector<size_t> pareto_front(const std::vector<PlanScore>& scores) {
    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return std::tie(scores[a].cycles, scores[a].onchip_bits) <
               std::tie(scores[b].cycles, scores[b].onchip_bits);
    });
    // Sweep in increasing cycles; a point survives if its memory is strictly
    // below every point with fewer cycles. Exact duplicates all survive.
    std::vector<size_t> out;
    uint64_t best_mem = UINT64_MAX;
    uint64_t group_cycles = UINT64_MAX, group_mem = UINT64_MAX;
    for (size_t idx : order) {
        const auto& s = scores[idx];
        if (s.cycles == group_cycles && s.onchip_bits == group_mem) {
            out.push_back(idx);
            continue;
        }
        if (s.onchip_bits < best_mem) {
            out.push_back(idx);
            best_mem = s.onchip_bits;
            group_cycles = s.cycles;
            group_mem = s.onchip_bits;
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

ExploreResult explore(const NetworkDesc& net, const HardwareBudget& budget,
                      const std::vector<Tile>& candidates, const ExploreOptions& opt) {
    validate(budget);
    if (candidates.empty()) throw Error("explore: candidate tile set is empty");
    const auto shapes = infer_shapes(net);
    const auto units = fusion_units(net);
    const auto groupings = enumerate_groupings(static_cast<int>(units.size()), opt.max_units);

    std::vector<size_t> unit_start(units.size() + 1, 0);
    for (size_t u = 0; u < units.size(); ++u) unit_start[u + 1] = unit_start[u] + units[u].size();

    // Group evaluations depend only on (first unit, length, tile).
    std::map<std::tuple<size_t, int, size_t>, std::optional<GroupEval>> cache;
    auto group_eval = [&](size_t u0, int len, size_t t) -> const GroupEval* {
        auto key = std::make_tuple(u0, len, t);
        auto it = cache.find(key);
        if (it == cache.end()) {
            std::vector<int> layers;
            for (size_t i = unit_start[u0]; i < unit_start[u0 + len]; ++i) layers.push_back(static_cast<int>(i));
            std::optional<GroupEval> ev;
            try {
                ev = detail::eval_group(net, shapes, layers, candidates[t], opt.fusion.pad_mode,
                                        budget.max_channel_tile);
            } catch (const Error&) {
            }
            it = cache.emplace(key, std::move(ev)).first;
        }
        return it->second ? &*it->second : nullptr;
    };
    auto area = [&](size_t t) { return static_cast<int64_t>(candidates[t].r) * candidates[t].c; };

    ExploreResult result;
    uint64_t count = 0;
    std::vector<size_t> choice;
    for (const auto& lengths : groupings) {
        std::vector<FusionGroup> groups;
        {
            size_t u = 0;
            for (int l : lengths) {
                FusionGroup g;
                for (size_t i = unit_start[u]; i < unit_start[u + l]; ++i) g.layers.push_back(static_cast<int>(i));
                groups.push_back(std::move(g));
                u += l;
            }
        }
        std::vector<BoundaryMode> boundaries(groups.empty() ? 0 : groups.size() - 1, opt.fusion.boundary);
        choice.assign(lengths.size(), 0);
        // Odometer over tile assignments.
        while (true) {
            bool valid = true;
            if (opt.monotone_tiles)
                for (size_t g = 1; g < choice.size() && valid; ++g)
                    valid = area(choice[g]) <= area(choice[g - 1]);
            if (valid) {
                if (++count > opt.max_plans)
                    throw Error("exploration cap exceeded: more than " + std::to_string(opt.max_plans) +
                                " plans");
                std::vector<const GroupEval*> evals;
                size_t u = 0;
                for (size_t g = 0; g < lengths.size() && valid; ++g) {
                    const GroupEval* e = group_eval(u, lengths[g], choice[g]);
                    if (!e) valid = false;
                    evals.push_back(e);
                    u += lengths[g];
                }
                if (valid) {
                    try {
                        const auto a = analyze(net, shapes, groups, boundaries, evals);
                        PlanSummary ps;
                        ps.unit_lengths = lengths;
                        for (size_t t : choice) ps.group_tiles.push_back(candidates[t]);
                        for (size_t g = 0; g < groups.size(); ++g) groups[g].tile = ps.group_tiles[g];
                        const auto buffers = buffers_for(net, evals, a, opt.fusion.prefetch, budget);
                        ps.score = score_from(net, shapes, evals, a, buffers, budget);
                        ps.id = id_from(lengths, ps.group_tiles, boundaries);
                        ps.grouping = grouping_from(lengths);
                        result.plans.push_back(std::move(ps));
                    } catch (const Error&) {
                        ++result.skipped;
                    }
                } else {
                    ++result.skipped;
                }
            }
            size_t pos = 0;
            while (pos < choice.size() && ++choice[pos] == candidates.size()) choice[pos++] = 0;
            if (pos == choice.size()) break;
        }
    }
    std::sort(result.plans.begin(), result.plans.end(), [](const PlanSummary& a, const PlanSummary& b) {
        return std::tie(a.score.cycles, a.score.onchip_bits, a.id) <
               std::tie(b.score.cycles, b.score.onchip_bits, b.id);
    });
    std::vector<PlanScore> scores;
    for (const auto& p : result.plans) scores.push_back(p.score);
    for (size_t i : pareto_front(scores)) result.plans[i].pareto = true;
    return result;
}

std::string plans_to_csv(const ExploreResult& result) {
    std::ostringstream os;
    os << "plan_id,grouping,group_tiles,cycles,onchip_bits,offchip_bits,intermediate_offchip_bits,"
          "fits_onchip,pareto\n";
    for (const auto& p : result.plans) {
        std::string tiles;
        for (size_t i = 0; i < p.group_tiles.size(); ++i) tiles += (i ? ";" : "") + p.group_tiles[i].to_string();
        os << p.id << ",\"" << p.grouping << "\"," << tiles << ',' << p.score.cycles << ','
           << p.score.onchip_bits << ',' << p.score.offchip_bits << ',' << p.score.intermediate_offchip_bits
           << ',' << (p.score.fits_onchip ? 1 : 0) << ',' << (p.pareto ? 1 : 0) << '\n';
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Plan JSON

std::string fusion_plan_to_json(const NetworkDesc& net, const FusionPlan& plan, const PlanScore* score,
                                int indent) {
    json j;
    j["network"] = net.name;
    j["plan_id"] = plan_id(net, plan);
    j["grouping"] = grouping_string(net, plan);
    j["pad_mode"] = to_string(plan.pad_mode);
    j["prefetch"] = plan.prefetch;
    j["groups"] = json::array();
    for (const auto& g : plan.groups) {
        json ids = json::array();
        for (int i : g.layers) ids.push_back(net.layers[i].id);
        j["groups"].push_back({{"layers", ids}, {"tile", {g.tile.r, g.tile.c}}});
    }
    j["boundaries"] = json::array();
    for (auto m : plan.boundaries) j["boundaries"].push_back(to_string(m));
    j["layers"] = json::array();
    for (size_t i = 0; i < net.layers.size(); ++i) {
        json l{{"id", net.layers[i].id}};
        if (i < plan.tile_sizes.size()) l["tile"] = {plan.tile_sizes[i].r, plan.tile_sizes[i].c};
        if (i < plan.channel_tiles.size())
            l["channel_tile"] = {plan.channel_tiles[i].m, plan.channel_tiles[i].n};
        j["layers"].push_back(l);
    }
    j["buffers"] = json::array();
    for (const auto& b : plan.buffer_alloc)
        j["buffers"].push_back({{"role", to_string(b.role)}, {"name", b.name}, {"bits", b.bits}});
    if (score)
        j["score"] = {{"cycles", score->cycles},
                      {"onchip_bits", score->onchip_bits},
                      {"offchip_bits", score->offchip_bits},
                      {"intermediate_offchip_bits", score->intermediate_offchip_bits},
                      {"fits_onchip", score->fits_onchip}};
    return j.dump(indent);
}

FusionPlan fusion_plan_from_json(const NetworkDesc& net, const std::string& text) {
    try {
        const json j = json::parse(text);
        std::vector<FusionGroup> groups;
        for (const auto& g : j.at("groups")) {
            FusionGroup fg;
            for (const auto& id : g.at("layers")) {
                const int idx = net.index_of(id.get<std::string>());
                if (idx < 0) throw Error("fusion group cannot contain the network input");
                fg.layers.push_back(idx);
            }
            const auto& t = g.at("tile");
            fg.tile = {t.at(0).get<int>(), t.at(1).get<int>()};
            groups.push_back(std::move(fg));
        }
        std::vector<BoundaryMode> boundaries;
        if (j.contains("boundaries"))
            for (const auto& b : j.at("boundaries")) boundaries.push_back(boundary_mode_from_string(b.get<std::string>()));
        else if (!groups.empty())
            boundaries.assign(groups.size() - 1, BoundaryMode::onchip);
        FusionOptions opt;
        opt.pad_mode = pad_mode_from_string(j.value("pad_mode", "zero"));
        opt.prefetch = j.value("prefetch", false);
        FusionPlan plan = make_fusion_plan_from_groups(net, std::move(groups), std::move(boundaries), opt);
        if (j.contains("layers")) {
            const auto& layers = j.at("layers");
            if (layers.size() != net.layers.size()) throw Error("plan 'layers' count does not match network");
            for (size_t i = 0; i < layers.size(); ++i)
                if (layers[i].contains("channel_tile")) {
                    const auto& ct = layers[i].at("channel_tile");
                    plan.channel_tiles[i] = {ct.at(0).get<int>(), ct.at(1).get<int>()};
                    if (plan.channel_tiles[i].m <= 0 || plan.channel_tiles[i].n <= 0)
                        throw Error("layer '" + net.layers[i].id + "': channel tile must be positive");
                }
        }
        if (j.contains("buffers"))
            for (const auto& b : j.at("buffers"))
                plan.buffer_alloc.push_back({buffer_role_from_string(b.at("role").get<std::string>()),
                                             b.at("name").get<std::string>(), b.at("bits").get<uint64_t>()});
        return plan;
    } catch (const json::exception& e) {
        throw Error(std::string("fusion plan JSON error: ") + e.what());
    }
}

} // namespace bconv
