// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/blocking_plan.hpp"

#include "json.hpp"

using nlohmann::json;

namespace bconv {
namespace {

bool pool_splits(const PoolDesc& p, const BlockGrid& g) {
    if (g.is_trivial()) return true;
    if (p.k != p.stride) return false;
    auto ok = [&](const std::vector<int>& cuts) {
        for (int c : cuts)
            if (c % p.stride != 0) return false;
        return true;
    };
    return ok(g.row_cuts) && ok(g.col_cuts);
}

BlockPadding original_padding(const ConvDesc& c) {
    return {{{c.pad.top, c.pad.bottom}}, {{c.pad.left, c.pad.right}}, PadMode::zero};
}

} // namespace

BlockGrid layer_output_grid(const LayerDesc& layer, const LayerBlocking& lb, const Dims& out) {
    switch (layer.kind) {
    case LayerKind::conv: return conv_output_grid(lb.grid, lb.padding, layer.conv.k, layer.conv.stride);
    case LayerKind::maxpool: {
        if (!pool_splits(layer.pool, lb.grid))
            throw Error("pool window straddles a block boundary");
        BlockGrid g = BlockGrid::whole(out.h, out.w);
        for (int c : lb.grid.row_cuts) g.row_cuts.push_back(c / layer.pool.stride);
        for (int c : lb.grid.col_cuts) g.col_cuts.push_back(c / layer.pool.stride);
        return g;
    }
    default: return lb.grid;
    }
}

BlockingPlan trivial_blocking_plan(const NetworkDesc& net, PadMode mode) {
    const auto shapes = infer_shapes(net);
    BlockingPlan plan;
    plan.mode = mode;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        LayerBlocking lb;
        lb.grid = BlockGrid::whole(shapes[i].in.h, shapes[i].in.w);
        if (net.layers[i].is_conv()) lb.padding = original_padding(net.layers[i].conv);
        plan.layers.push_back(lb);
    }
    return plan;
}

BlockingPlan make_blocking_plan(const NetworkDesc& net, const BlockingPattern& pattern) {
    const auto shapes = infer_shapes(net);
    BlockingPlan plan;
    plan.mode = pattern.mode;
    BlockGrid cur = BlockGrid::whole(net.input_shape.h, net.input_shape.w);
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerDesc& l = net.layers[i];
        const Dims& in = shapes[i].in;
        LayerBlocking lb;
        try {
            if (l.is_conv()) {
                const bool in_scope = in.h >= pattern.min_h && in.w >= pattern.min_w;
                if (in_scope) {
                    lb.grid = pattern.kind == BlockingKind::fixed
                                  ? BlockGrid::fixed(in.h, in.w, pattern.a, pattern.b)
                                  : BlockGrid::uniform(in.h, in.w, pattern.a, pattern.b);
                    lb.padding = make_block_padding(lb.grid, l.conv.k, l.conv.stride, l.conv.pad,
                                                    pattern.mode);
                    lb.blocked = true;
                } else {
                    lb.grid = BlockGrid::whole(in.h, in.w);
                    lb.padding = original_padding(l.conv);
                }
            } else if (l.kind == LayerKind::maxpool) {
                lb.grid = pool_splits(l.pool, cur) ? cur : BlockGrid::whole(in.h, in.w);
            } else {
                lb.grid = cur;
            }
            cur = layer_output_grid(l, lb, shapes[i].out);
        } catch (const Error& e) {
            throw Error("layer '" + l.id + "': blocking infeasible: " + e.what());
        }
        plan.layers.push_back(std::move(lb));
    }
    return plan;
}

void validate_blocking_plan(const NetworkDesc& net, const BlockingPlan& plan) {
    if (plan.layers.size() != net.layers.size())
        throw Error("blocking plan has " + std::to_string(plan.layers.size()) + " layers, network has " +
                    std::to_string(net.layers.size()));
    const auto shapes = infer_shapes(net);
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerDesc& l = net.layers[i];
        const LayerBlocking& lb = plan.layers[i];
        const std::string where = "blocking of layer '" + l.id + "': ";
        if (lb.grid.height != shapes[i].in.h || lb.grid.width != shapes[i].in.w)
            throw Error(where + "grid plane does not match input " + shapes[i].in.to_string());
        lb.grid.validate();
        if (l.is_conv()) {
            if (lb.padding.rows.size() != static_cast<size_t>(lb.grid.block_rows()) ||
                lb.padding.cols.size() != static_cast<size_t>(lb.grid.block_cols()))
                throw Error(where + "padding does not match grid");
            const BlockGrid og = conv_output_grid(lb.grid, lb.padding, l.conv.k, l.conv.stride);
            if (og.height != shapes[i].out.h || og.width != shapes[i].out.w)
                throw Error(where + "blocked output " + std::to_string(og.height) + "x" +
                            std::to_string(og.width) + " differs from unblocked " +
                            shapes[i].out.to_string());
        } else if (l.kind == LayerKind::maxpool && !pool_splits(l.pool, lb.grid)) {
            throw Error(where + "pool window straddles a block boundary");
        }
    }
}

double blocking_ratio(const NetworkDesc& net, const BlockingPlan& plan) {
    size_t convs = 0, blocked = 0;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        if (!net.layers[i].is_conv()) continue;
        ++convs;
        blocked += plan.layers.at(i).blocked;
    }
    return convs == 0 ? 0.0 : static_cast<double>(blocked) / static_cast<double>(convs);
}

std::string blocking_plan_to_json(const NetworkDesc& net, const BlockingPlan& plan, int indent) {
    json j;
    j["pad_mode"] = to_string(plan.mode);
    j["layers"] = json::array();
    for (size_t i = 0; i < plan.layers.size(); ++i) {
        const LayerBlocking& lb = plan.layers[i];
        json l{{"id", net.layers.at(i).id},
               {"blocked", lb.blocked},
               {"height", lb.grid.height},
               {"width", lb.grid.width},
               {"row_cuts", lb.grid.row_cuts},
               {"col_cuts", lb.grid.col_cuts}};
        if (net.layers[i].is_conv()) {
            l["pad_mode"] = to_string(lb.padding.mode);
            json pads = json::array();
            for (int r = 0; r < lb.grid.block_rows(); ++r)
                for (int c = 0; c < lb.grid.block_cols(); ++c) {
                    const Padding4 p = lb.padding.for_block(r, c);
                    pads.push_back({p.top, p.bottom, p.left, p.right});
                }
            l["block_padding"] = pads;
        }
        j["layers"].push_back(l);
    }
    return j.dump(indent);
}

BlockingPlan blocking_plan_from_json(const NetworkDesc& net, const std::string& text) {
    BlockingPlan plan;
    try {
        const json j = json::parse(text);
        plan.mode = pad_mode_from_string(j.value("pad_mode", "zero"));
        const json& layers = j.at("layers");
        if (layers.size() != net.layers.size())
            throw Error("blocking plan layer count does not match network");
        for (size_t i = 0; i < layers.size(); ++i) {
            const json& l = layers[i];
            if (l.at("id").get<std::string>() != net.layers[i].id)
                throw Error("blocking plan layer " + std::to_string(i) + " id mismatch");
            LayerBlocking lb;
            lb.blocked = l.value("blocked", false);
            lb.grid.height = l.at("height").get<int>();
            lb.grid.width = l.at("width").get<int>();
            lb.grid.row_cuts = l.at("row_cuts").get<std::vector<int>>();
            lb.grid.col_cuts = l.at("col_cuts").get<std::vector<int>>();
            if (net.layers[i].is_conv()) {
                lb.padding.mode = pad_mode_from_string(l.value("pad_mode", "zero"));
                const json& pads = l.at("block_padding");
                const int rows = lb.grid.block_rows(), cols = lb.grid.block_cols();
                if (pads.size() != static_cast<size_t>(rows * cols))
                    throw Error("layer '" + net.layers[i].id + "': block_padding count mismatch");
                lb.padding.rows.resize(rows);
                lb.padding.cols.resize(cols);
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < cols; ++c) {
                        const json& p = pads[r * cols + c];
                        const AxisPad rp{p[0].get<int>(), p[1].get<int>()};
                        const AxisPad cp{p[2].get<int>(), p[3].get<int>()};
                        if ((c > 0 && lb.padding.rows[r] != rp) || (r > 0 && lb.padding.cols[c] != cp))
                            throw Error("layer '" + net.layers[i].id +
                                        "': block padding must be uniform along block rows/cols");
                        lb.padding.rows[r] = rp;
                        lb.padding.cols[c] = cp;
                    }
            }
            plan.layers.push_back(std::move(lb));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("blocking plan JSON error: ") + e.what());
    }
    validate_blocking_plan(net, plan);
    return plan;
}

NetworkDesc stride_to_pool_rewrite(const NetworkDesc& net) {
    NetworkDesc out = net;
    out.layers.clear();
    for (const auto& l : net.layers) {
        if (!l.is_conv() || l.conv.stride == 1) {
            out.layers.push_back(l);
            continue;
        }
        LayerDesc c = l;
        c.id = l.id + "_s1";
        c.conv.stride = 1;
        LayerDesc p;
        p.id = l.id;
        p.kind = LayerKind::maxpool;
        p.pool = {l.conv.stride, l.conv.stride};
        out.layers.push_back(std::move(c));
        out.layers.push_back(std::move(p));
    }
    validate(out);
    return out;
}

} // namespace bconv
