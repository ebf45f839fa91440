// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>

#include "blockconv/ops.hpp"
#include "blockconv/sim.hpp"
#include "plan_analysis.hpp"
#include "sim_kernels.hpp"
#include "sim_state.hpp"

namespace bconv {
namespace {

using detail::ResidualKind;
using detail::SimState;

struct Block {
    std::optional<Tensor4D> data;
    std::string buffer;
};

uint64_t bits_of(const BlockRect& r, int c, uint64_t b) { return static_cast<uint64_t>(r.h) * r.w * c * b; }

class FusedSim {
public:
    FusedSim(const NetworkDesc& net, const NetworkWeights* weights, const Tensor4D* input, const FusionPlan& plan,
             const BlockingPlan& blocking, const SimOptions& opt)
        : net_(net), weights_(weights), input_(input), plan_(plan), bp_(blocking), opt_(opt),
          st_(opt.record_trace) {}

    SimResult run();

private:
    Block produce(int g, int j);
    void ensure_spilled(int g);
    Block acquire_input(int g, int j);
    void load_weights_for(int layer);
    const Tensor4D& dram_map(int layer) const { return layer < 0 ? *input_ : *dram_[layer]; }
    std::string tensor_name(int layer) const { return layer < 0 ? net_.input_id : net_.layers[layer].id; }
    LayerTraffic& traffic(int layer) { return res_.traffic.at(net_.layers[layer].id); }

    const NetworkDesc& net_;
    const NetworkWeights* weights_;
    const Tensor4D* input_;
    const FusionPlan& plan_;
    const BlockingPlan& bp_;
    SimOptions opt_;
    SimState st_;
    SimResult res_;

    std::vector<LayerShape> shapes_;
    std::vector<BlockGrid> out_grids_;
    detail::PlanAnalysis an_;
    uint64_t ab_ = 0, wb_ = 0;
    bool weights_resident_ = false;

    std::vector<int> produced_;
    std::vector<bool> spilled_;
    std::vector<bool> full_ready_;
    std::vector<std::optional<Tensor4D>> dram_;
    std::vector<std::optional<Tensor4D>> full_map_;
    std::map<int, std::optional<Tensor4D>> skip_;  // keyed by add layer
    std::map<int, std::vector<int>> skip_targets_;  // same-group source -> adds
};

SimResult FusedSim::run() {
    validate(net_);
    if (net_.input_shape.n != 1) throw Error("simulators support batch 1 only");
    if (opt_.functional) {
        if (!weights_ || !input_) throw Error("functional simulation needs weights and an input tensor");
        if (!(input_->dims() == net_.input_shape) || !(input_->format() == net_.activation_format))
            throw Error("input tensor does not match the network input");
        if (weights_->size() != net_.layers.size()) throw Error("weights do not match the network");
    }
    const size_t L = net_.layers.size();
    for (const auto& l : net_.layers) res_.traffic.at(l.id);
    if (L == 0) {
        if (opt_.functional) res_.output = *input_;
        st_.finish(res_);
        return res_;
    }
    check_fusion_plan(net_, plan_, bp_);
    if (plan_.buffer_alloc.empty()) throw Error("fusion plan has no buffer allocation; score it first");
    shapes_ = infer_shapes(net_);
    for (size_t i = 0; i < L; ++i) out_grids_.push_back(layer_output_grid(net_.layers[i], bp_.layers[i], shapes_[i].out));
    {
        std::vector<std::vector<int>> groups;
        for (const auto& g : plan_.groups) groups.push_back(g.layers);
        std::vector<const BlockGrid*> in, out;
        for (size_t i = 0; i < L; ++i) {
            in.push_back(&bp_.layers[i].grid);
            out.push_back(&out_grids_[i]);
        }
        an_ = detail::analyze_plan(net_, shapes_, groups, plan_.boundaries, in, out);
    }
    for (const auto& r : an_.residuals)
        if (r.kind == ResidualKind::same_group) skip_targets_[r.source].push_back(r.layer);

    ab_ = net_.activation_format.storage_bits();
    wb_ = net_.weight_format.storage_bits();
    for (const auto& b : plan_.buffer_alloc) st_.add_buffer(b.role, b.name, b.bits);

    const size_t G = plan_.groups.size();
    produced_.assign(G, 0);
    spilled_.assign(G, false);
    full_ready_.assign(G, false);
    dram_.resize(L);
    full_map_.resize(G);

    uint64_t all_weights = 0;
    for (size_t i = 0; i < L; ++i)
        if (net_.layers[i].is_conv())
            all_weights += static_cast<uint64_t>(conv_weight_dims(net_.layers[i].conv).count()) * wb_;
    weights_resident_ = all_weights <= st_.capacity("weights");
    if (weights_resident_) {
        uint64_t held = 0;
        for (size_t i = 0; i < L; ++i) {
            if (!net_.layers[i].is_conv()) continue;
            const uint64_t bits = static_cast<uint64_t>(conv_weight_dims(net_.layers[i].conv).count()) * wb_;
            held += bits;
            st_.emit({EventKind::load, "weights:" + net_.layers[i].id, net_.layers[i].id, -1, {}, 0, bits, "weights",
                      "dram"});
            st_.occupy("weights", held, "all weights");
            traffic(static_cast<int>(i)).read[static_cast<size_t>(TrafficClass::weights)] += bits;
        }
    }

    const int last_g = static_cast<int>(G) - 1;
    const int last = plan_.groups.back().layers.back();
    const BlockGrid& og = out_grids_[last];
    const Dims& od = shapes_[last].out;
    Tensor4D out;
    if (opt_.functional) out = Tensor4D(od, net_.activation_format);
    for (int j = 0; j < og.count(); ++j) {
        Block b = produce(last_g, j);
        const BlockRect r = og.block(j);
        const uint64_t bits = bits_of(r, od.c, ab_);
        st_.emit({EventKind::store, net_.layers[last].id, net_.layers[last].id, j, r, od.c, bits, "dram", b.buffer});
        traffic(last).write[static_cast<size_t>(TrafficClass::output)] += bits;
        if (opt_.functional) paste_spatial(out, *b.data, r);
        st_.release(b.buffer);
    }
    if (opt_.functional) res_.output = std::move(out);
    st_.finish(res_);
    return res_;
}

void FusedSim::ensure_spilled(int g) {
    if (spilled_[g]) return;
    const int last = plan_.groups[g].layers.back();
    const BlockGrid& og = out_grids_[last];
    const Dims& od = shapes_[last].out;
    if (opt_.functional) dram_[last] = Tensor4D(od, net_.activation_format);
    for (int j = 0; j < og.count(); ++j) {
        Block b = produce(g, j);
        const BlockRect r = og.block(j);
        const uint64_t bits = bits_of(r, od.c, ab_);
        st_.emit({EventKind::store, net_.layers[last].id, net_.layers[last].id, j, r, od.c, bits, "dram", b.buffer});
        traffic(last).write[static_cast<size_t>(TrafficClass::intermediate_fmap)] += bits;
        if (opt_.functional) paste_spatial(*dram_[last], *b.data, r);
        st_.release(b.buffer);
    }
    spilled_[g] = true;
}

Block FusedSim::acquire_input(int g, int j) {
    const int first = plan_.groups[g].layers.front();
    const BlockRect rect = bp_.layers[first].grid.block(j);
    const int C = shapes_[first].in.c;
    const uint64_t bits = bits_of(rect, C, ab_);
    const std::string& fid = net_.layers[first].id;
    Block in;

    if (g == 0 || plan_.boundaries[g - 1] == BoundaryMode::spill) {
        const int src = g == 0 ? -1 : plan_.groups[g - 1].layers.back();
        if (g > 0) ensure_spilled(g - 1);
        st_.emit({EventKind::load, tensor_name(src), fid, j, rect, C, bits, "intermediate_1", "dram"});
        st_.occupy("intermediate_1", bits, detail::rect_string(tensor_name(src), rect, C));
        traffic(first).read[static_cast<size_t>(g == 0 ? TrafficClass::input_image : TrafficClass::intermediate_fmap)] +=
            bits;
        if (opt_.functional) in.data = slice_spatial(dram_map(src), rect);
        in.buffer = "intermediate_1";
        return in;
    }

    const auto& bi = an_.boundaries[g - 1];
    const int prev_last = plan_.groups[g - 1].layers.back();
    const BlockGrid& pg = out_grids_[prev_last];
    const std::string name = "extra:" + fid;
    in.buffer = name;
    auto store_prev = [&](int i, Tensor4D* dst, int oy, int ox) {
        Block b = produce(g - 1, i);
        const BlockRect r = pg.block(i);
        st_.emit({EventKind::store, net_.layers[prev_last].id, net_.layers[prev_last].id, i, r, C, bits_of(r, C, ab_),
                  name, b.buffer});
        if (opt_.functional) paste_spatial(*dst, *b.data, {r.y - oy, r.x - ox, r.h, r.w});
        st_.release(b.buffer);
    };

    if (bi.coarsens) {
        st_.occupy(name, bits, detail::rect_string(net_.layers[prev_last].id, rect, C));
        Tensor4D asm_block;
        if (opt_.functional) asm_block = Tensor4D({1, C, rect.h, rect.w}, net_.activation_format);
        for (int r = 0; r < pg.block_rows(); ++r)
            for (int c = 0; c < pg.block_cols(); ++c) {
                const BlockRect b = pg.block(r, c);
                if (b.y >= rect.y && b.y + b.h <= rect.y + rect.h && b.x >= rect.x && b.x + b.w <= rect.x + rect.w)
                    store_prev(r * pg.block_cols() + c, &asm_block, rect.y, rect.x);
            }
        if (opt_.functional) in.data = std::move(asm_block);
        return in;
    }

    if (!full_ready_[g]) {
        const Dims& d = shapes_[prev_last].out;
        st_.occupy(name, static_cast<uint64_t>(d.c) * d.h * d.w * ab_, "full map " + net_.layers[prev_last].id);
        if (opt_.functional) full_map_[g] = Tensor4D(d, net_.activation_format);
        for (int i = 0; i < pg.count(); ++i) store_prev(i, opt_.functional ? &*full_map_[g] : nullptr, 0, 0);
        full_ready_[g] = true;
    }
    if (opt_.functional) in.data = slice_spatial(*full_map_[g], rect);
    return in;
}

void FusedSim::load_weights_for(int layer) {
    const LayerDesc& l = net_.layers[layer];
    const ChannelTile ct = plan_.channel_tiles[layer];
    const int nch = l.conv.depthwise ? 1 : l.conv.in_ch;
    for (int m0 = 0; m0 < l.conv.out_ch; m0 += ct.m)
        for (int n0 = 0; n0 < nch; n0 += ct.n) {
            const uint64_t mc = std::min(ct.m, l.conv.out_ch - m0), nc = std::min(ct.n, nch - n0);
            const uint64_t bits = mc * nc * l.conv.k * l.conv.k * wb_;
            st_.emit({EventKind::load, "weights:" + l.id, l.id, -1, {}, static_cast<int>(mc), bits, "weights", "dram"});
            st_.occupy("weights", bits, "weights:" + l.id);
            traffic(layer).read[static_cast<size_t>(TrafficClass::weights)] += bits;
        }
}

Block FusedSim::produce(int g, int j) {
    const auto& layers = plan_.groups[g].layers;
    Block cur = acquire_input(g, j);
    const std::string input_buffer = cur.buffer;
    const bool input_in_extra = input_buffer.rfind("extra:", 0) == 0;
    const bool full_map_input = input_in_extra && !an_.boundaries[g - 1].coarsens;

    for (const auto& r : an_.residuals) {
        if (r.kind != ResidualKind::group_input || an_.group_of[r.layer] != g) continue;
        const BlockRect rect = bp_.layers[layers.front()].grid.block(j);
        const int C = shapes_[layers.front()].in.c;
        const std::string skip = "skip:" + net_.layers[r.layer].id;
        st_.emit({EventKind::store, tensor_name(r.source), net_.layers[r.layer].id, j, rect, C, bits_of(rect, C, ab_),
                  skip, cur.buffer});
        st_.occupy(skip, bits_of(rect, C, ab_), detail::rect_string(tensor_name(r.source), rect, C));
        if (opt_.functional) skip_[r.layer] = cur.data;
    }

    for (size_t idx = 0; idx < layers.size(); ++idx) {
        const int li = layers[idx];
        const LayerDesc& l = net_.layers[li];
        const LayerBlocking& lb = bp_.layers[li];
        const BlockRect out_rect = out_grids_[li].block(j);
        const int oc = shapes_[li].out.c;
        const uint64_t obits = bits_of(out_rect, oc, ab_);
        const std::string dest = cur.buffer == "intermediate_1" ? "intermediate_2" : "intermediate_1";

        if (l.is_conv() && !weights_resident_) load_weights_for(li);
        std::string skip;
        if (l.kind == LayerKind::eltwise_add) {
            skip = "skip:" + l.id;
            const auto& r = *std::find_if(an_.residuals.begin(), an_.residuals.end(),
                                          [&](const detail::ResidualInfo& x) { return x.layer == li; });
            if (r.kind == ResidualKind::dram) {
                const BlockRect rect = lb.grid.block(j);
                const uint64_t bits = bits_of(rect, oc, ab_);
                st_.emit({EventKind::load, tensor_name(r.source), l.id, j, rect, oc, bits, skip, "dram"});
                st_.occupy(skip, bits, detail::rect_string(tensor_name(r.source), rect, oc));
                traffic(li).read[static_cast<size_t>(TrafficClass::residual_overhead)] += bits;
                if (opt_.functional) skip_[li] = slice_spatial(dram_map(r.source), rect);
            }
        }

        st_.emit({EventKind::compute, l.id, l.id, j, out_rect, oc, obits, dest, cur.buffer});
        st_.occupy(dest, obits, detail::rect_string(l.id, out_rect, oc));
        Block next;
        next.buffer = dest;
        if (opt_.functional) {
            const Tensor4D& x = *cur.data;
            switch (l.kind) {
            case LayerKind::conv: {
                const int row = j / lb.grid.block_cols(), col = j % lb.grid.block_cols();
                next.data = detail::conv_remapped(x, weights_->at(li).weights, weights_->at(li).bias,
                                                  lb.padding.for_block(row, col), lb.padding.mode, l.conv.stride,
                                                  l.conv.depthwise, net_.activation_format);
                break;
            }
            case LayerKind::maxpool: next.data = maxpool2d(x, l.pool.k, l.pool.stride); break;
            case LayerKind::eltwise_add: next.data = eltwise_add(x, *skip_.at(li)); break;
            default: throw Error("unexpected layer kind");
            }
            const Dims& d = next.data->dims();
            if (d.h != out_rect.h || d.w != out_rect.w || d.c != oc)
                throw SimError("layer '" + l.id + "' block " + std::to_string(j) + " produced " + d.to_string() +
                                   ", grid expects " + std::to_string(out_rect.h) + "x" + std::to_string(out_rect.w),
                               st_.last_step());
        }
        if (!skip.empty()) {
            st_.release(skip);
            skip_.erase(li);
        }
        if (!(full_map_input && idx == 0)) st_.release(cur.buffer);
        st_.emit({EventKind::buffer_swap, l.id, l.id, j, out_rect, oc, 0, dest, cur.buffer});

        if (auto it = skip_targets_.find(li); it != skip_targets_.end())
            for (int add : it->second) {
                const std::string s = "skip:" + net_.layers[add].id;
                st_.emit({EventKind::store, l.id, net_.layers[add].id, j, out_rect, oc, obits, s, dest});
                st_.occupy(s, obits, detail::rect_string(l.id, out_rect, oc));
                if (opt_.functional) skip_[add] = next.data;
            }
        cur = std::move(next);
    }

    if (++produced_[g] == bp_.layers[layers.front()].grid.count() && full_map_input) st_.release(input_buffer);
    return cur;
}

} // namespace

SimResult simulate_fused(const NetworkDesc& net, const NetworkWeights* weights, const Tensor4D* input,
                         const FusionPlan& plan, const BlockingPlan& blocking, const SimOptions& opt) {
    return FusedSim(net, weights, input, plan, blocking, opt).run();
}

} // namespace bconv
