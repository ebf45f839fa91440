// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "blockconv/ops.hpp"
#include "blockconv/sim.hpp"
#include "sim_kernels.hpp"
#include "sim_state.hpp"

namespace bconv {
namespace {

using detail::SimState;

struct Interval {
    int lo = 0;
    int hi = 0;  // exclusive
};

// Length of the union of ascending intervals.
int union_length(const std::vector<Interval>& v) {
    int total = 0, end = 0;
    bool first = true;
    for (const auto& iv : v) {
        if (iv.hi <= iv.lo) continue;
        const int lo = first ? iv.lo : std::max(iv.lo, end);
        if (iv.hi > lo) total += iv.hi - lo;
        end = first ? iv.hi : std::max(end, iv.hi);
        first = false;
    }
    return total;
}

// Input rows [lo, hi) read by output rows [o0, o0 + n) of a window op.
Interval input_span(int o0, int n, int s, int k, int lead, int extent) {
    return {std::max(0, o0 * s - lead), std::min(extent, (o0 + n - 1) * s - lead + k)};
}

std::vector<int> tile_starts(int extent, int tile) {
    std::vector<int> v;
    for (int x = 0; x < extent; x += tile) v.push_back(x);
    return v;
}

uint64_t bits_of(const BlockRect& r, int c, uint64_t b) { return static_cast<uint64_t>(r.h) * r.w * c * b; }

} // namespace

SimResult simulate_baseline(const NetworkDesc& net, const NetworkWeights* weights, const Tensor4D* input,
                            const BaselineTiling& tiling, const BaselineOptions& bopt, const SimOptions& opt) {
    validate(net);
    if (tiling.tr <= 0 || tiling.tc <= 0 || tiling.tm <= 0 || tiling.tn <= 0)
        throw Error("baseline tiling must be positive");
    const auto shapes = infer_shapes(net);
    const size_t L = net.layers.size();
    if (net.input_shape.n != 1) throw Error("simulators support batch 1 only");
    if (opt.functional) {
        if (!weights || !input) throw Error("functional simulation needs weights and an input tensor");
        if (!(input->dims() == net.input_shape) || !(input->format() == net.activation_format))
            throw Error("input tensor does not match the network input");
        if (weights->size() != L) throw Error("weights do not match the network");
    }
    const uint64_t ab = net.activation_format.storage_bits();
    const uint64_t wb = net.weight_format.storage_bits();
    const bool head = bopt.fuse_head_pair && L >= 2 && net.layers[0].is_conv() && net.layers[1].is_conv();
    const bool tail = bopt.fold_residual_into_tail && L >= 2 && net.layers[L - 1].kind == LayerKind::eltwise_add &&
                      net.layers[L - 2].is_conv();

    // Capacities: the largest tile each buffer ever holds.
    uint64_t cap_in = 0, cap_w = 0, cap_out = 0;
    for (size_t i = 0; i < L; ++i) {
        const LayerDesc& l = net.layers[i];
        const Dims &in = shapes[i].in, &out = shapes[i].out;
        const uint64_t th = std::min(tiling.tr, out.h), tw = std::min(tiling.tc, out.w);
        const uint64_t tm = std::min(tiling.tm, out.c);
        if (l.is_conv()) {
            const uint64_t tn = l.conv.depthwise ? tm : std::min(tiling.tn, in.c);
            const uint64_t k = l.conv.k, s = l.conv.stride;
            uint64_t rows = (th - 1) * s + k, cols = (tw - 1) * s + k;
            uint64_t load = rows * cols * tn * ab;
            if (head && i == 1) {
                const auto& c0 = net.layers[0].conv;
                load += ((rows - 1) * c0.stride + c0.k) * ((cols - 1) * c0.stride + c0.k) * c0.in_ch * ab;
            }
            cap_in = std::max(cap_in, load);
            cap_w = std::max(cap_w, tm * (l.conv.depthwise ? 1 : tn) * k * k * wb);
            cap_out = std::max(cap_out, th * tw * tm * ab * ((tail && i == L - 2) ? 2 : 1));
        } else if (l.kind == LayerKind::maxpool) {
            const uint64_t k = l.pool.k, s = l.pool.stride;
            cap_in = std::max(cap_in, ((th - 1) * s + k) * ((tw - 1) * s + k) * tm * ab);
            cap_out = std::max(cap_out, th * tw * tm * ab);
        } else {
            cap_in = std::max(cap_in, 2 * th * tw * tm * ab);
            cap_out = std::max(cap_out, th * tw * tm * ab);
        }
    }
    const uint64_t dbl = bopt.double_buffer ? 2 : 1;
    SimState st(opt.record_trace);
    st.add_buffer(BufferRole::input, "input", cap_in * dbl);
    st.add_buffer(BufferRole::weight, "weight", cap_w * dbl);
    st.add_buffer(BufferRole::output, "output", cap_out);
    if (bopt.onchip_limit_bits && cap_in * dbl + cap_w * dbl + cap_out > *bopt.onchip_limit_bits)
        throw SimError("baseline buffers need " + std::to_string(cap_in * dbl + cap_w * dbl + cap_out) +
                           " bits, limit is " + std::to_string(*bopt.onchip_limit_bits),
                       0);

    SimResult res;
    for (const auto& l : net.layers) res.traffic.at(l.id);
    std::vector<Tensor4D> maps(L);
    auto map_name = [&](int idx) { return idx < 0 ? net.input_id : net.layers[idx].id; };
    auto map_tensor = [&](int idx) -> const Tensor4D& { return idx < 0 ? *input : maps[idx]; };

    for (size_t i = 0; i < L; ++i) {
        const LayerDesc& l = net.layers[i];
        const Dims &in = shapes[i].in, &out = shapes[i].out;
        LayerTraffic& tr = res.traffic.at(l.id);
        const int src_idx = static_cast<int>(i) - 1;
        const TrafficClass in_class =
            (i == 0 || (head && i == 1)) ? TrafficClass::input_image : TrafficClass::intermediate_fmap;
        const bool writes_output = i + 1 == L || (tail && i + 2 == L);
        const TrafficClass out_class = writes_output ? TrafficClass::output : TrafficClass::intermediate_fmap;
        // With the tail fold, the add's output rows are written under the add's id.
        LayerTraffic& out_tr = (tail && i + 2 == L) ? res.traffic.at(net.layers[L - 1].id) : tr;

        if (head && i == 0) {
            st.emit({EventKind::compute, map_name(-1), l.id, -1, {0, 0, out.h, out.w}, out.c,
                     0, "input", "input"});
            if (opt.functional)
                maps[0] = detail::conv_remapped(*input, weights->at(0).weights, weights->at(0).bias, l.conv.pad,
                                                PadMode::zero, l.conv.stride, l.conv.depthwise,
                                                net.activation_format);
            continue;
        }
        if (tail && i + 1 == L) {
            st.emit({EventKind::compute, map_name(src_idx), l.id, -1, {0, 0, out.h, out.w}, out.c, 0, "output",
                     "output"});
            if (opt.functional)
                maps[i] = eltwise_add(maps[i - 1], map_tensor(net.index_of(l.residual_source)));
            continue;
        }

        const int th = std::min(tiling.tr, out.h), tw = std::min(tiling.tc, out.w);
        const int tm = std::min(tiling.tm, out.c);
        const auto rows = tile_starts(out.h, th), cols = tile_starts(out.w, tw);
        std::vector<Interval> row_spans, col_spans;
        uint64_t first_pass = 0, reread = 0;
        int tile = 0;

        int k = 1, s = 1, lead_r = 0, lead_c = 0;
        if (l.is_conv()) {
            k = l.conv.k;
            s = l.conv.stride;
            lead_r = l.conv.pad.top;
            lead_c = l.conv.pad.left;
        } else if (l.kind == LayerKind::maxpool) {
            k = l.pool.k;
            s = l.pool.stride;
        }
        // Maps an interval of this layer's input to what is fetched from DRAM.
        const Dims& fetch_dims = (head && i == 1) ? net.input_shape : in;
        auto fetch_span = [&](Interval iv, bool is_row) {
            if (!(head && i == 1)) return iv;
            const auto& c0 = net.layers[0].conv;
            return input_span(iv.lo, iv.hi - iv.lo, c0.stride, c0.k, is_row ? c0.pad.top : c0.pad.left,
                              is_row ? net.input_shape.h : net.input_shape.w);
        };
        for (int r0 : rows) {
            const int h = std::min(th, out.h - r0);
            row_spans.push_back(fetch_span(input_span(r0, h, s, k, lead_r, in.h), true));
        }
        for (int c0 : cols) {
            const int w = std::min(tw, out.w - c0);
            col_spans.push_back(fetch_span(input_span(c0, w, s, k, lead_c, in.w), false));
        }

        if (opt.functional && l.is_conv()) maps[i] = Tensor4D(out, net.activation_format);
        const bool fixed = net.activation_format.is_fixed();
        const int acc_frac = fixed ? net.activation_format.fraction_bits + net.weight_format.fraction_bits : 0;
        const int shift = acc_frac - net.activation_format.fraction_bits;

        for (size_t ri = 0; ri < rows.size(); ++ri)
            for (size_t ci = 0; ci < cols.size(); ++ci, ++tile) {
                const int r0 = rows[ri], c0 = cols[ci];
                const int h = std::min(th, out.h - r0), w = std::min(tw, out.w - c0);
                const BlockRect fetch{row_spans[ri].lo, col_spans[ci].lo, row_spans[ri].hi - row_spans[ri].lo,
                                      col_spans[ci].hi - col_spans[ci].lo};
                const BlockRect out_rect{r0, c0, h, w};
                for (int m0 = 0; m0 < out.c; m0 += tm) {
                    const int mc = std::min(tm, out.c - m0);
                    if (l.is_conv()) {
                        const bool dw = l.conv.depthwise;
                        const int tn = dw ? mc : std::min(tiling.tn, in.c);
                        const size_t n_out = static_cast<size_t>(h) * w;
                        std::vector<int64_t> acc_q;
                        std::vector<double> acc_r;
                        if (opt.functional) {
                            if (fixed) {
                                acc_q.assign(n_out * mc, 0);
                                const auto& bias = weights->at(i).bias;
                                if (!bias.empty())
                                    for (int m = 0; m < mc; ++m)
                                        std::fill_n(acc_q.begin() + m * n_out, n_out,
                                                    detail::bias_to_acc(bias[m0 + m], acc_frac));
                            } else {
                                acc_r.assign(n_out * mc, 0.0);
                            }
                        }
                        const int n_end = dw ? 1 : in.c;
                        for (int n0 = 0; n0 < n_end; n0 += tn) {
                            const int nc = dw ? mc : std::min(tn, in.c - n0);
                            const int fetch_c = (head && i == 1) ? net.input_shape.c : nc;
                            const uint64_t bits = bits_of(fetch, fetch_c, ab);
                            st.emit({EventKind::load, map_name(head && i == 1 ? -1 : src_idx), l.id, tile, fetch,
                                     fetch_c, bits, "input", "dram"});
                            st.occupy("input", bits, detail::rect_string(map_name(src_idx), fetch, fetch_c));
                            const bool first = dw || (m0 == 0 && (!(head && i == 1) || n0 == 0));
                            (first ? first_pass : reread) += bits;
                            const uint64_t wbits =
                                static_cast<uint64_t>(mc) * (dw ? 1 : nc) * l.conv.k * l.conv.k * wb;
                            st.emit({EventKind::load, "weights:" + l.id, l.id, tile, {}, mc, wbits, "weight",
                                     "dram"});
                            st.occupy("weight", wbits, "weights:" + l.id);
                            tr.read[static_cast<size_t>(TrafficClass::weights)] += wbits;
                            st.emit({EventKind::compute, l.id, l.id, tile, out_rect, mc, 0, "output", "input"});
                            st.occupy("output", n_out * mc * ab, detail::rect_string(l.id, out_rect, mc));
                            if (opt.functional) {
                                const detail::ConvWindow win{r0, h, c0, w};
                                const Tensor4D& src = map_tensor(src_idx);
                                for (int m = 0; m < mc; ++m) {
                                    if (fixed)
                                        detail::accumulate_window(src, l.conv.pad, PadMode::zero,
                                                                  weights->at(i).weights, m0 + m, n0, n0 + nc, dw,
                                                                  s, win, acc_q.data() + m * n_out);
                                    else
                                        detail::accumulate_window(src, l.conv.pad, PadMode::zero,
                                                                  weights->at(i).weights, m0 + m, n0, n0 + nc, dw,
                                                                  s, win, acc_r.data() + m * n_out);
                                }
                            }
                        }
                        if (opt.functional) {
                            const auto& bias = weights->at(i).bias;
                            for (int m = 0; m < mc; ++m)
                                for (int y = 0; y < h; ++y)
                                    for (int x = 0; x < w; ++x) {
                                        const size_t a = m * n_out + static_cast<size_t>(y) * w + x;
                                        if (fixed)
                                            maps[i].q(0, m0 + m, r0 + y, c0 + x) =
                                                requantize(acc_q[a], shift, net.activation_format);
                                        else
                                            maps[i].r(0, m0 + m, r0 + y, c0 + x) =
                                                acc_r[a] + (bias.empty() ? 0.0 : bias[m0 + m]);
                                    }
                        }
                    } else {
                        const uint64_t bits = bits_of(fetch, mc, ab);
                        st.emit({EventKind::load, map_name(src_idx), l.id, tile, fetch, mc, bits, "input", "dram"});
                        st.occupy("input", bits, detail::rect_string(map_name(src_idx), fetch, mc));
                        first_pass += bits;
                        if (l.kind == LayerKind::eltwise_add) {
                            const int ridx = net.index_of(l.residual_source);
                            const uint64_t rbits = bits_of(out_rect, mc, ab);
                            st.emit({EventKind::load, map_name(ridx), l.id, tile, out_rect, mc, rbits, "input",
                                     "dram"});
                            st.occupy("input", bits + rbits, detail::rect_string(map_name(ridx), out_rect, mc));
                            tr.read[static_cast<size_t>(TrafficClass::residual_overhead)] += rbits;
                        }
                        st.emit({EventKind::compute, l.id, l.id, tile, out_rect, mc, 0, "output", "input"});
                        st.occupy("output", bits_of(out_rect, mc, ab), detail::rect_string(l.id, out_rect, mc));
                    }
                    if (tail && i + 2 == L) {
                        const LayerDesc& add = net.layers[L - 1];
                        const int ridx = net.index_of(add.residual_source);
                        const uint64_t rbits = bits_of(out_rect, mc, ab);
                        st.emit({EventKind::load, map_name(ridx), add.id, tile, out_rect, mc, rbits, "output",
                                 "dram"});
                        st.occupy("output", 2 * rbits, detail::rect_string(map_name(ridx), out_rect, mc));
                        out_tr.read[static_cast<size_t>(TrafficClass::residual_overhead)] += rbits;
                    }
                    const uint64_t obits = bits_of(out_rect, mc, ab);
                    const std::string out_name = (tail && i + 2 == L) ? net.layers[L - 1].id : l.id;
                    st.emit({EventKind::store, out_name, out_name, tile, out_rect, mc, obits, "dram", "output"});
                    out_tr.write[static_cast<size_t>(out_class)] += obits;
                    st.release("output");
                }
            }
        st.release("input");
        st.release("weight");

        const uint64_t owned = static_cast<uint64_t>(union_length(row_spans)) * union_length(col_spans) *
                               (head && i == 1 ? fetch_dims.c : in.c) * ab;
        tr.read[static_cast<size_t>(in_class)] += owned;
        if (bopt.halo) tr.read[static_cast<size_t>(TrafficClass::halo_overhead)] += first_pass - owned;
        tr.read[static_cast<size_t>(TrafficClass::reread_overhead)] += reread;

        if (opt.functional) {
            if (l.kind == LayerKind::maxpool)
                maps[i] = maxpool2d(map_tensor(src_idx), l.pool.k, l.pool.stride);
            else if (l.kind == LayerKind::eltwise_add)
                maps[i] = eltwise_add(map_tensor(src_idx), map_tensor(net.index_of(l.residual_source)));
        }
    }

    if (opt.functional) res.output = L == 0 ? *input : maps.back();
    st.finish(res);
    return res;
}

} // namespace bconv
