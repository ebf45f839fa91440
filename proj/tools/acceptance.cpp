// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: one PASS/FAIL line per criterion, exit 0 iff all pass.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "blockconv/sim.hpp"
#include "oracles.hpp"
#include "random_nets.hpp"

using namespace bconv;

namespace {

const ScalarFormat kAct = ScalarFormat::fixed(8, 4);
const ScalarFormat kW = ScalarFormat::fixed(8, 6);

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) detail << "first failure: " << what << "; ";
        pass = pass && ok;
    }
};

SimOptions shapes_only() {
    SimOptions o;
    o.functional = false;
    o.record_trace = false;
    return o;
}

bool same_real(const Tensor4D& a, const Tensor4D& b) {
    return a.dims() == b.dims() &&
           std::memcmp(a.real_data().data(), b.real_data().data(), a.size() * sizeof(double)) == 0;
}

void c1_small_blocked_conv(Outcome& o) {
    std::mt19937_64 rng(1);
    const Tensor4D x = oracle::random_fixed({1, 3, 8, 8}, kAct, rng, -128, 127);
    const Tensor4D w = oracle::random_fixed({1, 3, 3, 3}, kW, rng, -64, 63);
    const BlockGrid g = BlockGrid::uniform(8, 8, 2, 2);
    const BlockPadding bp = make_block_padding(g, 3, 1, Padding4::uniform(1), PadMode::zero);
    const Tensor4D y = block_conv2d(x, w, {}, g, bp, {});
    o.require(y.dims() == Dims{1, 1, 8, 8}, "output is 8x8");
    o.require(y == oracle::block_conv(x, w, {}, g.row_extents(), g.col_extents(), bp.rows, bp.cols, 1,
                                      PadMode::zero, false, kAct),
              "blocked output equals slice-pad-conv oracle");
    const MacCount blocked = block_mac_count({1, 3, 8, 8}, 1, 3, false, g, bp, 1);
    const MacCount dense = mac_count({{1, 3, 8, 8}, 1, 3, 1, Padding4::uniform(1), false});
    o.require(blocked.kernel_applications == 192, "blocked count 192");
    o.require(dense.kernel_applications == 192, "unblocked count 192");
    o.detail << "output 8x8, kernel applications blocked " << blocked.kernel_applications << " / unblocked "
             << dense.kernel_applications;
}

void c2_degeneracy(Outcome& o) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> ext(3, 24), ch(1, 5), kk(0, 2), pp(0, 2), mode(0, 2), cut(1, 9), ss(1, 2);
    const int ks[] = {1, 3, 5};
    int fixed = 0, real = 0;
    for (int i = 0; i < 120; ++i) {
        const bool pointwise = i % 2 == 1;
        const int k = pointwise ? 1 : ks[kk(rng)];
        const int c = ch(rng), m = ch(rng), h = ext(rng) + k, w = ext(rng) + k;
        ConvParams cp;
        cp.stride = pointwise ? 1 : ss(rng);
        cp.pad = pointwise ? Padding4{} : Padding4{pp(rng), pp(rng), pp(rng), pp(rng)};
        cp.pad_mode = static_cast<PadMode>(mode(rng));
        const BlockGrid g = pointwise ? BlockGrid::fixed(h, w, cut(rng), cut(rng)) : BlockGrid::whole(h, w);
        const BlockPadding bp = make_block_padding(g, k, cp.stride, cp.pad, cp.pad_mode);
        BlockConvParams bcp;
        bcp.stride = cp.stride;
        std::vector<double> bias(m, 0.125);
        if (i % 4 < 2) {
            const Tensor4D x = oracle::random_fixed({1, c, h, w}, kAct, rng, -128, 127);
            const Tensor4D wt = oracle::random_fixed({m, c, k, k}, kW, rng, -64, 63);
            o.require(block_conv2d(x, wt, bias, g, bp, bcp) == conv2d_ref(x, wt, bias, cp),
                      "fixed config " + std::to_string(i));
            ++fixed;
        } else {
            const Tensor4D x = oracle::random_real({1, c, h, w}, rng), wt = oracle::random_real({m, c, k, k}, rng);
            o.require(same_real(block_conv2d(x, wt, bias, g, bp, bcp), conv2d_ref(x, wt, bias, cp)),
                      "real config " + std::to_string(i));
            ++real;
        }
    }
    o.detail << fixed + real << " configs (" << fixed << " fixed, " << real << " real), bit-exact";
}

void c3_block_independence(Outcome& o) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> ext(6, 32), big(29, 44), ch(1, 4), cut(3, 14), dwc(0, 3);
    int cases = 0, uneven = 0;
    for (int i = 0; cases < 60 && i < 1000; ++i) {
        // Every third case uses 28-wide blocks, leaving a narrower remainder block.
        const bool u28 = i % 3 == 0;
        const int h = u28 ? big(rng) : ext(rng), w = u28 ? big(rng) : ext(rng), c = ch(rng);
        const BlockGrid g = u28 ? BlockGrid::fixed(h, w, 28, 28)
                                : BlockGrid::fixed(h, w, std::min(h, cut(rng)), std::min(w, cut(rng)));
        BlockPadding bp;
        try {
            bp = make_block_padding(g, 3, 1, Padding4::uniform(1), PadMode::zero);
        } catch (const Error&) {
            continue;
        }
        const bool dw = dwc(rng) == 0;
        const int m = dw ? c : ch(rng);
        const Tensor4D x = oracle::random_fixed({1, c, h, w}, kAct, rng, -128, 127);
        const Tensor4D wt = oracle::random_fixed({m, dw ? 1 : c, 3, 3}, kW, rng, -64, 63);
        BlockConvParams p;
        p.depthwise = dw;
        const Tensor4D y = block_conv2d(x, wt, {}, g, bp, p);
        const int victim = static_cast<int>(rng() % g.count());
        Tensor4D z = x;
        const BlockRect r = g.block(victim);
        for (int cc = 0; cc < c; ++cc)
            for (int yy = r.y; yy < r.y + r.h; ++yy)
                for (int xx = r.x; xx < r.x + r.w; ++xx) z.q(0, cc, yy, xx) = 0;
        const Tensor4D yz = block_conv2d(z, wt, {}, g, bp, p);
        const BlockRect orr = conv_output_grid(g, bp, 3, 1).block(victim);
        bool outside_same = true;
        for (int oc = 0; oc < m; ++oc)
            for (int yy = 0; yy < y.dims().h; ++yy)
                for (int xx = 0; xx < y.dims().w; ++xx) {
                    const bool inside = yy >= orr.y && yy < orr.y + orr.h && xx >= orr.x && xx < orr.x + orr.w;
                    if (!inside && y.q(0, oc, yy, xx) != yz.q(0, oc, yy, xx)) outside_same = false;
                }
        o.require(outside_same, "case " + std::to_string(i));
        ++cases;
        uneven += g.row_extents().front() != g.row_extents().back() ||
                  g.col_extents().front() != g.col_extents().back();
    }
    o.require(cases >= 50, "at least 50 cases");
    o.require(uneven > 0, "uneven grids covered");
    o.detail << cases << " configs (" << uneven << " uneven), changes confined to the zeroed block";
}

void c4_solver(Outcome& o) {
    const BlockPadSolution s = solve_block_padding(8, 3, 1, 1, 2);
    o.require(s.feasible && s.lead == 1 && s.trail == 1, "solve(8,3,1,1,2) = (1,1)");
    for (int n : {1, 2, 3, 6}) {
        const BlockPadSolution pw = solve_block_padding(36, 1, 1, 0, n);
        o.require(pw.feasible && pw.lead == 0 && pw.trail == 0, "pointwise gives (0,0)");
    }
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> ext(4, 40), kk(1, 5), ss(1, 2), pp(0, 2), nn(1, 4);
    int single = 0;
    for (int i = 0; i < 50; ++i) {
        const int k = kk(rng), st = ss(rng), lead = std::min(pp(rng), k - 1), trail = std::min(pp(rng), k - 1);
        const int I = ext(rng) + k;
        const BlockPadSolution one = solve_block_padding(I, k, st, lead, trail, 1);
        o.require(one.feasible && one.lead == lead && one.trail == trail, "N=1 keeps the padding");
        ++single;
    }
    // Shape law on materialized 2-D tensors: block outputs tile the dense output exactly.
    int checked = 0;
    for (int i = 0; checked < 120 && i < 10000; ++i) {
        const int k = kk(rng), st = ss(rng), p = std::min(pp(rng), k - 1), nr = nn(rng), nc = nn(rng);
        const int H = ext(rng) / nr * nr, W = ext(rng) / nc * nc;
        if (H < nr * k || W < nc * k) continue;
        const BlockPadSolution sr = solve_block_padding(H, k, st, p, nr), sc = solve_block_padding(W, k, st, p, nc);
        if (!sr.feasible || !sc.feasible) continue;
        std::mt19937_64 r2(i);
        const Tensor4D x = oracle::random_fixed({1, 1, H, W}, kAct, r2, -128, 127);
        const Tensor4D w = oracle::random_fixed({1, 1, k, k}, kW, r2, -30, 30);
        const Dims dense = oracle::conv(x, w, {}, st, p, p, p, p, PadMode::zero, false, kAct).dims();
        const int bh = H / nr, bw = W / nc;
        int rows = 0, cols = 0;
        bool aligned = true;
        std::vector<int> col_w(nc, -1);
        for (int br = 0; br < nr; ++br) {
            int row_h = -1;
            for (int bc = 0; bc < nc; ++bc) {
                const Tensor4D blk = slice_spatial(x, {br * bh, bc * bw, bh, bw});
                const Dims d =
                    oracle::conv(blk, w, {}, st, sr.lead, sr.trail, sc.lead, sc.trail, PadMode::zero, false, kAct)
                        .dims();
                if (row_h < 0) row_h = d.h;
                if (col_w[bc] < 0) col_w[bc] = d.w;
                aligned = aligned && d.h == row_h && d.w == col_w[bc];
            }
            rows += row_h;
        }
        for (int v : col_w) cols += v;
        o.require(aligned && rows == dense.h && cols == dense.w, "shape law config " + std::to_string(i));
        ++checked;
    }
    o.require(checked >= 100, "at least 100 shape-law configs");
    o.detail << "(1,1) example, pointwise (0,0), " << single << " N=1 configs, shape law on " << checked
             << " materialized configs";
}

void c5_volumes(Outcome& o) {
    const auto vgg = feature_map_volumes(with_activation_bits(preset("vgg16-conv"), 16));
    const auto vdsr = feature_map_volumes(preset("vdsr"));
    const double mbits = vgg.front().mbits(), mbytes = vdsr.at(1).mbytes();
    o.require(vgg.front().id == "conv1_1", "first entry is conv1_1");
    o.require(std::abs(mbits - 49.0) <= 0.1, "conv1_1 at 16 bit = 49.0 Mbit");
    o.require(std::abs(mbytes - 126.56) <= 0.1, "VDSR middle layer at 8 bit = 126.56 MB");
    char buf[128];
    std::snprintf(buf, sizeof buf, "conv1_1 %.4f Mbit (49.0 +-0.1), VDSR middle %.4f MB (126.56 +-0.1)", mbits,
                  mbytes);
    o.detail << buf;
}

void c6_traffic(Outcome& o) {
    const NetworkDesc vdsr = preset("vdsr");
    const auto t0 = std::chrono::steady_clock::now();
    BaselineOptions bo;
    bo.fuse_head_pair = true;
    bo.fold_residual_into_tail = true;
    const SimResult base =
        simulate_baseline(vdsr, nullptr, nullptr, parse_baseline_tiling("27x48x64x64"), bo, shapes_only());
    FusionPlan plan = make_fusion_plan(vdsr, {20}, {Tile{27, 48}});
    const PlanScore score = score_plan(plan, vdsr, HardwareBudget::zc706(4, 8));
    const SimResult fused = simulate_fused(vdsr, nullptr, nullptr, plan, blocking_from_fusion(vdsr, plan),
                                           shapes_only());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double b = base.traffic.fmap_mbits(), f = fused.traffic.fmap_mbits();
    o.require(std::abs(b - 36481.64) <= 0.01, "baseline 36481.64 Mbit");
    o.require(std::abs(f - 31.64) <= 0.01, "fused 31.64 Mbit");
    o.require(fused.traffic.total(TrafficClass::intermediate_fmap) == 0, "fused intermediate_fmap = 0");
    o.require(score.fits_onchip, "single-group plan fits");
    o.require(secs < 5.0, "shapes-only under 5 s");

    // Functional check at 108x192.
    NetworkDesc small = vdsr;
    small.input_shape.h = 108;
    small.input_shape.w = 192;
    validate(small);
    FusionPlan sp = make_fusion_plan(small, {20}, {Tile{27, 48}});
    o.require(score_plan(sp, small, HardwareBudget::zc706(4, 8)).fits_onchip, "108x192 plan fits");
    const BlockingPlan bp = blocking_from_fusion(small, sp);
    const NetworkWeights w = make_random_weights(small, 11);
    const Tensor4D x = make_random_input(small, 12);
    SimOptions fo;
    fo.record_trace = false;
    const SimResult fr = simulate_fused(small, &w, &x, sp, bp, fo);
    const bool fused_eq = verify_equivalence(*fr.output, run_blocked_reference(small, w, bp, x)).equal;
    const SimResult br = simulate_baseline(small, &w, &x, parse_baseline_tiling("27x48x64x64"), bo, fo);
    const bool base_eq = verify_equivalence(*br.output, run_reference(small, w, x)).equal;
    o.require(fused_eq, "fused equals blocked reference at 108x192");
    o.require(base_eq, "baseline equals unblocked reference at 108x192");
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "baseline %.2f Mbit (36481.64 +-0.01), fused %.2f Mbit (31.64 +-0.01), intermediate %llu, "
                  "shapes-only %.2f s (< 5 s), 108x192 fused %s, baseline %s",
                  b, f, static_cast<unsigned long long>(fused.traffic.total(TrafficClass::intermediate_fmap)), secs,
                  fused_eq ? "bit-exact" : "MISMATCH", base_eq ? "bit-exact" : "MISMATCH");
    o.detail << buf;
}

void c7_cycles(Outcome& o) {
    std::mt19937_64 rng(7);
    auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    int checked = 0, halving = 0;
    for (int i = 0; i < 1000; ++i) {
        ConvCycleParams p;
        p.m = u(1, 512), p.n_ch = u(1, 512), p.r = u(1, 224), p.c = u(1, 224);
        p.k = u(1, 7), p.tr = u(1, 64), p.tc = u(1, 64), p.tm = u(1, 64), p.tn = u(1, 64), p.n_pe = u(1, 16);
        const uint64_t want = oracle::cycles(p.m, p.n_ch, p.r, p.c, p.k, p.tr, p.tc, p.tm, p.tn, p.n_pe);
        o.require(estimate_cycles(p) == want, "tuple " + std::to_string(i));
        ++checked;
        // Doubling n_pe halves the count whenever the work divides evenly.
        ConvCycleParams one = p;
        one.n_pe = 1;
        const uint64_t work = estimate_cycles(one);
        if (work % (2ull * p.n_pe) == 0) {
            ConvCycleParams dbl = p;
            dbl.n_pe = 2 * p.n_pe;
            o.require(estimate_cycles(dbl) * 2 == estimate_cycles(p), "halving at tuple " + std::to_string(i));
            ++halving;
        }
    }
    o.require(halving >= 100, "at least 100 halving cases");
    o.detail << checked << " tuples equal the oracle, halving holds on " << halving << " divisible tuples";
}

void c8_planner(Outcome& o) {
    const NetworkDesc vgg = preset("vgg16-conv");
    const HardwareBudget b = HardwareBudget::zc706(4, vgg.activation_format.storage_bits());
    o.require(b.bram_bits() == 1090ull * 18432, "ZC706 capacity 1090 x 18Kb");
    const ExploreResult r = explore(vgg, b, parse_tile_list("14x14,28x14,28x28"));
    size_t zero_inter = 0;
    for (const auto& p : r.plans) zero_inter += p.score.fits_onchip && p.score.intermediate_offchip_bits == 0;
    o.require(zero_inter >= 1, "a fitting plan with zero intermediate traffic");
    const PlanSummary* best = r.best_fit();
    o.require(best != nullptr, "best fitting plan exists");
    if (best) {
        FusionPlan bp = make_fusion_plan(vgg, best->unit_lengths, best->group_tiles);
        o.require(score_plan(bp, vgg, b) == best->score, "best plan rescored");
        SimResult s;
        try {
            s = simulate_fused(vgg, nullptr, nullptr, bp, blocking_from_fusion(vgg, bp), shapes_only());
            for (const auto& buf : s.buffers) o.require(buf.peak_bits <= buf.capacity_bits, "best plan peaks");
        } catch (const SimError& e) {
            o.require(false, std::string("best plan simulation: ") + e.what());
        }
    }
    // Grouping 2,2,3,3,3 with 14x14 tiles keeps 14x14 on every conv layer.
    const FusionPlan a = make_fusion_plan(vgg, {2, 2, 3, 3, 3}, std::vector<Tile>(5, Tile{14, 14}));
    int convs = 0;
    bool match = true;
    for (size_t i = 0; i < vgg.layers.size(); ++i) {
        if (!vgg.layers[i].is_conv()) continue;
        ++convs;
        match = match && a.tile_sizes[i] == Tile{14, 14};
    }
    o.require(convs == 13 && match, "column A tiles 14x14 on all 13 conv layers");
    o.require(grouping_string(vgg, a) == "2,2,3,3,3", "column A grouping string");
    o.detail << r.plans.size() << " plans, " << r.fits_count() << " fit, " << zero_inter
             << " fit with zero intermediate traffic, best " << (best ? best->id : "-") << "; column A "
             << (match ? "matches" : "differs") << " on " << convs << " layers";
}

void c9_fused_soundness(Outcome& o) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(9);
    int runs = 0, with_res = 0, with_dw = 0;
    for (int seed = 0; runs < 120 && seed < 2000; ++seed) {
        const NetworkDesc net = randnet::random_net(rng, seed % 3);
        auto plan = randnet::random_plan(net, rng);
        if (!plan) continue;
        HardwareBudget b = HardwareBudget::zc706(4, net.activation_format.storage_bits());
        if (seed % 4 == 0) b.weight_buffer_bits = randnet::max_weight_chunk(net, *plan);
        if (!score_plan(*plan, net, b).fits_onchip) continue;
        const BlockingPlan bp = blocking_from_fusion(net, *plan);
        const NetworkWeights w = make_random_weights(net, 1000 + seed);
        const Tensor4D x = make_random_input(net, 2000 + seed);
        const std::string tag = "seed " + std::to_string(seed) + " plan " + plan_id(net, *plan);
        try {
            const SimResult r = simulate_fused(net, &w, &x, *plan, bp);
            o.require(verify_equivalence(*r.output, run_blocked_reference(net, w, bp, x)).equal, tag);
            for (const auto& buf : r.buffers) o.require(buf.peak_bits <= buf.capacity_bits, tag + " " + buf.name);
        } catch (const SimError& e) {
            o.require(false, tag + ": " + e.what());
        }
        ++runs;
        bool res = false, dw = false;
        for (const auto& l : net.layers) {
            res = res || l.kind == LayerKind::eltwise_add;
            dw = dw || (l.is_conv() && l.conv.depthwise);
        }
        with_res += res;
        with_dw += dw;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(runs >= 100, "at least 100 nets");
    o.require(with_res > 0 && with_dw > 0, "residual and depthwise nets covered");
    o.require(secs < 120.0, "under 2 min");
    char buf[160];
    std::snprintf(buf, sizeof buf, "%d nets (%d residual, %d depthwise) bit-exact, peaks within capacity, %.2f s "
                  "(< 120 s)", runs, with_res, with_dw, secs);
    o.detail << buf;
}

void c10_padding(Outcome& o) {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> ext(2, 12), amt(0, 4), ch(1, 3);
    int counts[2] = {0, 0};
    for (PadMode m : {PadMode::replicate, PadMode::reflect}) {
        for (int i = 0; i < 60; ++i) {
            const int h = ext(rng), w = ext(rng);
            Padding4 p{amt(rng), amt(rng), amt(rng), amt(rng)};
            if (m == PadMode::reflect) {
                p.top = std::min(p.top, h - 1), p.bottom = std::min(p.bottom, h - 1);
                p.left = std::min(p.left, w - 1), p.right = std::min(p.right, w - 1);
            }
            const Tensor4D t = oracle::random_fixed({1, ch(rng), h, w}, kAct, rng, -128, 127);
            o.require(pad(t, p, m) == oracle::pad(t, p.top, p.bottom, p.left, p.right, m),
                      std::string(to_string(m)) + " tensor " + std::to_string(i));
            ++counts[m == PadMode::reflect];
        }
    }
    o.detail << counts[0] << " replicate and " << counts[1] << " reflect tensors equal the mirror/clamp oracle";
}

} // namespace

int main() {
    const std::pair<const char*, std::function<void(Outcome&)>> criteria[] = {
        {"blocked 8x8x3 conv on a 2x2 grid", c1_small_blocked_conv},
        {"degenerate blockings equal conv2d_ref", c2_degeneracy},
        {"block independence", c3_block_independence},
        {"block padding solver", c4_solver},
        {"feature-map volumes", c5_volumes},
        {"VDSR traffic, baseline vs fused", c6_traffic},
        {"cycle model", c7_cycles},
        {"VGG-16 planner feasibility", c8_planner},
        {"fused simulator soundness", c9_fused_soundness},
        {"replicate/reflect padding", c10_padding},
    };
    int failed = 0, n = 0;
    for (const auto& [name, fn] : criteria) {
        ++n;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            fn(o);
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s: %s (%.2f s) %s\n", n, o.pass ? "PASS" : "FAIL", name, secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%d criteria passed\n", n - failed, n);
    return failed == 0 ? 0 : 1;
}
