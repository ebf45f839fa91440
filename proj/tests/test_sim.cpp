// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "blockconv/sim.hpp"
#include "doctest.h"
#include "random_nets.hpp"

using namespace bconv;
using randnet::conv_layer;
using randnet::random_net;
using randnet::random_plan;

namespace {

SimOptions shapes_only() {
    SimOptions o;
    o.functional = false;
    o.record_trace = false;
    return o;
}

HardwareBudget budget_for(const NetworkDesc& net, uint64_t weight_bits = 256ull * 18432) {
    HardwareBudget b = HardwareBudget::zc706(4, net.activation_format.storage_bits());
    b.weight_buffer_bits = weight_bits;
    b.max_channel_tile = 64;
    return b;
}

uint64_t trace_bits(const PhaseTrace& t, EventKind k, bool dram_side) {
    uint64_t s = 0;
    for (const auto& e : t.events) {
        if (e.kind != k) continue;
        if (k == EventKind::load && dram_side && e.source == "dram") s += e.bits;
        if (k == EventKind::store && dram_side && e.buffer == "dram") s += e.bits;
    }
    return s;
}

uint64_t all_reads(const TrafficReport& r) {
    uint64_t s = 0;
    for (size_t c = 0; c < kTrafficClasses; ++c) s += r.read(static_cast<TrafficClass>(c));
    return s;
}

uint64_t all_writes(const TrafficReport& r) {
    uint64_t s = 0;
    for (size_t c = 0; c < kTrafficClasses; ++c) s += r.write(static_cast<TrafficClass>(c));
    return s;
}

} // namespace

TEST_CASE("fused simulation is bit-exact with the blocked reference") {
    std::mt19937_64 rng(2026);
    int runs = 0, with_res = 0, with_dw = 0, multi_group = 0;
    for (int seed = 0; runs < 110 && seed < 1000; ++seed) {
        const NetworkDesc net = random_net(rng, seed % 3);
        auto plan = random_plan(net, rng);
        if (!plan) continue;
        CAPTURE(seed);
        CAPTURE(network_to_json(net, -1));
        CAPTURE(plan_id(net, *plan));
        // A weight buffer of one channel-tile chunk forces the streamed path.
        const uint64_t chunk = randnet::max_weight_chunk(net, *plan);
        const HardwareBudget b = budget_for(net, seed % 4 == 0 ? chunk : 256ull * 18432);
        REQUIRE(score_plan(*plan, net, b).fits_onchip);
        const BlockingPlan bp = blocking_from_fusion(net, *plan);
        const NetworkWeights w = make_random_weights(net, 1000 + seed);
        const Tensor4D x = make_random_input(net, 2000 + seed);
        SimResult r;
        REQUIRE_NOTHROW(r = simulate_fused(net, &w, &x, *plan, bp));
        const Tensor4D ref = run_blocked_reference(net, w, bp, x);
        CHECK(verify_equivalence(*r.output, ref).equal);
        for (const auto& buf : r.buffers) CHECK(buf.peak_bits <= buf.capacity_bits);
        CHECK(trace_bits(r.trace, EventKind::load, true) == all_reads(r.traffic));
        CHECK(trace_bits(r.trace, EventKind::store, true) == all_writes(r.traffic));
        ++runs;
        for (const auto& l : net.layers) {
            with_res += l.kind == LayerKind::eltwise_add;
            with_dw += l.conv.depthwise && l.is_conv();
        }
        multi_group += plan->groups.size() > 1;
    }
    CHECK(runs >= 100);
    CHECK(with_res > 0);
    CHECK(with_dw > 0);
    CHECK(multi_group > 0);
}

TEST_CASE("baseline simulation equals the unblocked reference") {
    std::mt19937_64 rng(7);
    for (int seed = 0; seed < 40; ++seed) {
        const NetworkDesc net = random_net(rng, seed % 3);
        const NetworkWeights w = make_random_weights(net, seed);
        const Tensor4D x = make_random_input(net, seed + 1);
        auto u = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
        const BaselineTiling t{u(3, 20), u(3, 20), u(1, 16), u(1, 16)};
        BaselineOptions bo;
        bo.halo = u(0, 1);
        bo.fuse_head_pair = u(0, 1);
        bo.fold_residual_into_tail = u(0, 1);
        CAPTURE(seed);
        const SimResult r = simulate_baseline(net, &w, &x, t, bo);
        CHECK(verify_equivalence(*r.output, run_reference(net, w, x)).equal);
        for (const auto& buf : r.buffers) CHECK(buf.peak_bits <= buf.capacity_bits);
        CHECK(trace_bits(r.trace, EventKind::store, true) == all_writes(r.traffic));
    }
}

TEST_CASE("VDSR full-HD traffic") {
    const NetworkDesc vdsr = preset("vdsr");
    BaselineOptions bo;
    bo.fuse_head_pair = true;
    bo.fold_residual_into_tail = true;
    const SimResult base = simulate_baseline(vdsr, nullptr, nullptr, parse_baseline_tiling("27x48x64x64"), bo,
                                             shapes_only());
    CHECK(std::abs(base.traffic.fmap_mbits() - 36481.64) <= 0.01);

    FusionPlan p = make_fusion_plan(vdsr, {20}, {Tile{27, 48}});
    score_plan(p, vdsr, HardwareBudget::zc706(4, 8));
    const SimResult fused = simulate_fused(vdsr, nullptr, nullptr, p, blocking_from_fusion(vdsr, p), shapes_only());
    CHECK(std::abs(fused.traffic.fmap_mbits() - 31.64) <= 0.01);
    CHECK(fused.traffic.total(TrafficClass::intermediate_fmap) == 0);
    CHECK(fused.traffic.total(TrafficClass::input_image) == 1080ull * 1920 * 8);
    CHECK(fused.traffic.total(TrafficClass::output) == 1080ull * 1920 * 8);

    // Without the two baseline options every intermediate map goes to DRAM.
    const SimResult plain = simulate_baseline(vdsr, nullptr, nullptr, parse_baseline_tiling("27x48"), {},
                                              shapes_only());
    CHECK(plain.traffic.fmap_bits() > base.traffic.fmap_bits());
}

TEST_CASE("all-spill fused plan matches halo-free baseline traffic on a conv chain") {
    NetworkDesc net;
    net.input_shape = {1, 3, 24, 20};
    net.layers = {conv_layer("a", 3, 8, 3), conv_layer("b", 8, 8, 3), conv_layer("c", 8, 4, 1),
                  conv_layer("d", 4, 2, 3)};
    FusionOptions fo;
    fo.boundary = BoundaryMode::spill;
    FusionPlan p = make_fusion_plan(net, {1, 1, 1, 1}, std::vector<Tile>(4, Tile{8, 10}), fo);
    score_plan(p, net, budget_for(net));
    const SimResult f = simulate_fused(net, nullptr, nullptr, p, blocking_from_fusion(net, p), shapes_only());
    BaselineOptions bo;
    bo.halo = false;
    const SimResult b = simulate_baseline(net, nullptr, nullptr, {8, 10, 64, 64}, bo, shapes_only());
    CHECK(f.traffic.fmap_bits() == b.traffic.fmap_bits());
    CHECK(f.traffic.total(TrafficClass::intermediate_fmap) == b.traffic.total(TrafficClass::intermediate_fmap));
    CHECK(b.traffic.total(TrafficClass::halo_overhead) == 0);
    bo.halo = true;
    const SimResult h = simulate_baseline(net, nullptr, nullptr, {8, 10, 64, 64}, bo, shapes_only());
    CHECK(h.traffic.total(TrafficClass::halo_overhead) > 0);
    CHECK(h.traffic.fmap_bits() == b.traffic.fmap_bits());
}

TEST_CASE("traffic report formats round trip") {
    const NetworkDesc vdsr = [] {
        NetworkDesc n = preset("vdsr");
        n.input_shape.h = 54;
        n.input_shape.w = 96;
        return n;
    }();
    const SimResult r = simulate_baseline(vdsr, nullptr, nullptr, {27, 48, 64, 64}, {}, shapes_only());
    const std::string csv = traffic_to_csv(r.traffic);
    CHECK(csv.rfind("scope,class,read_bits,write_bits,total_bits,total_mbits\n", 0) == 0);
    CHECK(traffic_from_csv(csv) == r.traffic);
    CHECK(traffic_from_json(traffic_to_json(r.traffic)) == r.traffic);
    CHECK(traffic_to_csv(TrafficReport{}) == "scope,class,read_bits,write_bits,total_bits,total_mbits\n");
    std::string bad = csv;
    bad.replace(bad.find("total,input_image,") + 18, 1, "9");
    CHECK_THROWS_AS(traffic_from_csv(bad), Error);
    CHECK_THROWS_AS(traffic_from_csv("nope\n"), Error);
}

TEST_CASE("simulation is deterministic") {
    std::mt19937_64 rng(3);
    const NetworkDesc net = random_net(rng, 1);
    auto plan = random_plan(net, rng);
    REQUIRE(plan);
    score_plan(*plan, net, budget_for(net));
    const BlockingPlan bp = blocking_from_fusion(net, *plan);
    const NetworkWeights w = make_random_weights(net, 1);
    const Tensor4D x = make_random_input(net, 2);
    const SimResult a = simulate_fused(net, &w, &x, *plan, bp), b = simulate_fused(net, &w, &x, *plan, bp);
    CHECK(a.trace == b.trace);
    CHECK(a.trace.to_jsonl() == b.trace.to_jsonl());
    CHECK(a.traffic == b.traffic);
    CHECK(*a.output == *b.output);
    const SimResult s = simulate_fused(net, nullptr, nullptr, *plan, bp, shapes_only());
    CHECK(s.traffic == a.traffic);
    CHECK(s.steps == a.steps);
}

TEST_CASE("buffer overflow is reported with its trace step") {
    NetworkDesc net;
    net.input_shape = {1, 2, 16, 16};
    net.layers = {conv_layer("a", 2, 4, 3), conv_layer("b", 4, 4, 3)};
    FusionPlan p = make_fusion_plan(net, {2}, {Tile{8, 8}});
    score_plan(p, net, budget_for(net));
    const BlockingPlan bp = blocking_from_fusion(net, p);
    for (auto& b : p.buffer_alloc)
        if (b.name == "intermediate_2") b.bits = 100;
    try {
        simulate_fused(net, nullptr, nullptr, p, bp, {false, true});
        FAIL("no overflow");
    } catch (const SimError& e) {
        CHECK(std::string(e.what()).find("intermediate_2") != std::string::npos);
        CHECK(e.step() > 0);
    }
    FusionPlan unscored = make_fusion_plan(net, {2}, {Tile{8, 8}});
    CHECK_THROWS_AS(simulate_fused(net, nullptr, nullptr, unscored, bp, shapes_only()), Error);
    BaselineOptions lim;
    lim.onchip_limit_bits = 10;
    CHECK_THROWS_AS(simulate_baseline(net, nullptr, nullptr, {8, 8, 4, 4}, lim, shapes_only()), Error);
}

TEST_CASE("trace events and jsonl") {
    NetworkDesc net;
    net.input_shape = {1, 1, 8, 8};
    net.layers = {conv_layer("a", 1, 2, 3)};
    FusionPlan p = make_fusion_plan(net, {1}, {Tile{4, 4}});
    score_plan(p, net, budget_for(net));
    const SimResult r = simulate_fused(net, nullptr, nullptr, p, blocking_from_fusion(net, p), {false, true});
    // weights, then per block: load, compute, swap, store.
    REQUIRE(r.trace.events.size() == 1 + 4 * 4);
    CHECK(r.trace.events[0].tensor == "weights:a");
    CHECK(r.trace.events[1].kind == EventKind::load);
    CHECK(r.trace.events[1].rect == BlockRect{0, 0, 4, 4});
    CHECK(r.trace.events[2].kind == EventKind::compute);
    CHECK(r.trace.events[3].kind == EventKind::buffer_swap);
    CHECK(r.trace.events[4].kind == EventKind::store);
    CHECK(r.trace.events[4].buffer == "dram");
    const std::string jl = r.trace.to_jsonl();
    CHECK(std::count(jl.begin(), jl.end(), '\n') == 17);
    CHECK(jl.find("\"event\":\"buffer_swap\"") != std::string::npos);
}

TEST_CASE("equivalence check") {
    Tensor4D a({1, 2, 3, 4}, ScalarFormat::fixed(8, 4));
    Tensor4D b = a;
    CHECK(verify_equivalence(a, b).equal);
    b.q(0, 1, 2, 3) = 5;
    const EquivalenceResult r = verify_equivalence(a, b);
    CHECK_FALSE(r.equal);
    CHECK(r.first_mismatch == b.index(0, 1, 2, 3));
    CHECK(r.position == Dims{0, 1, 2, 3});
    CHECK_THROWS_AS(verify_equivalence(a, Tensor4D({1, 2, 3, 5}, a.format())), Error);
    CHECK_THROWS_AS(verify_equivalence(a, Tensor4D({1, 2, 3, 4}, ScalarFormat::fixed(16, 8))), Error);
}

TEST_CASE("baseline tiling parser") {
    const BaselineTiling t = parse_baseline_tiling("27x48");
    CHECK(t.tr == 27);
    CHECK(t.tm == 64);
    const BaselineTiling u = parse_baseline_tiling("8x8x16x4");
    CHECK(u.tn == 4);
    CHECK_THROWS_AS(parse_baseline_tiling("8x"), Error);
    CHECK_THROWS_AS(parse_baseline_tiling("8x8x8"), Error);
}
