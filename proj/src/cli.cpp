// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "blockconv/planner.hpp"
#include "blockconv/sim.hpp"
#include "blockconv/tensor_io.hpp"

namespace bconv::cli {
namespace {

/// Input problem detected after argument parsing; maps to kInputError.
struct InputError : Error {
    using Error::Error;
};

std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// "-" writes to `out`.
void write_text(const std::string& path, const std::string& text, std::ostream& out) {
    if (path == "-") {
        out << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f || !(f << text)) throw InputError("cannot write '" + path + "'");
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

NetworkDesc load_net(const std::string& spec, int act_bits) {
    NetworkDesc net = resolve_network(spec);
    if (act_bits > 0) net = with_activation_bits(std::move(net), act_bits);
    return net;
}

Tensor4D input_for(const NetworkDesc& net, const std::string& path, uint64_t seed) {
    if (path.empty()) return make_random_input(net, seed);
    Tensor4D t = load_tensor(path);
    if (!(t.dims() == net.input_shape) || !(t.format() == net.activation_format))
        throw InputError("input tensor " + t.dims().to_string() + " " + t.format().to_string() +
                         " does not match network input " + net.input_shape.to_string() + " " +
                         net.activation_format.to_string());
    return t;
}

std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> v;
    std::stringstream ss(s);
    std::string f;
    while (std::getline(ss, f, ',')) {
        size_t used = 0;
        int x = 0;
        try {
            x = std::stoi(f, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != f.size() || x <= 0) throw InputError("invalid integer list '" + s + "'");
        v.push_back(x);
    }
    return v;
}

std::string fmt6(double v) {
    char b[64];
    std::snprintf(b, sizeof b, "%.6f", v);
    return b;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string net;
    int act_bits = 0;
    bool all_layers = false;
    std::string out = "-";
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    const NetworkDesc net = load_net(a.net, a.act_bits);
    std::string csv = "layer,kind,c,h,w,bits,mbits,mbytes\n";
    for (const auto& v : feature_map_volumes(net)) {
        if (!a.all_layers && v.kind != LayerKind::conv) continue;
        csv += v.id + ',' + to_string(v.kind) + ',' + std::to_string(v.out.c) + ',' + std::to_string(v.out.h) + ',' +
               std::to_string(v.out.w) + ',' + std::to_string(v.bits) + ',' + fmt6(v.mbits()) + ',' +
               fmt6(v.mbytes()) + '\n';
    }
    write_text(a.out, csv, out);
    return kOk;
}

struct PlanArgs {
    std::string net;
    int act_bits = 0;
    std::string budget = "zc706";
    std::string tiles = "14x14,28x14,28x28";
    std::string pad_mode = "zero";
    std::string boundary = "onchip";
    bool prefetch = false;
    bool all_tiles = false;
    int max_units = 20;
    uint64_t max_plans = 2000000;
    std::string grouping;
    std::string group_tiles;
    std::string csv = "-";
    std::string json;
};

int cmd_plan(const PlanArgs& a, std::ostream& out, std::ostream& err) {
    const NetworkDesc net = load_net(a.net, a.act_bits);
    HardwareBudget budget = resolve_budget(a.budget);
    // The memory model sizes buffers with the network's activation width.
    budget.activation_bits = static_cast<int>(net.activation_format.storage_bits());
    validate(budget);
    FusionOptions fo;
    fo.pad_mode = pad_mode_from_string(a.pad_mode);
    fo.boundary = boundary_mode_from_string(a.boundary);
    fo.prefetch = a.prefetch;
    fo.max_channel_tile = budget.max_channel_tile;

    if (!a.grouping.empty() || !a.group_tiles.empty()) {
        if (a.grouping.empty() || a.group_tiles.empty())
            throw InputError("--grouping and --group-tiles must be given together");
        FusionPlan plan = make_fusion_plan(net, parse_int_list(a.grouping), parse_tile_list(a.group_tiles), fo);
        const PlanScore score = score_plan(plan, net, budget);
        const std::string text = fusion_plan_to_json(net, plan, &score) + "\n";
        write_text(a.json.empty() ? "-" : a.json, text, out);
        if (!score.fits_onchip) err << "warning: plan does not fit the budget\n";
        return kOk;
    }

    ExploreOptions eo;
    eo.fusion = fo;
    eo.monotone_tiles = !a.all_tiles;
    eo.max_units = a.max_units;
    eo.max_plans = a.max_plans;
    const ExploreResult res = explore(net, budget, parse_tile_list(a.tiles), eo);
    write_text(a.csv, plans_to_csv(res), out);
    if (res.plans.empty()) {
        err << "error: no consistent plan for the candidate tiles (" << res.skipped << " skipped)\n";
        return kInfeasible;
    }
    const PlanSummary* best = res.best_fit();
    if (!best) {
        err << "warning: none of " << res.plans.size() << " plans fits the budget\n";
        return kOk;
    }
    if (!a.json.empty()) {
        FusionPlan plan = make_fusion_plan(net, best->unit_lengths, best->group_tiles, fo);
        const PlanScore score = score_plan(plan, net, budget);
        write_text(a.json, fusion_plan_to_json(net, plan, &score) + "\n", out);
    }
    err << res.plans.size() << " plans, " << res.fits_count() << " fit, best " << best->id << "\n";
    return kOk;
}

struct SimArgs {
    std::string net;
    int act_bits = 0;
    std::string plan;
    std::string baseline;
    bool no_halo = false;
    bool fuse_head_pair = false;
    bool fold_residual = false;
    bool shapes_only = false;
    std::string input;
    uint64_t seed = 1;
    uint64_t weights_seed = 2;
    std::string output;
    std::string traffic = "-";
    std::string trace;
};

int cmd_simulate(const SimArgs& a, std::ostream& out) {
    if (a.plan.empty() == a.baseline.empty()) throw InputError("give exactly one of --plan and --baseline");
    const NetworkDesc net = load_net(a.net, a.act_bits);
    SimOptions so;
    so.functional = !a.shapes_only;
    so.record_trace = !a.trace.empty();
    std::optional<NetworkWeights> w;
    std::optional<Tensor4D> x;
    if (so.functional) {
        w = make_random_weights(net, a.weights_seed);
        x = input_for(net, a.input, a.seed);
    }
    const NetworkWeights* wp = w ? &*w : nullptr;
    const Tensor4D* xp = x ? &*x : nullptr;

    SimResult r;
    if (!a.baseline.empty()) {
        BaselineOptions bo;
        bo.halo = !a.no_halo;
        bo.fuse_head_pair = a.fuse_head_pair;
        bo.fold_residual_into_tail = a.fold_residual;
        r = simulate_baseline(net, wp, xp, parse_baseline_tiling(a.baseline), bo, so);
    } else {
        const FusionPlan plan = fusion_plan_from_json(net, read_text(a.plan));
        r = simulate_fused(net, wp, xp, plan, blocking_from_fusion(net, plan), so);
    }
    const std::string traffic = ends_with(a.traffic, ".json") ? traffic_to_json(r.traffic) + "\n"
                                                               : traffic_to_csv(r.traffic);
    write_text(a.traffic, traffic, out);
    if (!a.trace.empty()) write_text(a.trace, r.trace.to_jsonl(), out);
    if (!a.output.empty()) {
        if (!r.output) throw InputError("--output needs a functional run (drop --shapes-only)");
        save_tensor(*r.output, a.output);
    }
    return kOk;
}

int cmd_verify(const std::string& pa, const std::string& pb, std::ostream& out) {
    const Tensor4D a = load_tensor(pa), b = load_tensor(pb);
    const EquivalenceResult r = verify_equivalence(a, b);
    if (r.equal) {
        out << "equal: " << a.dims().to_string() << " " << a.format().to_string() << "\n";
        return kOk;
    }
    out << "mismatch at index " << r.first_mismatch << " (n=" << r.position.n << " c=" << r.position.c
        << " y=" << r.position.h << " x=" << r.position.w << "): " << r.a << " vs " << r.b << "\n";
    return kMismatch;
}

struct RefArgs {
    std::string net;
    int act_bits = 0;
    std::string plan;
    std::string input;
    uint64_t seed = 1;
    uint64_t weights_seed = 2;
    std::string output;
};

int cmd_reference(const RefArgs& a) {
    const NetworkDesc net = load_net(a.net, a.act_bits);
    const NetworkWeights w = make_random_weights(net, a.weights_seed);
    const Tensor4D x = input_for(net, a.input, a.seed);
    if (a.plan.empty()) {
        save_tensor(run_reference(net, w, x), a.output);
    } else {
        const FusionPlan plan = fusion_plan_from_json(net, read_text(a.plan));
        save_tensor(run_blocked_reference(net, w, blocking_from_fusion(net, plan), x), a.output);
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Block convolution analysis, planning and dataflow simulation"};
    app.name("blockconv");
    app.require_subcommand(1);
    app.set_version_flag("--version", "0.1.0");

    AnalyzeArgs an;
    auto* c_an = app.add_subcommand("analyze", "Per-layer output feature-map volumes as CSV");
    c_an->add_option("--net", an.net, "preset:<name> or network JSON path")->required();
    c_an->add_option("--act-bits", an.act_bits, "Override activation width (4, 8 or 16)");
    c_an->add_flag("--all-layers", an.all_layers, "Include pool and element-wise rows");
    c_an->add_option("-o,--out", an.out, "Output CSV path ('-' for stdout)");

    PlanArgs pl;
    auto* c_pl = app.add_subcommand("plan", "Explore fusion plans; CSV of all plans, JSON of the best fit");
    c_pl->add_option("--net", pl.net, "preset:<name> or network JSON path")->required();
    c_pl->add_option("--act-bits", pl.act_bits, "Override activation width");
    c_pl->add_option("--budget", pl.budget, "'zc706' or budget JSON path")->capture_default_str();
    c_pl->add_option("--tiles", pl.tiles, "Candidate tiles, e.g. 14x14,28x14,28x28")->capture_default_str();
    c_pl->add_option("--pad-mode", pl.pad_mode, "zero, replicate or reflect")->capture_default_str();
    c_pl->add_option("--boundary", pl.boundary, "onchip or spill")->capture_default_str();
    c_pl->add_flag("--prefetch", pl.prefetch, "Reserve a prefetch buffer for the next input block");
    c_pl->add_flag("--all-tiles", pl.all_tiles, "Do not restrict tiles to non-increasing area");
    c_pl->add_option("--max-units", pl.max_units, "Refuse networks with more fusion units")->capture_default_str();
    c_pl->add_option("--max-plans", pl.max_plans, "Stop after this many plans")->capture_default_str();
    c_pl->add_option("--grouping", pl.grouping, "Score one plan: conv counts per group, e.g. 2,2,3,3,3");
    c_pl->add_option("--group-tiles", pl.group_tiles, "Tiles per group for --grouping");
    c_pl->add_option("--csv", pl.csv, "Plans CSV path ('-' for stdout)");
    c_pl->add_option("--json", pl.json, "Best-plan JSON path");

    SimArgs sa;
    auto* c_si = app.add_subcommand("simulate", "Run the fused or baseline dataflow simulator");
    c_si->add_option("--net", sa.net, "preset:<name> or network JSON path")->required();
    c_si->add_option("--act-bits", sa.act_bits, "Override activation width");
    c_si->add_option("--plan", sa.plan, "Fusion plan JSON (fused simulation)");
    c_si->add_option("--baseline", sa.baseline, "Baseline tiling TRxTC or TRxTCxTMxTN");
    c_si->add_flag("--no-halo", sa.no_halo, "Baseline: owned-region reads only");
    c_si->add_flag("--fuse-head-pair", sa.fuse_head_pair, "Baseline: keep the first conv output on chip");
    c_si->add_flag("--fold-residual", sa.fold_residual, "Baseline: apply a final add while the last conv writes");
    c_si->add_flag("--shapes-only", sa.shapes_only, "Count traffic without arithmetic");
    c_si->add_option("--input", sa.input, "Input tensor file (default: random from --seed)");
    c_si->add_option("--seed", sa.seed, "Input seed")->capture_default_str();
    c_si->add_option("--weights-seed", sa.weights_seed, "Weight seed")->capture_default_str();
    c_si->add_option("--output", sa.output, "Write the output tensor");
    c_si->add_option("--traffic", sa.traffic, "Traffic report path, CSV or .json ('-' for stdout)");
    c_si->add_option("--trace", sa.trace, "Phase trace JSONL path");

    std::string va, vb;
    auto* c_ve = app.add_subcommand("verify", "Bit-exact comparison of two tensor files");
    c_ve->add_option("a", va, "First tensor")->required();
    c_ve->add_option("b", vb, "Second tensor")->required();

    RefArgs ra;
    auto* c_re = app.add_subcommand("reference", "Layer-by-layer reference output");
    c_re->add_option("--net", ra.net, "preset:<name> or network JSON path")->required();
    c_re->add_option("--act-bits", ra.act_bits, "Override activation width");
    c_re->add_option("--plan", ra.plan, "Use the plan's blocking (block_conv2d per layer)");
    c_re->add_option("--input", ra.input, "Input tensor file (default: random from --seed)");
    c_re->add_option("--seed", ra.seed, "Input seed")->capture_default_str();
    c_re->add_option("--weights-seed", ra.weights_seed, "Weight seed")->capture_default_str();
    c_re->add_option("--output", ra.output, "Output tensor path")->required();

    std::string gi_net, gi_out;
    uint64_t gi_seed = 1;
    int gi_bits = 0;
    auto* c_gi = app.add_subcommand("gen-input", "Write a seeded random input tensor");
    c_gi->add_option("--net", gi_net, "preset:<name> or network JSON path")->required();
    c_gi->add_option("--act-bits", gi_bits, "Override activation width");
    c_gi->add_option("--seed", gi_seed, "Input seed")->capture_default_str();
    c_gi->add_option("--output", gi_out, "Output tensor path")->required();

    std::vector<const char*> argv{"blockconv"};
    for (const auto& s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kInputError;
    }

    try {
        if (c_an->parsed()) return cmd_analyze(an, out);
        if (c_pl->parsed()) return cmd_plan(pl, out, err);
        if (c_si->parsed()) return cmd_simulate(sa, out);
        if (c_ve->parsed()) return cmd_verify(va, vb, out);
        if (c_re->parsed()) return cmd_reference(ra);
        if (c_gi->parsed()) {
            save_tensor(make_random_input(load_net(gi_net, gi_bits), gi_seed), gi_out);
            return kOk;
        }
    } catch (const SimError& e) {
        err << "error: " << e.what() << " (trace step " << e.step() << ")\n";
        return kInfeasible;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kInputError;
    }
    return kInputError;
}

} // namespace bconv::cli
