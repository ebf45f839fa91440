// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blockconv/cli.hpp"
#include "blockconv/sim.hpp"
#include "blockconv/tensor_io.hpp"
#include "doctest.h"

using namespace bconv;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
    std::ostringstream o, e;
    Run r;
    r.code = cli::run(args, o, e);
    r.out = o.str();
    r.err = e.str();
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("bconv_cli_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write(const std::string& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

const char* kToy = R"({
  "name": "toy3",
  "input": {"c": 2, "h": 16, "w": 16},
  "layers": [
    {"id": "a", "kind": "conv", "k": 3, "s": 1, "p": 1, "in_ch": 2, "out_ch": 4},
    {"id": "b", "kind": "conv", "k": 3, "s": 1, "p": 1, "in_ch": 4, "out_ch": 4},
    {"id": "r", "kind": "eltwise_add", "residual_source": "a"},
    {"id": "c", "kind": "conv", "k": 1, "s": 1, "p": 0, "in_ch": 4, "out_ch": 2}
  ]
})";

size_t lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("analyze") {
    const Run v = run_cli({"analyze", "--net", "preset:vdsr"});
    CHECK(v.code == 0);
    CHECK(lines(v.out) == 21);
    CHECK(v.out.find("conv2,conv,64,1080,1920,1061683200,1012.500000,126.562500\n") != std::string::npos);
    const Run g = run_cli({"analyze", "--net", "preset:vgg16-conv"});
    CHECK(g.out.find("conv1_1,conv,64,224,224,51380224,49.000000,6.125000\n") != std::string::npos);
    const Run all = run_cli({"analyze", "--net", "preset:vgg16-conv", "--all-layers"});
    CHECK(lines(all.out) == 19);

    TempDir t;
    write(t.file("empty.json"), R"({"name":"e","input":{"c":1,"h":4,"w":4},"layers":[]})");
    const Run e = run_cli({"analyze", "--net", t.file("empty.json")});
    CHECK(e.code == 0);
    CHECK(e.out == "layer,kind,c,h,w,bits,mbits,mbytes\n");
}

TEST_CASE("plan output equals the library result") {
    TempDir t;
    write(t.file("toy.json"), kToy);
    const Run r = run_cli({"plan", "--net", t.file("toy.json"), "--tiles", "4x4,8x8,8x4", "--json", t.file("best.json")});
    CHECK(r.code == 0);
    const NetworkDesc net = load_network_file(t.file("toy.json"));
    const HardwareBudget b = HardwareBudget::zc706(4, 8);
    const ExploreResult lib = explore(net, b, parse_tile_list("4x4,8x8,8x4"));
    CHECK(r.out == plans_to_csv(lib));
    const PlanSummary* best = lib.best_fit();
    REQUIRE(best);
    FusionPlan p = make_fusion_plan(net, best->unit_lengths, best->group_tiles);
    const PlanScore s = score_plan(p, net, b);
    CHECK(slurp(t.file("best.json")) == fusion_plan_to_json(net, p, &s) + "\n");
    CHECK(run_cli({"plan", "--net", t.file("toy.json"), "--tiles", "4x4,8x8,8x4"}).out == r.out);
}

TEST_CASE("plan edge cases") {
    TempDir t;
    write(t.file("toy.json"), kToy);
    write(t.file("zero.json"), R"({"bram_blocks": 0})");
    const Run z = run_cli({"plan", "--net", t.file("toy.json"), "--budget", t.file("zero.json"), "--tiles", "8x8"});
    CHECK(z.code == 0);
    CHECK(z.err.find("warning") != std::string::npos);
    const Run none = run_cli({"plan", "--net", t.file("toy.json"), "--tiles", "1x1", "--pad-mode", "reflect"});
    CHECK(none.code == 2);
    const Run one = run_cli({"plan", "--net", "preset:vgg16-conv", "--grouping", "2,2,3,3,3", "--group-tiles",
                         "14x14,14x14,14x14,14x14,14x14"});
    CHECK(one.code == 0);
    CHECK(one.out.find("\"plan_id\": \"2-2-3-3-3:14x14-14x14-14x14-14x14-14x14\"") != std::string::npos);
    CHECK(run_cli({"plan", "--net", t.file("toy.json"), "--tiles", "0x3"}).code == 3);
    CHECK(run_cli({"plan", "--net", t.file("missing.json")}).code == 3);
    CHECK(run_cli({"plan", "--net", "preset:vgg16-conv", "--grouping", "2,2"}).code == 3);
}

TEST_CASE("simulate traffic for a single-group VDSR plan") {
    TempDir t;
    const Run p = run_cli({"plan", "--net", "preset:vdsr", "--grouping", "20", "--group-tiles", "27x48", "--json",
                       t.file("vdsr.json")});
    REQUIRE(p.code == 0);
    const Run s = run_cli({"simulate", "--net", "preset:vdsr", "--plan", t.file("vdsr.json"), "--shapes-only"});
    CHECK(s.code == 0);
    const TrafficReport r = traffic_from_csv(s.out);
    CHECK(r.total(TrafficClass::intermediate_fmap) == 0);
    CHECK(std::abs(r.fmap_mbits() - 31.64) <= 0.01);
    const Run b = run_cli({"simulate", "--net", "preset:vdsr", "--baseline", "27x48x64x64", "--fuse-head-pair",
                       "--fold-residual", "--shapes-only", "--traffic", t.file("base.json")});
    CHECK(b.code == 0);
    CHECK(std::abs(traffic_from_json(slurp(t.file("base.json"))).fmap_mbits() - 36481.64) <= 0.01);
    CHECK(run_cli({"simulate", "--net", "preset:vdsr", "--shapes-only"}).code == 3);
    CHECK(run_cli({"simulate", "--net", "preset:vgg16-conv", "--plan", t.file("vdsr.json"), "--shapes-only"}).code == 3);
}

TEST_CASE("verify fused against reference on a seeded net") {
    TempDir t;
    write(t.file("toy.json"), kToy);
    const std::string net = t.file("toy.json");
    REQUIRE(run_cli({"plan", "--net", net, "--grouping", "2,1", "--group-tiles", "8x8,4x4", "--json", t.file("p.json")})
                .code == 0);
    REQUIRE(run_cli({"gen-input", "--net", net, "--seed", "5", "--output", t.file("x.bct")}).code == 0);
    REQUIRE(run_cli({"simulate", "--net", net, "--plan", t.file("p.json"), "--input", t.file("x.bct"), "--weights-seed",
                 "9", "--output", t.file("f.bct"), "--trace", t.file("trace.jsonl"), "--traffic", t.file("t.csv")})
                .code == 0);
    REQUIRE(run_cli({"reference", "--net", net, "--plan", t.file("p.json"), "--input", t.file("x.bct"),
                 "--weights-seed", "9", "--output", t.file("r.bct")})
                .code == 0);
    const Run v = run_cli({"verify", t.file("f.bct"), t.file("r.bct")});
    CHECK(v.code == 0);
    CHECK(v.out.rfind("equal", 0) == 0);
    CHECK(run_cli({"verify", t.file("x.bct"), t.file("x.bct")}).code == 0);
    CHECK(lines(slurp(t.file("trace.jsonl"))) > 0);

    // Same seeds give byte-identical files.
    REQUIRE(run_cli({"simulate", "--net", net, "--plan", t.file("p.json"), "--input", t.file("x.bct"), "--weights-seed",
                 "9", "--output", t.file("f2.bct"), "--trace", t.file("trace2.jsonl"), "--traffic",
                 t.file("t2.csv")})
                .code == 0);
    CHECK(slurp(t.file("f.bct")) == slurp(t.file("f2.bct")));
    CHECK(slurp(t.file("trace.jsonl")) == slurp(t.file("trace2.jsonl")));
    CHECK(slurp(t.file("t.csv")) == slurp(t.file("t2.csv")));

    // A different weight seed changes the output.
    REQUIRE(run_cli({"reference", "--net", net, "--input", t.file("x.bct"), "--weights-seed", "10", "--output",
                 t.file("r10.bct")})
                .code == 0);
    CHECK(run_cli({"verify", t.file("f.bct"), t.file("r10.bct")}).code == 1);
    CHECK(run_cli({"verify", t.file("f.bct"), t.file("x.bct")}).code == 1);
    CHECK(run_cli({"verify", t.file("f.bct"), t.file("nope.bct")}).code == 3);
}

TEST_CASE("argument errors and help") {
    CHECK(run_cli({}).code == 3);
    CHECK(run_cli({"bogus"}).code == 3);
    const Run h = run_cli({"--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("simulate") != std::string::npos);
    CHECK(run_cli({"analyze"}).code == 3);
    CHECK(run_cli({"analyze", "--net", "preset:nope"}).code == 3);
}
