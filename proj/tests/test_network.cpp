// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/network.hpp"
#include "doctest.h"

using namespace bconv;

namespace {

const char* kToy = R"({
  "name": "toy",
  "input": {"id": "img", "c": 2, "h": 12, "w": 10},
  "activation_format": {"kind": "fixed", "bitwidth": 8, "fraction_bits": 4},
  "weight_format": {"kind": "fixed", "bitwidth": 8, "fraction_bits": 6},
  "layers": [
    {"id": "c1", "kind": "conv", "k": 3, "s": 1, "p": 1, "in_ch": 2, "out_ch": 4},
    {"id": "c2", "kind": "conv", "k": 3, "s": 1, "p": 1, "in_ch": 4, "out_ch": 4},
    {"id": "sum", "kind": "eltwise_add", "residual_source": "c1"},
    {"id": "p1", "kind": "maxpool", "k": 2, "s": 2},
    {"id": "pw", "kind": "conv", "k": 1, "s": 1, "p": 0, "in_ch": 4, "out_ch": 3, "bias": false}
  ]
})";

std::string replace(std::string s, const std::string& a, const std::string& b) {
    const auto p = s.find(a);
    REQUIRE(p != std::string::npos);
    return s.replace(p, a.size(), b);
}

} // namespace

TEST_CASE("json load, shapes and round trip") {
    const NetworkDesc net = load_network_json(kToy);
    CHECK(net.input_id == "img");
    CHECK(net.layers.size() == 5);
    const auto sh = infer_shapes(net);
    CHECK(sh[0].out == Dims{1, 4, 12, 10});
    CHECK(sh[2].out == Dims{1, 4, 12, 10});
    CHECK(sh[3].out == Dims{1, 4, 6, 5});
    CHECK(sh[4].out == Dims{1, 3, 6, 5});
    CHECK_FALSE(net.layers[4].conv.bias);
    CHECK(load_network_json(network_to_json(net)) == net);
}

TEST_CASE("json schema errors name the layer") {
    auto expect = [](const std::string& text, const std::string& needle) {
        try {
            load_network_json(text);
            FAIL("accepted: " << needle);
        } catch (const Error& e) {
            CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
        }
    };
    expect(replace(kToy, R"("residual_source": "c1")", R"("residual_source": "pw")"), "sum");
    expect(replace(kToy, R"("residual_source": "c1")", R"("residual_source": "nope")"), "sum");
    expect(replace(kToy, R"("in_ch": 4, "out_ch": 3)", R"("in_ch": 5, "out_ch": 3)"), "pw");
    expect(replace(kToy, R"("kind": "maxpool")", R"("kind": "avgpool")"), "avgpool");
    expect(replace(kToy, R"("id": "c2")", R"("id": "c1")"), "c1");
    expect("{not json", "JSON");
}

TEST_CASE("residual shape mismatch is rejected") {
    const std::string bad = replace(kToy, R"("residual_source": "c1")", R"("residual_source": "img")");
    CHECK_THROWS_AS(load_network_json(bad), Error);
}

TEST_CASE("pointwise chain keeps spatial dims") {
    NetworkDesc net;
    net.input_shape = {1, 3, 17, 9};
    for (int i = 0; i < 4; ++i) {
        LayerDesc l;
        l.id = "pw" + std::to_string(i);
        l.conv = {1, 1, {}, i == 0 ? 3 : 8, 8, false, true};
        net.layers.push_back(l);
    }
    for (const auto& s : infer_shapes(net)) {
        CHECK(s.out.h == 17);
        CHECK(s.out.w == 9);
    }
}

TEST_CASE("presets") {
    for (const auto& name : preset_names()) {
        const NetworkDesc n = preset(name);
        CHECK_NOTHROW(validate(n));
        CHECK(load_network_json(network_to_json(n)) == n);
        CHECK(resolve_network("preset:" + name) == n);
    }
    CHECK_THROWS_AS(preset("alexnet"), Error);

    const NetworkDesc vdsr = preset("vdsr");
    CHECK(vdsr.conv_count() == 20);
    CHECK(vdsr.layers.back().kind == LayerKind::eltwise_add);
    CHECK(vdsr.layers.back().residual_source == vdsr.input_id);
    const auto vs = infer_shapes(vdsr);
    for (size_t i = 0; i < vdsr.layers.size(); ++i) {
        CHECK(vs[i].out.h == 1080);
        CHECK(vs[i].out.w == 1920);
        if (i > 0 && i + 2 < vdsr.layers.size()) CHECK(vs[i].out.c == 64);
    }
    CHECK(vs.front().out.c == 64);
    CHECK(vs[vs.size() - 2].out.c == 1);

    const NetworkDesc vgg = preset("vgg16-conv");
    CHECK(vgg.conv_count() == 13);
    CHECK(infer_shapes(vgg)[vgg.index_of("conv5_3")].out == Dims{1, 512, 14, 14});

    const NetworkDesc mb = preset("mobilenet-v1-conv");
    bool any_dw = false;
    for (const auto& l : mb.layers) any_dw = any_dw || l.conv.depthwise;
    CHECK(any_dw);
}

TEST_CASE("feature-map volumes") {
    const auto vgg = feature_map_volumes(with_activation_bits(preset("vgg16-conv"), 16));
    CHECK(vgg[0].id == "conv1_1");
    CHECK(vgg[0].bits == 224ull * 224 * 64 * 16);
    CHECK(vgg[0].mbits() == doctest::Approx(49.0));

    const auto vd = feature_map_volumes(preset("vdsr"));
    CHECK(vd[1].mbits() == doctest::Approx(1012.5));
    CHECK(vd[1].mbytes() == doctest::Approx(126.5625));

    NetworkDesc net = load_network_json(kToy);
    auto base = feature_map_volumes(net)[0].bits;
    net.input_shape.h += 2;
    CHECK(feature_map_volumes(net)[0].bits > base);
    base = feature_map_volumes(net)[0].bits;
    CHECK(feature_map_volumes(with_activation_bits(net, 16))[0].bits == 2 * base);
    CHECK(feature_map_volumes(with_activation_bits(net, 4))[0].bits * 2 == base);

    NetworkDesc empty;
    empty.input_shape = {1, 1, 4, 4};
    CHECK(feature_map_volumes(empty).empty());
}

TEST_CASE("activation width override") {
    const NetworkDesc n = with_activation_bits(preset("vdsr"), 16);
    CHECK(n.activation_format == ScalarFormat::fixed(16, 8));
    CHECK_THROWS_AS(with_activation_bits(preset("vdsr"), 7), Error);
}
