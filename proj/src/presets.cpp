// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Convolutional bodies of standard networks. Fully-connected heads are
// omitted. Layer naming follows the usual convX_Y convention.
//
// resnet18-conv: the chain model has no side branches, so the 1x1 projection
// shortcuts of the downsampling blocks are dropped and those blocks carry no
// residual edge. The 3x3/2 stem max-pool is modelled as a 2x2/2 pool, which
// gives the same 56x56 output.

#include "blockconv/network.hpp"

namespace bconv {
namespace {

LayerDesc conv(std::string id, int in_ch, int out_ch, int k = 3, int stride = 1, int pad = 1,
               bool depthwise = false) {
    LayerDesc l;
    l.id = std::move(id);
    l.kind = LayerKind::conv;
    l.conv = {k, stride, Padding4::uniform(pad), in_ch, out_ch, depthwise, true};
    return l;
}

LayerDesc pool(std::string id, int k = 2, int s = 2) {
    LayerDesc l;
    l.id = std::move(id);
    l.kind = LayerKind::maxpool;
    l.pool = {k, s};
    return l;
}

LayerDesc add(std::string id, std::string source) {
    LayerDesc l;
    l.id = std::move(id);
    l.kind = LayerKind::eltwise_add;
    l.residual_source = std::move(source);
    return l;
}

NetworkDesc vgg16() {
    NetworkDesc net;
    net.name = "vgg16-conv";
    net.input_shape = {1, 3, 224, 224};
    net.activation_format = ScalarFormat::fixed(16, 8);
    net.weight_format = ScalarFormat::fixed(16, 14);
    const int stage_convs[5] = {2, 2, 3, 3, 3};
    const int stage_ch[5] = {64, 128, 256, 512, 512};
    int in_ch = 3;
    for (int s = 0; s < 5; ++s) {
        for (int j = 0; j < stage_convs[s]; ++j) {
            net.layers.push_back(conv("conv" + std::to_string(s + 1) + "_" + std::to_string(j + 1),
                                      in_ch, stage_ch[s]));
            in_ch = stage_ch[s];
        }
        net.layers.push_back(pool("pool" + std::to_string(s + 1)));
    }
    return net;
}

NetworkDesc vdsr() {
    NetworkDesc net;
    net.name = "vdsr";
    net.input_shape = {1, 1, 1080, 1920};
    net.activation_format = ScalarFormat::fixed(8, 4);
    net.weight_format = ScalarFormat::fixed(4, 3);
    net.layers.push_back(conv("conv1", 1, 64));
    for (int i = 2; i <= 19; ++i) net.layers.push_back(conv("conv" + std::to_string(i), 64, 64));
    net.layers.push_back(conv("conv20", 64, 1));
    net.layers.push_back(add("sum", net.input_id));
    return net;
}

NetworkDesc resnet18() {
    NetworkDesc net;
    net.name = "resnet18-conv";
    net.input_shape = {1, 3, 224, 224};
    net.layers.push_back(conv("conv1", 3, 64, 7, 2, 3));
    net.layers.push_back(pool("pool1"));
    std::string block_in = "pool1";
    int in_ch = 64;
    const int stage_ch[4] = {64, 128, 256, 512};
    for (int s = 0; s < 4; ++s) {
        const int out_ch = stage_ch[s];
        for (int b = 0; b < 2; ++b) {
            const std::string base = "conv" + std::to_string(s + 2) + "_" + std::to_string(b + 1);
            const bool down = (s > 0 && b == 0);
            net.layers.push_back(conv(base + "a", in_ch, out_ch, 3, down ? 2 : 1, 1));
            net.layers.push_back(conv(base + "b", out_ch, out_ch));
            if (down) {
                block_in = base + "b";
            } else {
                const std::string id = "add" + std::to_string(s + 2) + "_" + std::to_string(b + 1);
                net.layers.push_back(add(id, block_in));
                block_in = id;
            }
            in_ch = out_ch;
        }
    }
    return net;
}

NetworkDesc mobilenet_v1() {
    NetworkDesc net;
    net.name = "mobilenet-v1-conv";
    net.input_shape = {1, 3, 224, 224};
    net.layers.push_back(conv("conv1", 3, 32, 3, 2, 1));
    struct Sep { int in, out, stride; };
    const Sep seps[13] = {{32, 64, 1},    {64, 128, 2},   {128, 128, 1}, {128, 256, 2},
                          {256, 256, 1},  {256, 512, 2},  {512, 512, 1}, {512, 512, 1},
                          {512, 512, 1},  {512, 512, 1},  {512, 512, 1}, {512, 1024, 2},
                          {1024, 1024, 1}};
    for (int i = 0; i < 13; ++i) {
        const std::string base = "conv" + std::to_string(i + 2);
        net.layers.push_back(conv(base + "_dw", seps[i].in, seps[i].in, 3, seps[i].stride, 1, true));
        net.layers.push_back(conv(base + "_pw", seps[i].in, seps[i].out, 1, 1, 0));
    }
    return net;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"vgg16-conv", "vdsr", "resnet18-conv", "mobilenet-v1-conv"};
}

NetworkDesc preset(const std::string& name) {
    NetworkDesc net;
    if (name == "vgg16-conv")
        net = vgg16();
    else if (name == "vdsr")
        net = vdsr();
    else if (name == "resnet18-conv")
        net = resnet18();
    else if (name == "mobilenet-v1-conv")
        net = mobilenet_v1();
    else
        throw Error("unknown preset '" + name + "'");
    validate(net);
    return net;
}

} // namespace bconv
