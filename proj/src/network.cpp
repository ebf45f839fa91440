// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/network.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "blockconv/ops.hpp"
#include "json.hpp"

using nlohmann::json;

namespace bconv {

const char* to_string(LayerKind kind) {
    switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::eltwise_add: return "eltwise_add";
    case LayerKind::input: return "input";
    case LayerKind::output: return "output";
    }
    return "conv";
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "maxpool") return LayerKind::maxpool;
    if (s == "eltwise_add") return LayerKind::eltwise_add;
    if (s == "input") return LayerKind::input;
    if (s == "output") return LayerKind::output;
    throw Error("unknown layer kind '" + s + "'");
}

int NetworkDesc::index_of(const std::string& id) const {
    if (id == input_id) return -1;
    for (size_t i = 0; i < layers.size(); ++i)
        if (layers[i].id == id) return static_cast<int>(i);
    throw Error("unknown layer id '" + id + "'");
}

size_t NetworkDesc::conv_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.is_conv();
    return n;
}

std::vector<LayerShape> infer_shapes(const NetworkDesc& net) {
    std::vector<LayerShape> shapes;
    shapes.reserve(net.layers.size());
    Dims cur = net.input_shape;
    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerDesc& l = net.layers[i];
        LayerShape s{cur, cur};
        const std::string where = "layer '" + l.id + "': ";
        switch (l.kind) {
        case LayerKind::conv: {
            const ConvDesc& c = l.conv;
            if (c.in_ch != cur.c)
                throw Error(where + "in_ch " + std::to_string(c.in_ch) + " != incoming channels " +
                            std::to_string(cur.c));
            if (c.depthwise && c.out_ch != c.in_ch)
                throw Error(where + "depthwise conv needs out_ch == in_ch");
            if (c.k <= 0 || c.stride <= 0) throw Error(where + "kernel and stride must be positive");
            s.out.c = c.out_ch;
            s.out.h = conv_out_extent(cur.h, c.pad.top, c.pad.bottom, c.k, c.stride);
            s.out.w = conv_out_extent(cur.w, c.pad.left, c.pad.right, c.k, c.stride);
            break;
        }
        case LayerKind::maxpool:
            if (l.pool.k <= 0 || l.pool.stride <= 0)
                throw Error(where + "pool window and stride must be positive");
            s.out.h = conv_out_extent(cur.h, 0, 0, l.pool.k, l.pool.stride);
            s.out.w = conv_out_extent(cur.w, 0, 0, l.pool.k, l.pool.stride);
            break;
        case LayerKind::eltwise_add: {
            const int src = net.index_of(l.residual_source);
            if (src >= static_cast<int>(i))
                throw Error(where + "residual_source must precede the consumer");
            const Dims other = src < 0 ? net.input_shape : shapes[src].out;
            if (!(other == cur))
                throw Error(where + "residual operand " + other.to_string() + " != " +
                            cur.to_string());
            break;
        }
        default: throw Error(where + "input/output markers are not chain layers");
        }
        if (s.out.h <= 0 || s.out.w <= 0) throw Error(where + "non-positive output extent");
        shapes.push_back(s);
        cur = s.out;
    }
    return shapes;
}

void validate(const NetworkDesc& net) {
    if (net.input_shape.c <= 0 || net.input_shape.h <= 0 || net.input_shape.w <= 0)
        throw Error("network input shape must be positive");
    if (net.input_shape.n != 1) throw Error("batch must be 1");
    std::set<std::string> seen{net.input_id};
    for (const auto& l : net.layers) {
        if (l.id.empty()) throw Error("layer with empty id");
        if (!seen.insert(l.id).second) throw Error("duplicate layer id '" + l.id + "'");
        if (l.kind == LayerKind::eltwise_add && !seen.count(l.residual_source))
            throw Error("layer '" + l.id + "': residual_source '" + l.residual_source +
                        "' does not precede it");
    }
    infer_shapes(net);
}

std::vector<LayerVolume> feature_map_volumes(const NetworkDesc& net) {
    const auto shapes = infer_shapes(net);
    std::vector<LayerVolume> out;
    const uint64_t bits = static_cast<uint64_t>(net.activation_format.storage_bits());
    for (size_t i = 0; i < net.layers.size(); ++i) {
        LayerVolume v{net.layers[i].id, net.layers[i].kind, shapes[i].out, 0};
        v.bits = static_cast<uint64_t>(shapes[i].out.c) * shapes[i].out.h * shapes[i].out.w * bits;
        out.push_back(v);
    }
    return out;
}

namespace {

json format_to_json(const ScalarFormat& f) {
    if (!f.is_fixed()) return {{"kind", "real64"}};
    return {{"kind", "fixed"}, {"bitwidth", f.bitwidth}, {"fraction_bits", f.fraction_bits}};
}

ScalarFormat format_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "real64") return ScalarFormat::real64();
    if (kind != "fixed") throw Error("unknown format kind '" + kind + "'");
    return ScalarFormat::fixed(j.at("bitwidth").get<int>(), j.at("fraction_bits").get<int>());
}

Padding4 padding_from_json(const json& j) {
    if (j.is_number_integer()) return Padding4::uniform(j.get<int>());
    if (j.is_array() && j.size() == 4)
        return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
    throw Error("padding must be an integer or [top,bottom,left,right]");
}

json padding_to_json(const Padding4& p) {
    if (p.top == p.bottom && p.top == p.left && p.top == p.right) return p.top;
    return json::array({p.top, p.bottom, p.left, p.right});
}

LayerDesc layer_from_json(const json& j) {
    LayerDesc l;
    l.id = j.at("id").get<std::string>();
    try {
        l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
        switch (l.kind) {
        case LayerKind::conv:
            l.conv.k = j.at("k").get<int>();
            l.conv.stride = j.value("s", 1);
            l.conv.pad = padding_from_json(j.value("p", json(0)));
            l.conv.in_ch = j.at("in_ch").get<int>();
            l.conv.out_ch = j.at("out_ch").get<int>();
            l.conv.depthwise = j.value("depthwise", false);
            l.conv.bias = j.value("bias", true);
            break;
        case LayerKind::maxpool:
            l.pool.k = j.at("k").get<int>();
            l.pool.stride = j.value("s", l.pool.k);
            break;
        case LayerKind::eltwise_add:
            l.residual_source = j.at("residual_source").get<std::string>();
            break;
        default: break;
        }
    } catch (const json::exception& e) {
        throw Error("layer '" + l.id + "': " + e.what());
    }
    return l;
}

json layer_to_json(const LayerDesc& l) {
    json j{{"id", l.id}, {"kind", to_string(l.kind)}};
    switch (l.kind) {
    case LayerKind::conv:
        j["k"] = l.conv.k;
        j["s"] = l.conv.stride;
        j["p"] = padding_to_json(l.conv.pad);
        j["in_ch"] = l.conv.in_ch;
        j["out_ch"] = l.conv.out_ch;
        j["depthwise"] = l.conv.depthwise;
        j["bias"] = l.conv.bias;
        break;
    case LayerKind::maxpool:
        j["k"] = l.pool.k;
        j["s"] = l.pool.stride;
        break;
    case LayerKind::eltwise_add: j["residual_source"] = l.residual_source; break;
    default: break;
    }
    return j;
}

} // namespace

NetworkDesc load_network_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("network JSON parse error: ") + e.what());
    }
    NetworkDesc net;
    try {
        net.name = j.value("name", "");
        if (j.contains("input")) {
            const json& in = j["input"];
            net.input_id = in.value("id", "input");
            net.input_shape = {1, in.at("c").get<int>(), in.at("h").get<int>(), in.at("w").get<int>()};
        }
        if (j.contains("activation_format"))
            net.activation_format = format_from_json(j["activation_format"]);
        if (j.contains("weight_format")) net.weight_format = format_from_json(j["weight_format"]);
        const json& layers = j.at("layers");
        for (size_t i = 0; i < layers.size(); ++i) {
            LayerDesc l = layer_from_json(layers[i]);
            if (l.kind == LayerKind::input) {
                if (i != 0) throw Error("layer '" + l.id + "': input marker must come first");
                net.input_id = l.id;
                if (layers[i].contains("c"))
                    net.input_shape = {1, layers[i]["c"].get<int>(), layers[i].at("h").get<int>(),
                                       layers[i].at("w").get<int>()};
                continue;
            }
            if (l.kind == LayerKind::output) {
                if (i + 1 != layers.size())
                    throw Error("layer '" + l.id + "': output marker must come last");
                continue;
            }
            net.layers.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw Error(std::string("network JSON schema error: ") + e.what());
    }
    validate(net);
    return net;
}

NetworkDesc load_network_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open network file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return load_network_json(ss.str());
}

std::string network_to_json(const NetworkDesc& net, int indent) {
    json j;
    j["name"] = net.name;
    j["input"] = {{"id", net.input_id},
                  {"c", net.input_shape.c},
                  {"h", net.input_shape.h},
                  {"w", net.input_shape.w}};
    j["activation_format"] = format_to_json(net.activation_format);
    j["weight_format"] = format_to_json(net.weight_format);
    j["layers"] = json::array();
    for (const auto& l : net.layers) j["layers"].push_back(layer_to_json(l));
    return j.dump(indent);
}

NetworkDesc with_activation_bits(NetworkDesc net, int bits) {
    net.activation_format = ScalarFormat::fixed(bits, bits / 2);
    return net;
}

NetworkDesc resolve_network(const std::string& spec) {
    const std::string prefix = "preset:";
    if (spec.rfind(prefix, 0) == 0) return preset(spec.substr(prefix.size()));
    return load_network_file(spec);
}

} // namespace bconv
