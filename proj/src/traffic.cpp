// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "blockconv/sim.hpp"
#include "json.hpp"

using nlohmann::json;

namespace bconv {
namespace {

constexpr TrafficClass kAll[kTrafficClasses] = {
    TrafficClass::input_image,   TrafficClass::weights,         TrafficClass::intermediate_fmap,
    TrafficClass::output,        TrafficClass::halo_overhead,   TrafficClass::reread_overhead,
    TrafficClass::residual_overhead,
};

std::string csv_row(const std::string& scope, TrafficClass c, uint64_t r, uint64_t w) {
    char mb[64];
    std::snprintf(mb, sizeof mb, "%.6f", static_cast<double>(r + w) / kMbit);
    std::ostringstream os;
    os << scope << ',' << to_string(c) << ',' << r << ',' << w << ',' << (r + w) << ',' << mb << '\n';
    return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(line);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

uint64_t parse_u64(const std::string& s) {
    size_t used = 0;
    uint64_t v = 0;
    try {
        v = std::stoull(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size() || s.front() == '-') throw Error("invalid bit count '" + s + "'");
    return v;
}

} // namespace

const char* to_string(TrafficClass c) {
    switch (c) {
    case TrafficClass::input_image: return "input_image";
    case TrafficClass::weights: return "weights";
    case TrafficClass::intermediate_fmap: return "intermediate_fmap";
    case TrafficClass::output: return "output";
    case TrafficClass::halo_overhead: return "halo_overhead";
    case TrafficClass::reread_overhead: return "reread_overhead";
    case TrafficClass::residual_overhead: return "residual_overhead";
    }
    return "?";
}

TrafficClass traffic_class_from_string(const std::string& s) {
    for (auto c : kAll)
        if (s == to_string(c)) return c;
    throw Error("unknown traffic class '" + s + "'");
}

const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::load: return "load";
    case EventKind::compute: return "compute";
    case EventKind::store: return "store";
    case EventKind::buffer_swap: return "buffer_swap";
    }
    return "?";
}

LayerTraffic& TrafficReport::at(const std::string& layer) {
    for (auto& l : layers)
        if (l.layer == layer) return l;
    layers.push_back({layer, {}, {}});
    return layers.back();
}

uint64_t TrafficReport::read(TrafficClass c) const {
    uint64_t s = 0;
    for (const auto& l : layers) s += l.read[static_cast<size_t>(c)];
    return s;
}

uint64_t TrafficReport::write(TrafficClass c) const {
    uint64_t s = 0;
    for (const auto& l : layers) s += l.write[static_cast<size_t>(c)];
    return s;
}

uint64_t TrafficReport::fmap_bits() const {
    return total(TrafficClass::input_image) + total(TrafficClass::intermediate_fmap) +
           total(TrafficClass::output);
}

std::string traffic_to_csv(const TrafficReport& r) {
    std::string out = "scope,class,read_bits,write_bits,total_bits,total_mbits\n";
    if (r.layers.empty()) return out;
    for (auto c : kAll) out += csv_row("total", c, r.read(c), r.write(c));
    for (const auto& l : r.layers)
        for (auto c : kAll) {
            const auto i = static_cast<size_t>(c);
            out += csv_row("layer:" + l.layer, c, l.read[i], l.write[i]);
        }
    return out;
}

TrafficReport traffic_from_csv(const std::string& text) {
    TrafficReport r;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != "scope,class,read_bits,write_bits,total_bits,total_mbits")
        throw Error("traffic CSV: missing or unexpected header");
    TrafficReport totals;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split(line, ',');
        if (f.size() != 6) throw Error("traffic CSV: expected 6 fields in '" + line + "'");
        const auto c = static_cast<size_t>(traffic_class_from_string(f[1]));
        const uint64_t rd = parse_u64(f[2]), wr = parse_u64(f[3]);
        if (parse_u64(f[4]) != rd + wr) throw Error("traffic CSV: total_bits mismatch in '" + line + "'");
        if (f[0] == "total") {
            auto& t = totals.at("total");
            t.read[c] = rd;
            t.write[c] = wr;
        } else if (f[0].rfind("layer:", 0) == 0) {
            auto& l = r.at(f[0].substr(6));
            l.read[c] = rd;
            l.write[c] = wr;
        } else {
            throw Error("traffic CSV: unknown scope '" + f[0] + "'");
        }
    }
    if (!totals.layers.empty())
        for (auto c : kAll)
            if (totals.read(c) != r.read(c) || totals.write(c) != r.write(c))
                throw Error(std::string("traffic CSV: totals do not match layer rows for ") + to_string(c));
    return r;
}

std::string traffic_to_json(const TrafficReport& r, int indent) {
    json j;
    j["layers"] = json::array();
    for (const auto& l : r.layers) {
        json rd, wr;
        for (auto c : kAll) {
            rd[to_string(c)] = l.read[static_cast<size_t>(c)];
            wr[to_string(c)] = l.write[static_cast<size_t>(c)];
        }
        j["layers"].push_back({{"id", l.layer}, {"read", rd}, {"write", wr}});
    }
    json t;
    for (auto c : kAll) t[to_string(c)] = {{"read", r.read(c)}, {"write", r.write(c)}};
    j["totals"] = t;
    j["fmap_bits"] = r.fmap_bits();
    return j.dump(indent);
}

TrafficReport traffic_from_json(const std::string& text) {
    TrafficReport r;
    try {
        const json j = json::parse(text);
        for (const auto& l : j.at("layers")) {
            auto& e = r.at(l.at("id").get<std::string>());
            for (auto c : kAll) {
                e.read[static_cast<size_t>(c)] = l.at("read").value(to_string(c), uint64_t{0});
                e.write[static_cast<size_t>(c)] = l.at("write").value(to_string(c), uint64_t{0});
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("traffic JSON error: ") + e.what());
    }
    return r;
}

std::string PhaseTrace::to_jsonl() const {
    std::string out;
    for (size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        json j{{"step", i},
               {"event", to_string(e.kind)},
               {"tensor", e.tensor},
               {"layer", e.layer},
               {"block", e.block},
               {"rect", {e.rect.y, e.rect.x, e.rect.h, e.rect.w}},
               {"channels", e.channels},
               {"bits", e.bits},
               {"buffer", e.buffer},
               {"source", e.source}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

BaselineTiling parse_baseline_tiling(const std::string& s) {
    std::vector<int> v;
    for (const auto& f : split(s, 'x')) {
        size_t used = 0;
        int x = 0;
        try {
            x = std::stoi(f, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != f.size() || x <= 0) throw Error("invalid tiling '" + s + "'");
        v.push_back(x);
    }
    if (v.size() == 2) return {v[0], v[1], 64, 64};
    if (v.size() == 4) return {v[0], v[1], v[2], v[3]};
    throw Error("tiling must be TRxTC or TRxTCxTMxTN, got '" + s + "'");
}

EquivalenceResult verify_equivalence(const Tensor4D& a, const Tensor4D& b) {
    if (!(a.dims() == b.dims()))
        throw Error("verify: shape mismatch " + a.dims().to_string() + " vs " + b.dims().to_string());
    if (!(a.format() == b.format()))
        throw Error("verify: format mismatch " + a.format().to_string() + " vs " + b.format().to_string());
    EquivalenceResult r;
    const size_t n = a.size();
    for (size_t i = 0; i < n; ++i) {
        const bool same = a.is_fixed() ? a.fixed_data()[i] == b.fixed_data()[i]
                                       : std::memcmp(&a.real_data()[i], &b.real_data()[i], sizeof(double)) == 0;
        if (same) continue;
        r.equal = false;
        r.first_mismatch = i;
        const Dims& d = a.dims();
        size_t rem = i;
        r.position.w = static_cast<int>(rem % d.w);
        rem /= d.w;
        r.position.h = static_cast<int>(rem % d.h);
        rem /= d.h;
        r.position.c = static_cast<int>(rem % d.c);
        r.position.n = static_cast<int>(rem / d.c);
        r.a = a.value(i);
        r.b = b.value(i);
        break;
    }
    return r;
}

} // namespace bconv
