// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace bconv {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'T', '1'};
constexpr size_t kHeaderSize = 28;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const std::vector<uint8_t>& in, size_t off) {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[off + i]) << (8 * i);
    return v;
}

size_t element_bytes(const ScalarFormat& fmt) {
    if (!fmt.is_fixed()) return 8;
    return fmt.bitwidth == 16 ? 2 : 1;
}

} // namespace

std::vector<uint8_t> encode_tensor(const Tensor4D& t) {
    const Dims& d = t.dims();
    const ScalarFormat& f = t.format();
    std::vector<uint8_t> out;
    out.reserve(kHeaderSize + t.size() * element_bytes(f));
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put_u32(out, 1);
    put_u32(out, static_cast<uint32_t>(d.n));
    put_u32(out, static_cast<uint32_t>(d.c));
    put_u32(out, static_cast<uint32_t>(d.h));
    put_u32(out, static_cast<uint32_t>(d.w));
    out.push_back(f.is_fixed() ? 1 : 0);
    out.push_back(static_cast<uint8_t>(f.storage_bits()));
    out.push_back(static_cast<uint8_t>(f.fraction_bits));
    out.push_back(0);
    if (f.is_fixed()) {
        for (int32_t v : t.fixed_data()) {
            const auto u = static_cast<uint16_t>(static_cast<int16_t>(v));
            out.push_back(static_cast<uint8_t>(u & 0xff));
            if (f.bitwidth == 16) out.push_back(static_cast<uint8_t>(u >> 8));
        }
    } else {
        for (double v : t.real_data()) {
            const auto u = std::bit_cast<uint64_t>(v);
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(u >> (8 * i)));
        }
    }
    return out;
}

Tensor4D decode_tensor(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error("not a tensor file (bad magic)");
    if (get_u32(bytes, 4) != 1) throw Error("unsupported tensor file version");
    Dims d{static_cast<int>(get_u32(bytes, 8)), static_cast<int>(get_u32(bytes, 12)),
           static_cast<int>(get_u32(bytes, 16)), static_cast<int>(get_u32(bytes, 20))};
    const uint8_t kind = bytes[24];
    ScalarFormat fmt;
    if (kind == 1)
        fmt = ScalarFormat::fixed(bytes[25], bytes[26]);
    else if (kind == 0)
        fmt = ScalarFormat::real64();
    else
        throw Error("unknown tensor kind byte");
    Tensor4D t(d, fmt);
    const size_t eb = element_bytes(fmt);
    if (bytes.size() != kHeaderSize + t.size() * eb)
        throw Error("tensor payload size mismatch for " + d.to_string());
    const uint8_t* p = bytes.data() + kHeaderSize;
    if (fmt.is_fixed()) {
        auto data = t.fixed_data();
        for (size_t i = 0; i < t.size(); ++i) {
            int32_t v;
            if (eb == 2)
                v = static_cast<int16_t>(static_cast<uint16_t>(p[2 * i] | (p[2 * i + 1] << 8)));
            else
                v = static_cast<int8_t>(p[i]);
            if (v < fmt.min_value() || v > fmt.max_value())
                throw Error("tensor value out of format range at index " + std::to_string(i));
            data[i] = v;
        }
    } else {
        auto data = t.real_data();
        for (size_t i = 0; i < t.size(); ++i) {
            uint64_t u = 0;
            for (int b = 0; b < 8; ++b) u |= static_cast<uint64_t>(p[8 * i + b]) << (8 * b);
            data[i] = std::bit_cast<double>(u);
        }
    }
    return t;
}

void save_tensor(const Tensor4D& t, const std::string& path) {
    const auto bytes = encode_tensor(t);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Tensor4D load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open tensor file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_tensor(bytes);
}

std::string tensor_to_json(const Tensor4D& t, int indent) {
    nlohmann::json j;
    const Dims& d = t.dims();
    j["dims"] = {d.n, d.c, d.h, d.w};
    j["format"] = {{"kind", t.is_fixed() ? "fixed" : "real64"},
                   {"bitwidth", t.format().storage_bits()},
                   {"fraction_bits", t.format().fraction_bits}};
    if (t.is_fixed())
        j["data"] = std::vector<int32_t>(t.fixed_data().begin(), t.fixed_data().end());
    else
        j["data"] = std::vector<double>(t.real_data().begin(), t.real_data().end());
    return j.dump(indent);
}

} // namespace bconv
