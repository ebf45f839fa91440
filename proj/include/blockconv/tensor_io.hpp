// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "blockconv/tensor.hpp"

// Binary tensor container (all integers little-endian):
//
//   offset  size  field
//   0       4     magic "BCT1"
//   4       4     u32 version (1)
//   8       16    u32 n, c, h, w
//   24      1     u8 kind (0 = real64, 1 = fixed)
//   25      1     u8 bitwidth (64 for real64)
//   26      1     u8 fraction_bits
//   27      1     u8 reserved (0)
//   28      ...   payload, NCHW order:
//                   fixed 4/8-bit -> int8 per element
//                   fixed 16-bit  -> int16 per element
//                   real64        -> IEEE-754 binary64 per element

namespace bconv {

std::vector<uint8_t> encode_tensor(const Tensor4D& t);
Tensor4D decode_tensor(const std::vector<uint8_t>& bytes);

void save_tensor(const Tensor4D& t, const std::string& path);
Tensor4D load_tensor(const std::string& path);

/// Human-readable dump: {"dims":[n,c,h,w],"format":{...},"data":[...]} with
/// raw fixed codes (or real values) in NCHW order.
std::string tensor_to_json(const Tensor4D& t, int indent = -1);

} // namespace bconv
