// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bconv {

/// Raised for malformed inputs: shape mismatches, bad parameters, schema errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ScalarKind { real64, fixed };

/// Numeric format of a tensor. Fixed values are signed integers with
/// `fraction_bits` bits after the binary point.
struct ScalarFormat {
    ScalarKind kind = ScalarKind::real64;
    int bitwidth = 64;
    int fraction_bits = 0;

    static ScalarFormat real64() { return {}; }
    static ScalarFormat fixed(int bitwidth, int fraction_bits);

    bool is_fixed() const { return kind == ScalarKind::fixed; }
    int64_t min_value() const;
    int64_t max_value() const;
    /// Bits per stored element: bitwidth for fixed, 64 for real64.
    int storage_bits() const { return is_fixed() ? bitwidth : 64; }

    std::string to_string() const;
    friend bool operator==(const ScalarFormat&, const ScalarFormat&) = default;
};

struct Dims {
    int n = 1;
    int c = 0;
    int h = 0;
    int w = 0;

    size_t count() const {
        return static_cast<size_t>(n) * static_cast<size_t>(c) * static_cast<size_t>(h) *
               static_cast<size_t>(w);
    }
    std::string to_string() const;
    friend bool operator==(const Dims&, const Dims&) = default;
};

enum class PadMode { zero, replicate, reflect };

const char* to_string(PadMode mode);
PadMode pad_mode_from_string(const std::string& s);

/// Per-side spatial padding. Every amount is non-negative.
struct Padding4 {
    int top = 0;
    int bottom = 0;
    int left = 0;
    int right = 0;

    static Padding4 uniform(int p) { return {p, p, p, p}; }
    bool is_zero() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
    friend bool operator==(const Padding4&, const Padding4&) = default;
};

/// Saturates `v` into the representable range of a fixed format.
int32_t saturate(int64_t v, const ScalarFormat& fmt);

/// Rounds x to the nearest integer, halves away from zero.
int64_t round_half_away(double x);

/// Divides an accumulator by 2^shift with round-half-away-from-zero (shift > 0),
/// or multiplies by 2^-shift (shift < 0), then saturates into `fmt`.
int32_t requantize(int64_t acc, int shift, const ScalarFormat& fmt);

/// Real value -> nearest fixed code in `fmt`, saturated.
int32_t quantize(double x, const ScalarFormat& fmt);

/// NCHW tensor holding either fixed-point codes or real64 values.
class Tensor4D {
public:
    Tensor4D() = default;
    Tensor4D(Dims dims, ScalarFormat fmt);

    const Dims& dims() const { return dims_; }
    const ScalarFormat& format() const { return fmt_; }
    bool is_fixed() const { return fmt_.is_fixed(); }
    size_t size() const { return dims_.count(); }
    bool empty() const { return size() == 0; }

    size_t index(int n, int c, int y, int x) const {
        return ((static_cast<size_t>(n) * dims_.c + c) * dims_.h + y) * dims_.w + x;
    }

    std::span<int32_t> fixed_data() { return fixed_; }
    std::span<const int32_t> fixed_data() const { return fixed_; }
    std::span<double> real_data() { return real_; }
    std::span<const double> real_data() const { return real_; }

    int32_t& q(int n, int c, int y, int x) { return fixed_[index(n, c, y, x)]; }
    int32_t q(int n, int c, int y, int x) const { return fixed_[index(n, c, y, x)]; }
    double& r(int n, int c, int y, int x) { return real_[index(n, c, y, x)]; }
    double r(int n, int c, int y, int x) const { return real_[index(n, c, y, x)]; }

    /// Element i as a real number (fixed codes are scaled by 2^-fraction_bits).
    double value(size_t i) const;
    /// Stores a raw element; fixed values are saturated into range.
    void set_raw(size_t i, double v);

    /// Real64 copy with fixed codes converted to their real values.
    Tensor4D to_real() const;
    /// Quantized copy of a real tensor.
    Tensor4D to_fixed(const ScalarFormat& fmt) const;

    /// True when every fixed code lies inside the format range.
    bool in_range() const;

    friend bool operator==(const Tensor4D& a, const Tensor4D& b);

private:
    Dims dims_{};
    ScalarFormat fmt_{};
    std::vector<int32_t> fixed_;
    std::vector<double> real_;
};

} // namespace bconv
