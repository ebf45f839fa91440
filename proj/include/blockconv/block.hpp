// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "blockconv/ops.hpp"
#include "blockconv/tensor.hpp"

namespace bconv {

struct BlockRect {
    int y = 0;
    int x = 0;
    int h = 0;
    int w = 0;
    friend bool operator==(const BlockRect&, const BlockRect&) = default;
};

/// Partition of an H x W plane by ascending interior cut positions. Blocks are
/// enumerated row-major.
struct BlockGrid {
    int height = 0;
    int width = 0;
    std::vector<int> row_cuts;
    std::vector<int> col_cuts;

    static BlockGrid whole(int h, int w) { return {h, w, {}, {}}; }
    /// Cuts at multiples of the block size; the last block takes the remainder.
    static BlockGrid fixed(int h, int w, int block_h, int block_w);
    /// rows x cols blocks of near-equal size; leading blocks take the extra pixels.
    static BlockGrid uniform(int h, int w, int rows, int cols);

    int block_rows() const { return static_cast<int>(row_cuts.size()) + 1; }
    int block_cols() const { return static_cast<int>(col_cuts.size()) + 1; }
    int count() const { return block_rows() * block_cols(); }
    bool is_trivial() const { return row_cuts.empty() && col_cuts.empty(); }

    std::vector<int> row_extents() const;
    std::vector<int> col_extents() const;
    BlockRect block(int index) const;
    BlockRect block(int row, int col) const;

    /// Throws unless cuts are strictly ascending inside (0, extent).
    void validate() const;
    /// True when this grid's cuts are a subset of `finer`'s (same plane), so
    /// each of its blocks is a union of `finer` blocks.
    bool coarsens(const BlockGrid& finer) const;

    friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

/// Leading/trailing pad pair along one axis.
using AxisPad = std::pair<int, int>;

/// Per-block padding: one (top, bottom) pair per block row and one
/// (left, right) pair per block column, plus the fill mode.
struct BlockPadding {
    std::vector<AxisPad> rows;
    std::vector<AxisPad> cols;
    PadMode mode = PadMode::zero;

    Padding4 for_block(int row, int col) const {
        return {rows[row].first, rows[row].second, cols[col].first, cols[col].second};
    }
    friend bool operator==(const BlockPadding&, const BlockPadding&) = default;
};

struct BlockPadSolution {
    bool feasible = false;
    int lead = 0;
    int trail = 0;
    /// Unblocked output extent minus the closest blocked total when infeasible.
    int residual = 0;
};

/// Finds block padding so that N blocks of extent I/N, each padded by
/// (lead, trail) and convolved independently, concatenate to the unblocked
/// output extent. Picks the smallest lead + trail (each <= k - 1), preferring
/// symmetric splits and then the larger half on the trailing side. N = 1
/// returns the original padding.
BlockPadSolution solve_block_padding(int extent, int k, int stride, int pad_lead, int pad_trail,
                                     int blocks);
inline BlockPadSolution solve_block_padding(int extent, int k, int stride, int pad, int blocks) {
    return solve_block_padding(extent, k, stride, pad, pad, blocks);
}

/// Padding for every block along one axis. Equal extents use the N-block
/// solution; uneven partitions pad each block as a standalone map and require
/// the summed outputs to match. Throws when infeasible.
std::vector<AxisPad> solve_axis_padding(std::span<const int> extents, int k, int stride,
                                        int pad_lead, int pad_trail);

BlockPadding make_block_padding(const BlockGrid& grid, int k, int stride, const Padding4& pad,
                                PadMode mode);

/// Grid of the convolution output implied by per-block padding.
BlockGrid conv_output_grid(const BlockGrid& grid, const BlockPadding& bpad, int k, int stride);

std::vector<Tensor4D> split_blocks(const Tensor4D& t, const BlockGrid& grid);
Tensor4D concat_blocks(const std::vector<Tensor4D>& blocks, const BlockGrid& grid);

/// Copies the spatial window `r` out of `t` (all batches and channels).
Tensor4D slice_spatial(const Tensor4D& t, const BlockRect& r);
/// Writes `src` into `dst` at spatial offset (r.y, r.x).
void paste_spatial(Tensor4D& dst, const Tensor4D& src, const BlockRect& r);

struct BlockConvParams {
    int stride = 1;
    bool depthwise = false;
    std::optional<ScalarFormat> out_format;
};

/// Block convolution: each block is padded with its own padding, convolved
/// with no access to neighbouring blocks, and the results are concatenated.
Tensor4D block_conv2d(const Tensor4D& input, const Tensor4D& weights, std::span<const double> bias,
                      const BlockGrid& grid, const BlockPadding& bpad,
                      const BlockConvParams& params);

/// Kernel applications summed over blocks.
MacCount block_mac_count(const Dims& input, int out_channels, int k, bool depthwise,
                         const BlockGrid& grid, const BlockPadding& bpad, int stride);

} // namespace bconv
