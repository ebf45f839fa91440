// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "blockconv/block.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>

namespace bconv {
namespace {

std::vector<int> extents_from_cuts(int total, const std::vector<int>& cuts) {
    std::vector<int> out;
    out.reserve(cuts.size() + 1);
    int prev = 0;
    for (int c : cuts) {
        out.push_back(c - prev);
        prev = c;
    }
    out.push_back(total - prev);
    return out;
}

std::vector<int> cuts_from_extents(const std::vector<int>& extents) {
    std::vector<int> cuts;
    int acc = 0;
    for (size_t i = 0; i + 1 < extents.size(); ++i) {
        acc += extents[i];
        cuts.push_back(acc);
    }
    return cuts;
}

std::vector<int> fixed_cuts(int total, int block) {
    std::vector<int> cuts;
    for (int c = block; c < total; c += block) cuts.push_back(c);
    return cuts;
}

std::vector<int> uniform_cuts(int total, int parts) {
    std::vector<int> cuts;
    for (int i = 1; i < parts; ++i) {
        const int c = static_cast<int>((static_cast<int64_t>(i) * total + parts - 1) / parts);
        if (c > 0 && c < total && (cuts.empty() || c > cuts.back())) cuts.push_back(c);
    }
    return cuts;
}

} // namespace

BlockGrid BlockGrid::fixed(int h, int w, int block_h, int block_w) {
    if (block_h <= 0 || block_w <= 0) throw Error("block size must be positive");
    return {h, w, fixed_cuts(h, block_h), fixed_cuts(w, block_w)};
}

BlockGrid BlockGrid::uniform(int h, int w, int rows, int cols) {
    if (rows <= 0 || cols <= 0) throw Error("block counts must be positive");
    if (rows > h || cols > w) throw Error("more blocks than pixels along an axis");
    return {h, w, uniform_cuts(h, rows), uniform_cuts(w, cols)};
}

std::vector<int> BlockGrid::row_extents() const { return extents_from_cuts(height, row_cuts); }
std::vector<int> BlockGrid::col_extents() const { return extents_from_cuts(width, col_cuts); }

BlockRect BlockGrid::block(int row, int col) const {
    const int y0 = row == 0 ? 0 : row_cuts[row - 1];
    const int y1 = row + 1 < block_rows() ? row_cuts[row] : height;
    const int x0 = col == 0 ? 0 : col_cuts[col - 1];
    const int x1 = col + 1 < block_cols() ? col_cuts[col] : width;
    return {y0, x0, y1 - y0, x1 - x0};
}

BlockRect BlockGrid::block(int index) const { return block(index / block_cols(), index % block_cols()); }

void BlockGrid::validate() const {
    if (height <= 0 || width <= 0) throw Error("grid plane must be non-empty");
    auto check = [](const std::vector<int>& cuts, int extent, const char* axis) {
        int prev = 0;
        for (int c : cuts) {
            if (c <= prev || c >= extent)
                throw Error(std::string("grid ") + axis + " cuts must ascend strictly inside (0, " +
                            std::to_string(extent) + ")");
            prev = c;
        }
    };
    check(row_cuts, height, "row");
    check(col_cuts, width, "col");
}

bool BlockGrid::coarsens(const BlockGrid& finer) const {
    if (height != finer.height || width != finer.width) return false;
    auto subset = [](const std::vector<int>& a, const std::vector<int>& b) {
        return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    return subset(row_cuts, finer.row_cuts) && subset(col_cuts, finer.col_cuts);
}

BlockPadSolution solve_block_padding(int extent, int k, int stride, int pad_lead, int pad_trail,
                                     int blocks) {
    if (k <= 0 || stride <= 0 || blocks <= 0 || extent <= 0)
        throw Error("solve_block_padding: non-positive argument");
    const int target = conv_out_extent(extent, pad_lead, pad_trail, k, stride);
    BlockPadSolution sol;
    if (blocks == 1) {
        sol.feasible = target > 0;
        sol.lead = pad_lead;
        sol.trail = pad_trail;
        return sol;
    }
    if (extent % blocks != 0) {
        sol.residual = target;
        return sol;
    }
    const int e = extent / blocks;
    int best_gap = std::numeric_limits<int>::max();
    for (int total = 0; total <= 2 * (k - 1); ++total) {
        // Candidates ordered by asymmetry; for odd totals the trailing side
        // takes the extra pixel first.
        for (int d = total % 2; d <= total; d += 2) {
            const int lead = (total - d) / 2;
            const int trail = total - lead;
            for (const auto& [l, t] : {std::pair{lead, trail}, std::pair{trail, lead}}) {
                if (l > k - 1 || t > k - 1) continue;
                const int got = blocks * conv_out_extent(e, l, t, k, stride);
                if (got == target) {
                    sol.feasible = true;
                    sol.lead = l;
                    sol.trail = t;
                    return sol;
                }
                if (std::abs(target - got) < std::abs(best_gap)) best_gap = target - got;
            }
        }
    }
    sol.residual = best_gap;
    return sol;
}

std::vector<AxisPad> solve_axis_padding(std::span<const int> extents, int k, int stride,
                                        int pad_lead, int pad_trail) {
    const int n = static_cast<int>(extents.size());
    int total = 0;
    for (int e : extents) total += e;
    const bool even = std::all_of(extents.begin(), extents.end(),
                                  [&](int e) { return e == extents.front(); });
    if (even) {
        const auto sol = solve_block_padding(total, k, stride, pad_lead, pad_trail, n);
        if (!sol.feasible)
            throw Error("no block padding for extent " + std::to_string(total) + " in " +
                        std::to_string(n) + " blocks (k=" + std::to_string(k) + ", s=" +
                        std::to_string(stride) + "), residual " + std::to_string(sol.residual));
        return std::vector<AxisPad>(n, {sol.lead, sol.trail});
    }
    const int target = conv_out_extent(total, pad_lead, pad_trail, k, stride);
    std::vector<AxisPad> out;
    int sum = 0;
    for (int e : extents) {
        const auto sol = solve_block_padding(e, k, stride, pad_lead, pad_trail, 1);
        if (!sol.feasible) throw Error("block of extent " + std::to_string(e) + " too small for kernel");
        sum += conv_out_extent(e, sol.lead, sol.trail, k, stride);
        out.emplace_back(sol.lead, sol.trail);
    }
    if (sum != target)
        throw Error("uneven blocks produce " + std::to_string(sum) + " outputs, expected " +
                    std::to_string(target) + ", residual " + std::to_string(target - sum));
    return out;
}

BlockPadding make_block_padding(const BlockGrid& grid, int k, int stride, const Padding4& pad,
                                PadMode mode) {
    grid.validate();
    const auto re = grid.row_extents();
    const auto ce = grid.col_extents();
    BlockPadding bp;
    bp.rows = solve_axis_padding(re, k, stride, pad.top, pad.bottom);
    bp.cols = solve_axis_padding(ce, k, stride, pad.left, pad.right);
    bp.mode = mode;
    if (mode == PadMode::reflect) {
        auto check = [](const std::vector<int>& ext, const std::vector<AxisPad>& p, const char* axis) {
            for (size_t i = 0; i < ext.size(); ++i)
                if (p[i].first >= ext[i] || p[i].second >= ext[i])
                    throw Error(std::string("reflect padding needs blocks wider than the pad; ") + axis + " block " +
                                std::to_string(i) + " has extent " + std::to_string(ext[i]));
        };
        check(re, bp.rows, "row");
        check(ce, bp.cols, "col");
    }
    return bp;
}

BlockGrid conv_output_grid(const BlockGrid& grid, const BlockPadding& bpad, int k, int stride) {
    const auto re = grid.row_extents();
    const auto ce = grid.col_extents();
    if (bpad.rows.size() != re.size() || bpad.cols.size() != ce.size())
        throw Error("block padding does not match grid");
    std::vector<int> ro, co;
    for (size_t i = 0; i < re.size(); ++i) {
        const int o = conv_out_extent(re[i], bpad.rows[i].first, bpad.rows[i].second, k, stride);
        if (o <= 0) throw Error("block row " + std::to_string(i) + " smaller than kernel");
        ro.push_back(o);
    }
    for (size_t i = 0; i < ce.size(); ++i) {
        const int o = conv_out_extent(ce[i], bpad.cols[i].first, bpad.cols[i].second, k, stride);
        if (o <= 0) throw Error("block col " + std::to_string(i) + " smaller than kernel");
        co.push_back(o);
    }
    BlockGrid out;
    out.height = 0;
    out.width = 0;
    for (int v : ro) out.height += v;
    for (int v : co) out.width += v;
    out.row_cuts = cuts_from_extents(ro);
    out.col_cuts = cuts_from_extents(co);
    return out;
}

Tensor4D slice_spatial(const Tensor4D& t, const BlockRect& r) {
    const Dims& d = t.dims();
    if (r.y < 0 || r.x < 0 || r.y + r.h > d.h || r.x + r.w > d.w)
        throw Error("slice outside tensor " + d.to_string());
    Tensor4D out({d.n, d.c, r.h, r.w}, t.format());
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < r.h; ++y) {
                const size_t s = t.index(n, c, r.y + y, r.x);
                const size_t o = out.index(n, c, y, 0);
                if (t.is_fixed())
                    std::copy_n(t.fixed_data().begin() + s, r.w, out.fixed_data().begin() + o);
                else
                    std::copy_n(t.real_data().begin() + s, r.w, out.real_data().begin() + o);
            }
    return out;
}

void paste_spatial(Tensor4D& dst, const Tensor4D& src, const BlockRect& r) {
    const Dims& d = dst.dims();
    const Dims& s = src.dims();
    if (s.n != d.n || s.c != d.c || s.h != r.h || s.w != r.w || r.y + r.h > d.h || r.x + r.w > d.w)
        throw Error("paste: block " + s.to_string() + " does not fit " + d.to_string());
    if (!(src.format() == dst.format())) throw Error("paste: format mismatch");
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c)
            for (int y = 0; y < r.h; ++y) {
                const size_t si = src.index(n, c, y, 0);
                const size_t di = dst.index(n, c, r.y + y, r.x);
                if (dst.is_fixed())
                    std::copy_n(src.fixed_data().begin() + si, r.w, dst.fixed_data().begin() + di);
                else
                    std::copy_n(src.real_data().begin() + si, r.w, dst.real_data().begin() + di);
            }
}

std::vector<Tensor4D> split_blocks(const Tensor4D& t, const BlockGrid& grid) {
    grid.validate();
    if (grid.height != t.dims().h || grid.width != t.dims().w)
        throw Error("grid plane " + std::to_string(grid.height) + "x" + std::to_string(grid.width) +
                    " does not match tensor " + t.dims().to_string());
    std::vector<Tensor4D> blocks;
    blocks.reserve(grid.count());
    for (int i = 0; i < grid.count(); ++i) blocks.push_back(slice_spatial(t, grid.block(i)));
    return blocks;
}

Tensor4D concat_blocks(const std::vector<Tensor4D>& blocks, const BlockGrid& grid) {
    grid.validate();
    if (blocks.size() != static_cast<size_t>(grid.count()))
        throw Error("expected " + std::to_string(grid.count()) + " blocks, got " +
                    std::to_string(blocks.size()));
    const Dims& d0 = blocks.front().dims();
    Tensor4D out({d0.n, d0.c, grid.height, grid.width}, blocks.front().format());
    for (int i = 0; i < grid.count(); ++i) {
        const BlockRect r = grid.block(i);
        const Dims& d = blocks[i].dims();
        if (d.h != r.h || d.w != r.w || d.c != d0.c || d.n != d0.n)
            throw Error("block " + std::to_string(i) + " has dims " + d.to_string() +
                        " inconsistent with grid");
        paste_spatial(out, blocks[i], r);
    }
    return out;
}

Tensor4D block_conv2d(const Tensor4D& input, const Tensor4D& weights, std::span<const double> bias,
                      const BlockGrid& grid, const BlockPadding& bpad,
                      const BlockConvParams& params) {
    const int k = weights.dims().h;
    const BlockGrid out_grid = conv_output_grid(grid, bpad, k, params.stride);
    const auto in_blocks = split_blocks(input, grid);
    std::vector<Tensor4D> out_blocks;
    out_blocks.reserve(in_blocks.size());
    for (int i = 0; i < grid.count(); ++i) {
        ConvParams cp;
        cp.stride = params.stride;
        cp.pad = bpad.for_block(i / grid.block_cols(), i % grid.block_cols());
        cp.pad_mode = bpad.mode;
        cp.depthwise = params.depthwise;
        cp.out_format = params.out_format;
        out_blocks.push_back(conv2d_ref(in_blocks[i], weights, bias, cp));
    }
    return concat_blocks(out_blocks, out_grid);
}

MacCount block_mac_count(const Dims& input, int out_channels, int k, bool depthwise,
                         const BlockGrid& grid, const BlockPadding& bpad, int stride) {
    MacCount total;
    for (int i = 0; i < grid.count(); ++i) {
        const BlockRect r = grid.block(i);
        ConvShape s{{input.n, input.c, r.h, r.w}, out_channels, k, stride,
                    bpad.for_block(i / grid.block_cols(), i % grid.block_cols()), depthwise};
        const MacCount m = mac_count(s);
        total.kernel_applications += m.kernel_applications;
        total.macs += m.macs;
    }
    return total;
}

} // namespace bconv
