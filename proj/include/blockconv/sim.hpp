// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "blockconv/blocking_plan.hpp"
#include "blockconv/network.hpp"
#include "blockconv/planner.hpp"
#include "blockconv/tensor.hpp"
#include "blockconv/weights.hpp"

namespace bconv {

// ---------------------------------------------------------------------------
// Traffic

/// The first four classes make up feature-map traffic. The overhead classes
/// are reported separately: halo re-reads of neighbouring tiles, repeated
/// input-tile reads across output-channel tiles, and residual operand reads.
enum class TrafficClass {
    input_image,
    weights,
    intermediate_fmap,
    output,
    halo_overhead,
    reread_overhead,
    residual_overhead,
};
inline constexpr size_t kTrafficClasses = 7;
const char* to_string(TrafficClass c);
TrafficClass traffic_class_from_string(const std::string& s);

struct LayerTraffic {
    std::string layer;
    std::array<uint64_t, kTrafficClasses> read{};
    std::array<uint64_t, kTrafficClasses> write{};
    friend bool operator==(const LayerTraffic&, const LayerTraffic&) = default;
};

struct TrafficReport {
    std::vector<LayerTraffic> layers;

    /// Entry for a layer id, appended on first use.
    LayerTraffic& at(const std::string& layer);
    uint64_t read(TrafficClass c) const;
    uint64_t write(TrafficClass c) const;
    uint64_t total(TrafficClass c) const { return read(c) + write(c); }
    /// input_image + intermediate_fmap + output, both directions.
    uint64_t fmap_bits() const;
    double fmap_mbits() const { return static_cast<double>(fmap_bits()) / kMbit; }

    friend bool operator==(const TrafficReport&, const TrafficReport&) = default;
};

/// Columns: scope,class,read_bits,write_bits,total_bits,total_mbits. One row
/// per class for scope "total", then one row per (layer, class) with scope
/// "layer:<id>". An empty report renders as the header only.
std::string traffic_to_csv(const TrafficReport& r);
TrafficReport traffic_from_csv(const std::string& text);
std::string traffic_to_json(const TrafficReport& r, int indent = 2);
TrafficReport traffic_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// Buffers and trace

struct BufferState {
    BufferRole role = BufferRole::extra;
    std::string name;
    uint64_t capacity_bits = 0;
    uint64_t occupied_bits = 0;
    uint64_t peak_bits = 0;
    /// Short description of the resident tensor slice.
    std::string resident;
};

enum class EventKind { load, compute, store, buffer_swap };
const char* to_string(EventKind k);

struct TraceEvent {
    EventKind kind = EventKind::load;
    /// Tensor name: "input", a layer id, or "weights:<id>".
    std::string tensor;
    std::string layer;
    int block = -1;
    BlockRect rect;
    int channels = 0;
    uint64_t bits = 0;
    /// Destination buffer for load/store/compute; "dram" for off-chip stores.
    std::string buffer;
    /// Buffer the data is read from ("dram" for off-chip loads).
    std::string source;
    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct PhaseTrace {
    std::vector<TraceEvent> events;
    std::string to_jsonl() const;
    friend bool operator==(const PhaseTrace&, const PhaseTrace&) = default;
};

/// Buffer overflow or plan inconsistency found while simulating; `step` is
/// the PhaseTrace index of the offending event.
class SimError : public Error {
public:
    SimError(const std::string& what, uint64_t step) : Error(what), step_(step) {}
    uint64_t step() const { return step_; }

private:
    uint64_t step_;
};

struct SimOptions {
    /// false: shapes-only run (traffic, trace and buffer checks, no arithmetic).
    bool functional = true;
    bool record_trace = true;
};

struct SimResult {
    std::optional<Tensor4D> output;
    TrafficReport traffic;
    PhaseTrace trace;
    std::vector<BufferState> buffers;
    uint64_t steps = 0;
};

// ---------------------------------------------------------------------------
// Baseline

struct BaselineTiling {
    int tr = 0;
    int tc = 0;
    int tm = 0;
    int tn = 0;
};
/// "TRxTCxTMxTN" or "TRxTC" (channel tiles default to 64).
BaselineTiling parse_baseline_tiling(const std::string& s);

struct BaselineOptions {
    /// Report halo re-reads; off gives the owned-region pattern only.
    bool halo = true;
    /// The first conv is recomputed from the input image inside the second
    /// conv's tiles, so its output map never goes to DRAM.
    bool fuse_head_pair = false;
    /// A final element-wise add is applied while the preceding conv writes its
    /// tiles, so that conv's output map never goes to DRAM.
    bool fold_residual_into_tail = false;
    bool double_buffer = true;
    /// Sum of the baseline buffers must fit, when set.
    std::optional<uint64_t> onchip_limit_bits;
};

/// Tiled layer-by-layer execution: every layer reads its input tiles and
/// weights per phase and writes its output map back to DRAM.
/// `weights`/`input` may be null in shapes-only runs.
SimResult simulate_baseline(const NetworkDesc& net, const NetworkWeights* weights, const Tensor4D* input,
                            const BaselineTiling& tiling, const BaselineOptions& bopt = {},
                            const SimOptions& opt = {});

// ---------------------------------------------------------------------------
// Fused

/// Group-by-group, block-by-block execution with ping-pong intermediate
/// buffers; the plan's buffer_alloc gives the capacities. Weights are loaded
/// once when the whole network fits the weight buffer, else streamed per
/// block in channel tiles.
SimResult simulate_fused(const NetworkDesc& net, const NetworkWeights* weights, const Tensor4D* input,
                         const FusionPlan& plan, const BlockingPlan& blocking, const SimOptions& opt = {});

// ---------------------------------------------------------------------------

struct EquivalenceResult {
    bool equal = true;
    size_t first_mismatch = 0;
    Dims position{};  // n, c, h = y, w = x of the first mismatch
    double a = 0;
    double b = 0;
};

/// Bit-exact comparison. Throws on dims or format mismatch.
EquivalenceResult verify_equivalence(const Tensor4D& sim_out, const Tensor4D& reference_out);

} // namespace bconv
