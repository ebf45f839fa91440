// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

// Internal: buffer occupancy tracking and trace recording shared by the
// simulators.

#pragma once

#include <map>
#include <string>

#include "blockconv/sim.hpp"

namespace bconv::detail {

class SimState {
public:
    explicit SimState(bool record) : record_(record) {}

    void add_buffer(BufferRole role, const std::string& name, uint64_t capacity) {
        order_.push_back(name);
        buffers_[name] = {role, name, capacity, 0, 0, {}};
    }
    bool has_buffer(const std::string& name) const { return buffers_.count(name) != 0; }
    uint64_t capacity(const std::string& name) const { return get(name).capacity_bits; }

    void emit(TraceEvent e) {
        ++steps_;
        if (record_) trace_.events.push_back(std::move(e));
    }

    /// Sets occupancy; overflow is attributed to the most recent event.
    void occupy(const std::string& name, uint64_t bits, std::string resident) {
        BufferState& b = get(name);
        if (bits > b.capacity_bits)
            throw SimError("buffer '" + name + "' overflow at step " + std::to_string(last_step()) + ": " +
                               std::to_string(bits) + " bits > capacity " + std::to_string(b.capacity_bits) +
                               " (" + resident + ")",
                           last_step());
        b.occupied_bits = bits;
        b.peak_bits = std::max(b.peak_bits, bits);
        b.resident = std::move(resident);
    }
    void release(const std::string& name) {
        BufferState& b = get(name);
        b.occupied_bits = 0;
        b.resident.clear();
    }

    uint64_t last_step() const { return steps_ == 0 ? 0 : steps_ - 1; }
    uint64_t steps() const { return steps_; }

    void finish(SimResult& r) {
        r.steps = steps_;
        r.trace = std::move(trace_);
        for (const auto& n : order_) r.buffers.push_back(buffers_.at(n));
    }

private:
    BufferState& get(const std::string& name) {
        auto it = buffers_.find(name);
        if (it == buffers_.end()) throw SimError("unknown buffer '" + name + "'", last_step());
        return it->second;
    }
    const BufferState& get(const std::string& name) const { return const_cast<SimState*>(this)->get(name); }

    bool record_;
    uint64_t steps_ = 0;
    PhaseTrace trace_;
    std::vector<std::string> order_;
    std::map<std::string, BufferState> buffers_;
};

inline std::string rect_string(const std::string& tensor, const BlockRect& r, int c) {
    return tensor + "[" + std::to_string(c) + "x" + std::to_string(r.h) + "x" + std::to_string(r.w) + "@" +
           std::to_string(r.y) + "," + std::to_string(r.x) + "]";
}

} // namespace bconv::detail
