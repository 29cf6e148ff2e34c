#pragma once

#include <vector>

namespace wavebeat {

// One beat event: time in seconds and 1-based position within the bar.
// Position 1 marks a downbeat; 0 means the position is unknown (beats-only
// annotation files).
struct BeatEvent {
    double time{0.0};
    int position{0};
};

struct BeatAnnotation {
    std::vector<BeatEvent> events;

    bool empty() const { return events.empty(); }

    // True when every event carries a metrical position.
    bool has_positions() const {
        if (events.empty()) return false;
        for (const auto& e : events)
            if (e.position < 1) return false;
        return true;
    }

    std::vector<double> beat_times() const {
        std::vector<double> out;
        out.reserve(events.size());
        for (const auto& e : events) out.push_back(e.time);
        return out;
    }

    std::vector<double> downbeat_times() const {
        std::vector<double> out;
        for (const auto& e : events)
            if (e.position == 1) out.push_back(e.time);
        return out;
    }
};

} // namespace wavebeat
