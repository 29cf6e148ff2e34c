#pragma once

#include <cmath>
#include <vector>

#include "wavebeat/signal.hpp"

// Test-side transient locator: a rise well above the trailing 200 ms RMS,
// with a refractory window so one click registers once. Used to check that
// annotations stay aligned with the audio through augmentation.

namespace transients {

inline std::vector<double> detect(const wavebeat::Waveform& w, double refractory_s = 0.1) {
    float peak = 0;
    for (float s : w.samples) peak = std::max(peak, std::abs(s));
    const auto refractory = static_cast<std::size_t>(refractory_s * w.sample_rate);
    const auto window = static_cast<std::size_t>(0.2 * w.sample_rate);
    std::vector<double> out;
    std::size_t last = 0;
    bool armed = true;
    double trailing_sq = 0.0;
    std::size_t trailing_n = 0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        if (!armed && i - last >= refractory) armed = true;
        const double floor_rms = trailing_n ? std::sqrt(trailing_sq / trailing_n) : 0.0;
        const double threshold = 4.0 * floor_rms + 0.02 * peak;
        if (armed && std::abs(w.samples[i]) > threshold) {
            out.push_back(static_cast<double>(i) / w.sample_rate);
            last = i;
            armed = false;
        }
        trailing_sq += static_cast<double>(w.samples[i]) * w.samples[i];
        ++trailing_n;
        if (trailing_n > window) {
            const double old = w.samples[i - window];
            trailing_sq -= old * old;
            --trailing_n;
        }
    }
    return out;
}

inline double nearest_distance(const std::vector<double>& haystack, double needle) {
    double best = 1e9;
    for (double h : haystack) best = std::min(best, std::abs(h - needle));
    return best;
}

} // namespace transients
