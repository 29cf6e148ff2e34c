#pragma once

#include <cstddef>

#include "wavebeat/tensor.hpp"

namespace wavebeat {

// Frame-rate beat/downbeat likelihoods, row 0 = beat, row 1 = downbeat,
// entries in (0, 1).
struct ActivationMatrix {
    Tensor values; // [2, N]
    double frame_rate{0.0};

    ActivationMatrix() = default;
    ActivationMatrix(std::size_t n_frames, double rate)
        : values({2, n_frames}), frame_rate(rate) {}

    std::size_t n_frames() const { return values.numel() ? values.dim(1) : 0; }
    float beat(std::size_t i) const { return values[i]; }
    float downbeat(std::size_t i) const { return values[n_frames() + i]; }
    float& beat(std::size_t i) { return values[i]; }
    float& downbeat(std::size_t i) { return values[n_frames() + i]; }
};

// Binary supervision aligned with the activation frames. A downbeat frame is
// always also a beat frame.
struct TargetMatrix {
    Tensor values; // [2, N], entries in {0, 1}
    double frame_rate{0.0};

    TargetMatrix() = default;
    TargetMatrix(std::size_t n_frames, double rate) : values({2, n_frames}), frame_rate(rate) {}

    std::size_t n_frames() const { return values.numel() ? values.dim(1) : 0; }
    float beat(std::size_t i) const { return values[i]; }
    float downbeat(std::size_t i) const { return values[n_frames() + i]; }
    float& beat(std::size_t i) { return values[i]; }
    float& downbeat(std::size_t i) { return values[n_frames() + i]; }
};

} // namespace wavebeat
