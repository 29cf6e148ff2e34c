#pragma once

#include <vector>

#include "wavebeat/activation.hpp"
#include "wavebeat/annotation.hpp"

namespace wavebeat {

// Decoded event lists in seconds; downbeats are a subset of beats.
struct BeatSequence {
    std::vector<double> beats;
    std::vector<double> downbeats;
};

struct PeakPickConfig {
    double threshold{0.5};
    double min_separation_s{60.0 / 300.0}; // 300 BPM ceiling
};

// Strict local maxima above threshold, accepted greedily left to right;
// within min_separation the higher peak wins. Downbeat peaks snap to the
// nearest beat peak within +/-2 frames, otherwise they are promoted to beats.
BeatSequence peak_pick(const ActivationMatrix& act, const PeakPickConfig& cfg = {});

struct DbnConfig {
    double min_bpm{55.0};
    double max_bpm{215.0};
    int tempo_states{60}; // log-spaced
    std::vector<int> meters{3, 4};
    double transition_lambda{100.0};
    double observation_floor{1e-6};
};

// Viterbi decoding over a bar-pointer state space (bar phase x tempo x meter).
// Phase advances one cell per frame; tempo may step to an adjacent state at
// cost exp(-lambda * |log(tau'/tau)|); the meter with the best terminal path
// wins. Beats are emitted at integer beat-phase crossings, downbeats at bar
// starts.
BeatSequence dbn_decode(const ActivationMatrix& act, const DbnConfig& cfg = {});

// Decoded events as a writable annotation: downbeats get position 1; other
// beats count upward through the bar (2 before the first downbeat is seen).
BeatAnnotation to_annotation(const BeatSequence& seq);

} // namespace wavebeat
