#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wavebeat/activation.hpp"
#include "wavebeat/annotation.hpp"
#include "wavebeat/rng.hpp"
#include "wavebeat/signal.hpp"

namespace wavebeat {

// Text annotation format: one event per line, "<time_seconds> [position]".
// The position column is optional; '#' lines and blank lines are skipped.
BeatAnnotation load_annotations(const std::string& path);
void save_annotations(const std::string& path, const BeatAnnotation& ann);

struct TargetStats {
    std::size_t dropped{0};  // events beyond the frame range
    std::size_t collided{0}; // events rounded onto an already-set frame
};

// Rasterizes events to frames: frame = round(time * frame_rate). Downbeat
// frames are set in both rows.
TargetMatrix make_targets(const BeatAnnotation& ann, std::size_t n_frames, double frame_rate,
                          TargetStats* stats = nullptr);

// Time-domain augmentation, applied before target construction, in this fixed
// order: filters, pitch shift, noise, tanh, beat shift, block dropout, phase
// inversion. Each transform fires independently with its probability.
struct AugmentationConfig {
    double p_filter{0.25};
    double p_pitch{0.5};
    double p_noise{0.05};
    double p_tanh{0.2};
    double p_shift{0.3};
    double p_dropout{0.05};
    double p_invert{0.5};

    static AugmentationConfig none() { return {0, 0, 0, 0, 0, 0, 0}; }
};

std::pair<Waveform, BeatAnnotation> augment(const Waveform& audio, const BeatAnnotation& ann,
                                            const AugmentationConfig& cfg, Rng& rng);

// Random excerpt with re-based annotation times; tracks shorter than `length`
// are zero-padded at the end.
struct Excerpt {
    Waveform audio;
    BeatAnnotation annotation;
    std::string source;
};

Excerpt sample_excerpt(const Waveform& audio, const BeatAnnotation& ann, std::size_t length,
                       Rng& rng, const std::string& source = {});

// Pads or trims the excerpt audio to exactly `length` samples, dropping
// events past the new end.
void fit_length(Waveform& audio, BeatAnnotation& ann, std::size_t length);

// Dataset manifest: lines "audio_path<TAB>annotation_path", optionally grouped
// under "[label]" section headers; ungrouped lines fall under "default".
// Relative paths resolve against the manifest's directory.
struct TrackRef {
    std::string audio_path;
    std::string annotation_path;
};

struct DatasetGroup {
    std::string label;
    std::vector<TrackRef> tracks;
};

std::vector<DatasetGroup> load_manifest(const std::string& path);

} // namespace wavebeat
