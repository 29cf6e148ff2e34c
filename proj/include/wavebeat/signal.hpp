#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wavebeat/annotation.hpp"

namespace wavebeat {

// Every pipeline stage works at this rate.
inline constexpr double kWorkingRate = 22050.0;

// Mono audio with its sample rate, amplitudes nominally in [-1, 1].
struct Waveform {
    std::vector<float> samples;
    double sample_rate{0.0};

    std::size_t size() const { return samples.size(); }
    double duration_seconds() const {
        return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
    }
};

// Reads a RIFF/WAVE PCM file (8/16/24/32-bit integer or 32-bit float, any
// channel count), averages channels to mono, and resamples to 22.05 kHz.
Waveform load_audio(const std::string& path);

// Band-limited polyphase resampling (windowed sinc, Kaiser beta = 8,
// 32 taps per phase). Output length = round(input length * target / source).
Waveform resample(const Waveform& w, double target_rate);

// 16-bit PCM mono writer.
void write_wav_16bit(const std::string& path, const Waveform& w);

// Synthetic metronome: a decaying band-passed noise burst at every beat, with
// downbeats 6 dB louder and an octave-and-a-half lower in center frequency.
// First beat at t = 0; beats at k * 60 / tempo for t < duration.
std::pair<Waveform, BeatAnnotation> synth_click_track(double tempo_bpm, int beats_per_bar,
                                                      double duration_s,
                                                      std::uint64_t timbre_seed);

} // namespace wavebeat
