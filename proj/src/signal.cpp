#include "wavebeat/signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "wavebeat/biquad.hpp"
#include "wavebeat/errors.hpp"
#include "wavebeat/rng.hpp"

namespace wavebeat {

namespace {

// ---------------------------------------------------------------------------
// RIFF/WAVE reading

struct WavData {
    std::vector<std::vector<float>> channels;
    double sample_rate{0.0};
};

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

WavData read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open audio file: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw DataError("unsupported encoding (not a RIFF/WAVE file): " + path);

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    const unsigned char* data_ptr = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_len > bytes.size())
            throw DataError("unsupported encoding (truncated chunk): " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw DataError("unsupported encoding (bad fmt chunk): " + path);
            format = read_u16(bytes.data() + body);
            channels = read_u16(bytes.data() + body + 2);
            rate = read_u32(bytes.data() + body + 4);
            bits = read_u16(bytes.data() + body + 14);
            if (format == 0xFFFE && chunk_len >= 40) // WAVE_FORMAT_EXTENSIBLE
                format = read_u16(bytes.data() + body + 24);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_ptr = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1); // chunks are word aligned
    }
    if (!have_fmt || channels == 0 || rate == 0)
        throw DataError("unsupported encoding (missing fmt chunk): " + path);
    if (!data_ptr) throw DataError("unsupported encoding (missing data chunk): " + path);

    const std::size_t bytes_per_sample = bits / 8;
    if (bytes_per_sample == 0 || data_len < bytes_per_sample * channels)
        throw DataError("zero-length audio: " + path);
    const std::size_t frames = data_len / (bytes_per_sample * channels);
    if (frames == 0) throw DataError("zero-length audio: " + path);

    auto decode = [&](const unsigned char* p) -> float {
        switch (format) {
            case 1: // integer PCM
                switch (bits) {
                    case 8: return (static_cast<int>(p[0]) - 128) / 128.0f;
                    case 16: {
                        const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
                        return static_cast<float>(v) / 32768.0f;
                    }
                    case 24: {
                        std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
                        if (v & 0x800000) v |= ~0xFFFFFF;
                        return static_cast<float>(v) / 8388608.0f;
                    }
                    case 32: {
                        std::int32_t v;
                        std::memcpy(&v, p, 4);
                        return static_cast<float>(static_cast<double>(v) / 2147483648.0);
                    }
                    default: break;
                }
                break;
            case 3: // IEEE float
                if (bits == 32) {
                    float v;
                    std::memcpy(&v, p, 4);
                    return v;
                }
                break;
            default: break;
        }
        throw DataError("unsupported encoding (format " + std::to_string(format) + ", " +
                        std::to_string(bits) + "-bit): " + path);
    };

    WavData wav;
    wav.sample_rate = static_cast<double>(rate);
    wav.channels.assign(channels, std::vector<float>(frames));
    for (std::size_t f = 0; f < frames; ++f)
        for (std::size_t c = 0; c < channels; ++c)
            wav.channels[c][f] = decode(data_ptr + (f * channels + c) * bytes_per_sample);
    return wav;
}

// ---------------------------------------------------------------------------
// Kaiser window helpers

double bessel_i0(double x) {
    // Power series; converges quickly for the arguments used here.
    double sum = 1.0, term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-14 * sum) break;
    }
    return sum;
}

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    const double px = M_PI * x;
    return std::sin(px) / px;
}

} // namespace

Waveform load_audio(const std::string& path) {
    WavData wav = read_wav(path);
    const std::size_t frames = wav.channels[0].size();
    Waveform mono;
    mono.sample_rate = wav.sample_rate;
    mono.samples.resize(frames);
    const float inv_channels = 1.0f / static_cast<float>(wav.channels.size());
    for (std::size_t f = 0; f < frames; ++f) {
        float sum = 0.0f;
        for (const auto& ch : wav.channels) sum += ch[f];
        mono.samples[f] = sum * inv_channels;
    }
    if (mono.sample_rate == kWorkingRate) return mono;
    return resample(mono, kWorkingRate);
}

Waveform resample(const Waveform& w, double target_rate) {
    if (target_rate <= 0) throw std::invalid_argument("resample target rate must be positive");
    if (w.sample_rate <= 0) throw std::invalid_argument("resample input has no sample rate");
    const double ratio = target_rate / w.sample_rate;
    if (std::abs(ratio - 1.0) < 1e-12) {
        Waveform out = w;
        out.sample_rate = target_rate;
        return out;
    }

    constexpr int kTapsPerPhase = 32;
    constexpr int kPhases = 512;
    constexpr double kBeta = 8.0;

    // When downsampling, the kernel stretches and the cutoff drops so the
    // output stays band-limited.
    const double stretch = std::max(1.0, 1.0 / ratio);
    const int taps = static_cast<int>(std::ceil(kTapsPerPhase * stretch));
    const double half_width = taps / 2.0;
    const double cutoff = 0.92 / stretch;
    const int center = taps / 2 - 1;

    // Phase table: taps for fractional offsets frac = p / kPhases, each row
    // normalized to unit sum so DC passes exactly.
    std::vector<double> table(static_cast<std::size_t>(kPhases + 1) * taps);
    const double i0_beta = bessel_i0(kBeta);
    for (int p = 0; p <= kPhases; ++p) {
        const double frac = static_cast<double>(p) / kPhases;
        double sum = 0.0;
        double* row = table.data() + static_cast<std::size_t>(p) * taps;
        for (int j = 0; j < taps; ++j) {
            const double u = (j - center) - frac;
            const double t = u / half_width;
            double value = 0.0;
            if (std::abs(t) < 1.0)
                value = cutoff * sinc(cutoff * u) * bessel_i0(kBeta * std::sqrt(1.0 - t * t)) /
                        i0_beta;
            row[j] = value;
            sum += value;
        }
        for (int j = 0; j < taps; ++j) row[j] /= sum;
    }

    const auto in_len = static_cast<std::ptrdiff_t>(w.samples.size());
    Waveform out;
    out.sample_rate = target_rate;
    out.samples.resize(static_cast<std::size_t>(
        std::llround(static_cast<double>(w.samples.size()) * ratio)));
    for (std::size_t n = 0; n < out.samples.size(); ++n) {
        const double pos = static_cast<double>(n) / ratio;
        std::ptrdiff_t idx = static_cast<std::ptrdiff_t>(std::floor(pos));
        int phase = static_cast<int>(std::lround((pos - static_cast<double>(idx)) * kPhases));
        const double* row = table.data() + static_cast<std::size_t>(phase) * taps;
        double acc = 0.0;
        const std::ptrdiff_t base = idx - center;
        const std::ptrdiff_t j_lo = std::max<std::ptrdiff_t>(0, -base);
        const std::ptrdiff_t j_hi = std::min<std::ptrdiff_t>(taps, in_len - base);
        for (std::ptrdiff_t j = j_lo; j < j_hi; ++j)
            acc += row[j] * static_cast<double>(w.samples[base + j]);
        out.samples[n] = static_cast<float>(acc);
    }
    return out;
}

void write_wav_16bit(const std::string& path, const Waveform& w) {
    if (w.sample_rate <= 0) throw std::invalid_argument("waveform has no sample rate");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);

    const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
    auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto put_u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };

    out.write("RIFF", 4);
    put_u32(36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_u32(16);
    put_u16(1); // integer PCM
    put_u16(1); // mono
    put_u32(rate);
    put_u32(rate * 2);
    put_u16(2);
    put_u16(16);
    out.write("data", 4);
    put_u32(data_len);
    for (float s : w.samples) {
        const float clamped = std::clamp(s, -1.0f, 1.0f);
        const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0f));
        out.write(reinterpret_cast<const char*>(&v), 2);
    }
    if (!out) throw DataError("failed writing wav: " + path);
}

std::pair<Waveform, BeatAnnotation> synth_click_track(double tempo_bpm, int beats_per_bar,
                                                      double duration_s,
                                                      std::uint64_t timbre_seed) {
    if (tempo_bpm < 40.0 || tempo_bpm > 300.0)
        throw std::invalid_argument("tempo must be within [40, 300] BPM");
    if (beats_per_bar != 3 && beats_per_bar != 4)
        throw std::invalid_argument("beats_per_bar must be 3 or 4");
    if (duration_s <= 0) throw std::invalid_argument("duration must be positive");

    constexpr double kBurstSeconds = 0.100;
    constexpr double kDecaySeconds = 0.020;
    constexpr float kBeatPeak = 0.45f;
    constexpr float kDownbeatPeak = 0.90f; // +6 dB

    Rng rng(splitmix64(timbre_seed ^ 0x636c6b75ULL));
    // Centers stay below a quarter of the working rate so +8 semitone pitch
    // shifts keep the clicks inside the band.
    const double beat_center_hz = rng.uniform(1200.0, 2600.0);
    const Biquad beat_band = Biquad::bandpass(beat_center_hz, kWorkingRate, 1.2);
    const Biquad down_band = Biquad::bandpass(beat_center_hz / 3.0, kWorkingRate, 1.2);

    Waveform out;
    out.sample_rate = kWorkingRate;
    out.samples.assign(static_cast<std::size_t>(std::ceil(duration_s * kWorkingRate)), 0.0f);
    BeatAnnotation ann;

    const auto burst_len = static_cast<std::size_t>(kBurstSeconds * kWorkingRate);
    std::vector<float> burst(burst_len);
    const double beat_period = 60.0 / tempo_bpm;
    for (std::int64_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * beat_period;
        if (t >= duration_s) break;
        const bool downbeat = (k % beats_per_bar) == 0;
        ann.events.push_back({t, static_cast<int>(k % beats_per_bar) + 1});

        for (std::size_t i = 0; i < burst_len; ++i) {
            const double env = std::exp(-static_cast<double>(i) / (kDecaySeconds * kWorkingRate));
            burst[i] = static_cast<float>(rng.uniform(-1.0, 1.0) * env);
        }
        (downbeat ? down_band : beat_band).process(burst);
        float peak = 0.0f;
        for (float s : burst) peak = std::max(peak, std::abs(s));
        const float gain = peak > 0 ? (downbeat ? kDownbeatPeak : kBeatPeak) / peak : 0.0f;

        const auto start = static_cast<std::size_t>(std::llround(t * kWorkingRate));
        const std::size_t stop = std::min(out.samples.size(), start + burst_len);
        for (std::size_t i = start; i < stop; ++i) out.samples[i] += burst[i - start] * gain;
    }
    return {std::move(out), std::move(ann)};
}

} // namespace wavebeat
