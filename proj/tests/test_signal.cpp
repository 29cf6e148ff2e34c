#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "wavebeat/errors.hpp"
#include "wavebeat/rng.hpp"
#include "wavebeat/signal.hpp"

using namespace wavebeat;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("wavebeat_sig_" + name)).string();
}

// Minimal interleaved WAV writer covering the encodings the loader accepts.
void write_raw_wav(const std::string& path, const std::vector<std::vector<float>>& channels,
                   std::uint32_t rate, int bits, bool float_format) {
    std::ofstream out(path, std::ios::binary);
    const auto n_ch = static_cast<std::uint16_t>(channels.size());
    const auto frames = static_cast<std::uint32_t>(channels.empty() ? 0 : channels[0].size());
    const auto bytes_per = static_cast<std::uint32_t>(bits / 8);
    const std::uint32_t data_len = frames * n_ch * bytes_per;
    auto u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { out.write(reinterpret_cast<const char*>(&v), 2); };
    out.write("RIFF", 4);
    u32(36 + data_len);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    u32(16);
    u16(float_format ? 3 : 1);
    u16(n_ch);
    u32(rate);
    u32(rate * n_ch * bytes_per);
    u16(static_cast<std::uint16_t>(n_ch * bytes_per));
    u16(static_cast<std::uint16_t>(bits));
    out.write("data", 4);
    u32(data_len);
    for (std::uint32_t f = 0; f < frames; ++f)
        for (const auto& ch : channels) {
            const float s = ch[f];
            if (float_format) {
                out.write(reinterpret_cast<const char*>(&s), 4);
            } else if (bits == 16) {
                const auto v = static_cast<std::int16_t>(std::lround(s * 32767.0f));
                out.write(reinterpret_cast<const char*>(&v), 2);
            } else if (bits == 8) {
                const auto v = static_cast<std::uint8_t>(std::lround(s * 127.0f) + 128);
                out.write(reinterpret_cast<const char*>(&v), 1);
            } else if (bits == 24) {
                const auto v = static_cast<std::int32_t>(std::lround(s * 8388607.0f));
                out.write(reinterpret_cast<const char*>(&v), 3);
            }
        }
}

std::vector<float> sine(double freq, double rate, std::size_t n, double amplitude = 0.5) {
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = static_cast<float>(amplitude * std::sin(2.0 * M_PI * freq * i / rate));
    return out;
}

// Goertzel magnitude at one frequency; the DFT oracle for resampling tests.
double goertzel(const std::vector<float>& x, double freq, double rate) {
    const double w = 2.0 * M_PI * freq / rate;
    const double coeff = 2.0 * std::cos(w);
    double s0 = 0, s1 = 0, s2 = 0;
    for (float v : x) {
        s0 = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s0;
    }
    return s1 * s1 + s2 * s2 - coeff * s1 * s2;
}

} // namespace

TEST_SUITE("signal") {

TEST_CASE("load_audio basics") {
    SUBCASE("mono 22050 Hz loads without resampling") {
        const auto path = temp_path("mono.wav");
        write_raw_wav(path, {sine(440, 22050, 22050)}, 22050, 16, false);
        const Waveform w = load_audio(path);
        CHECK(w.sample_rate == 22050.0);
        CHECK(w.samples.size() == 22050);
    }
    SUBCASE("identical stereo channels mix down to the same signal") {
        const auto ch = sine(330, 22050, 4096);
        const auto path = temp_path("stereo.wav");
        write_raw_wav(path, {ch, ch}, 22050, 16, false);
        const Waveform w = load_audio(path);
        REQUIRE(w.samples.size() == ch.size());
        for (std::size_t i = 0; i < ch.size(); ++i)
            CHECK(w.samples[i] == doctest::Approx(ch[i]).epsilon(1e-3));
    }
    SUBCASE("44.1 kHz sine lands at the right frequency after resampling") {
        const auto path = temp_path("hi_rate.wav");
        write_raw_wav(path, {sine(440, 44100, 44100)}, 44100, 16, false);
        const Waveform w = load_audio(path);
        CHECK(w.sample_rate == 22050.0);
        // DFT oracle: scan magnitudes, locate the arg-max bin.
        double best_freq = 0, best_mag = -1;
        for (double f = 200; f <= 900; f += 0.5) {
            const double mag = goertzel(w.samples, f, 22050.0);
            if (mag > best_mag) {
                best_mag = mag;
                best_freq = f;
            }
        }
        CHECK(std::abs(best_freq - 440.0) <= 1.0);
    }
    SUBCASE("8-bit, 24-bit, and float encodings decode") {
        for (int bits : {8, 24}) {
            const auto path = temp_path("b" + std::to_string(bits) + ".wav");
            write_raw_wav(path, {sine(440, 22050, 2048)}, 22050, bits, false);
            const Waveform w = load_audio(path);
            CHECK(w.samples.size() == 2048);
        }
        const auto path = temp_path("f32.wav");
        const auto ref = sine(440, 22050, 2048);
        write_raw_wav(path, {ref}, 22050, 32, true);
        const Waveform w = load_audio(path);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(w.samples[i] == ref[i]);
    }
    SUBCASE("deterministic: two loads are bit-identical") {
        const auto path = temp_path("det.wav");
        write_raw_wav(path, {sine(523, 44100, 8192)}, 44100, 16, false);
        const Waveform a = load_audio(path);
        const Waveform b = load_audio(path);
        REQUIRE(a.samples.size() == b.samples.size());
        CHECK(std::memcmp(a.samples.data(), b.samples.data(),
                          a.samples.size() * sizeof(float)) == 0);
    }
    SUBCASE("distinct errors") {
        CHECK_THROWS_WITH_AS(load_audio(temp_path("missing.wav")),
                             doctest::Contains("cannot open"), DataError);
        const auto garbage = temp_path("garbage.wav");
        std::ofstream(garbage) << "not a wav at all";
        CHECK_THROWS_WITH_AS(load_audio(garbage), doctest::Contains("unsupported encoding"),
                             DataError);
        const auto empty = temp_path("empty.wav");
        write_raw_wav(empty, {std::vector<float>{}}, 22050, 16, false);
        CHECK_THROWS_WITH_AS(load_audio(empty), doctest::Contains("zero-length"), DataError);
    }
}

TEST_CASE("resample") {
    SUBCASE("identity rate returns identical samples") {
        Waveform w{sine(440, 22050, 1000), 22050};
        const Waveform out = resample(w, 22050);
        REQUIRE(out.samples.size() == w.samples.size());
        for (std::size_t i = 0; i < w.samples.size(); ++i)
            CHECK(out.samples[i] == w.samples[i]);
    }
    SUBCASE("DC passes through") {
        Waveform w{std::vector<float>(4000, 0.5f), 44100};
        const Waveform out = resample(w, 22050);
        CHECK(out.samples.size() == 2000);
        for (std::size_t i = 100; i + 100 < out.samples.size(); ++i)
            CHECK(out.samples[i] == doctest::Approx(0.5).epsilon(2e-3));
    }
    SUBCASE("1 kHz sine keeps its RMS through 2:1 downsampling") {
        const double amplitude = 0.5;
        Waveform w{sine(1000, 44100, 44100, amplitude), 44100};
        const Waveform out = resample(w, 22050);
        const std::size_t lo = out.samples.size() / 20, hi = out.samples.size() - lo;
        double sum_sq = 0;
        for (std::size_t i = lo; i < hi; ++i)
            sum_sq += static_cast<double>(out.samples[i]) * out.samples[i];
        const double rms = std::sqrt(sum_sq / static_cast<double>(hi - lo));
        CHECK(rms == doctest::Approx(amplitude / std::sqrt(2.0)).epsilon(0.01));
    }
    SUBCASE("output length follows round(len * target / source)") {
        Waveform w{std::vector<float>(1001, 0.1f), 22050};
        CHECK(resample(w, 44100).samples.size() == 2002);
        CHECK(resample(w, 11025).samples.size() == 501); // round(500.5)
    }
    SUBCASE("up-then-down round trip reconstructs band-limited input") {
        // Band-limited: sines well under Nyquist.
        Waveform w{std::vector<float>(8192, 0.0f), 22050};
        for (std::size_t i = 0; i < w.samples.size(); ++i)
            w.samples[i] = static_cast<float>(0.3 * std::sin(2 * M_PI * 880.0 * i / 22050) +
                                              0.2 * std::sin(2 * M_PI * 2333.0 * i / 22050));
        const Waveform round = resample(resample(w, 44100), 22050);
        REQUIRE(round.samples.size() == w.samples.size());
        const std::size_t lo = w.samples.size() / 20, hi = w.samples.size() - lo;
        double err_sq = 0, ref_sq = 0;
        for (std::size_t i = lo; i < hi; ++i) {
            const double d = round.samples[i] - w.samples[i];
            err_sq += d * d;
            ref_sq += static_cast<double>(w.samples[i]) * w.samples[i];
        }
        CHECK(std::sqrt(err_sq / ref_sq) < 1e-2);
    }
    SUBCASE("invalid target rate") {
        Waveform w{sine(440, 22050, 100), 22050};
        CHECK_THROWS_AS(resample(w, 0.0), std::invalid_argument);
    }
}

TEST_CASE("wav writer round trip") {
    Waveform w{sine(440, 22050, 2048), 22050};
    const auto path = temp_path("rt.wav");
    write_wav_16bit(path, w);
    const Waveform back = load_audio(path);
    REQUIRE(back.samples.size() == w.samples.size());
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        CHECK(back.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-4));
}

TEST_CASE("synth_click_track") {
    SUBCASE("120 BPM 4/4 for 10 s") {
        const auto [audio, ann] = synth_click_track(120, 4, 10.0, 1);
        REQUIRE(ann.events.size() == 20);
        for (std::size_t k = 0; k < 20; ++k) {
            CHECK(ann.events[k].time == doctest::Approx(0.5 * static_cast<double>(k)));
            CHECK(ann.events[k].position == static_cast<int>(k % 4) + 1);
        }
        const auto downs = ann.downbeat_times();
        REQUIRE(downs.size() == 5);
        for (std::size_t k = 0; k < 5; ++k)
            CHECK(downs[k] == doctest::Approx(2.0 * static_cast<double>(k)));
        CHECK(audio.sample_rate == 22050.0);
    }
    SUBCASE("60 BPM 3/4 for 3 s") {
        const auto [audio, ann] = synth_click_track(60, 3, 3.0, 2);
        REQUIRE(ann.events.size() == 3);
        CHECK(ann.events[0].position == 1);
        CHECK(ann.events[1].position == 2);
        CHECK(ann.events[2].position == 3);
    }
    SUBCASE("generator contract: peak <= 1, strictly increasing times") {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            const double tempo = rng.uniform(40, 300);
            const int bpb = rng.uniform() < 0.5 ? 3 : 4;
            const double dur = rng.uniform(1.0, 8.0);
            const auto [audio, ann] = synth_click_track(tempo, bpb, dur, trial);
            float peak = 0;
            for (float s : audio.samples) peak = std::max(peak, std::abs(s));
            CHECK(peak <= 1.0f);
            for (std::size_t i = 1; i < ann.events.size(); ++i)
                CHECK(ann.events[i].time > ann.events[i - 1].time);
            // count: beats at k*60/tempo with t < duration
            std::size_t expect = 0;
            while (static_cast<double>(expect) * 60.0 / tempo < dur) ++expect;
            CHECK(ann.events.size() == expect);
        }
    }
    SUBCASE("downbeats are louder") {
        const auto [audio, ann] = synth_click_track(90, 4, 4.0, 7);
        auto local_peak = [&](double t) {
            const auto start = static_cast<std::size_t>(t * 22050);
            float peak = 0;
            for (std::size_t i = start; i < std::min(audio.samples.size(), start + 2205); ++i)
                peak = std::max(peak, std::abs(audio.samples[i]));
            return peak;
        };
        CHECK(local_peak(ann.events[0].time) > 1.5f * local_peak(ann.events[1].time));
    }
    SUBCASE("same timbre seed reproduces the waveform bit for bit") {
        const auto a = synth_click_track(100, 4, 2.0, 42);
        const auto b = synth_click_track(100, 4, 2.0, 42);
        REQUIRE(a.first.samples.size() == b.first.samples.size());
        CHECK(std::memcmp(a.first.samples.data(), b.first.samples.data(),
                          a.first.samples.size() * sizeof(float)) == 0);
    }
    SUBCASE("preconditions") {
        CHECK_THROWS_AS(synth_click_track(30, 4, 1.0, 0), std::invalid_argument);
        CHECK_THROWS_AS(synth_click_track(120, 5, 1.0, 0), std::invalid_argument);
        CHECK_THROWS_AS(synth_click_track(120, 4, 0.0, 0), std::invalid_argument);
    }
}

} // TEST_SUITE
