#include "wavebeat/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wavebeat/biquad.hpp"
#include "wavebeat/errors.hpp"

namespace wavebeat {

namespace {

bool blank_or_comment(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

} // namespace

BeatAnnotation load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open annotation file: " + path);
    BeatAnnotation ann;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_or_comment(line)) continue;
        std::istringstream ss(line);
        double time;
        if (!(ss >> time))
            throw DataError(path + ":" + std::to_string(line_no) + ": unparseable line");
        int position = 0;
        if (!(ss >> position)) {
            position = 0;
        } else if (position < 1) {
            throw DataError(path + ":" + std::to_string(line_no) + ": position must be >= 1");
        }
        std::string rest;
        if (ss >> rest)
            throw DataError(path + ":" + std::to_string(line_no) + ": unparseable line");
        if (!ann.events.empty() && time <= ann.events.back().time)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": non-monotonic event time");
        ann.events.push_back({time, position});
    }
    return ann;
}

void save_annotations(const std::string& path, const BeatAnnotation& ann) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open annotation file for writing: " + path);
    out.precision(9);
    for (const auto& e : ann.events) {
        out << e.time;
        if (e.position >= 1) out << '\t' << e.position;
        out << '\n';
    }
    if (!out) throw DataError("failed writing annotation file: " + path);
}

TargetMatrix make_targets(const BeatAnnotation& ann, std::size_t n_frames, double frame_rate,
                          TargetStats* stats) {
    TargetMatrix t(n_frames, frame_rate);
    if (stats) *stats = {};
    for (const auto& e : ann.events) {
        const auto frame = static_cast<std::int64_t>(std::llround(e.time * frame_rate));
        if (frame < 0 || frame >= static_cast<std::int64_t>(n_frames)) {
            if (stats) ++stats->dropped;
            continue;
        }
        const auto i = static_cast<std::size_t>(frame);
        if (t.beat(i) > 0.5f && stats) ++stats->collided;
        t.beat(i) = 1.0f;
        if (e.position == 1) t.downbeat(i) = 1.0f;
    }
    return t;
}

Excerpt sample_excerpt(const Waveform& audio, const BeatAnnotation& ann, std::size_t length,
                       Rng& rng, const std::string& source) {
    Excerpt ex;
    ex.source = source;
    ex.audio.sample_rate = audio.sample_rate;
    std::size_t offset = 0;
    if (audio.samples.size() > length)
        offset = static_cast<std::size_t>(rng.uniform_int(audio.samples.size() - length + 1));
    const std::size_t avail = std::min(length, audio.samples.size() - offset);
    ex.audio.samples.assign(audio.samples.begin() + static_cast<std::ptrdiff_t>(offset),
                            audio.samples.begin() + static_cast<std::ptrdiff_t>(offset + avail));
    ex.audio.samples.resize(length, 0.0f);

    const double t0 = static_cast<double>(offset) / audio.sample_rate;
    const double t1 = t0 + static_cast<double>(length) / audio.sample_rate;
    for (const auto& e : ann.events)
        if (e.time >= t0 && e.time < t1) ex.annotation.events.push_back({e.time - t0, e.position});
    return ex;
}

void fit_length(Waveform& audio, BeatAnnotation& ann, std::size_t length) {
    audio.samples.resize(length, 0.0f);
    const double duration = static_cast<double>(length) / audio.sample_rate;
    std::erase_if(ann.events, [duration](const BeatEvent& e) { return e.time >= duration; });
}

std::pair<Waveform, BeatAnnotation> augment(const Waveform& audio, const BeatAnnotation& ann,
                                            const AugmentationConfig& cfg, Rng& rng) {
    Waveform w = audio;
    BeatAnnotation a = ann;

    // 1. High- or low-pass filter with a random cutoff.
    if (rng.uniform() < cfg.p_filter) {
        if (rng.uniform() < 0.5) {
            const double cutoff = std::exp(rng.uniform(std::log(20.0), std::log(250.0)));
            Biquad::highpass(cutoff, w.sample_rate).process(w.samples);
        } else {
            const double cutoff = std::exp(rng.uniform(std::log(4000.0), std::log(10000.0)));
            Biquad::lowpass(cutoff, w.sample_rate).process(w.samples);
        }
    }

    // 2. Pitch shift by resampling; duration scales with it, so annotation
    // times scale by the inverse of the pitch factor.
    if (rng.uniform() < cfg.p_pitch) {
        const double semitones = rng.uniform(-8.0, 8.0);
        const double factor = std::exp2(semitones / 12.0);
        const double rate = w.sample_rate;
        w = resample(w, rate / factor);
        w.sample_rate = rate;
        for (auto& e : a.events) e.time /= factor;
    }

    // 3. Additive white noise at a random SNR.
    if (rng.uniform() < cfg.p_noise) {
        double sum_sq = 0.0;
        for (float s : w.samples) sum_sq += static_cast<double>(s) * s;
        const double rms = w.samples.empty() ? 0.0 : std::sqrt(sum_sq / w.samples.size());
        if (rms > 0) {
            const double snr_db = rng.uniform(15.0, 40.0);
            const double sigma = rms / std::pow(10.0, snr_db / 20.0);
            for (auto& s : w.samples) s += static_cast<float>(sigma * rng.gaussian());
        }
    }

    // 4. tanh saturation with a random drive, renormalized to the input peak.
    if (rng.uniform() < cfg.p_tanh) {
        const double drive = rng.uniform(1.0, 4.0);
        float peak_before = 0.0f;
        for (float s : w.samples) peak_before = std::max(peak_before, std::abs(s));
        if (peak_before > 0) {
            float peak_after = 0.0f;
            for (auto& s : w.samples) {
                s = static_cast<float>(std::tanh(drive * static_cast<double>(s)));
                peak_after = std::max(peak_after, std::abs(s));
            }
            if (peak_after > 0) {
                const float gain = peak_before / peak_after;
                for (auto& s : w.samples) s *= gain;
            }
        }
    }

    // 5. One global offset applied to every beat location, audio untouched.
    if (rng.uniform() < cfg.p_shift) {
        const double offset = rng.uniform(-0.070, 0.070);
        const double duration = w.duration_seconds();
        BeatAnnotation shifted;
        for (auto e : a.events) {
            e.time += offset;
            if (e.time >= 0.0 && e.time < duration) shifted.events.push_back(e);
        }
        a = std::move(shifted);
    }

    // 6. Drop one contiguous block (audio zeroed, events removed).
    if (rng.uniform() < cfg.p_dropout) {
        const double duration = w.duration_seconds();
        const double block = rng.uniform(0.0, 0.10 * duration);
        const double start = rng.uniform(0.0, duration - block);
        const auto i0 = static_cast<std::size_t>(start * w.sample_rate);
        const auto i1 = std::min(w.samples.size(),
                                 static_cast<std::size_t>((start + block) * w.sample_rate));
        std::fill(w.samples.begin() + static_cast<std::ptrdiff_t>(i0),
                  w.samples.begin() + static_cast<std::ptrdiff_t>(i1), 0.0f);
        std::erase_if(a.events, [start, block](const BeatEvent& e) {
            return e.time >= start && e.time < start + block;
        });
    }

    // 7. Phase inversion.
    if (rng.uniform() < cfg.p_invert) {
        for (auto& s : w.samples) s = -s;
    }

    return {std::move(w), std::move(a)};
}

std::vector<DatasetGroup> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path);
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&base](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp.string() : (base / fp).string();
    };

    std::vector<DatasetGroup> groups;
    auto group_for = [&groups](const std::string& label) -> DatasetGroup& {
        for (auto& g : groups)
            if (g.label == label) return g;
        groups.push_back({label, {}});
        return groups.back();
    };

    std::string line, label = "default";
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank_or_comment(line)) continue;
        if (line.front() == '[') {
            const auto close = line.find(']');
            if (close == std::string::npos)
                throw DataError(path + ":" + std::to_string(line_no) + ": unterminated label");
            label = line.substr(1, close - 1);
            continue;
        }
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": expected audio<TAB>annotation");
        std::string audio = line.substr(0, tab);
        std::string anno = line.substr(tab + 1);
        while (!anno.empty() && (anno.back() == '\r' || anno.back() == ' ')) anno.pop_back();
        if (audio.empty() || anno.empty())
            throw DataError(path + ":" + std::to_string(line_no) + ": empty path");
        group_for(label).tracks.push_back({resolve(audio), resolve(anno)});
    }
    return groups;
}

} // namespace wavebeat
