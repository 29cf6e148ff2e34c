#include "wavebeat/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace wavebeat {

namespace {

struct Peak {
    std::size_t frame;
    float amplitude;
};

std::vector<Peak> pick_row(const float* act, std::size_t n, double threshold,
                           std::size_t min_gap_frames) {
    std::vector<Peak> peaks;
    for (std::size_t t = 0; t < n; ++t) {
        const float v = act[t];
        if (v <= threshold) continue;
        const bool left_ok = t == 0 || act[t - 1] < v;
        const bool right_ok = t + 1 == n || act[t + 1] < v;
        if (!left_ok || !right_ok) continue;
        if (!peaks.empty() && t - peaks.back().frame < min_gap_frames) {
            if (v > peaks.back().amplitude) peaks.back() = {t, v};
            continue;
        }
        peaks.push_back({t, v});
    }
    return peaks;
}

} // namespace

BeatSequence peak_pick(const ActivationMatrix& act, const PeakPickConfig& cfg) {
    BeatSequence seq;
    const std::size_t n = act.n_frames();
    if (n == 0 || act.frame_rate <= 0) return seq;
    const auto min_gap = static_cast<std::size_t>(
        std::max<double>(1.0, std::ceil(cfg.min_separation_s * act.frame_rate)));

    const std::vector<Peak> beat_peaks = pick_row(act.values.data(), n, cfg.threshold, min_gap);
    const std::vector<Peak> down_peaks =
        pick_row(act.values.data() + n, n, cfg.threshold, min_gap);

    std::vector<std::size_t> beat_frames;
    beat_frames.reserve(beat_peaks.size());
    for (const auto& p : beat_peaks) beat_frames.push_back(p.frame);

    std::vector<std::size_t> down_frames;
    for (const auto& p : down_peaks) {
        // Snap to the nearest beat peak within +/-2 frames, else promote.
        std::size_t best = n;
        std::size_t best_dist = 3;
        for (std::size_t f : beat_frames) {
            const std::size_t dist = f > p.frame ? f - p.frame : p.frame - f;
            if (dist < best_dist) {
                best_dist = dist;
                best = f;
            }
        }
        if (best == n) {
            best = p.frame;
            beat_frames.push_back(p.frame);
        }
        down_frames.push_back(best);
    }
    std::sort(beat_frames.begin(), beat_frames.end());
    beat_frames.erase(std::unique(beat_frames.begin(), beat_frames.end()), beat_frames.end());
    std::sort(down_frames.begin(), down_frames.end());
    down_frames.erase(std::unique(down_frames.begin(), down_frames.end()), down_frames.end());

    for (std::size_t f : beat_frames)
        seq.beats.push_back(static_cast<double>(f) / act.frame_rate);
    for (std::size_t f : down_frames)
        seq.downbeats.push_back(static_cast<double>(f) / act.frame_rate);
    return seq;
}

namespace {

// One meter's jagged state lattice: tempo_states rows, each with
// round(frame_rate * bar_duration) phase cells, one cell per frame.
struct BarLattice {
    int meter{0};
    std::vector<int> cells;           // per tempo state
    std::vector<std::size_t> offset;  // state index of (tempo, 0)
    std::size_t total{0};
    // Per-cell observation class: 0 = downbeat window, 1 = beat window,
    // 2 = elsewhere; and the exact beat cell index (or -1).
    std::vector<std::uint8_t> obs_class;
    std::vector<std::int8_t> beat_index;
};

BarLattice make_lattice(int meter, const std::vector<double>& bpm, double frame_rate) {
    BarLattice lat;
    lat.meter = meter;
    lat.cells.resize(bpm.size());
    lat.offset.resize(bpm.size());
    for (std::size_t i = 0; i < bpm.size(); ++i) {
        const double bar_seconds = meter * 60.0 / bpm[i];
        lat.offset[i] = lat.total;
        lat.cells[i] = std::max(2 * meter,
                                static_cast<int>(std::lround(frame_rate * bar_seconds)));
        lat.total += static_cast<std::size_t>(lat.cells[i]);
    }
    lat.obs_class.assign(lat.total, 2);
    lat.beat_index.assign(lat.total, -1);
    // Beat windows cover ~1/16 of each beat interval, so the fraction of
    // window cells is the same at every tempo; the matching (lambda-1)
    // normalization of non-beat cells lives in the observation precompute.
    for (std::size_t i = 0; i < bpm.size(); ++i) {
        const int n = lat.cells[i];
        const double beat_cells = static_cast<double>(n) / meter;
        const int half = std::max(1, static_cast<int>(std::lround(beat_cells / 32.0)));
        for (int k = 0; k < meter; ++k) {
            const int cell = static_cast<int>(
                std::lround(static_cast<double>(k) * n / meter)) % n;
            lat.beat_index[lat.offset[i] + cell] = static_cast<std::int8_t>(k);
            for (int d = -half; d <= half; ++d) {
                const int c = (cell + d + n) % n;
                const auto idx = lat.offset[i] + static_cast<std::size_t>(c);
                const std::uint8_t cls = k == 0 ? 0 : 1;
                lat.obs_class[idx] = std::min(lat.obs_class[idx], cls);
            }
        }
    }
    return lat;
}

inline int round_div(std::int64_t a, std::int64_t b) {
    return static_cast<int>((2 * a + b) / (2 * b));
}

// Predecessor phase cell when arriving at (tempo i, cell phi) from tempo j:
// rescale proportionally, then step back one cell.
inline int pred_cell(int phi, int n_i, int n_j) {
    const int mapped = round_div(static_cast<std::int64_t>(phi) * n_j, n_i) % n_j;
    return (mapped - 1 + n_j) % n_j;
}

struct MeterPath {
    double score{-std::numeric_limits<double>::infinity()};
    std::vector<std::size_t> states; // per frame, flattened lattice index
    const BarLattice* lattice{nullptr};
};

MeterPath viterbi_meter(const BarLattice& lat, const std::vector<double>& log_beat,
                        const std::vector<double>& log_down,
                        const std::vector<double>& log_none, double step_penalty) {
    const std::size_t frames = log_beat.size();
    const std::size_t n_tempi = lat.cells.size();
    MeterPath path;
    path.lattice = &lat;

    auto obs = [&](std::size_t state, std::size_t t) {
        switch (lat.obs_class[state]) {
            case 0: return log_down[t];
            case 1: return log_beat[t];
            default: return log_none[t];
        }
    };

    std::vector<double> prev(lat.total), cur(lat.total);
    for (std::size_t s = 0; s < lat.total; ++s) prev[s] = obs(s, 0);

    // Backpointers record only the tempo step in {-1, 0, +1}, packed 2 bits
    // per state; the predecessor phase is recomputed during backtracking.
    std::vector<std::uint8_t> bp(((lat.total * frames) + 3) / 4, 0);
    auto bp_set = [&bp](std::size_t idx, std::uint8_t code) {
        bp[idx >> 2] |= static_cast<std::uint8_t>(code << ((idx & 3) * 2));
    };
    auto bp_get = [&bp](std::size_t idx) {
        return static_cast<std::uint8_t>((bp[idx >> 2] >> ((idx & 3) * 2)) & 3);
    };

    for (std::size_t t = 1; t < frames; ++t) {
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < n_tempi; ++i) {
            const int n_i = lat.cells[i];
            const std::size_t off_i = lat.offset[i];
            for (int phi = 0; phi < n_i; ++phi) {
                // Self-transition first so ties keep the tempo steady. Tempo
                // steps are only allowed across the bar boundary; mid-bar
                // steps would let paths stretch their stay inside observation
                // windows by rescaling the phase.
                double best = prev[off_i + pred_cell(phi, n_i, n_i)];
                std::uint8_t best_code = 1;
                if (phi <= 1) {
                    if (i > 0) {
                        const double cand = prev[lat.offset[i - 1] +
                                                 pred_cell(phi, n_i, lat.cells[i - 1])] +
                                            step_penalty;
                        if (cand > best) {
                            best = cand;
                            best_code = 0;
                        }
                    }
                    if (i + 1 < n_tempi) {
                        const double cand = prev[lat.offset[i + 1] +
                                                 pred_cell(phi, n_i, lat.cells[i + 1])] +
                                            step_penalty;
                        if (cand > best) {
                            best = cand;
                            best_code = 2;
                        }
                    }
                }
                const std::size_t state = off_i + static_cast<std::size_t>(phi);
                cur[state] = best + obs(state, t);
                bp_set(t * lat.total + state, best_code);
            }
        }
        std::swap(prev, cur);
    }

    std::size_t best_state = 0;
    for (std::size_t s = 1; s < lat.total; ++s)
        if (prev[s] > prev[best_state]) best_state = s;
    path.score = prev[best_state];

    path.states.resize(frames);
    std::size_t state = best_state;
    for (std::size_t t = frames; t-- > 0;) {
        path.states[t] = state;
        if (t == 0) break;
        // Invert: find this state's tempo row, apply the recorded tempo step.
        std::size_t i = 0;
        while (i + 1 < n_tempi && lat.offset[i + 1] <= state) ++i;
        const int phi = static_cast<int>(state - lat.offset[i]);
        const int code = bp_get(t * lat.total + state) - 1; // {-1, 0, +1}
        const std::size_t j = static_cast<std::size_t>(static_cast<int>(i) + code);
        state = lat.offset[j] + static_cast<std::size_t>(pred_cell(phi, lat.cells[i],
                                                                   lat.cells[j]));
    }
    return path;
}

// Beats fall at integer values of the unwrapped beat coordinate along the
// decoded path; crossing times are interpolated within the frame.
void emit_beats(const MeterPath& path, double frame_rate, BeatSequence& seq) {
    const BarLattice& lat = *path.lattice;
    const std::size_t n_tempi = lat.cells.size();
    auto tempo_of = [&](std::size_t state) {
        std::size_t i = 0;
        while (i + 1 < n_tempi && lat.offset[i + 1] <= state) ++i;
        return i;
    };
    auto bar_pos = [&](std::size_t state, std::size_t i) {
        const int phi = static_cast<int>(state - lat.offset[i]);
        return static_cast<double>(phi) * lat.meter / lat.cells[i];
    };

    const std::size_t s0 = path.states[0];
    double u_prev = bar_pos(s0, tempo_of(s0));
    // The next integer beat coordinate to cross. A beat exactly on the first
    // frame counts once, right here.
    long long next_beat;
    if (lat.beat_index[s0] >= 0) {
        const long long k0 = std::llround(u_prev);
        seq.beats.push_back(0.0);
        if (k0 % lat.meter == 0) seq.downbeats.push_back(0.0);
        next_beat = k0 + 1;
    } else {
        next_beat = static_cast<long long>(std::floor(u_prev)) + 1;
    }

    double unwrap = 0.0; // accumulated bars, in beat units
    for (std::size_t t = 1; t < path.states.size(); ++t) {
        const std::size_t state = path.states[t];
        const double pos = bar_pos(state, tempo_of(state));
        double u = pos + unwrap;
        if (u < u_prev) { // wrapped around the bar end
            unwrap += lat.meter;
            u += lat.meter;
        }
        if (u >= static_cast<double>(next_beat) && u > u_prev) {
            const double alpha = (static_cast<double>(next_beat) - u_prev) / (u - u_prev);
            const double time = (static_cast<double>(t) - 1.0 + alpha) / frame_rate;
            seq.beats.push_back(time);
            if (next_beat % lat.meter == 0) seq.downbeats.push_back(time);
            ++next_beat;
        }
        u_prev = u;
    }
}

} // namespace

BeatSequence dbn_decode(const ActivationMatrix& act, const DbnConfig& cfg) {
    if (cfg.min_bpm >= cfg.max_bpm || cfg.tempo_states < 2 || cfg.meters.empty())
        throw std::invalid_argument("invalid dbn config");

    BeatSequence seq;
    std::size_t frames = act.n_frames();
    double frame_rate = act.frame_rate;
    if (frames == 0 || frame_rate <= 0) return seq;

    // High frame rates would explode the phase lattice; max-pool the
    // activations down to <= 180 Hz first. Pooling preserves the pulses and
    // costs well under the +/-70 ms evaluation tolerance in timing.
    std::vector<float> beat_act(frames), down_act(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        beat_act[t] = act.beat(t);
        down_act[t] = act.downbeat(t);
    }
    const int pool = std::max(1, static_cast<int>(std::ceil(frame_rate / 180.0)));
    if (pool > 1) {
        const std::size_t pooled = (frames + pool - 1) / pool;
        std::vector<float> b(pooled, 0.0f), d(pooled, 0.0f);
        for (std::size_t t = 0; t < frames; ++t) {
            b[t / pool] = std::max(b[t / pool], beat_act[t]);
            d[t / pool] = std::max(d[t / pool], down_act[t]);
        }
        beat_act = std::move(b);
        down_act = std::move(d);
        frames = pooled;
        frame_rate /= pool;
    }

    // Degenerate input: shorter than one beat at the fastest tempo.
    if (frames < 2 ||
        static_cast<double>(frames) < frame_rate * 60.0 / cfg.max_bpm)
        return seq;

    // Normalize the pulse peak so the beat-vs-background contrast in the
    // observation likelihoods does not depend on the activation's absolute
    // scale. This is what makes decoding invariant to uniform rescaling.
    float peak = 0.0f;
    for (float v : beat_act) peak = std::max(peak, v);
    if (peak > cfg.observation_floor) {
        const float lo = static_cast<float>(cfg.observation_floor);
        const float gain = 0.95f / peak;
        for (auto& v : beat_act) v = std::clamp(v * gain, lo, 1.0f - 1e-7f);
        for (auto& v : down_act) v = std::clamp(v * gain, lo, 1.0f - 1e-7f);
    }

    std::vector<double> bpm(static_cast<std::size_t>(cfg.tempo_states));
    const double log_lo = std::log(cfg.min_bpm), log_hi = std::log(cfg.max_bpm);
    for (int i = 0; i < cfg.tempo_states; ++i)
        bpm[static_cast<std::size_t>(i)] =
            std::exp(log_lo + (log_hi - log_lo) * i / (cfg.tempo_states - 1));
    const double step_penalty =
        -cfg.transition_lambda * (log_hi - log_lo) / (cfg.tempo_states - 1);

    // Non-beat cells carry the remaining probability mass, split across the
    // (lambda-1) non-window share of the beat interval.
    constexpr double kObservationLambda = 16.0;
    std::vector<double> log_beat(frames), log_down(frames), log_none(frames);
    const double floor_p = cfg.observation_floor;
    for (std::size_t t = 0; t < frames; ++t) {
        log_beat[t] = std::log(std::max<double>(beat_act[t], floor_p));
        log_down[t] = std::log(std::max<double>(down_act[t], floor_p));
        log_none[t] = std::log(std::max<double>(1.0 - beat_act[t], floor_p)) -
                      std::log(kObservationLambda - 1.0);
    }

    MeterPath best;
    BarLattice best_lat;
    for (int meter : cfg.meters) {
        BarLattice lat = make_lattice(meter, bpm, frame_rate);
        MeterPath path = viterbi_meter(lat, log_beat, log_down, log_none, step_penalty);
        if (path.score > best.score) {
            best = std::move(path);
            best_lat = std::move(lat);
            best.lattice = &best_lat;
        }
    }
    if (best.lattice) emit_beats(best, frame_rate, seq);
    return seq;
}

BeatAnnotation to_annotation(const BeatSequence& seq) {
    BeatAnnotation ann;
    if (seq.downbeats.empty()) {
        for (double t : seq.beats) ann.events.push_back({t, 0});
        return ann;
    }
    std::size_t d = 0;
    int counter = 0; // 0 until the first downbeat is seen
    for (double t : seq.beats) {
        while (d < seq.downbeats.size() && seq.downbeats[d] < t - 1e-6) ++d;
        const bool is_down =
            d < seq.downbeats.size() && std::abs(seq.downbeats[d] - t) <= 1e-6;
        if (is_down) {
            counter = 1;
            ++d;
        } else if (counter >= 1) {
            ++counter;
        }
        // Beats before the first downbeat cannot be numbered within the bar;
        // they get 2 ("not a downbeat").
        ann.events.push_back({t, counter >= 1 ? counter : 2});
    }
    return ann;
}

} // namespace wavebeat
