#pragma once

#include <map>
#include <string>
#include <vector>

#include "wavebeat/annotation.hpp"
#include "wavebeat/decode.hpp"

namespace wavebeat {

// F-measure with one-to-one greedy chronological matching within
// +/-tolerance. Empty/empty scores 1, one-sided empty scores 0.
double f_measure(const std::vector<double>& est, const std::vector<double>& ref,
                 double tolerance = 0.070);

struct ContinuityScores {
    double cmlc{0.0};
    double cmlt{0.0};
    double amlc{0.0};
    double amlt{0.0};
};

// Continuity-based accuracy. A beat is correct when it lies within phase_tol
// of its nearest reference beat (relative to the local inter-annotation
// interval), its inter-beat interval matches within period_tol, and the
// previous estimate also satisfied both conditions (the first estimate is
// exempt from the predecessor requirement). CML scores the reference as
// annotated; AML takes the best over the {identity, double, half, offbeat,
// triple, third} variations.
ContinuityScores continuity(const std::vector<double>& est, const std::vector<double>& ref,
                            double phase_tol = 0.175, double period_tol = 0.175);

struct TrackScores {
    double beat_f{0.0}, beat_cmlt{0.0}, beat_amlt{0.0};
    bool has_downbeats{false};
    double downbeat_f{0.0}, downbeat_cmlt{0.0}, downbeat_amlt{0.0};
};

struct EvalReport {
    std::vector<std::pair<std::string, TrackScores>> tracks;
    TrackScores mean;
    std::size_t downbeat_track_count{0};
};

// Per-track beat (and, where the reference carries positions, downbeat)
// scores plus arithmetic means. Key sets must match.
EvalReport evaluate_dataset(const std::map<std::string, BeatSequence>& predictions,
                            const std::map<std::string, BeatAnnotation>& references);

std::string format_report(const EvalReport& report);

// CSV rows "track,metric,value", one row per track and metric, no header.
void write_report_csv(const EvalReport& report, const std::string& path);

} // namespace wavebeat
