#include "wavebeat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "wavebeat/errors.hpp"

namespace wavebeat {

namespace {

void check_sorted(const std::vector<double>& v, const char* label) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1])
            throw std::invalid_argument(std::string(label) + " times must be sorted");
}

} // namespace

double f_measure(const std::vector<double>& est, const std::vector<double>& ref,
                 double tolerance) {
    check_sorted(est, "estimated");
    check_sorted(ref, "reference");
    if (est.empty() && ref.empty()) return 1.0;
    if (est.empty() || ref.empty()) return 0.0;

    std::size_t matches = 0, i = 0, j = 0;
    while (i < est.size() && j < ref.size()) {
        if (std::abs(est[i] - ref[j]) <= tolerance) {
            ++matches;
            ++i;
            ++j;
        } else if (est[i] < ref[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    if (matches == 0) return 0.0;
    const double precision = static_cast<double>(matches) / static_cast<double>(est.size());
    const double recall = static_cast<double>(matches) / static_cast<double>(ref.size());
    return 2.0 * precision * recall / (precision + recall);
}

namespace {

// Reference variations for the allowed-metrical-level scores.
std::vector<std::vector<double>> reference_variations(const std::vector<double>& ref) {
    std::vector<std::vector<double>> out;
    out.push_back(ref); // identity

    std::vector<double> doubled, offbeat;
    for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
        doubled.push_back(ref[i]);
        doubled.push_back((ref[i] + ref[i + 1]) / 2.0);
        offbeat.push_back((ref[i] + ref[i + 1]) / 2.0);
    }
    if (!ref.empty()) doubled.push_back(ref.back());
    out.push_back(std::move(doubled));
    out.push_back(std::move(offbeat));

    for (std::size_t start = 0; start < 2; ++start) { // half, both phases
        std::vector<double> half;
        for (std::size_t i = start; i < ref.size(); i += 2) half.push_back(ref[i]);
        out.push_back(std::move(half));
    }

    std::vector<double> tripled;
    for (std::size_t i = 0; i + 1 < ref.size(); ++i) {
        const double step = (ref[i + 1] - ref[i]) / 3.0;
        tripled.push_back(ref[i]);
        tripled.push_back(ref[i] + step);
        tripled.push_back(ref[i] + 2.0 * step);
    }
    if (!ref.empty()) tripled.push_back(ref.back());
    out.push_back(std::move(tripled));

    for (std::size_t start = 0; start < 3; ++start) { // third, all phases
        std::vector<double> third;
        for (std::size_t i = start; i < ref.size(); i += 3) third.push_back(ref[i]);
        out.push_back(std::move(third));
    }
    return out;
}

std::pair<double, double> continuity_against(const std::vector<double>& est,
                                             const std::vector<double>& ref,
                                             double phase_tol, double period_tol) {
    if (ref.size() < 2 || est.empty()) return {0.0, 0.0};

    std::vector<char> acceptable(est.size(), 0);
    for (std::size_t i = 0; i < est.size(); ++i) {
        const auto it = std::lower_bound(ref.begin(), ref.end(), est[i]);
        std::size_t j = static_cast<std::size_t>(it - ref.begin());
        if (j == ref.size() || (j > 0 && est[i] - ref[j - 1] < ref[j] - est[i])) --j;
        const double interval = j > 0 ? ref[j] - ref[j - 1] : ref[1] - ref[0];
        const bool phase_ok = std::abs(est[i] - ref[j]) < phase_tol * interval;
        bool period_ok = true;
        if (i > 0) period_ok = std::abs((est[i] - est[i - 1]) - interval) < period_tol * interval;
        acceptable[i] = phase_ok && period_ok;
    }

    // A beat counts when it and its predecessor are acceptable; the first
    // estimate stands on its own.
    std::size_t total = 0, longest = 0, run = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        const bool correct = acceptable[i] && (i == 0 || acceptable[i - 1]);
        if (correct) {
            ++total;
            ++run;
            longest = std::max(longest, run);
        } else {
            run = 0;
        }
    }
    const double denom = static_cast<double>(std::max(est.size(), ref.size()));
    return {static_cast<double>(longest) / denom, static_cast<double>(total) / denom};
}

} // namespace

ContinuityScores continuity(const std::vector<double>& est, const std::vector<double>& ref,
                            double phase_tol, double period_tol) {
    check_sorted(est, "estimated");
    check_sorted(ref, "reference");
    if (ref.size() < 2)
        throw std::invalid_argument("continuity requires at least 2 reference events");

    ContinuityScores scores;
    const auto [cmlc, cmlt] = continuity_against(est, ref, phase_tol, period_tol);
    scores.cmlc = cmlc;
    scores.cmlt = cmlt;
    scores.amlc = cmlc;
    scores.amlt = cmlt;
    for (const auto& variation : reference_variations(ref)) {
        if (variation.size() < 2) continue;
        const auto [c, t] = continuity_against(est, variation, phase_tol, period_tol);
        scores.amlc = std::max(scores.amlc, c);
        scores.amlt = std::max(scores.amlt, t);
    }
    return scores;
}

EvalReport evaluate_dataset(const std::map<std::string, BeatSequence>& predictions,
                            const std::map<std::string, BeatAnnotation>& references) {
    if (predictions.size() != references.size())
        throw DataError("prediction/reference key sets differ in size");
    for (const auto& [name, seq] : predictions)
        if (!references.count(name)) throw DataError("no reference for track: " + name);

    EvalReport report;
    for (const auto& [name, ref] : references) {
        const BeatSequence& pred = predictions.at(name);
        TrackScores s;
        const auto ref_beats = ref.beat_times();
        s.beat_f = f_measure(pred.beats, ref_beats);
        if (ref_beats.size() >= 2) {
            const auto c = continuity(pred.beats, ref_beats);
            s.beat_cmlt = c.cmlt;
            s.beat_amlt = c.amlt;
        }
        if (ref.has_positions()) {
            s.has_downbeats = true;
            const auto ref_downs = ref.downbeat_times();
            s.downbeat_f = f_measure(pred.downbeats, ref_downs);
            if (ref_downs.size() >= 2) {
                const auto c = continuity(pred.downbeats, ref_downs);
                s.downbeat_cmlt = c.cmlt;
                s.downbeat_amlt = c.amlt;
            }
            ++report.downbeat_track_count;
        }
        report.tracks.emplace_back(name, s);
    }

    const double n = static_cast<double>(report.tracks.size());
    for (const auto& [name, s] : report.tracks) {
        report.mean.beat_f += s.beat_f / n;
        report.mean.beat_cmlt += s.beat_cmlt / n;
        report.mean.beat_amlt += s.beat_amlt / n;
        if (s.has_downbeats) {
            const double dn = static_cast<double>(report.downbeat_track_count);
            report.mean.downbeat_f += s.downbeat_f / dn;
            report.mean.downbeat_cmlt += s.downbeat_cmlt / dn;
            report.mean.downbeat_amlt += s.downbeat_amlt / dn;
        }
    }
    report.mean.has_downbeats = report.downbeat_track_count > 0;
    return report;
}

std::string format_report(const EvalReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3);
    std::size_t name_width = 5;
    for (const auto& [name, s] : report.tracks) name_width = std::max(name_width, name.size());

    out << std::left << std::setw(static_cast<int>(name_width + 2)) << "track" << std::right
        << std::setw(8) << "beat_F" << std::setw(8) << "CMLt" << std::setw(8) << "AMLt"
        << std::setw(8) << "db_F" << std::setw(8) << "CMLt" << std::setw(8) << "AMLt" << '\n';
    auto row = [&](const std::string& name, const TrackScores& s) {
        out << std::left << std::setw(static_cast<int>(name_width + 2)) << name << std::right
            << std::setw(8) << s.beat_f << std::setw(8) << s.beat_cmlt << std::setw(8)
            << s.beat_amlt;
        if (s.has_downbeats)
            out << std::setw(8) << s.downbeat_f << std::setw(8) << s.downbeat_cmlt
                << std::setw(8) << s.downbeat_amlt;
        else
            out << std::setw(8) << "-" << std::setw(8) << "-" << std::setw(8) << "-";
        out << '\n';
    };
    for (const auto& [name, s] : report.tracks) row(name, s);
    row("mean", report.mean);
    return out.str();
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open csv for writing: " + path);
    out << std::setprecision(9);
    for (const auto& [name, s] : report.tracks) {
        out << name << ",beat_f," << s.beat_f << '\n';
        out << name << ",beat_cmlt," << s.beat_cmlt << '\n';
        out << name << ",beat_amlt," << s.beat_amlt << '\n';
        if (s.has_downbeats) {
            out << name << ",downbeat_f," << s.downbeat_f << '\n';
            out << name << ",downbeat_cmlt," << s.downbeat_cmlt << '\n';
            out << name << ",downbeat_amlt," << s.downbeat_amlt << '\n';
        }
    }
    if (!out) throw DataError("failed writing csv: " + path);
}

} // namespace wavebeat
