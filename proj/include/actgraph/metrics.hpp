#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/engine.hpp"

namespace actgraph {

struct GroundTruthActivity {
    std::string name;
    std::set<std::string> participants;  // ground-truth entity labels
    TimeS completion_ts = 0.0;
    std::set<std::string> cameras;
};

// File format: `name completion_ts id1,id2 cam1,cam2`, `#` comments.
inline std::vector<GroundTruthActivity> parse_ground_truth(std::istream& in) {
    std::vector<GroundTruthActivity> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        GroundTruthActivity gt;
        std::string parts, cams;
        if (!(ls >> gt.name)) continue;
        if (!(ls >> gt.completion_ts >> parts >> cams))
            throw Error("ground truth line " + std::to_string(lineno) +
                        ": expected 'name ts ids cams'");
        std::istringstream ps(parts), cs(cams);
        std::string tok;
        while (std::getline(ps, tok, ','))
            if (!tok.empty()) gt.participants.insert(tok);
        while (std::getline(cs, tok, ','))
            if (!tok.empty()) gt.cameras.insert(tok);
        out.push_back(std::move(gt));
    }
    return out;
}

inline std::string format_ground_truth(const std::vector<GroundTruthActivity>& gts) {
    std::ostringstream os;
    for (const auto& gt : gts) {
        os << gt.name << " " << fmt_time(gt.completion_ts) << " ";
        bool first = true;
        for (const auto& p : gt.participants) {
            if (!first) os << ",";
            first = false;
            os << p;
        }
        os << " ";
        first = true;
        for (const auto& c : gt.cameras) {
            if (!first) os << ",";
            first = false;
            os << c;
        }
        os << "\n";
    }
    return os.str();
}

// A detected event reduced to what scoring needs.
struct ScoredEvent {
    std::string name;
    TimeS completion_ts = 0.0;
    TimeS detection_ts = 0.0;
    std::set<std::string> participants;
    std::string bindings_sig;
};

inline ScoredEvent to_scored(const ActivityEvent& ev,
                             const std::map<Entity, std::string>& display) {
    ScoredEvent s;
    s.name = ev.activity;
    s.completion_ts = ev.completion_ts;
    s.detection_ts = ev.detection_ts;
    std::ostringstream sig;
    for (const auto& [var, ent] : ev.bindings) {
        const auto it = display.find(ent);
        const std::string label = it != display.end() ? it->second : to_string(ent);
        s.participants.insert(label);
        sig << var << "=" << label << ",";
    }
    s.bindings_sig = sig.str();
    return s;
}

// Parses one line of the run event log:
//   activity completion_ts detection_ts var=label,... node:[t1,t2],...
inline ScoredEvent parse_event_line(const std::string& line, int lineno) {
    std::istringstream ls(line);
    ScoredEvent s;
    std::string bindings;
    if (!(ls >> s.name >> s.completion_ts >> s.detection_ts >> bindings))
        throw Error("event log line " + std::to_string(lineno) + ": malformed");
    s.bindings_sig = bindings;
    std::istringstream bs(bindings);
    std::string tok;
    while (std::getline(bs, tok, ',')) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) s.participants.insert(tok.substr(eq + 1));
    }
    return s;
}

inline std::vector<ScoredEvent> parse_event_log(std::istream& in) {
    std::vector<ScoredEvent> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        out.push_back(parse_event_line(line, lineno));
    }
    return out;
}

// Collapses repeated reports of one activity: same name and bindings within
// the tolerance window of the kept representative.
inline std::vector<ScoredEvent> dedupe_events(std::vector<ScoredEvent> events, TimeS tolerance_s) {
    std::stable_sort(events.begin(), events.end(), [](const ScoredEvent& a, const ScoredEvent& b) {
        if (a.completion_ts != b.completion_ts) return a.completion_ts < b.completion_ts;
        if (a.name != b.name) return a.name < b.name;
        return a.bindings_sig < b.bindings_sig;
    });
    std::vector<ScoredEvent> kept;
    for (const auto& ev : events) {
        bool dup = false;
        for (const auto& k : kept) {
            if (k.name == ev.name && k.bindings_sig == ev.bindings_sig &&
                std::abs(k.completion_ts - ev.completion_ts) <= tolerance_s) {
                dup = true;
                break;
            }
        }
        if (!dup) kept.push_back(ev);
    }
    return kept;
}

struct ActivityTally {
    int tp = 0, fp = 0, fn = 0;
};

struct ScoreReport {
    std::map<std::string, ActivityTally> per_activity;
    int tp = 0, fp = 0, fn = 0;
    std::optional<double> precision;  // absent when tp + fp == 0
    std::optional<double> recall;     // absent when tp + fn == 0
    double latency_mean_s = 0.0;
    double latency_p50_s = 0.0;
    double latency_max_s = 0.0;

    std::string text() const {
        std::ostringstream os;
        os << "tp=" << tp << "\nfp=" << fp << "\nfn=" << fn << "\n";
        os << "precision=" << (precision ? fmt_num(*precision) : "undefined") << "\n";
        os << "recall=" << (recall ? fmt_num(*recall) : "undefined") << "\n";
        os << "latency_mean_s=" << fmt_num(latency_mean_s) << "\n";
        os << "latency_p50_s=" << fmt_num(latency_p50_s) << "\n";
        os << "latency_max_s=" << fmt_num(latency_max_s) << "\n";
        for (const auto& [name, t] : per_activity)
            os << "activity." << name << ".tp=" << t.tp << "\nactivity." << name
               << ".fp=" << t.fp << "\nactivity." << name << ".fn=" << t.fn << "\n";
        return os.str();
    }
};

// Greedy one-to-one matching of detections to ground truth: equal activity
// name, overlapping participant sets, timestamp difference within tolerance.
// Events are deduplicated first so repeated reports of one match don't inflate
// false positives.
inline ScoreReport score(std::vector<ScoredEvent> events,
                         const std::vector<GroundTruthActivity>& gts, TimeS tolerance_s = 2.0) {
    ScoreReport rep;
    events = dedupe_events(std::move(events), tolerance_s);

    std::vector<bool> gt_used(gts.size(), false);
    for (const auto& ev : events) {
        int best = -1;
        double best_diff = 0.0;
        for (size_t i = 0; i < gts.size(); ++i) {
            if (gt_used[i] || gts[i].name != ev.name) continue;
            const double diff = std::abs(gts[i].completion_ts - ev.completion_ts);
            if (diff > tolerance_s) continue;
            bool overlap = false;
            for (const auto& p : ev.participants)
                if (gts[i].participants.count(p)) { overlap = true; break; }
            if (!overlap) continue;
            if (best < 0 || diff < best_diff) {
                best = static_cast<int>(i);
                best_diff = diff;
            }
        }
        if (best >= 0) {
            gt_used[static_cast<size_t>(best)] = true;
            ++rep.tp;
            ++rep.per_activity[ev.name].tp;
        } else {
            ++rep.fp;
            ++rep.per_activity[ev.name].fp;
        }
    }
    for (size_t i = 0; i < gts.size(); ++i) {
        if (!gt_used[i]) {
            ++rep.fn;
            ++rep.per_activity[gts[i].name].fn;
        }
    }
    if (rep.tp + rep.fp > 0)
        rep.precision = static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fp);
    if (rep.tp + rep.fn > 0)
        rep.recall = static_cast<double>(rep.tp) / static_cast<double>(rep.tp + rep.fn);

    std::vector<double> lat;
    for (const auto& ev : events) lat.push_back(ev.detection_ts - ev.completion_ts);
    std::sort(lat.begin(), lat.end());
    if (!lat.empty()) {
        rep.latency_mean_s = std::accumulate(lat.begin(), lat.end(), 0.0) /
                             static_cast<double>(lat.size());
        rep.latency_p50_s = lat[lat.size() / 2];
        rep.latency_max_s = lat.back();
    }
    return rep;
}

inline std::vector<ScoredEvent> scored_from_run(const RunResult& run) {
    std::vector<ScoredEvent> out;
    out.reserve(run.events.size());
    for (const auto& ev : run.events) out.push_back(to_scored(ev, run.entity_display));
    return out;
}

}  // namespace actgraph
