#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/core.hpp"

namespace actgraph {

// One labeled detection at one camera at one timestamp — the unit of trace
// ingestion. gt_identity / gt_actions carry the evaluation annotations and are
// visible only to the oracles and the scorer, never to the matching path.
struct DetectionEvent {
    std::string camera_id;
    std::int64_t frame_index = 0;
    TimeS timestamp = 0.0;
    Box box;
    std::string label;
    std::string gt_identity;           // empty when absent
    std::vector<std::string> gt_actions;

    // Ordinal among detections that share (camera, frame); addresses the crop
    // in the camera cache.
    int box_ordinal = 0;
};

using CameraStreams = std::map<std::string, std::vector<DetectionEvent>>;

namespace detail {

inline DetectionEvent parse_trace_line(const std::string& line, int lineno) {
    std::istringstream ls(line);
    DetectionEvent ev;
    std::string gt_id, gt_acts;
    if (!(ls >> ev.camera_id >> ev.frame_index >> ev.timestamp >> ev.box.x >> ev.box.y >>
          ev.box.w >> ev.box.h >> ev.label))
        throw TraceFormatError("trace line " + std::to_string(lineno) + ": expected "
                               "'camera frame ts x y w h label [gt_identity] [gt_actions]'");
    if (ls >> gt_id && gt_id != "-") ev.gt_identity = gt_id;
    if (ls >> gt_acts && gt_acts != "-") {
        std::istringstream as(gt_acts);
        std::string a;
        while (std::getline(as, a, ','))
            if (!a.empty()) ev.gt_actions.push_back(a);
    }
    if (ev.frame_index < 0)
        throw TraceFormatError("trace line " + std::to_string(lineno) + ": negative frame index");
    if (ev.box.w <= 0 || ev.box.h <= 0)
        throw TraceFormatError("trace line " + std::to_string(lineno) + ": box needs w > 0 and h > 0");
    if (ev.box.x < 0 || ev.box.y < 0)
        throw TraceFormatError("trace line " + std::to_string(lineno) + ": box origin must be non-negative");
    return ev;
}

}  // namespace detail

// Loads a trace and partitions it into per-camera streams ordered by
// (timestamp, frame_index). Within one camera, timestamps and frame indices
// must be non-decreasing in file order (several detections may share a frame).
inline CameraStreams load_trace(std::istream& in) {
    CameraStreams streams;
    std::map<std::string, std::pair<std::int64_t, TimeS>> last;  // camera → (frame, ts)
    std::map<std::pair<std::string, std::int64_t>, int> ordinals;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
        if (blank) continue;

        DetectionEvent ev = detail::parse_trace_line(line, lineno);
        const auto it = last.find(ev.camera_id);
        if (it != last.end()) {
            if (ev.timestamp < it->second.second)
                throw NonMonotoneTimestamp("trace line " + std::to_string(lineno) + ": timestamp " +
                                           fmt_time(ev.timestamp) + " before " +
                                           fmt_time(it->second.second) + " on camera " + ev.camera_id);
            if (ev.frame_index < it->second.first)
                throw NonMonotoneTimestamp("trace line " + std::to_string(lineno) +
                                           ": frame index decreases on camera " + ev.camera_id);
        }
        last[ev.camera_id] = {ev.frame_index, ev.timestamp};
        ev.box_ordinal = ordinals[{ev.camera_id, ev.frame_index}]++;
        streams[ev.camera_id].push_back(ev);
    }
    return streams;
}

inline CameraStreams load_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw TraceFormatError("cannot open trace file: " + path);
    return load_trace(in);
}

inline std::string format_trace_line(const DetectionEvent& ev) {
    std::ostringstream os;
    os << ev.camera_id << " " << ev.frame_index << " " << fmt_time(ev.timestamp) << " "
       << fmt_time(ev.box.x) << " " << fmt_time(ev.box.y) << " " << fmt_time(ev.box.w) << " "
       << fmt_time(ev.box.h) << " " << ev.label;
    os << " " << (ev.gt_identity.empty() ? "-" : ev.gt_identity);
    if (ev.gt_actions.empty()) {
        os << " -";
    } else {
        os << " ";
        for (size_t i = 0; i < ev.gt_actions.size(); ++i) {
            if (i) os << ",";
            os << ev.gt_actions[i];
        }
    }
    return os.str();
}

// Merges the per-camera streams into one global replay order:
// (timestamp, camera_id, original per-camera order).
inline std::vector<DetectionEvent> merged_order(const CameraStreams& streams) {
    std::vector<DetectionEvent> all;
    for (const auto& [cam, events] : streams)
        all.insert(all.end(), events.begin(), events.end());
    std::stable_sort(all.begin(), all.end(), [](const DetectionEvent& a, const DetectionEvent& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.camera_id < b.camera_id;
    });
    return all;
}

}  // namespace actgraph
