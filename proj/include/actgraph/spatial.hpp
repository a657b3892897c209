#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "actgraph/core.hpp"
#include "actgraph/topology.hpp"
#include "actgraph/tube.hpp"

namespace actgraph {

struct SpatialConfig {
    double delta = 0.5;            // proximity threshold on normalized edge distance
    TimeS t_chunk_s = 1.0;
    double eps_pos_px = 5.0;       // center movement at or below this counts as static
    TimeS d_stop_s = 1.0;          // minimum duration of a stop interval
    TimeS w_app_s = 2.0;           // look-back window for approach
    double eps_app_px = 20.0;      // required total decrease across the window
    double edge_margin_frac = 0.05;  // frame-border margin for the disappear scenario tag
};

// Two boxes are proximate when the edge gap, normalized by either box's larger
// dimension, is under delta. Bigger objects may be proximate at pixel
// distances that would separate small ones.
inline bool proximate(const Box& a, const Box& b, double delta) {
    const double d = edge_distance(a, b);
    return d / a.max_dim() < delta || d / b.max_dim() < delta;
}

// ── interval emission ───────────────────────────────────────────────────────

inline void coalesce(std::vector<Interval>& xs) {
    if (xs.empty()) return;
    std::sort(xs.begin(), xs.end());
    std::vector<Interval> merged;
    merged.push_back(xs.front());
    for (size_t i = 1; i < xs.size(); ++i) {
        if (xs[i].t1 <= merged.back().t2)
            merged.back().t2 = std::max(merged.back().t2, xs[i].t2);
        else
            merged.push_back(xs[i]);
    }
    xs = std::move(merged);
}

// Chunk pairs where a strict majority of cross-pair boxes are proximate,
// coalesced into maximal intervals.
inline std::vector<Interval> near_intervals(const Tube& a, const Tube& b,
                                            const std::vector<Chunk>& chunks_a,
                                            const std::vector<Chunk>& chunks_b,
                                            const SpatialConfig& cfg) {
    std::vector<Interval> out;
    if (a.camera_id != b.camera_id || a.tube_id == b.tube_id) return out;
    for (const auto& ca : chunks_a) {
        for (const auto& cb : chunks_b) {
            const auto common = intersect(ca.interval, cb.interval);
            if (!common) continue;
            int total = 0, close = 0;
            for (const auto& ba : ca.boxes)
                for (const auto& bb : cb.boxes) {
                    ++total;
                    if (proximate(ba.box, bb.box, cfg.delta)) ++close;
                }
            if (total > 0 && 2 * close > total) out.push_back(*common);
        }
    }
    coalesce(out);
    return out;
}

namespace detail {

// Pairwise distance samples over [from, to): at each timestamp either tube has
// a box, pair the latest boxes at or before it.
inline std::vector<std::pair<TimeS, double>> distance_samples(const Tube& a, const Tube& b,
                                                              TimeS from, TimeS to) {
    std::vector<TimeS> ts;
    for (const auto& box : a.boxes)
        if (box.ts >= from && box.ts < to) ts.push_back(box.ts);
    for (const auto& box : b.boxes)
        if (box.ts >= from && box.ts < to) ts.push_back(box.ts);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

    const auto latest_at = [](const Tube& t, TimeS when) -> const Box* {
        const Box* found = nullptr;
        for (const auto& box : t.boxes) {
            if (box.ts > when) break;
            found = &box.box;
        }
        return found;
    };

    std::vector<std::pair<TimeS, double>> out;
    for (TimeS t : ts) {
        const Box* ba = latest_at(a, t);
        const Box* bb = latest_at(b, t);
        if (ba && bb) out.push_back({t, edge_distance(*ba, *bb)});
    }
    return out;
}

}  // namespace detail

// A contact preceded by a closing movement: for each near interval starting at
// s, the pair distance over [s - w_app, s) must be non-increasing with a total
// decrease of at least eps_app. The emitted interval is the closing window
// ending at the contact instant.
inline std::vector<Interval> approach_intervals(const Tube& a, const Tube& b,
                                                const std::vector<Chunk>& chunks_a,
                                                const std::vector<Chunk>& chunks_b,
                                                const SpatialConfig& cfg) {
    std::vector<Interval> out;
    for (const auto& contact : near_intervals(a, b, chunks_a, chunks_b, cfg)) {
        const TimeS s = contact.t1;
        const auto samples = detail::distance_samples(a, b, s - cfg.w_app_s, s);
        if (samples.size() < 2) continue;
        bool monotone = true;
        for (size_t i = 1; i < samples.size(); ++i)
            if (samples[i].second > samples[i - 1].second) { monotone = false; break; }
        if (!monotone) continue;
        if (samples.front().second - samples.back().second < cfg.eps_app_px) continue;
        out.push_back({samples.front().first, s});
    }
    return out;
}

// Maximal intervals of consecutive static box pairs, kept when they last at
// least d_stop.
inline std::vector<Interval> stop_intervals(const Tube& tube, const SpatialConfig& cfg) {
    std::vector<Interval> out;
    const auto& boxes = tube.boxes;
    size_t i = 0;
    while (i + 1 < boxes.size()) {
        if (center_distance(boxes[i].box, boxes[i + 1].box) > cfg.eps_pos_px) { ++i; continue; }
        size_t j = i;
        while (j + 1 < boxes.size() &&
               center_distance(boxes[j].box, boxes[j + 1].box) <= cfg.eps_pos_px)
            ++j;
        const Interval run{boxes[i].ts, boxes[j].ts};
        if (run.length() >= cfg.d_stop_s) out.push_back(run);
        i = j;
    }
    return out;
}

// Maximal intervals of consecutive moving box pairs; the complement of stop
// runs up to shared transition frames.
inline std::vector<Interval> move_intervals(const Tube& tube, const SpatialConfig& cfg) {
    std::vector<Interval> out;
    const auto& boxes = tube.boxes;
    size_t i = 0;
    while (i + 1 < boxes.size()) {
        if (center_distance(boxes[i].box, boxes[i + 1].box) <= cfg.eps_pos_px) { ++i; continue; }
        size_t j = i;
        while (j + 1 < boxes.size() &&
               center_distance(boxes[j].box, boxes[j + 1].box) > cfg.eps_pos_px)
            ++j;
        out.push_back({boxes[i].ts, boxes[j].ts});
        i = j;
    }
    return out;
}

enum class DisappearScenario { LeftView, Interior };

// Which way the object vanished; informational only, both satisfy the node.
inline DisappearScenario disappear_scenario(const Tube& tube, const FrameGeometry& frame,
                                            const SpatialConfig& cfg) {
    const Box& last = tube.boxes.back().box;
    const double margin = cfg.edge_margin_frac * frame.width;
    const bool at_edge = last.x <= margin || last.y <= margin ||
                         last.x + last.w >= frame.width - margin ||
                         last.y + last.h >= frame.height - margin;
    return at_edge ? DisappearScenario::LeftView : DisappearScenario::Interior;
}

// Point interval at the end of a closed tube.
inline std::optional<Interval> disappear_interval(const Tube& tube) {
    if (!tube.closed || tube.boxes.empty()) return std::nullopt;
    return Interval{tube.end_ts(), tube.end_ts()};
}

inline std::optional<Interval> same_camera_interval(const Tube& a, const Tube& b) {
    if (a.camera_id != b.camera_id || a.tube_id == b.tube_id) return std::nullopt;
    return intersect(a.span(), b.span());
}

// Point interval at tube start when the tube's identity was carried earlier by
// a tube in a different camera.
inline std::optional<Interval> re_identified_interval(const Tube& tube, const TubeStore& store) {
    if (!tube.is_person() || !tube.identity) return std::nullopt;
    for (TubeId other_id : store.tubes_with_identity(*tube.identity)) {
        if (other_id == tube.tube_id) continue;
        const Tube& other = store.tube(other_id);
        if (other.camera_id == tube.camera_id) continue;
        if (other.start_ts() < tube.start_ts() ||
            (other.start_ts() == tube.start_ts() && other_id < tube.tube_id))
            return Interval{tube.start_ts(), tube.start_ts()};
    }
    return std::nullopt;
}

// ── operator interval stream ────────────────────────────────────────────────

// One operator match over concrete tubes; the unit the graph matcher consumes.
struct OpInterval {
    std::string op;                    // spatial operator or action label
    bool is_action = false;
    std::vector<TubeId> tubes;
    std::vector<Entity> entities;      // per operand
    std::vector<std::string> labels;   // per operand element label
    Interval interval;
    int chunk_index = -1;              // for action reports: the source chunk
};

inline bool op_interval_less(const OpInterval& a, const OpInterval& b) {
    if (a.interval.t2 != b.interval.t2) return a.interval.t2 < b.interval.t2;
    if (a.interval.t1 != b.interval.t1) return a.interval.t1 < b.interval.t1;
    if (a.op != b.op) return a.op < b.op;
    return a.tubes < b.tubes;
}

// Evaluates the requested operators over every closed tube (and same-camera
// tube pair) and returns the merged, completion-ordered interval stream.
inline std::vector<OpInterval> compute_op_intervals(const TubeStore& store,
                                                    const std::map<TubeId, std::vector<Chunk>>& chunks,
                                                    const std::set<std::string>& ops_needed,
                                                    const SpatialConfig& cfg) {
    std::vector<OpInterval> out;
    const auto ids = store.all_tube_ids();

    const auto emit_unary = [&](const Tube& t, const std::string& op, const Interval& iv) {
        out.push_back({op, false, {t.tube_id}, {t.entity()}, {t.label}, iv});
    };
    const auto emit_binary = [&](const Tube& a, const Tube& b, const std::string& op,
                                 const Interval& iv) {
        out.push_back({op, false, {a.tube_id, b.tube_id}, {a.entity(), b.entity()},
                       {a.label, b.label}, iv});
    };

    for (TubeId id : ids) {
        const Tube& t = store.tube(id);
        if (t.boxes.empty()) continue;
        if (ops_needed.count("stop"))
            for (const auto& iv : stop_intervals(t, cfg)) emit_unary(t, "stop", iv);
        if (ops_needed.count("move"))
            for (const auto& iv : move_intervals(t, cfg)) emit_unary(t, "move", iv);
        if (ops_needed.count("disappear"))
            if (const auto iv = disappear_interval(t)) emit_unary(t, "disappear", *iv);
        if (ops_needed.count("re-identified"))
            if (const auto iv = re_identified_interval(t, store)) emit_unary(t, "re-identified", *iv);
    }

    const bool want_near = ops_needed.count("near") != 0;
    const bool want_approach = ops_needed.count("approach") != 0;
    const bool want_same_cam = ops_needed.count("same-camera") != 0;
    if (want_near || want_approach || want_same_cam) {
        for (size_t i = 0; i < ids.size(); ++i) {
            const Tube& a = store.tube(ids[i]);
            if (a.boxes.empty()) continue;
            for (size_t j = i + 1; j < ids.size(); ++j) {
                const Tube& b = store.tube(ids[j]);
                if (b.boxes.empty() || a.camera_id != b.camera_id) continue;
                if (want_near || want_approach) {
                    const auto& ca = chunks.at(a.tube_id);
                    const auto& cb = chunks.at(b.tube_id);
                    if (want_near)
                        for (const auto& iv : near_intervals(a, b, ca, cb, cfg))
                            emit_binary(a, b, "near", iv);
                    if (want_approach)
                        for (const auto& iv : approach_intervals(a, b, ca, cb, cfg))
                            emit_binary(a, b, "approach", iv);
                }
                if (want_same_cam)
                    if (const auto iv = same_camera_interval(a, b))
                        emit_binary(a, b, "same-camera", *iv);
            }
        }
    }

    std::sort(out.begin(), out.end(), op_interval_less);
    return out;
}

}  // namespace actgraph
