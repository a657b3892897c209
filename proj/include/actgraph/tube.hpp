#pragma once

#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "actgraph/camera.hpp"
#include "actgraph/core.hpp"
#include "actgraph/trace.hpp"

namespace actgraph {

struct TubeBox {
    TimeS ts = 0.0;
    std::int64_t frame_index = 0;
    int box_ordinal = 0;
    Box box;
    std::string gt_identity;
    std::vector<std::string> gt_actions;
};

// A time-ordered box sequence for one object in one camera — the unit all
// matching operates on.
struct Tube {
    TubeId tube_id = 0;
    std::string camera_id;
    std::string label;
    std::vector<TubeBox> boxes;
    std::optional<IdentityId> identity;
    bool closed = false;

    // First-box crop handle, kept for later re-identification queries against
    // this tube. Absent when the lazy retrieval failed.
    std::optional<CropHandle> first_crop;

    TimeS start_ts() const { return boxes.front().ts; }
    TimeS end_ts() const { return boxes.back().ts; }
    Interval span() const { return {start_ts(), end_ts()}; }
    bool is_person() const { return label == "person"; }

    Entity entity() const {
        if (!is_person()) return {Entity::Kind::ObjectTube, tube_id};
        if (identity) return {Entity::Kind::PersonIdentity, *identity};
        return {Entity::Kind::PersonAnon, tube_id};
    }
};

// Fixed-duration slice of a tube; the granularity of proximity tests and
// action-oracle queries. The final chunk is clipped to the tube's end.
struct Chunk {
    TubeId tube_id = 0;
    int index = 0;
    Interval interval;
    std::vector<TubeBox> boxes;

    std::set<std::string> gt_actions() const {
        std::set<std::string> out;
        for (const auto& b : boxes) out.insert(b.gt_actions.begin(), b.gt_actions.end());
        return out;
    }
};

inline std::vector<Chunk> make_chunks(const Tube& tube, TimeS t_chunk) {
    std::vector<Chunk> out;
    if (tube.boxes.empty()) return out;
    const TimeS start = tube.start_ts();
    const TimeS end = tube.end_ts();
    const int count = static_cast<int>(std::floor((end - start) / t_chunk)) + 1;
    out.resize(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        out[static_cast<size_t>(i)].tube_id = tube.tube_id;
        out[static_cast<size_t>(i)].index = i;
        out[static_cast<size_t>(i)].interval = {start + i * t_chunk,
                                                std::min(start + (i + 1) * t_chunk, end)};
    }
    for (const auto& b : tube.boxes) {
        int idx = static_cast<int>(std::floor((b.ts - start) / t_chunk));
        idx = std::clamp(idx, 0, count - 1);
        out[static_cast<size_t>(idx)].boxes.push_back(b);
    }
    return out;
}

// In-memory tube store with per-camera and per-identity indices. Writes are
// serialized; the batch pipeline drives it single-threaded for bit-identical
// results.
class TubeStore {
public:
    TubeId create_tube(const DetectionEvent& ev) {
        std::lock_guard<std::mutex> lock(mu_);
        const TubeId id = next_tube_id_++;
        Tube t;
        t.tube_id = id;
        t.camera_id = ev.camera_id;
        t.label = ev.label;
        t.boxes.push_back({ev.timestamp, ev.frame_index, ev.box_ordinal, ev.box, ev.gt_identity,
                           ev.gt_actions});
        tubes_.emplace(id, std::move(t));
        open_by_camera_[ev.camera_id].insert(id);
        return id;
    }

    void append_box(TubeId id, const DetectionEvent& ev) {
        std::lock_guard<std::mutex> lock(mu_);
        Tube& t = tube_mut(id);
        if (t.closed) throw Error("append to closed tube " + std::to_string(id));
        t.boxes.push_back({ev.timestamp, ev.frame_index, ev.box_ordinal, ev.box, ev.gt_identity,
                           ev.gt_actions});
    }

    void set_first_crop(TubeId id, const CropHandle& crop) {
        std::lock_guard<std::mutex> lock(mu_);
        tube_mut(id).first_crop = crop;
    }

    IdentityId alloc_identity() {
        std::lock_guard<std::mutex> lock(mu_);
        return next_identity_id_++;
    }

    void assign_identity(TubeId id, IdentityId identity) {
        std::lock_guard<std::mutex> lock(mu_);
        Tube& t = tube_mut(id);
        if (t.identity) by_identity_[*t.identity].erase(id);
        if (!t.closed) {
            // At most one open tube may carry an identity within one camera.
            for (TubeId other : by_identity_[identity]) {
                const Tube& o = tubes_.at(other);
                if (!o.closed && o.camera_id == t.camera_id)
                    throw Error("identity " + std::to_string(identity) +
                                " already open on camera " + t.camera_id);
            }
        }
        t.identity = identity;
        by_identity_[identity].insert(id);
    }

    void close_tube(TubeId id) {
        std::lock_guard<std::mutex> lock(mu_);
        Tube& t = tube_mut(id);
        if (t.closed) return;
        t.closed = true;
        open_by_camera_[t.camera_id].erase(id);
    }

    // Closes every open tube idle since before now - max_gap; returns the ids.
    std::vector<TubeId> close_stale(TimeS now, TimeS max_gap) {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<TubeId> closed;
        for (auto& [cam, ids] : open_by_camera_) {
            for (auto it = ids.begin(); it != ids.end();) {
                Tube& t = tube_mut(*it);
                if (t.end_ts() < now - max_gap) {
                    t.closed = true;
                    closed.push_back(*it);
                    it = ids.erase(it);
                } else {
                    ++it;
                }
            }
        }
        return closed;
    }

    std::vector<TubeId> close_all() {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<TubeId> closed;
        for (auto& [cam, ids] : open_by_camera_) {
            for (TubeId id : ids) {
                tube_mut(id).closed = true;
                closed.push_back(id);
            }
            ids.clear();
        }
        return closed;
    }

    const Tube& tube(TubeId id) const {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = tubes_.find(id);
        if (it == tubes_.end()) throw Error("unknown tube " + std::to_string(id));
        return it->second;
    }

    std::vector<TubeId> open_tubes_in(const std::string& camera) const {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = open_by_camera_.find(camera);
        if (it == open_by_camera_.end()) return {};
        return {it->second.begin(), it->second.end()};
    }

    std::vector<TubeId> tubes_in_camera(const std::string& camera) const {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<TubeId> out;
        for (const auto& [id, t] : tubes_)
            if (t.camera_id == camera) out.push_back(id);
        return out;
    }

    std::vector<TubeId> tubes_with_identity(IdentityId identity) const {
        std::lock_guard<std::mutex> lock(mu_);
        const auto it = by_identity_.find(identity);
        if (it == by_identity_.end()) return {};
        return {it->second.begin(), it->second.end()};
    }

    std::vector<TubeId> all_tube_ids() const {
        std::lock_guard<std::mutex> lock(mu_);
        std::vector<TubeId> out;
        out.reserve(tubes_.size());
        for (const auto& [id, t] : tubes_) out.push_back(id);
        return out;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return tubes_.size();
    }

    // Count of cross-camera matches that attached an identity while another
    // tube elsewhere still carried it open.
    int concurrent_identity_claims = 0;

private:
    Tube& tube_mut(TubeId id) {
        const auto it = tubes_.find(id);
        if (it == tubes_.end()) throw Error("unknown tube " + std::to_string(id));
        return it->second;
    }

    mutable std::mutex mu_;
    std::map<TubeId, Tube> tubes_;
    std::map<std::string, std::set<TubeId>> open_by_camera_;
    std::map<IdentityId, std::set<TubeId>> by_identity_;
    TubeId next_tube_id_ = 1;
    IdentityId next_identity_id_ = 1;
};

}  // namespace actgraph
