#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "actgraph/camera.hpp"
#include "actgraph/oracle.hpp"
#include "actgraph/topology.hpp"
#include "actgraph/tube.hpp"

namespace actgraph {

struct TrackerConfig {
    double theta_iou = 0.3;        // minimum IoU for greedy box association
    TimeS gap_max_s = 2.0;         // max silent gap before a tube is closed
    double kappa = 1.5;            // box-continuity factor for occlusion rejoin
    TimeS gap_occlusion_s = 20.0;  // max silent gap bridged by local re-id
};

// Greedy position-only association: the same-label open tube from this camera
// that maximizes IoU against its last box, if IoU clears theta and the time
// gap is within gap_max. Ties break toward the lower tube id.
inline std::optional<TubeId> associate(const DetectionEvent& ev, const TubeStore& store,
                                       const std::vector<TubeId>& open_tubes,
                                       const TrackerConfig& cfg) {
    std::optional<TubeId> best;
    double best_iou = 0.0;
    for (TubeId id : open_tubes) {
        const Tube& t = store.tube(id);
        if (t.label != ev.label || t.camera_id != ev.camera_id) continue;
        if (ev.timestamp - t.end_ts() > cfg.gap_max_s) continue;
        const double overlap = iou(t.boxes.back().box, ev.box);
        if (overlap < cfg.theta_iou) continue;
        if (!best || overlap > best_iou || (overlap == best_iou && id < *best)) {
            best = id;
            best_iou = overlap;
        }
    }
    return best;
}

// Builds tubes from detection streams and resolves identities: first against
// recently ended tubes in the same camera (occlusion rejoin), then against
// tubes at topology neighbors whose end falls inside the travel window.
class TubeTracker {
public:
    TubeTracker(TrackerConfig cfg, TubeStore& store, CameraFleet& fleet, Oracle& oracle,
                const CameraTopology& topo)
        : cfg_(cfg), store_(store), fleet_(fleet), oracle_(oracle), topo_(topo) {}

    const TrackerConfig& config() const { return cfg_; }

    TubeId ingest_box(const DetectionEvent& ev) {
        fleet_.camera(ev.camera_id).note_detection(ev);
        store_.close_stale(ev.timestamp, cfg_.gap_max_s);

        const auto open = store_.open_tubes_in(ev.camera_id);
        if (const auto existing = associate(ev, store_, open, cfg_)) {
            store_.append_box(*existing, ev);
            return *existing;
        }

        const TubeId id = store_.create_tube(ev);
        if (ev.label != "person") return id;  // only people are re-identified

        const auto crop =
            fleet_.camera(ev.camera_id).try_request_crop(ev.frame_index, ev.box_ordinal,
                                                         ev.timestamp);
        if (!crop) return id;  // crop already discarded; identity stays unset
        store_.set_first_crop(id, *crop);

        std::optional<IdentityId> identity = reidentify_local(id, *crop);
        if (!identity) identity = reidentify_cross(id, *crop);
        store_.assign_identity(id, identity ? *identity : store_.alloc_identity());
        return id;
    }

    // Occlusion rejoin within one camera: candidates ended at most
    // gap_occlusion ago and pass the box-continuity check. A match closes the
    // old tube (it was idle) before the identity transfers.
    std::optional<IdentityId> reidentify_local(TubeId tube_id, const CropHandle& crop) {
        const Tube& fresh = store_.tube(tube_id);
        std::vector<TubeId> candidates;
        for (TubeId id : store_.tubes_in_camera(fresh.camera_id)) {
            if (id == tube_id) continue;
            const Tube& old = store_.tube(id);
            if (!old.is_person() || !old.identity || !old.first_crop) continue;
            const TimeS gap = fresh.start_ts() - old.end_ts();
            if (gap <= 0 || gap > cfg_.gap_occlusion_s) continue;
            const Box& last = old.boxes.back().box;
            const Box& first = fresh.boxes.front().box;
            const double limit = cfg_.kappa * std::max(last.max_dim(), first.max_dim());
            if (center_distance(last, first) > limit) continue;
            // The identity may have moved on to another open tube here; that
            // tube keeps the claim.
            bool held_elsewhere = false;
            for (TubeId other : store_.tubes_with_identity(*old.identity)) {
                const Tube& t = store_.tube(other);
                if (other != id && !t.closed && t.camera_id == fresh.camera_id)
                    held_elsewhere = true;
            }
            if (held_elsewhere) continue;
            candidates.push_back(id);
        }
        sort_candidates(candidates);
        for (TubeId id : candidates) {
            const Tube& old = store_.tube(id);
            if (oracle_.same_identity(*old.first_crop, crop)) {
                if (!old.closed) store_.close_tube(id);
                return old.identity;
            }
        }
        return std::nullopt;
    }

    // Cross-camera re-identification, scoped to topology neighbors whose tubes
    // ended inside [start - max_travel, start - min_travel].
    std::optional<IdentityId> reidentify_cross(TubeId tube_id, const CropHandle& crop) {
        const Tube& fresh = store_.tube(tube_id);
        std::vector<TubeId> candidates;
        for (const auto& neighbor : topo_.neighbors(fresh.camera_id)) {
            const TravelWindow* w = topo_.window(fresh.camera_id, neighbor);
            if (!w) continue;
            for (TubeId id : store_.tubes_in_camera(neighbor)) {
                const Tube& old = store_.tube(id);
                if (!old.is_person() || !old.identity || !old.first_crop) continue;
                const TimeS gap = fresh.start_ts() - old.end_ts();
                if (gap < w->min_travel_s || gap > w->max_travel_s) continue;
                // An identity still open in this camera cannot arrive from a
                // neighbor; the idle local tube keeps its claim.
                bool open_here = false;
                for (TubeId other : store_.tubes_with_identity(*old.identity)) {
                    const Tube& t = store_.tube(other);
                    if (!t.closed && t.camera_id == fresh.camera_id) open_here = true;
                }
                if (open_here) continue;
                candidates.push_back(id);
            }
        }
        sort_candidates(candidates);
        for (TubeId id : candidates) {
            const Tube& old = store_.tube(id);
            if (oracle_.same_identity(*old.first_crop, crop)) {
                for (TubeId other : store_.tubes_with_identity(*old.identity)) {
                    const Tube& t = store_.tube(other);
                    if (!t.closed && t.camera_id != fresh.camera_id)
                        ++store_.concurrent_identity_claims;
                }
                return old.identity;
            }
        }
        return std::nullopt;
    }

private:
    void sort_candidates(std::vector<TubeId>& ids) const {
        std::sort(ids.begin(), ids.end(), [this](TubeId a, TubeId b) {
            const TimeS ea = store_.tube(a).end_ts();
            const TimeS eb = store_.tube(b).end_ts();
            if (ea != eb) return ea > eb;  // most recent first
            return a < b;
        });
    }

    TrackerConfig cfg_;
    TubeStore& store_;
    CameraFleet& fleet_;
    Oracle& oracle_;
    const CameraTopology& topo_;
};

}  // namespace actgraph
