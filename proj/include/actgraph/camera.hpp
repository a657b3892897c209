#pragma once

#include <atomic>
#include <cmath>
#include <deque>
#include <memory>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "actgraph/core.hpp"
#include "actgraph/trace.hpp"

namespace actgraph {

// Raw RGB crop size; keeps byte ratios deterministic without an encoder model.
inline std::uint64_t crop_bytes(const Box& b) {
    return static_cast<std::uint64_t>(std::llround(b.w * b.h * 3.0));
}

// Box coordinates, label and ids travel to the edge for every detection in
// every mode.
constexpr std::uint64_t kMetadataBytesPerBox = 32;

// A retrieved crop. The simulated image carries the ground-truth annotations
// the oracles consume.
struct CropHandle {
    std::string camera_id;
    std::int64_t frame_index = 0;
    int box_ordinal = 0;
    std::uint64_t bytes = 0;
    std::string gt_identity;
    std::vector<std::string> gt_actions;
};

// Simulates one camera's bounded crop cache. Crops enter at detection time and
// leave FIFO by frame order once the byte limit is hit. A crop requested after
// eviction is gone for good: the retrieval fails and is counted, mirroring a
// device that discarded the frame.
class CameraNode {
public:
    CameraNode() = default;
    CameraNode(std::string camera_id, std::uint64_t cache_limit_bytes)
        : camera_id_(std::move(camera_id)), cache_limit_(cache_limit_bytes) {}

    const std::string& camera_id() const { return camera_id_; }

    void note_detection(const DetectionEvent& ev) {
        std::lock_guard<std::mutex> lock(mu_);
        metadata_bytes_ += kMetadataBytesPerBox;
        const Key key{ev.frame_index, ev.box_ordinal};
        Record rec;
        rec.bytes = crop_bytes(ev.box);
        rec.insert_ts = ev.timestamp;
        rec.gt_identity = ev.gt_identity;
        rec.gt_actions = ev.gt_actions;
        records_[key] = rec;
        fifo_.push_back(key);
        occupancy_ += rec.bytes;
        while (occupancy_ > cache_limit_ && !fifo_.empty()) {
            const Key victim = fifo_.front();
            fifo_.pop_front();
            Record& v = records_[victim];
            if (v.evict_ts == kNever) {
                v.evict_ts = ev.timestamp;
                occupancy_ -= v.bytes;
            }
        }
        if (occupancy_ > cache_limit_)
            throw Error("camera " + camera_id_ + ": cache occupancy exceeds limit after eviction");
        peak_cache_ = std::max(peak_cache_.load(), occupancy_);
    }

    // Retrieves one crop at simulated time `sim_time`, charging its bytes on
    // first upload. Throws CacheMissError when the camera already dropped it.
    CropHandle request_crop(std::int64_t frame_index, int box_ordinal, TimeS sim_time) {
        std::lock_guard<std::mutex> lock(mu_);
        const Key key{frame_index, box_ordinal};
        const auto it = records_.find(key);
        if (it == records_.end())
            throw CacheMissError("camera " + camera_id_ + ": no crop recorded for frame " +
                                 std::to_string(frame_index) + " box " + std::to_string(box_ordinal));
        const Record& rec = it->second;
        CropHandle handle{camera_id_, frame_index, box_ordinal, rec.bytes, rec.gt_identity,
                          rec.gt_actions};
        if (uploaded_.count(key)) return handle;  // already edge-side, no new bytes
        if (rec.evict_ts != kNever && sim_time >= rec.evict_ts) {
            ++cache_misses_;
            throw CacheMissError("camera " + camera_id_ + ": crop for frame " +
                                 std::to_string(frame_index) + " box " +
                                 std::to_string(box_ordinal) + " was evicted");
        }
        uploaded_.insert(key);
        uploaded_crop_bytes_ += rec.bytes;
        return handle;
    }

    std::optional<CropHandle> try_request_crop(std::int64_t frame_index, int box_ordinal,
                                               TimeS sim_time) {
        try {
            return request_crop(frame_index, box_ordinal, sim_time);
        } catch (const CacheMissError&) {
            return std::nullopt;
        }
    }

    // Strawman path: charge the crop unconditionally, no cache consultation.
    void charge_eager_upload(const DetectionEvent& ev) {
        std::lock_guard<std::mutex> lock(mu_);
        const Key key{ev.frame_index, ev.box_ordinal};
        if (uploaded_.count(key)) return;
        uploaded_.insert(key);
        uploaded_crop_bytes_ += crop_bytes(ev.box);
    }

    std::uint64_t uploaded_crop_bytes() const { return uploaded_crop_bytes_; }
    std::uint64_t metadata_bytes() const { return metadata_bytes_; }
    std::uint64_t uploaded_bytes() const { return uploaded_crop_bytes_ + metadata_bytes_; }
    std::uint64_t peak_cache_bytes() const { return peak_cache_; }
    std::uint64_t cache_occupancy() const { return occupancy_; }
    std::uint64_t cache_misses() const { return cache_misses_; }

private:
    struct Key {
        std::int64_t frame;
        int ordinal;
        bool operator<(const Key& o) const {
            return frame != o.frame ? frame < o.frame : ordinal < o.ordinal;
        }
    };
    struct Record {
        std::uint64_t bytes = 0;
        TimeS insert_ts = 0.0;
        TimeS evict_ts = kNever;
        std::string gt_identity;
        std::vector<std::string> gt_actions;
    };

    static constexpr TimeS kNever = std::numeric_limits<TimeS>::infinity();

    std::string camera_id_;
    std::uint64_t cache_limit_ = 4ull << 30;

    mutable std::mutex mu_;
    std::map<Key, Record> records_;
    std::deque<Key> fifo_;
    std::set<Key> uploaded_;
    std::uint64_t occupancy_ = 0;
    std::atomic<std::uint64_t> uploaded_crop_bytes_{0};
    std::atomic<std::uint64_t> metadata_bytes_{0};
    std::atomic<std::uint64_t> peak_cache_{0};
    std::atomic<std::uint64_t> cache_misses_{0};
};

class CameraFleet {
public:
    explicit CameraFleet(std::uint64_t cache_limit_bytes = 4ull << 30)
        : cache_limit_(cache_limit_bytes) {}

    CameraNode& camera(const std::string& id) {
        const auto it = cameras_.find(id);
        if (it != cameras_.end()) return *it->second;
        auto node = std::make_unique<CameraNode>(id, cache_limit_);
        CameraNode& ref = *node;
        cameras_.emplace(id, std::move(node));
        return ref;
    }

    const std::map<std::string, std::unique_ptr<CameraNode>>& cameras() const { return cameras_; }

    std::uint64_t total_uploaded_bytes() const {
        std::uint64_t sum = 0;
        for (const auto& [id, cam] : cameras_) sum += cam->uploaded_bytes();
        return sum;
    }
    std::uint64_t total_crop_bytes() const {
        std::uint64_t sum = 0;
        for (const auto& [id, cam] : cameras_) sum += cam->uploaded_crop_bytes();
        return sum;
    }
    std::uint64_t total_cache_misses() const {
        std::uint64_t sum = 0;
        for (const auto& [id, cam] : cameras_) sum += cam->cache_misses();
        return sum;
    }
    std::uint64_t max_peak_cache_bytes() const {
        std::uint64_t peak = 0;
        for (const auto& [id, cam] : cameras_) peak = std::max(peak, cam->peak_cache_bytes());
        return peak;
    }

private:
    std::uint64_t cache_limit_;
    std::map<std::string, std::unique_ptr<CameraNode>> cameras_;
};

// Total crop bytes the strawman uploads: every box once, cache never consulted.
inline std::uint64_t eager_upload_all(const CameraStreams& streams) {
    std::uint64_t sum = 0;
    for (const auto& [cam, events] : streams)
        for (const auto& ev : events) sum += crop_bytes(ev.box);
    return sum;
}

}  // namespace actgraph
