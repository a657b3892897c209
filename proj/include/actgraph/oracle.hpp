#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "actgraph/camera.hpp"
#include "actgraph/core.hpp"
#include "actgraph/vocab.hpp"

namespace actgraph {

struct OracleConfig {
    double p_action = 1.0;        // probability an action query returns ground truth
    double p_reid = 1.0;          // probability a re-id query returns ground truth
    double tau = 0.5;             // confidence threshold for accepting an action label
    std::uint64_t seed = 1;
    double action_cost_s = 0.040; // model inference time per chunk
    int gpu_workers = 2;

    void check() const {
        if (p_action < 0 || p_action > 1 || p_reid < 0 || p_reid > 1)
            throw Error("oracle: probabilities must be within [0,1]");
        if (!(tau > 0) || !(tau < 1)) throw Error("oracle: tau must be within (0,1)");
        if (gpu_workers < 1) throw Error("oracle: gpu_workers must be >= 1");
    }
};

struct ActionLabel {
    std::string name;
    double confidence = 0.0;
};

struct ActionReport {
    TubeId tube_id = 0;
    int chunk_index = 0;
    std::vector<ActionLabel> labels;

    bool reports(const std::string& label, double tau) const {
        for (const auto& l : labels)
            if (l.name == label && l.confidence > tau) return true;
        return false;
    }
};

namespace detail {

// splitmix64; platform-independent unlike std::hash.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_str(std::uint64_t h, const std::string& s) {
    for (unsigned char c : s) h = mix64(h ^ c);
    return mix64(h);
}

inline double unit_double(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

// Stand-in for the action-detection and re-identification models. Each answer
// is a pure function of (seed, query key): with probability p_* the ground
// truth is returned, otherwise a deterministic wrong answer. Keying on the
// query rather than a shared stream keeps answers independent of query order,
// so deferred and eager schedules see identical results.
class Oracle {
public:
    Oracle(OracleConfig cfg, const Vocabulary& vocab) : cfg_(cfg), vocab_(vocab) {
        cfg_.check();
        worker_available_.assign(static_cast<size_t>(cfg_.gpu_workers), 0.0);
        worker_busy_.assign(static_cast<size_t>(cfg_.gpu_workers), 0.0);
    }

    const OracleConfig& config() const { return cfg_; }

    // Queries the action model for one chunk. `ready_time` is the simulated
    // instant the chunk's data became available; the call occupies one worker
    // for action_cost_s and the returned finish time feeds detection latency.
    struct ActionAnswer {
        ActionReport report;
        TimeS finish_time = 0.0;
    };

    ActionAnswer detect_actions(TubeId tube_id, int chunk_index,
                                const std::set<std::string>& gt_actions, TimeS ready_time) {
        ActionAnswer out;
        out.report.tube_id = tube_id;
        out.report.chunk_index = chunk_index;

        std::uint64_t h = detail::mix64(cfg_.seed ^ 0xac71ull);
        h = detail::mix64(h ^ static_cast<std::uint64_t>(tube_id));
        h = detail::mix64(h ^ static_cast<std::uint64_t>(chunk_index));
        const bool truthful = detail::unit_double(h) < cfg_.p_action;
        if (truthful) {
            for (const auto& a : gt_actions) out.report.labels.push_back({a, 1.0});
        } else if (!gt_actions.empty()) {
            // Adversarial failure: swap the true labels for one wrong one. Idle
            // chunks fail silently — a broken detector then never confirms an
            // activity end to end, it only corrupts real ones.
            std::vector<std::string> wrong;
            for (const auto& a : vocab_.actions)
                if (!gt_actions.count(a)) wrong.push_back(a);
            if (!wrong.empty()) {
                const std::uint64_t pick = detail::mix64(h ^ 0x77f00dull);
                out.report.labels.push_back({wrong[pick % wrong.size()], 1.0});
            }
        }

        {
            std::lock_guard<std::mutex> lock(mu_);
            const size_t w = static_cast<size_t>(dispatch_seq_ %
                                                 static_cast<std::uint64_t>(cfg_.gpu_workers));
            ++dispatch_seq_;
            const TimeS start = std::max(worker_available_[w], ready_time);
            worker_available_[w] = start + cfg_.action_cost_s;
            worker_busy_[w] += cfg_.action_cost_s;
            out.finish_time = worker_available_[w];
            ++action_calls_;
        }
        return out;
    }

    // Whether two crops show the same person. Keyed on the unordered crop pair.
    bool same_identity(const CropHandle& a, const CropHandle& b) {
        std::uint64_t ka = crop_key(a), kb = crop_key(b);
        if (ka > kb) std::swap(ka, kb);
        std::uint64_t h = detail::mix64(cfg_.seed ^ 0x5e1dull);
        h = detail::mix64(h ^ ka);
        h = detail::mix64(h ^ kb);
        const bool truthful = detail::unit_double(h) < cfg_.p_reid;
        const bool gt = !a.gt_identity.empty() && a.gt_identity == b.gt_identity;
        ++reid_calls_;
        return truthful ? gt : !gt;
    }

    struct Ledger {
        std::uint64_t action_calls = 0;
        std::uint64_t reid_calls = 0;
        double total_cost_s = 0.0;
        std::vector<double> worker_busy_s;
    };

    Ledger ledger() const {
        std::lock_guard<std::mutex> lock(mu_);
        Ledger l;
        l.action_calls = action_calls_;
        l.reid_calls = reid_calls_;
        l.total_cost_s = static_cast<double>(action_calls_) * cfg_.action_cost_s;
        l.worker_busy_s = worker_busy_;
        return l;
    }

private:
    static std::uint64_t crop_key(const CropHandle& c) {
        std::uint64_t h = detail::hash_str(0x9277ull, c.camera_id);
        h = detail::mix64(h ^ static_cast<std::uint64_t>(c.frame_index));
        h = detail::mix64(h ^ static_cast<std::uint64_t>(c.box_ordinal));
        return h;
    }

    OracleConfig cfg_;
    Vocabulary vocab_;

    mutable std::mutex mu_;
    std::uint64_t dispatch_seq_ = 0;
    std::vector<TimeS> worker_available_;
    std::vector<double> worker_busy_;
    std::atomic<std::uint64_t> action_calls_{0};
    std::atomic<std::uint64_t> reid_calls_{0};
};

}  // namespace actgraph
