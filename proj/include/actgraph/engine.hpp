#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/camera.hpp"
#include "actgraph/graph.hpp"
#include "actgraph/matcher.hpp"
#include "actgraph/oracle.hpp"
#include "actgraph/replay.hpp"
#include "actgraph/spatial.hpp"
#include "actgraph/topology.hpp"
#include "actgraph/tracker.hpp"
#include "actgraph/tube.hpp"

namespace actgraph {

enum class RunMode { Lazy, Strawman };

inline const char* run_mode_name(RunMode m) { return m == RunMode::Lazy ? "lazy" : "strawman"; }

struct EngineConfig {
    RunMode mode = RunMode::Lazy;
    double speed = kAsFastAsPossible;
    std::uint64_t cache_limit_bytes = 4ull << 30;
    TrackerConfig tracker;
    SpatialConfig spatial;
    OracleConfig oracle;
    int instance_cap = 10000;
    TimeS t_expire_s = 300.0;
};

struct RunInputs {
    CameraStreams streams;
    CameraTopology topology;
    std::vector<ActivityGraph> graphs;
    Vocabulary vocab;
};

struct RunResult {
    std::vector<ActivityEvent> events;
    std::vector<std::string> event_lines;             // spec'd event log, one per event
    std::map<std::string, std::string> accounting;    // stable key=value summary
    std::map<Entity, std::string> entity_display;     // entity → ground-truth-majority label
    MatcherStats matcher_stats;
    Oracle::Ledger ledger;
    double wall_seconds = 0.0;                        // excluded from accounting on purpose
    std::uint64_t trace_events = 0;

    std::string accounting_text() const {
        std::ostringstream os;
        for (const auto& [k, v] : accounting) os << k << "=" << v << "\n";
        return os.str();
    }
    std::string event_log_text() const {
        std::ostringstream os;
        for (const auto& l : event_lines) os << l << "\n";
        return os.str();
    }
};

namespace detail {

// Chunk reports flow through here. The cache makes every (tube, chunk) query
// hit the model at most once per run; the charging policy differs by mode:
// deferred runs upload the chunk's crops on first query, eager runs paid at
// ingest time.
class EngineQuerier : public ActionQuerier {
public:
    EngineQuerier(Oracle& oracle, CameraFleet& fleet, const TubeStore& store,
                  const std::map<TubeId, std::vector<Chunk>>& chunks, bool charge_crops)
        : oracle_(oracle), fleet_(fleet), store_(store), chunks_(chunks),
          charge_crops_(charge_crops) {}

    Result query(TubeId tube, int chunk_index, TimeS request_sim) override {
        const auto key = std::make_pair(tube, chunk_index);
        const auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;

        const auto& tube_chunks = chunks_.at(tube);
        const Chunk& chunk = tube_chunks.at(static_cast<size_t>(chunk_index));

        bool evaluable = true;
        if (charge_crops_) {
            size_t retrieved = 0;
            CameraNode& cam = fleet_.camera(store_.tube(tube).camera_id);
            for (const auto& b : chunk.boxes)
                if (cam.try_request_crop(b.frame_index, b.box_ordinal, request_sim)) ++retrieved;
            evaluable = !chunk.boxes.empty() && retrieved > 0;
        }

        Result res;
        if (evaluable) {
            const auto ans = oracle_.detect_actions(tube, chunk_index, chunk.gt_actions(),
                                                    request_sim);
            res.report = ans.report;
            res.finish = ans.finish_time;
        } else {
            // Every crop was already evicted: the model never runs.
            res.report.tube_id = tube;
            res.report.chunk_index = chunk_index;
            res.finish = request_sim;
        }
        cache_.emplace(key, res);
        return res;
    }

    std::uint64_t unique_chunks_queried() const { return cache_.size(); }

private:
    Oracle& oracle_;
    CameraFleet& fleet_;
    const TubeStore& store_;
    const std::map<TubeId, std::vector<Chunk>>& chunks_;
    bool charge_crops_;
    std::map<std::pair<TubeId, int>, Result> cache_;
};

inline std::string majority_gt(const std::vector<const Tube*>& tubes) {
    std::map<std::string, int> counts;
    for (const Tube* t : tubes)
        for (const auto& b : t->boxes)
            if (!b.gt_identity.empty()) ++counts[b.gt_identity];
    std::string best;
    int best_count = 0;
    for (const auto& [gt, n] : counts)
        if (n > best_count || (n == best_count && (best.empty() || gt < best))) {
            best = gt;
            best_count = n;
        }
    return best;
}

}  // namespace detail

// Maps each entity to a ground-truth-majority participant label so event logs
// can be scored against ground-truth activity entries.
inline std::map<Entity, std::string> build_entity_display(const TubeStore& store) {
    std::map<Entity, std::vector<const Tube*>> groups;
    for (TubeId id : store.all_tube_ids()) {
        const Tube& t = store.tube(id);
        groups[t.entity()].push_back(&t);
    }
    std::map<Entity, std::string> out;
    for (const auto& [entity, tubes] : groups) {
        std::string label = detail::majority_gt(tubes);
        if (label.empty()) label = "u" + std::to_string(entity.id);
        out[entity] = label;
    }
    return out;
}

inline std::string format_event_line(const ActivityEvent& ev,
                                     const std::map<Entity, std::string>& display) {
    std::ostringstream os;
    os << ev.activity << " " << fmt_time(ev.completion_ts) << " " << fmt_time(ev.detection_ts)
       << " ";
    bool first = true;
    for (const auto& [var, ent] : ev.bindings) {
        if (!first) os << ",";
        first = false;
        const auto it = display.find(ent);
        os << var << "=" << (it != display.end() ? it->second : to_string(ent));
    }
    os << " ";
    first = true;
    for (const auto& [node, iv] : ev.node_intervals) {
        if (!first) os << ",";
        first = false;
        os << node << ":[" << fmt_time(iv.t1) << "," << fmt_time(iv.t2) << "]";
    }
    return os.str();
}

// Runs the full pipeline: replay → tracking/re-id → chunking → spatial
// operator evaluation → graph matching with the configured action schedule.
inline RunResult run_engine(const RunInputs& in, const EngineConfig& cfg) {
    const auto wall_start = std::chrono::steady_clock::now();

    for (const auto& g : in.graphs) {
        const auto diags = validate(g);
        if (!diags.empty()) {
            std::ostringstream os;
            os << "rule '" << g.name << "' failed validation:";
            for (const auto& d : diags) os << " [" << diagnostic_code_name(d.code) << "] " << d.message << ";";
            throw Error(os.str());
        }
    }

    CameraFleet fleet(cfg.cache_limit_bytes);
    Oracle oracle(cfg.oracle, in.vocab);
    TubeStore store;
    TubeTracker tracker(cfg.tracker, store, fleet, oracle, in.topology);

    std::uint64_t trace_events = 0;
    {
        std::mutex ingest_mu;
        replay(in.streams, cfg.speed, [&](const DetectionEvent& ev) {
            std::lock_guard<std::mutex> lock(ingest_mu);
            ++trace_events;
            tracker.ingest_box(ev);
            if (cfg.mode == RunMode::Strawman) fleet.camera(ev.camera_id).charge_eager_upload(ev);
        });
    }
    store.close_all();

    std::map<TubeId, std::vector<Chunk>> chunks;
    TimeS trace_end = 0.0;
    for (TubeId id : store.all_tube_ids()) {
        const Tube& t = store.tube(id);
        chunks[id] = make_chunks(t, cfg.spatial.t_chunk_s);
        trace_end = std::max(trace_end, t.end_ts());
    }

    // Graph plans: eager runs match every action from the report stream; lazy
    // runs defer except where a rule gives an action node no spatial anchor.
    std::vector<GraphPlan> plans;
    bool any_eager = false;
    for (const auto& g : in.graphs) {
        plans.push_back(GraphPlan::build(g, cfg.mode == RunMode::Strawman));
        any_eager = any_eager || plans.back().eager_actions;
    }

    std::set<std::string> ops_needed;
    std::set<std::string> eager_action_ops;
    for (const auto& p : plans) {
        const auto ops = p.spatial_ops();
        ops_needed.insert(ops.begin(), ops.end());
        if (p.eager_actions)
            for (const auto& n : p.graph.nodes)
                if (n.kind == NodeKind::Action && !n.negated) eager_action_ops.insert(n.op);
    }

    auto intervals = compute_op_intervals(store, chunks, ops_needed, cfg.spatial);

    std::vector<TubeView> views;
    for (TubeId id : store.all_tube_ids()) {
        const Tube& t = store.tube(id);
        if (t.boxes.empty()) continue;
        views.push_back({t.tube_id, t.camera_id, t.label, t.entity(), t.span(), chunks[id]});
    }

    detail::EngineQuerier querier(oracle, fleet, store, chunks, cfg.mode == RunMode::Lazy);

    // Eager pre-pass: every person chunk is evaluated as soon as it is
    // available, and reported labels join the interval stream.
    if (any_eager) {
        std::map<TubeId, const TubeView*> view_by_id;
        for (const auto& v : views) view_by_id[v.tube_id] = &v;
        std::vector<std::pair<TimeS, std::pair<TubeId, int>>> order;
        for (const auto& v : views) {
            if (v.label != "person") continue;
            for (const auto& c : v.chunks) order.push_back({c.interval.t2, {v.tube_id, c.index}});
        }
        std::sort(order.begin(), order.end());
        for (const auto& [ready, key] : order) {
            const auto res = querier.query(key.first, key.second, ready);
            if (eager_action_ops.empty()) continue;
            const auto& view = *view_by_id.at(key.first);
            for (const auto& label : res.report.labels) {
                if (label.confidence <= cfg.oracle.tau) continue;
                if (!eager_action_ops.count(label.name)) continue;
                OpInterval ov;
                ov.op = label.name;
                ov.is_action = true;
                ov.tubes = {key.first};
                ov.entities = {view.entity};
                ov.labels = {"person"};
                ov.interval = view.chunks[static_cast<size_t>(key.second)].interval;
                ov.chunk_index = key.second;
                intervals.push_back(ov);
            }
        }
        std::sort(intervals.begin(), intervals.end(), op_interval_less);
    }

    MatcherConfig mcfg;
    mcfg.tau = cfg.oracle.tau;
    mcfg.instance_cap = cfg.instance_cap;
    mcfg.t_expire_s = cfg.t_expire_s;

    Matcher matcher(plans, views, &intervals, querier, mcfg);
    std::vector<ActivityEvent> events;
    // Intervals completing at the same instant advance together.
    for (size_t i = 0; i < intervals.size();) {
        size_t j = i;
        std::vector<const OpInterval*> group;
        while (j < intervals.size() && intervals[j].interval.t2 == intervals[i].interval.t2)
            group.push_back(&intervals[j++]);
        auto batch = matcher.on_batch(group);
        events.insert(events.end(), batch.begin(), batch.end());
        i = j;
    }
    {
        auto batch = matcher.finalize(trace_end);
        events.insert(events.end(), batch.begin(), batch.end());
    }
    Matcher::sort_events(events);

    RunResult out;
    out.events = std::move(events);
    out.entity_display = build_entity_display(store);
    for (const auto& ev : out.events) out.event_lines.push_back(format_event_line(ev, out.entity_display));
    out.matcher_stats = matcher.stats();
    out.ledger = oracle.ledger();
    out.trace_events = trace_events;

    // Latency distribution over emitted events.
    std::vector<double> latencies;
    for (const auto& ev : out.events) latencies.push_back(ev.detection_ts - ev.completion_ts);
    std::sort(latencies.begin(), latencies.end());
    const double lat_mean = latencies.empty()
                                ? 0.0
                                : std::accumulate(latencies.begin(), latencies.end(), 0.0) /
                                      static_cast<double>(latencies.size());
    const double lat_p50 = latencies.empty() ? 0.0 : latencies[latencies.size() / 2];
    const double lat_max = latencies.empty() ? 0.0 : latencies.back();

    auto& acc = out.accounting;
    acc["mode"] = run_mode_name(cfg.mode);
    acc["events_emitted"] = std::to_string(out.events.size());
    acc["trace_events"] = std::to_string(trace_events);
    acc["tubes_total"] = std::to_string(store.size());
    acc["uploaded_bytes_total"] = std::to_string(fleet.total_uploaded_bytes());
    acc["uploaded_crop_bytes"] = std::to_string(fleet.total_crop_bytes());
    acc["cache_misses"] = std::to_string(fleet.total_cache_misses());
    acc["peak_cache_bytes_max"] = std::to_string(fleet.max_peak_cache_bytes());
    for (const auto& [id, cam] : fleet.cameras()) {
        acc["camera." + id + ".uploaded_bytes"] = std::to_string(cam->uploaded_bytes());
        acc["camera." + id + ".peak_cache_bytes"] = std::to_string(cam->peak_cache_bytes());
    }
    acc["oracle_action_invocations"] = std::to_string(out.ledger.action_calls);
    acc["oracle_reid_invocations"] = std::to_string(out.ledger.reid_calls);
    acc["oracle_total_cost_s"] = fmt_num(out.ledger.total_cost_s);
    for (size_t w = 0; w < out.ledger.worker_busy_s.size(); ++w)
        acc["worker." + std::to_string(w) + ".busy_s"] = fmt_num(out.ledger.worker_busy_s[w]);
    acc["latency_mean_s"] = fmt_num(lat_mean);
    acc["latency_p50_s"] = fmt_num(lat_p50);
    acc["latency_max_s"] = fmt_num(lat_max);
    acc["instances_created"] = std::to_string(out.matcher_stats.instances_created);
    acc["instances_expired"] = std::to_string(out.matcher_stats.instances_expired);
    acc["instances_capped"] = std::to_string(out.matcher_stats.instances_capped);
    acc["identity_claims_concurrent"] = std::to_string(store.concurrent_identity_claims);

    out.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return out;
}

}  // namespace actgraph
