#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/engine.hpp"
#include "actgraph/exhaustive.hpp"
#include "actgraph/metrics.hpp"

namespace actgraph {

// ── scenario description ────────────────────────────────────────────────────
//
//   seed 42
//   duration 120
//   fps 20
//   camera cam1 1280 720
//   edge cam1 cam2 4 60
//   background cam1 persons=6 cars=1
//   plant walk_together_two_cams cam1 cam2
//   plant get_into_car cam1 at=30
//
// Plants without `at=` are scheduled automatically onto free lanes.

struct PlantSpec {
    std::string template_name;
    std::vector<std::string> cameras;
    std::optional<TimeS> at;
};

struct BackgroundSpec {
    std::string camera;
    int persons = 0;
    int cars = 0;
};

struct Scenario {
    std::uint64_t seed = 1;
    TimeS duration = 120.0;
    double fps = 20.0;
    CameraTopology topology;
    std::vector<BackgroundSpec> background;
    std::vector<PlantSpec> plants;
};

inline Scenario parse_scenario(std::istream& in) {
    Scenario sc;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        const auto fail = [&](const std::string& what) -> ScenarioError {
            return ScenarioError("scenario line " + std::to_string(lineno) + ": " + what);
        };
        if (kind == "seed") {
            if (!(ls >> sc.seed)) throw fail("expected 'seed N'");
        } else if (kind == "duration") {
            if (!(ls >> sc.duration)) throw fail("expected 'duration seconds'");
        } else if (kind == "fps") {
            if (!(ls >> sc.fps)) throw fail("expected 'fps N'");
        } else if (kind == "camera") {
            std::string cam;
            FrameGeometry g;
            if (!(ls >> cam >> g.width >> g.height)) throw fail("expected 'camera name w h'");
            sc.topology.cameras.insert(cam);
            sc.topology.geometry[cam] = g;
        } else if (kind == "edge") {
            std::string a, b;
            TravelWindow w;
            if (!(ls >> a >> b >> w.min_travel_s >> w.max_travel_s))
                throw fail("expected 'edge a b min max'");
            sc.topology.add_edge(a, b, w);
        } else if (kind == "background") {
            BackgroundSpec bg;
            if (!(ls >> bg.camera)) throw fail("expected 'background cam persons=N [cars=N]'");
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw fail("expected key=value: " + kv);
                const std::string key = kv.substr(0, eq);
                const int value = std::stoi(kv.substr(eq + 1));
                if (key == "persons") bg.persons = value;
                else if (key == "cars") bg.cars = value;
                else throw fail("unknown background key: " + key);
            }
            sc.background.push_back(bg);
        } else if (kind == "plant") {
            PlantSpec p;
            if (!(ls >> p.template_name)) throw fail("expected 'plant template cam...'");
            std::string tok;
            while (ls >> tok) {
                if (tok.rfind("at=", 0) == 0) p.at = std::stod(tok.substr(3));
                else p.cameras.push_back(tok);
            }
            if (p.cameras.empty()) throw fail("plant needs at least one camera");
            sc.plants.push_back(std::move(p));
        } else {
            throw fail("unknown entry '" + kind + "'");
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file: " + path);
    return parse_scenario(in);
}

// ── generation ──────────────────────────────────────────────────────────────

struct GenOutput {
    std::string trace_text;
    std::string gt_text;
    std::string topology_text;
    std::vector<GroundTruthActivity> ground_truth;
    std::uint64_t event_count = 0;
};

namespace genimpl {

constexpr double kPersonW = 40, kPersonH = 90;
constexpr double kCarW = 160, kCarH = 120;
constexpr double kBagW = 30, kBagH = 30;

// Plants use the upper two lanes, background traffic the lower two. Lane
// pitch keeps cross-lane boxes beyond the proximity threshold.
inline double plant_lane_y(int lane) { return lane == 0 ? 60.0 : 230.0; }
inline double walker_lane_y() { return 400.0; }
inline double parked_lane_y() { return 580.0; }

struct Planned {
    std::string rule;
    std::set<std::string> participants;
    std::vector<std::string> cameras;
    TimeS window_start = 0.0;
    TimeS window_end = 0.0;
};

class Builder {
public:
    Builder(const Scenario& sc) : sc_(sc), dt_(1.0 / sc.fps) {}

    const Scenario& sc_;
    double dt_;
    std::vector<DetectionEvent> events;
    std::vector<Planned> planned;
    int next_person = 1;
    int next_object = 1;

    std::string person_id() { return "p" + std::to_string(next_person++); }
    std::string object_id() { return "o" + std::to_string(next_object++); }

    // Emits one entity moving linearly: frames on the fps grid covering
    // [t0, t1], position x(t) = x0 + vx (t - t0), clamped to [x_min, x_max].
    void linear(const std::string& cam, const std::string& gt, const std::string& label, double w,
                double h, TimeS t0, TimeS t1, double x0, double y, double vx,
                TimeS act_from = 0.0, TimeS act_to = -1.0, const std::string& action = "") {
        const std::int64_t f0 = static_cast<std::int64_t>(std::ceil(t0 * sc_.fps - 1e-9));
        const std::int64_t f1 = static_cast<std::int64_t>(std::floor(t1 * sc_.fps + 1e-9));
        const double max_x = sc_.topology.frame(cam).width - w;
        for (std::int64_t f = f0; f <= f1; ++f) {
            const TimeS t = static_cast<double>(f) / sc_.fps;
            DetectionEvent ev;
            ev.camera_id = cam;
            ev.frame_index = f;
            ev.timestamp = t;
            ev.box = {std::clamp(x0 + vx * (t - t0), 0.0, max_x), y, w, h};
            ev.label = label;
            ev.gt_identity = gt;
            if (!action.empty() && t >= act_from && t <= act_to) ev.gt_actions.push_back(action);
            events.push_back(std::move(ev));
        }
    }

    void require_cam(const PlantSpec& p, size_t n) const {
        if (p.cameras.size() != n)
            throw ScenarioError("plant " + p.template_name + " needs " + std::to_string(n) +
                                " camera(s)");
        for (const auto& c : p.cameras)
            if (!sc_.topology.cameras.count(c))
                throw ScenarioError("plant " + p.template_name + " references unknown camera " + c);
    }

    TimeS travel_between(const std::string& a, const std::string& b, double extra) const {
        const TravelWindow* w = sc_.topology.window(a, b);
        if (!w)
            throw ScenarioError("no topology edge between " + a + " and " + b +
                                " for a cross-camera plant");
        const TimeS t = w->min_travel_s + extra;
        if (t > w->max_travel_s)
            throw ScenarioError("travel window between " + a + " and " + b +
                                " is too narrow for the template");
        return t;
    }
};

// -- templates ---------------------------------------------------------------

// (p1 near p2) then (p1 re-identified) then (p2 re-identified) then (p1 near p2)
inline TimeS plant_walk_together(Builder& b, const PlantSpec& p, TimeS t0, double y) {
    b.require_cam(p, 2);
    const std::string camA = p.cameras[0], camB = p.cameras[1];
    const std::string p1 = b.person_id(), p2 = b.person_id();
    // Side by side across the first camera.
    b.linear(camA, p1, "person", kPersonW, kPersonH, t0, t0 + 8.0, 100, y, 80);
    b.linear(camA, p2, "person", kPersonW, kPersonH, t0, t0 + 8.0, 160, y, 80);
    // Staggered re-entry, then converge and walk together.
    const TimeS tr1 = b.travel_between(camA, camB, 2.0);
    const TimeS tr2 = b.travel_between(camA, camB, 5.0);
    const TimeS e1 = t0 + 8.0 + tr1;  // p1 enters camB
    const TimeS e2 = t0 + 8.0 + tr2;  // p2 enters later
    b.linear(camB, p1, "person", kPersonW, kPersonH, e1, e2 + 6.5, 100, y, 30);
    b.linear(camB, p2, "person", kPersonW, kPersonH, e2, e2 + 1.5, 340, y, -60);
    const double meet_x = 340 - 60 * 1.5;
    b.linear(camB, p2, "person", kPersonW, kPersonH, e2 + 1.5 + b.dt_, e2 + 6.5, meet_x, y, 30);
    b.planned.push_back({"walk_together_two_cams", {p1, p2}, p.cameras, t0, e2 + 8.0});
    return e2 + 8.0;
}

// (p approach c) then (p stop) then (p disappear)
inline TimeS plant_get_into_car(Builder& b, const PlantSpec& p, TimeS t0, double y) {
    b.require_cam(p, 1);
    const std::string cam = p.cameras[0];
    const std::string pid = b.person_id(), cid = b.object_id();
    b.linear(cam, cid, "car", kCarW, kCarH, t0 - 5.0, t0 + 14.0, 820, y, 0);
    // Walk in, stand by the door, final step inside.
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0, t0 + 4.2, 100, y, 160);
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0 + 4.2 + b.dt_, t0 + 8.0, 772, y, 0);
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0 + 8.0 + b.dt_, t0 + 8.15,
             772 + 160 * b.dt_, y, 160);
    b.planned.push_back({"get_into_car", {pid, cid}, p.cameras, t0, t0 + 10.0});
    return t0 + 14.0;
}

// p use-phone then p talk
inline TimeS plant_phone_then_talk(Builder& b, const PlantSpec& p, TimeS t0, double y) {
    b.require_cam(p, 1);
    const std::string cam = p.cameras[0];
    const std::string pid = b.person_id();
    // Short action spans keep the report chunk ends inside one dedup window.
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0, t0 + 6.0, 100, y, 60, t0 + 2.0,
             t0 + 3.8, "use-phone");
    const double x1 = 100 + 60 * (6.0 + b.dt_);
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0 + 6.0 + b.dt_, t0 + 12.0, x1, y, 60,
             t0 + 7.0, t0 + 8.8, "talk");
    b.planned.push_back({"phone_then_talk", {pid}, p.cameras, t0, t0 + 13.0});
    return t0 + 13.0;
}

// (p move) then p use-phone then (p move)   [and the use-phone-or-talk variant]
inline TimeS plant_pause_action(Builder& b, const PlantSpec& p, TimeS t0, double y,
                                const std::string& rule, const std::string& action) {
    b.require_cam(p, 1);
    const std::string cam = p.cameras[0];
    const std::string pid = b.person_id();
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0, t0 + 4.0, 100, y, 120);
    const double hold_x = 100 + 120 * 4.0;
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0 + 4.0 + b.dt_, t0 + 9.0, hold_x, y, 0,
             t0 + 5.0, t0 + 7.5, action);
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0 + 9.0 + b.dt_, t0 + 13.0, hold_x, y, 120);
    b.planned.push_back({rule, {pid}, p.cameras, t0, t0 + 14.0});
    return t0 + 14.0;
}

// (p near b) and p use-phone then (p re-identified)
inline TimeS plant_two_cam_phone_bag(Builder& b, const PlantSpec& p, TimeS t0, double y) {
    b.require_cam(p, 2);
    const std::string camA = p.cameras[0], camB = p.cameras[1];
    const std::string pid = b.person_id(), bid = b.object_id();
    b.linear(camA, pid, "person", kPersonW, kPersonH, t0, t0 + 8.0, 100, y, 60, t0 + 2.0,
             t0 + 5.0, "use-phone");
    b.linear(camA, bid, "bag", kBagW, kBagH, t0, t0 + 8.0, 145, y + 40, 60);
    const TimeS tr = b.travel_between(camA, camB, 2.0);
    b.linear(camB, pid, "person", kPersonW, kPersonH, t0 + 8.0 + tr, t0 + 14.0 + tr, 100, y, 60);
    b.planned.push_back({"two_cam_phone_bag", {pid, bid}, p.cameras, t0, t0 + 16.0 + tr});
    return t0 + 16.0 + tr;
}

// (p near b) then not (p near b) then (p disappear)
inline TimeS plant_abandon_bag(Builder& b, const PlantSpec& p, TimeS t0, double y) {
    b.require_cam(p, 1);
    const std::string cam = p.cameras[0];
    const std::string pid = b.person_id(), bid = b.object_id();
    b.linear(cam, pid, "person", kPersonW, kPersonH, t0, t0 + 10.0, 100, y, 120);
    // Bag carried for five seconds, then left behind.
    b.linear(cam, bid, "bag", kBagW, kBagH, t0, t0 + 5.0, 145, y + 40, 120);
    const double drop_x = 145 + 120 * 5.0;
    b.linear(cam, bid, "bag", kBagW, kBagH, t0 + 5.0 + b.dt_, t0 + 22.0, drop_x, y + 40, 0);
    b.planned.push_back({"abandon_bag", {pid, bid}, p.cameras, t0, t0 + 12.0});
    return t0 + 23.0;
}

inline void background_traffic(Builder& b, const BackgroundSpec& bg, TimeS duration) {
    const double width = b.sc_.topology.frame(bg.camera).width;
    const double span = width - kPersonW - 200;
    const TimeS cross = span / 120.0;
    if (bg.persons > 0) {
        const TimeS usable = std::max(1.0, duration - cross - 4.0);
        for (int i = 0; i < bg.persons; ++i) {
            const TimeS start = 2.0 + usable * static_cast<double>(i) /
                                          static_cast<double>(bg.persons);
            b.linear(bg.camera, b.person_id(), "person", kPersonW, kPersonH, start, start + cross,
                     100, walker_lane_y(), 120);
        }
    }
    for (int i = 0; i < bg.cars; ++i) {
        b.linear(bg.camera, b.object_id(), "car", kCarW, kCarH, 2.0, duration - 2.0,
                 100 + 250.0 * i, parked_lane_y(), 0);
    }
}

}  // namespace genimpl

// Generates a trace plus ground truth from a scenario. The planted activities
// are validated by replaying the generated trace through the tracking pipeline
// (perfect oracles) and matching it with the exhaustive reference matcher; the
// resulting event set must line up with the plants and becomes the ground
// truth, so the stamps in the gt file are exact under the default config.
inline GenOutput gen_trace(const Scenario& sc, const Vocabulary& vocab,
                           const std::vector<ActivityGraph>& graphs) {
    using namespace genimpl;
    if (sc.fps <= 0 || sc.duration <= 10) throw ScenarioError("need fps > 0 and duration > 10");
    for (const auto& cam : sc.topology.cameras) {
        const auto g = sc.topology.frame(cam);
        if (g.width < 1000 || g.height < 700)
            throw ScenarioError("built-in templates need frames of at least 1000x700");
    }
    std::map<std::string, const ActivityGraph*> graph_by_name;
    for (const auto& g : graphs) graph_by_name[g.name] = &g;

    Builder b(sc);

    // Lane scheduling: two plant lanes per camera, freed after each template.
    std::map<std::string, std::array<TimeS, 2>> lane_free;
    for (const auto& cam : sc.topology.cameras) lane_free[cam] = {7.0, 7.0};
    std::uint64_t jitter_state = sc.seed;

    for (const auto& plant : sc.plants) {
        if (!graph_by_name.count(plant.template_name))
            throw ScenarioError("plant references rule '" + plant.template_name +
                                "' missing from the rule set");
        // Pick the lane that frees earliest across all involved cameras.
        int lane = 0;
        TimeS free_at = 0.0;
        for (int cand = 0; cand < 2; ++cand) {
            TimeS t = 0.0;
            for (const auto& cam : plant.cameras) t = std::max(t, lane_free.at(cam)[static_cast<size_t>(cand)]);
            if (cand == 0 || t < free_at) { lane = cand; free_at = t; }
        }
        jitter_state = detail::mix64(jitter_state ^ 0x9e37ull);
        const TimeS jitter = static_cast<double>(jitter_state % 20) / sc.fps;
        const TimeS t0 = plant.at ? *plant.at : free_at + jitter;
        if (t0 < 7.0) throw ScenarioError("plant start must leave warm-up room (t >= 7)");
        const double y = plant_lane_y(lane);

        TimeS done;
        if (plant.template_name == "walk_together_two_cams") done = plant_walk_together(b, plant, t0, y);
        else if (plant.template_name == "get_into_car") done = plant_get_into_car(b, plant, t0, y);
        else if (plant.template_name == "phone_then_talk") done = plant_phone_then_talk(b, plant, t0, y);
        else if (plant.template_name == "walk_phone_walk")
            done = plant_pause_action(b, plant, t0, y, "walk_phone_walk", "use-phone");
        else if (plant.template_name == "pause_call_or_chat")
            done = plant_pause_action(b, plant, t0, y, "pause_call_or_chat", "talk");
        else if (plant.template_name == "two_cam_phone_bag") done = plant_two_cam_phone_bag(b, plant, t0, y);
        else if (plant.template_name == "abandon_bag") done = plant_abandon_bag(b, plant, t0, y);
        else throw ScenarioError("unknown plant template '" + plant.template_name + "'");

        for (const auto& cam : plant.cameras) lane_free.at(cam)[static_cast<size_t>(lane)] = done + 8.0;
        if (done > sc.duration)
            throw ScenarioError("plant '" + plant.template_name + "' runs past the trace duration");
    }
    for (const auto& bg : sc.background) background_traffic(b, bg, sc.duration);

    // Deterministic file order: per camera, time then frame then creation.
    std::stable_sort(b.events.begin(), b.events.end(),
                     [](const DetectionEvent& x, const DetectionEvent& y) {
                         if (x.timestamp != y.timestamp) return x.timestamp < y.timestamp;
                         if (x.camera_id != y.camera_id) return x.camera_id < y.camera_id;
                         return x.frame_index < y.frame_index;
                     });
    std::ostringstream trace;
    for (const auto& ev : b.events) trace << format_trace_line(ev) << "\n";

    GenOutput out;
    out.trace_text = trace.str();
    out.topology_text = format_topology(sc.topology);
    out.event_count = b.events.size();

    // Self-check: replay through the real tracker with perfect oracles, then
    // match exhaustively; the reference events must account for every plant
    // and contain nothing unexplained.
    std::istringstream trace_in(out.trace_text);
    const CameraStreams streams = load_trace(trace_in);

    CameraFleet fleet;
    OracleConfig ocfg;
    ocfg.seed = sc.seed;
    Oracle oracle(ocfg, vocab);
    TubeStore store;
    TubeTracker tracker({}, store, fleet, oracle, sc.topology);
    for (const auto& ev : merged_order(streams)) tracker.ingest_box(ev);
    store.close_all();

    SpatialConfig scfg;
    std::map<TubeId, std::vector<Chunk>> chunks;
    for (TubeId id : store.all_tube_ids()) chunks[id] = make_chunks(store.tube(id), scfg.t_chunk_s);

    std::set<std::string> ops;
    std::vector<GraphPlan> plans;
    for (const auto& g : graphs) {
        plans.push_back(GraphPlan::build(g, false));
        const auto o = plans.back().spatial_ops();
        ops.insert(o.begin(), o.end());
    }
    const auto intervals = compute_op_intervals(store, chunks, ops, scfg);

    std::vector<TubeView> views;
    std::map<std::pair<TubeId, int>, ActionReport> reports;
    for (TubeId id : store.all_tube_ids()) {
        const Tube& t = store.tube(id);
        views.push_back({t.tube_id, t.camera_id, t.label, t.entity(), t.span(), chunks[id]});
        if (!t.is_person()) continue;
        for (const auto& c : chunks[id]) {
            ActionReport rep;
            rep.tube_id = id;
            rep.chunk_index = c.index;
            for (const auto& a : c.gt_actions()) rep.labels.push_back({a, 1.0});
            reports[{id, c.index}] = rep;
        }
    }

    ExhaustiveMatcher ref(plans, views, intervals, reports, ocfg.tau);
    const auto ref_events = ref.match_all();
    const auto display = build_entity_display(store);
    std::vector<ScoredEvent> scored;
    for (const auto& ev : ref_events) scored.push_back(to_scored(ev, display));
    scored = dedupe_events(scored, 2.0);

    for (const auto& plan : b.planned) {
        if (!graph_by_name.count(plan.rule)) continue;
        bool found = false;
        for (const auto& ev : scored) {
            if (ev.name != plan.rule || ev.participants != plan.participants) continue;
            if (ev.completion_ts >= plan.window_start && ev.completion_ts <= plan.window_end + 5.0) {
                found = true;
                break;
            }
        }
        if (!found)
            throw ScenarioError("self-check: planted '" + plan.rule +
                                "' was not derived by the reference matcher");
    }
    for (const auto& ev : scored) {
        const Planned* home = nullptr;
        for (const auto& plan : b.planned) {
            if (!std::includes(plan.participants.begin(), plan.participants.end(),
                               ev.participants.begin(), ev.participants.end()))
                continue;
            if (ev.completion_ts >= plan.window_start - 2.0 &&
                ev.completion_ts <= plan.window_end + 10.0) {
                home = &plan;
                break;
            }
        }
        if (!home)
            throw ScenarioError("self-check: stray match '" + ev.name +
                                "' not explained by any plant (ts " + fmt_time(ev.completion_ts) +
                                ")");
        GroundTruthActivity gt;
        gt.name = ev.name;
        gt.participants = ev.participants;
        gt.completion_ts = ev.completion_ts;
        gt.cameras.insert(home->cameras.begin(), home->cameras.end());
        out.ground_truth.push_back(std::move(gt));
    }
    out.gt_text = format_ground_truth(out.ground_truth);
    return out;
}

}  // namespace actgraph
