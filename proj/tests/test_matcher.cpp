#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>

#include "actgraph/engine.hpp"
#include "actgraph/exhaustive.hpp"
#include "actgraph/matcher.hpp"
#include "support/scenegen.hpp"

using namespace actgraph;

namespace {

// Scripted report source for the unit tests: every query costs one call and is
// available immediately.
struct ManualQuerier : ActionQuerier {
    std::map<std::pair<TubeId, int>, ActionReport> reports;
    int calls = 0;
    std::set<std::pair<TubeId, int>> unique_keys;

    Result query(TubeId tube, int chunk_index, TimeS request_sim) override {
        ++calls;
        unique_keys.insert({tube, chunk_index});
        Result r;
        const auto it = reports.find({tube, chunk_index});
        if (it != reports.end()) r.report = it->second;
        r.report.tube_id = tube;
        r.report.chunk_index = chunk_index;
        r.finish = request_sim;
        return r;
    }
};

TubeView person_view(TubeId id, const std::string& cam, TimeS from, TimeS to,
                     IdentityId identity) {
    Tube t;
    t.tube_id = id;
    t.camera_id = cam;
    t.label = "person";
    t.identity = identity;
    t.closed = true;
    for (std::int64_t f = 0; f <= static_cast<std::int64_t>((to - from) * 10 + 0.5); ++f)
        t.boxes.push_back({from + f / 10.0, f, 0, Box{100, 100, 40, 90}, "", {}});
    return {id, cam, "person", t.entity(), t.span(), make_chunks(t, 1.0)};
}

TubeView object_view(TubeId id, const std::string& cam, const std::string& label, TimeS from,
                     TimeS to) {
    Tube t;
    t.tube_id = id;
    t.camera_id = cam;
    t.label = label;
    t.closed = true;
    for (std::int64_t f = 0; f <= static_cast<std::int64_t>((to - from) * 10 + 0.5); ++f)
        t.boxes.push_back({from + f / 10.0, f, 0, Box{500, 100, 30, 30}, "", {}});
    return {id, cam, label, t.entity(), t.span(), make_chunks(t, 1.0)};
}

OpInterval spatial_iv(const std::string& op, const std::vector<const TubeView*>& operands,
                      Interval iv) {
    OpInterval o;
    o.op = op;
    o.is_action = false;
    for (const auto* v : operands) {
        o.tubes.push_back(v->tube_id);
        o.entities.push_back(v->entity);
        o.labels.push_back(v->label);
    }
    o.interval = iv;
    return o;
}

OpInterval action_iv(const std::string& label, const TubeView& v, int chunk_index) {
    OpInterval o;
    o.op = label;
    o.is_action = true;
    o.tubes = {v.tube_id};
    o.entities = {v.entity};
    o.labels = {"person"};
    o.interval = v.chunks[static_cast<size_t>(chunk_index)].interval;
    o.chunk_index = chunk_index;
    return o;
}

std::vector<GraphPlan> plans_for(const std::string& rules_text, bool eager = false) {
    const auto vocab = default_vocabulary();
    std::vector<GraphPlan> plans;
    for (const auto& g : compile_rules(parse_rules(rules_text), vocab))
        plans.push_back(GraphPlan::build(g, eager));
    return plans;
}

std::vector<ActivityEvent> drive(Matcher& m, std::vector<OpInterval> stream, TimeS end_ts) {
    std::sort(stream.begin(), stream.end(), op_interval_less);
    std::vector<ActivityEvent> events;
    for (const auto& ov : stream) {
        auto batch = m.on_interval(ov);
        events.insert(events.end(), batch.begin(), batch.end());
    }
    auto tail = m.finalize(end_ts);
    events.insert(events.end(), tail.begin(), tail.end());
    Matcher::sort_events(events);
    return events;
}

std::set<std::string> signatures(const std::vector<ActivityEvent>& events) {
    std::set<std::string> out;
    for (const auto& e : events) out.insert(Matcher::event_signature(e));
    return out;
}

}  // namespace

TEST_CASE("a strict sequence completes only when the second interval follows the first") {
    const auto plans = plans_for("r : p : person ; (p move) then (p stop)");
    const auto v = person_view(1, "cam1", 0.0, 10.0, 5);
    ManualQuerier q;

    SECTION("in order") {
        Matcher m(plans, {v}, nullptr, q, {});
        const auto events = drive(m, {spatial_iv("move", {&v}, {0, 2}), spatial_iv("stop", {&v}, {3, 4})},
                                  10.0);
        REQUIRE(events.size() == 1);
        CHECK(events[0].completion_ts == 4.0);
        CHECK(events[0].node_intervals.at(0) == Interval{0, 2});
        CHECK(events[0].node_intervals.at(1) == Interval{3, 4});
        CHECK(events[0].detection_ts >= events[0].completion_ts);
    }
    SECTION("overlapping violates THEN") {
        Matcher m(plans, {v}, nullptr, q, {});
        CHECK(drive(m, {spatial_iv("move", {&v}, {0, 2}), spatial_iv("stop", {&v}, {1, 2})}, 10.0)
                  .empty());
    }
    SECTION("touching endpoints violate strictness") {
        Matcher m(plans, {v}, nullptr, q, {});
        CHECK(drive(m, {spatial_iv("move", {&v}, {0, 2}), spatial_iv("stop", {&v}, {2, 3})}, 10.0)
                  .empty());
    }
}

TEST_CASE("concurrency requires interval overlap") {
    const auto plans = plans_for("r : p1 : person , p2 : person ; (p1 move) and (p2 stop)");
    const auto a = person_view(1, "cam1", 0.0, 10.0, 5);
    const auto b = person_view(2, "cam1", 0.0, 10.0, 6);
    ManualQuerier q;

    SECTION("overlap holds") {
        Matcher m(plans, {a, b}, nullptr, q, {});
        const auto events =
            drive(m, {spatial_iv("move", {&a}, {0, 2}), spatial_iv("stop", {&b}, {1, 3})}, 10.0);
        REQUIRE(events.size() == 1);
        CHECK(events[0].completion_ts == 3.0);
    }
    SECTION("touching endpoints still overlap") {
        Matcher m(plans, {a, b}, nullptr, q, {});
        CHECK(drive(m, {spatial_iv("move", {&a}, {0, 2}), spatial_iv("stop", {&b}, {2, 3})}, 10.0)
                  .size() == 1);
    }
    SECTION("disjoint fails") {
        Matcher m(plans, {a, b}, nullptr, q, {});
        CHECK(drive(m, {spatial_iv("move", {&a}, {0, 2}), spatial_iv("stop", {&b}, {5, 6})}, 10.0)
                  .empty());
    }
}

TEST_CASE("symmetric rules report both variable orientations") {
    const auto plans = plans_for("r : p1 : person , p2 : person ; (p1 move) and (p2 move)");
    const auto a = person_view(1, "cam1", 0.0, 10.0, 5);
    const auto b = person_view(2, "cam1", 0.0, 10.0, 6);
    ManualQuerier q;
    Matcher m(plans, {a, b}, nullptr, q, {});
    const auto events =
        drive(m, {spatial_iv("move", {&a}, {0, 2}), spatial_iv("move", {&b}, {1, 3})}, 10.0);
    // Two mirrored binding assignments; the scorer's dedup policy decides what
    // to do with them downstream.
    CHECK(events.size() == 2);
}

TEST_CASE("variables bind one entity for the instance lifetime") {
    const auto plans = plans_for("r : p : person ; (p move) then (p stop)");
    const auto a = person_view(1, "cam1", 0.0, 10.0, 5);
    const auto b = person_view(2, "cam1", 0.0, 10.0, 6);
    ManualQuerier q;
    Matcher m(plans, {a, b}, nullptr, q, {});
    // The stop belongs to a different person: no completion.
    CHECK(drive(m, {spatial_iv("move", {&a}, {0, 2}), spatial_iv("stop", {&b}, {3, 4})}, 10.0)
              .empty());
}

TEST_CASE("or-connected nodes complete via either branch without duplicates") {
    const auto plans = plans_for("r : p : person ; (p move) or (p stop)");
    const auto v = person_view(1, "cam1", 0.0, 10.0, 5);
    ManualQuerier q;
    Matcher m(plans, {v}, nullptr, q, {});
    const auto events =
        drive(m, {spatial_iv("move", {&v}, {0, 1}), spatial_iv("stop", {&v}, {2, 3})}, 10.0);
    // Each branch alone is a minimal complete match; the superset is not.
    REQUIRE(events.size() == 2);
    CHECK(events[0].node_intervals.size() == 1);
    CHECK(events[1].node_intervals.size() == 1);
}

TEST_CASE("absence windows reject in-window matches and accept empty ones") {
    const auto plans = plans_for(
        "r : p : person , b : bag ; (p near b) then not (p near b) then (p disappear)");
    const auto person = person_view(1, "cam1", 0.0, 10.0, 5);
    const auto bag = object_view(2, "cam1", "bag", 0.0, 10.0);
    ManualQuerier q;

    std::vector<OpInterval> index;

    SECTION("clean window emits") {
        index = {spatial_iv("near", {&person, &bag}, {0, 5})};
        Matcher m(plans, {person, bag}, &index, q, {});
        auto stream = index;
        stream.push_back(spatial_iv("disappear", {&person}, {10, 10}));
        const auto events = drive(m, stream, 10.0);
        REQUIRE(events.size() == 1);
        CHECK(events[0].completion_ts == 10.0);
    }
    SECTION("a later recontact only blocks assignments whose window covers it") {
        index = {spatial_iv("near", {&person, &bag}, {0, 5}),
                 spatial_iv("near", {&person, &bag}, {6, 7})};
        Matcher m(plans, {person, bag}, &index, q, {});
        auto stream = index;
        stream.push_back(spatial_iv("disappear", {&person}, {10, 10}));
        const auto events = drive(m, stream, 10.0);
        // The [0,5] contact is ruled out by the recontact inside its window;
        // starting from the [6,7] contact the window is clean.
        REQUIRE(events.size() == 1);
        CHECK(events[0].node_intervals.at(0) == Interval{6, 7});
    }
    SECTION("a recontact overlapping the disappearance blocks every assignment") {
        index = {spatial_iv("near", {&person, &bag}, {0, 5}),
                 spatial_iv("near", {&person, &bag}, {6, 10.5})};
        Matcher m(plans, {person, bag}, &index, q, {});
        auto stream = index;
        stream.push_back(spatial_iv("disappear", {&person}, {10, 10}));
        CHECK(drive(m, stream, 10.5).empty());
    }
    SECTION("touching the window boundary does not count as presence") {
        index = {spatial_iv("near", {&person, &bag}, {0, 5}),
                 spatial_iv("near", {&person, &bag}, {5, 5})};
        Matcher m(plans, {person, bag}, &index, q, {});
        auto stream = index;
        stream.push_back(spatial_iv("disappear", {&person}, {10, 10}));
        // Both contacts work as the opening node; neither violates the other's
        // absence window by merely touching it.
        CHECK(drive(m, stream, 10.0).size() == 2);
    }
}

TEST_CASE("checklist windows scan the bounded chunk range once") {
    const auto plans = plans_for("walk_phone_walk : p : person ;"
                                 " (p move) then p use-phone then (p move)");
    REQUIRE_FALSE(plans[0].eager_actions);
    const auto v = person_view(1, "cam1", 0.0, 13.0, 5);
    ManualQuerier q;
    q.reports[{1, 5}] = {1, 5, {{"use-phone", 1.0}}};
    q.reports[{1, 6}] = {1, 6, {{"use-phone", 1.0}}};
    Matcher m(plans, {v}, nullptr, q, {});
    const auto events =
        drive(m, {spatial_iv("move", {&v}, {0, 4}), spatial_iv("move", {&v}, {9, 13})}, 13.0);
    // Chunks [3,4] through [9,10] touch the window [4,9]: seven queries.
    CHECK(q.calls == 7);
    CHECK(q.unique_keys.size() == 7);
    // Two in-window confirmations, each its own minimal assignment.
    REQUIRE(events.size() == 2);
    for (const auto& e : events) {
        CHECK(e.completion_ts == 13.0);
        const auto& phone = e.node_intervals.at(1);
        CHECK(phone.t1 > 4.0);
        CHECK(phone.t2 < 9.0);
    }
}

TEST_CASE("a required action missing from its window blocks the advance") {
    const auto plans = plans_for("walk_phone_walk : p : person ;"
                                 " (p move) then p use-phone then (p move)");
    const auto v = person_view(1, "cam1", 0.0, 13.0, 5);
    ManualQuerier q;  // no reports at all
    Matcher m(plans, {v}, nullptr, q, {});
    CHECK(drive(m, {spatial_iv("move", {&v}, {0, 4}), spatial_iv("move", {&v}, {9, 13})}, 13.0)
              .empty());
}

TEST_CASE("rules ending in an action resolve by scanning forward") {
    const auto plans = plans_for("r : p : person ; (p stop) then p talk");
    REQUIRE_FALSE(plans[0].eager_actions);
    const auto v = person_view(1, "cam1", 0.0, 12.0, 5);
    ManualQuerier q;
    q.reports[{1, 8}] = {1, 8, {{"talk", 1.0}}};
    Matcher m(plans, {v}, nullptr, q, {});
    const auto events = drive(m, {spatial_iv("stop", {&v}, {0, 3})}, 12.0);
    REQUIRE(events.size() == 1);
    CHECK(events[0].node_intervals.at(1).t1 == 8.0);
}

TEST_CASE("eager graphs match action reports from the stream") {
    const auto plans = plans_for("phone_then_talk : p : person ; p use-phone then p talk");
    REQUIRE(plans[0].eager_actions);
    const auto v = person_view(1, "cam1", 0.0, 12.0, 5);
    ManualQuerier q;

    SECTION("in order completes") {
        Matcher m(plans, {v}, nullptr, q, {});
        const auto events = drive(m, {action_iv("use-phone", v, 2), action_iv("talk", v, 7)}, 12.0);
        REQUIRE(events.size() == 1);
        CHECK(events[0].completion_ts == 8.0);
    }
    SECTION("reverse order does not") {
        Matcher m(plans, {v}, nullptr, q, {});
        CHECK(drive(m, {action_iv("talk", v, 2), action_iv("use-phone", v, 7)}, 12.0).empty());
    }
}

TEST_CASE("stalled instances expire, fresh ones survive") {
    const auto plans = plans_for("r : p : person ; (p move) then (p stop)");
    const auto v = person_view(1, "cam1", 0.0, 10.0, 5);
    ManualQuerier q;
    MatcherConfig cfg;
    cfg.t_expire_s = 300.0;
    Matcher m(plans, {v}, nullptr, q, cfg);
    m.on_interval(spatial_iv("move", {&v}, {0, 2}));
    // 600 s of silence, then a compatible stop: the instance is long gone.
    const auto late = m.on_interval(spatial_iv("stop", {&v}, {601, 602}));
    CHECK(late.empty());
    CHECK(m.stats().instances_expired >= 1);

    Matcher m2(plans, {v}, nullptr, q, cfg);
    m2.on_interval(spatial_iv("move", {&v}, {0, 2}));
    const auto in_time = m2.on_interval(spatial_iv("stop", {&v}, {250, 251}));
    REQUIRE(in_time.size() == 1);
}

TEST_CASE("the live-instance cap evicts the least recently progressed") {
    const auto plans = plans_for("r : p : person ; (p move) then (p stop)");
    std::vector<TubeView> views;
    for (TubeId i = 1; i <= 8; ++i) views.push_back(person_view(i, "cam1", 0.0, 10.0, i + 10));
    ManualQuerier q;
    MatcherConfig cfg;
    cfg.instance_cap = 3;
    Matcher m(plans, views, nullptr, q, cfg);
    for (size_t i = 0; i < views.size(); ++i)
        m.on_interval(spatial_iv("move", {&views[i]}, {0.0 + i * 0.1, 1.0 + i * 0.1}));
    CHECK(m.stats().instances_capped == 5);
}

TEST_CASE("lazy, eager and exhaustive matching agree on random scenes") {
    const auto vocab = default_vocabulary();
    std::ifstream rules_file(std::string(ACTGRAPH_SAMPLES_DIR) + "/rules.act");
    REQUIRE(rules_file.good());
    std::stringstream rules_text;
    rules_text << rules_file.rdbuf();
    const auto graphs = compile_rules(parse_rules(rules_text.str()), vocab);

    int scenes_with_events = 0;
    for (int seed = 1; seed <= 200; ++seed) {
        CAPTURE(seed);
        const auto scene = testsupport::random_scene(static_cast<std::uint64_t>(seed));

        RunInputs in;
        in.streams = scene.streams;
        in.topology = scene.topo;
        in.graphs = graphs;
        in.vocab = vocab;

        EngineConfig cfg;
        cfg.oracle.seed = static_cast<std::uint64_t>(seed);
        cfg.oracle.p_action = seed % 3 == 0 ? 0.7 : 1.0;
        cfg.oracle.p_reid = seed % 4 == 0 ? 0.7 : 1.0;

        cfg.mode = RunMode::Lazy;
        const auto lazy = run_engine(in, cfg);
        cfg.mode = RunMode::Strawman;
        const auto straw = run_engine(in, cfg);

        REQUIRE(signatures(lazy.events) == signatures(straw.events));

        // Reference: same tracking front end, exhaustive assignment search.
        CameraFleet fleet;
        OracleConfig ocfg = cfg.oracle;
        Oracle oracle(ocfg, vocab);
        TubeStore store;
        TubeTracker tracker({}, store, fleet, oracle, scene.topo);
        for (const auto& ev : merged_order(scene.streams)) tracker.ingest_box(ev);
        store.close_all();
        std::map<TubeId, std::vector<Chunk>> chunks;
        for (TubeId id : store.all_tube_ids()) chunks[id] = make_chunks(store.tube(id), 1.0);
        std::set<std::string> ops;
        std::vector<GraphPlan> plans;
        for (const auto& g : graphs) {
            plans.push_back(GraphPlan::build(g, false));
            const auto o = plans.back().spatial_ops();
            ops.insert(o.begin(), o.end());
        }
        const auto intervals = compute_op_intervals(store, chunks, ops, {});
        std::vector<TubeView> views;
        std::map<std::pair<TubeId, int>, ActionReport> reports;
        Oracle answer_oracle(ocfg, vocab);
        for (TubeId id : store.all_tube_ids()) {
            const Tube& t = store.tube(id);
            views.push_back({t.tube_id, t.camera_id, t.label, t.entity(), t.span(), chunks[id]});
            if (!t.is_person()) continue;
            for (const auto& c : chunks[id])
                reports[{id, c.index}] =
                    answer_oracle.detect_actions(id, c.index, c.gt_actions(), 0.0).report;
        }
        ExhaustiveMatcher ref(plans, views, intervals, reports, ocfg.tau);
        const auto ref_events = ref.match_all();
        REQUIRE(signatures(lazy.events) == signatures(ref_events));

        if (!lazy.events.empty()) ++scenes_with_events;

        // Deferred queries never exceed the eager count.
        CHECK(lazy.ledger.action_calls <= straw.ledger.action_calls);
    }
    // The differential only means something if matches actually occur.
    CHECK(scenes_with_events > 60);
}

TEST_CASE("expiry never removes an instance that would have completed in time") {
    const auto vocab = default_vocabulary();
    std::ifstream rules_file(std::string(ACTGRAPH_SAMPLES_DIR) + "/rules.act");
    std::stringstream rules_text;
    rules_text << rules_file.rdbuf();
    const auto graphs = compile_rules(parse_rules(rules_text.str()), vocab);

    for (int seed = 1; seed <= 30; ++seed) {
        CAPTURE(seed);
        const auto scene = testsupport::random_scene(static_cast<std::uint64_t>(seed) + 9000);
        RunInputs in{scene.streams, scene.topo, graphs, vocab};
        EngineConfig with_expiry;
        with_expiry.oracle.seed = 5;
        with_expiry.t_expire_s = 300.0;  // scenes span well under a minute
        EngineConfig without = with_expiry;
        without.t_expire_s = 1e9;
        CHECK(signatures(run_engine(in, with_expiry).events) ==
              signatures(run_engine(in, without).events));
    }
}
