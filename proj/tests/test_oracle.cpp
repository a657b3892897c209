#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "actgraph/oracle.hpp"

using namespace actgraph;

namespace {

CropHandle crop(const std::string& cam, std::int64_t frame, const std::string& gt) {
    CropHandle c;
    c.camera_id = cam;
    c.frame_index = frame;
    c.box_ordinal = 0;
    c.gt_identity = gt;
    return c;
}

}  // namespace

TEST_CASE("a perfect action oracle reports exactly the ground truth") {
    OracleConfig cfg;
    cfg.p_action = 1.0;
    Oracle oracle(cfg, default_vocabulary());
    const auto ans = oracle.detect_actions(1, 0, {"use-phone"}, 0.0);
    REQUIRE(ans.report.labels.size() == 1);
    CHECK(ans.report.labels[0].name == "use-phone");
    CHECK(ans.report.labels[0].confidence == 1.0);
    CHECK(ans.report.reports("use-phone", 0.5));
}

TEST_CASE("a broken action oracle reports one wrong label and drops the truth") {
    OracleConfig cfg;
    cfg.p_action = 0.0;
    Oracle oracle(cfg, default_vocabulary());
    for (int chunk = 0; chunk < 20; ++chunk) {
        const auto ans = oracle.detect_actions(7, chunk, {"use-phone"}, 0.0);
        REQUIRE(ans.report.labels.size() == 1);
        CHECK(ans.report.labels[0].name != "use-phone");
        CHECK(default_vocabulary().is_action(ans.report.labels[0].name));
    }
}

TEST_CASE("answers are a pure function of the query key") {
    OracleConfig cfg;
    cfg.p_action = 0.5;
    cfg.p_reid = 0.5;
    cfg.seed = 99;
    Oracle a(cfg, default_vocabulary());
    Oracle b(cfg, default_vocabulary());

    // Query in different orders; answers must agree pairwise.
    std::vector<std::pair<TubeId, int>> keys;
    for (TubeId t = 1; t <= 10; ++t)
        for (int c = 0; c < 5; ++c) keys.push_back({t, c});
    std::map<std::pair<TubeId, int>, std::string> first;
    for (const auto& k : keys) {
        const auto ans = a.detect_actions(k.first, k.second, {"talk"}, 0.0);
        first[k] = ans.report.labels.empty() ? "" : ans.report.labels[0].name;
    }
    std::reverse(keys.begin(), keys.end());
    for (const auto& k : keys) {
        const auto ans = b.detect_actions(k.first, k.second, {"talk"}, 0.0);
        CHECK(first[k] == (ans.report.labels.empty() ? "" : ans.report.labels[0].name));
    }

    // Repeating a key on the same oracle instance never flips the answer.
    const auto once = a.detect_actions(3, 2, {"talk"}, 0.0);
    const auto twice = a.detect_actions(3, 2, {"talk"}, 0.0);
    REQUIRE(once.report.labels.size() == twice.report.labels.size());
    for (size_t i = 0; i < once.report.labels.size(); ++i)
        CHECK(once.report.labels[i].name == twice.report.labels[i].name);
}

TEST_CASE("re-identification truth table under a perfect oracle") {
    Oracle oracle({}, default_vocabulary());
    CHECK(oracle.same_identity(crop("cam1", 0, "p1"), crop("cam2", 50, "p1")));
    CHECK_FALSE(oracle.same_identity(crop("cam1", 0, "p1"), crop("cam2", 50, "p2")));
    // Unknown ground truth never matches.
    CHECK_FALSE(oracle.same_identity(crop("cam1", 0, ""), crop("cam2", 50, "")));
}

TEST_CASE("re-id accuracy converges to p over many pairs") {
    OracleConfig cfg;
    cfg.p_reid = 0.5;
    cfg.seed = 7;
    Oracle oracle(cfg, default_vocabulary());
    int agree = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const bool same_gt = i % 2 == 0;
        const auto a = crop("cam1", i, "p1");
        const auto b = crop("cam2", i + 100000, same_gt ? "p1" : "p2");
        if (oracle.same_identity(a, b) == same_gt) ++agree;
    }
    const double rate = static_cast<double>(agree) / n;
    CHECK(rate > 0.48);
    CHECK(rate < 0.52);
}

TEST_CASE("re-id keying ignores the argument order") {
    OracleConfig cfg;
    cfg.p_reid = 0.5;
    Oracle oracle(cfg, default_vocabulary());
    for (int i = 0; i < 200; ++i) {
        const auto a = crop("cam1", i, "p1");
        const auto b = crop("cam2", i, "p2");
        CHECK(oracle.same_identity(a, b) == oracle.same_identity(b, a));
    }
}

TEST_CASE("the invocation ledger counts calls and cost") {
    OracleConfig cfg;
    cfg.gpu_workers = 2;
    cfg.action_cost_s = 0.040;
    Oracle oracle(cfg, default_vocabulary());

    auto ledger = oracle.ledger();
    CHECK(ledger.action_calls == 0);
    CHECK(ledger.total_cost_s == 0.0);
    for (double busy : ledger.worker_busy_s) CHECK(busy == 0.0);

    for (int i = 0; i < 100; ++i) oracle.detect_actions(1, i, {}, 0.0);
    ledger = oracle.ledger();
    CHECK(ledger.action_calls == 100);
    CHECK(ledger.total_cost_s == Catch::Approx(4.0));
    REQUIRE(ledger.worker_busy_s.size() == 2);
    CHECK(ledger.worker_busy_s[0] == Catch::Approx(2.0));  // round-robin dispatch
    CHECK(ledger.worker_busy_s[1] == Catch::Approx(2.0));
}

TEST_CASE("queueing delays finish times when a worker is saturated") {
    OracleConfig cfg;
    cfg.gpu_workers = 1;
    cfg.action_cost_s = 0.040;
    Oracle oracle(cfg, default_vocabulary());
    // Ten jobs all ready at t=0: k-th finishes at (k+1) * cost.
    for (int i = 0; i < 10; ++i) {
        const auto ans = oracle.detect_actions(1, i, {}, 0.0);
        CHECK(ans.finish_time == Catch::Approx(0.040 * (i + 1)));
    }
    // A job ready far in the future starts then, not earlier.
    const auto later = oracle.detect_actions(1, 99, {}, 100.0);
    CHECK(later.finish_time == Catch::Approx(100.040));
}

TEST_CASE("config validation") {
    OracleConfig bad;
    bad.p_action = 1.5;
    CHECK_THROWS_AS(Oracle(bad, default_vocabulary()), Error);
    bad = {};
    bad.gpu_workers = 0;
    CHECK_THROWS_AS(Oracle(bad, default_vocabulary()), Error);
    bad = {};
    bad.tau = 1.0;
    CHECK_THROWS_AS(Oracle(bad, default_vocabulary()), Error);
}
