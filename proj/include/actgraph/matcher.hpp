#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "actgraph/graph.hpp"
#include "actgraph/oracle.hpp"
#include "actgraph/spatial.hpp"
#include "actgraph/tube.hpp"

namespace actgraph {

struct MatcherConfig {
    double tau = 0.5;
    int instance_cap = 10000;
    TimeS t_expire_s = 300.0;
};

// Supplies chunk action reports to the matcher. The engine implements the
// charging policy (which crops upload, when the model runs) behind this; the
// matcher only consumes answers and availability times.
class ActionQuerier {
public:
    virtual ~ActionQuerier() = default;

    struct Result {
        ActionReport report;
        TimeS finish = 0.0;  // simulated instant the answer became available
    };

    virtual Result query(TubeId tube, int chunk_index, TimeS request_sim) = 0;
};

// Minimal tube view the matcher needs; decouples it from the tracker.
struct TubeView {
    TubeId tube_id = 0;
    std::string camera_id;
    std::string label;
    Entity entity;
    Interval span;
    std::vector<Chunk> chunks;
};

struct ActivityEvent {
    std::string activity;
    TimeS completion_ts = 0.0;
    TimeS detection_ts = 0.0;
    std::map<std::string, Entity> bindings;
    std::map<int, Interval> node_intervals;
};

struct MatcherStats {
    std::uint64_t instances_created = 0;
    std::uint64_t instances_expired = 0;
    std::uint64_t instances_capped = 0;
    std::uint64_t forks_suppressed = 0;  // complete but dominated by a complete subset
};

// ── graph plan: per-graph adjacency and scheduling mode ─────────────────────

struct GraphPlan {
    ActivityGraph graph;
    bool eager_actions = false;  // matched from the report stream, not checklists

    std::vector<std::vector<int>> then_preds;
    std::vector<std::vector<int>> then_succs;
    std::vector<std::vector<int>> or_partners;
    std::vector<std::vector<int>> and_partners;

    static GraphPlan build(const ActivityGraph& g, bool force_eager) {
        GraphPlan p;
        p.graph = g;
        p.eager_actions = force_eager || graph_needs_eager_actions(g);
        const size_t n = g.nodes.size();
        p.then_preds.resize(n);
        p.then_succs.resize(n);
        p.or_partners.resize(n);
        p.and_partners.resize(n);
        for (const auto& e : g.edges) {
            if (e.kind == EdgeKind::Then) {
                p.then_preds[static_cast<size_t>(e.to)].push_back(e.from);
                p.then_succs[static_cast<size_t>(e.from)].push_back(e.to);
            } else {
                auto& table = e.kind == EdgeKind::Or ? p.or_partners : p.and_partners;
                table[static_cast<size_t>(e.from)].push_back(e.to);
                table[static_cast<size_t>(e.to)].push_back(e.from);
            }
        }
        return p;
    }

    const ClauseNode& node(int id) const { return graph.node(id); }

    // Nodes the scheduler may pass through while they are unmatched: negated
    // clauses never match, checklist-scheduled actions match later.
    bool transparent(int id) const {
        const ClauseNode& n = node(id);
        if (n.negated) return true;
        return n.kind == NodeKind::Action && !eager_actions;
    }

    std::set<std::string> spatial_ops() const {
        std::set<std::string> ops;
        for (const auto& n : graph.nodes)
            if (n.kind != NodeKind::Action) ops.insert(n.op);
        return ops;
    }
};

// ── matcher ─────────────────────────────────────────────────────────────────

class Matcher {
public:
    Matcher(std::vector<GraphPlan> plans, std::vector<TubeView> tubes,
            const std::vector<OpInterval>* interval_index, ActionQuerier& querier,
            MatcherConfig cfg)
        : plans_(std::move(plans)),
          tubes_(std::move(tubes)),
          index_(interval_index),
          querier_(querier),
          cfg_(cfg) {
        instances_.resize(plans_.size());
        for (const auto& t : tubes_) {
            tube_by_id_[t.tube_id] = &t;
            if (t.label == "person") {
                person_entities_.insert(t.entity);
                tubes_by_entity_[t.entity].push_back(t.tube_id);
            }
        }
    }

    const MatcherStats& stats() const { return stats_; }

    // Feeds one interval from the completion-ordered stream.
    std::vector<ActivityEvent> on_interval(const OpInterval& ov) {
        return on_batch({&ov});
    }

    // Feeds a group of intervals that complete at the same instant. The group
    // is advanced to a fixpoint: a match seeded by one member may be extended
    // by another regardless of their order within the group (chains through
    // negated nodes permit equal endpoint times).
    std::vector<ActivityEvent> on_batch(const std::vector<const OpInterval*>& batch) {
        if (batch.empty()) return {};
        const TimeS now = batch.front()->interval.t2;
        std::vector<ActivityEvent> events;
        for (size_t gi = 0; gi < plans_.size(); ++gi) {
            expire(gi, now);
            auto& pool = instances_[gi];
            std::set<std::string> live;
            for (const auto& inst : pool) live.insert(instance_signature(inst));
            size_t next_to_try = 0;  // instances before this index saw every member
            bool progressed = true;
            bool first_round = true;
            while (progressed) {
                progressed = false;
                const size_t frontier = pool.size();
                std::vector<Instance> fresh;
                for (const OpInterval* ov : batch) {
                    if (first_round) advance_one(gi, Instance{}, *ov, now, fresh, events);
                    for (size_t ii = first_round ? 0 : next_to_try; ii < frontier; ++ii)
                        advance_one(gi, pool[ii], *ov, now, fresh, events);
                }
                next_to_try = frontier;
                first_round = false;
                for (auto& f : fresh) {
                    const std::string sig = instance_signature(f);
                    if (!live.insert(sig).second) continue;
                    f.seq = next_seq_++;
                    pool.push_back(std::move(f));
                    ++stats_.instances_created;
                    progressed = true;
                }
            }
            enforce_cap(gi);
        }
        return events;
    }

    // Resolves still-open checklist windows at end of stream (entries whose
    // closing successor never matched scan forward from their start).
    std::vector<ActivityEvent> finalize(TimeS now) {
        std::vector<ActivityEvent> events;
        for (size_t gi = 0; gi < plans_.size(); ++gi) {
            for (const auto& inst : instances_[gi]) {
                if (inst.entries.empty()) continue;
                if (!could_complete(gi, inst)) continue;
                std::vector<Instance> resolved;
                resolve_entries(gi, inst, now, resolved);
                for (auto& f : resolved) {
                    if (f.matched.size() == inst.matched.size()) continue;  // nothing new matched
                    maybe_emit(gi, f, events);
                }
            }
        }
        return events;
    }

    static void sort_events(std::vector<ActivityEvent>& events) {
        std::sort(events.begin(), events.end(), [](const ActivityEvent& a, const ActivityEvent& b) {
            if (a.completion_ts != b.completion_ts) return a.completion_ts < b.completion_ts;
            if (a.activity != b.activity) return a.activity < b.activity;
            return event_signature(a) < event_signature(b);
        });
    }

    static std::string event_signature(const ActivityEvent& e) {
        std::ostringstream os;
        os << e.activity;
        for (const auto& [node, iv] : e.node_intervals)
            os << "|" << node << ":" << fmt_num(iv.t1) << "," << fmt_num(iv.t2);
        for (const auto& [var, ent] : e.bindings) os << "|" << var << "=" << to_string(ent);
        return os.str();
    }

private:
    struct Entry {
        int node = -1;
        std::optional<Entity> entity;  // bound subject, when known at open time
        TimeS t1 = 0.0;                // end of the nearest matched THEN ancestor
        TimeS created_sim = 0.0;
    };

    struct Instance {
        std::map<int, Interval> matched;
        std::map<int, std::vector<Entity>> matched_entities;
        std::map<std::string, Entity> bindings;
        std::vector<Entry> entries;
        std::set<int> entries_opened;
        TimeS created_ts = 0.0;
        TimeS last_progress_ts = 0.0;
        TimeS avail_ts = 0.0;
        std::uint64_t seq = 0;
    };

    // ---- scheduling predicates ----

    bool waived(const GraphPlan& p, const std::map<int, Interval>& matched, int id) const {
        for (int q : p.or_partners[static_cast<size_t>(id)])
            if (matched.count(q)) return true;
        return false;
    }

    bool preds_satisfied(const GraphPlan& p, const std::map<int, Interval>& matched, int id) const {
        for (int pred : p.then_preds[static_cast<size_t>(id)]) {
            if (matched.count(pred) || waived(p, matched, pred)) continue;
            if (p.transparent(pred) && preds_satisfied(p, matched, pred)) continue;
            return false;
        }
        return true;
    }

    bool ready(const GraphPlan& p, const Instance& inst, int id) const {
        const ClauseNode& n = p.node(id);
        if (n.negated || inst.matched.count(id)) return false;
        if (n.kind == NodeKind::Action && !p.eager_actions) return false;
        return preds_satisfied(p, inst.matched, id);
    }

    // Nearest matched THEN ancestors reachable through unmatched negated or
    // action nodes; bounds checklist and absence windows from below.
    void anchor_ancestors(const GraphPlan& p, const std::map<int, Interval>& matched, int id,
                          std::vector<TimeS>& out) const {
        for (int pred : p.then_preds[static_cast<size_t>(id)]) {
            const auto it = matched.find(pred);
            if (it != matched.end()) out.push_back(it->second.t2);
            else if (p.node(pred).negated || p.node(pred).kind == NodeKind::Action)
                anchor_ancestors(p, matched, pred, out);
        }
    }

    void anchor_successors(const GraphPlan& p, const std::map<int, Interval>& matched, int id,
                           std::vector<TimeS>& out) const {
        for (int succ : p.then_succs[static_cast<size_t>(id)]) {
            const auto it = matched.find(succ);
            if (it != matched.end()) out.push_back(it->second.t1);
            else if (p.node(succ).negated || p.node(succ).kind == NodeKind::Action)
                anchor_successors(p, matched, succ, out);
        }
    }

    // ---- constraint checks ----

    bool edge_ok(const GraphPlan& p, const Instance& inst, int id, const Interval& iv) const {
        for (int pred : p.then_preds[static_cast<size_t>(id)]) {
            const auto it = inst.matched.find(pred);
            if (it != inst.matched.end() && !(iv.t1 > it->second.t2)) return false;
        }
        for (int succ : p.then_succs[static_cast<size_t>(id)]) {
            const auto it = inst.matched.find(succ);
            if (it != inst.matched.end() && !(it->second.t1 > iv.t2)) return false;
        }
        for (int partner : p.and_partners[static_cast<size_t>(id)]) {
            const auto it = inst.matched.find(partner);
            if (it != inst.matched.end() && !iv.overlaps(it->second)) return false;
        }
        return true;
    }

    // Extends bindings for node `id` bound to `entities`; distinct variables
    // bind distinct entities. Returns false on any conflict.
    bool unify(const GraphPlan& p, int id, const std::vector<Entity>& entities,
               const std::vector<std::string>& labels,
               std::map<std::string, Entity>& bindings) const {
        const ClauseNode& n = p.node(id);
        if (entities.size() != n.operands.size()) return false;
        for (size_t k = 0; k < n.operands.size(); ++k) {
            const std::string& var = n.operands[k];
            const auto elem = p.graph.variables.find(var);
            if (elem == p.graph.variables.end() || labels[k] != elem->second) return false;
            const auto bound = bindings.find(var);
            if (bound != bindings.end()) {
                if (!(bound->second == entities[k])) return false;
            } else {
                for (const auto& [v, e] : bindings)
                    if (e == entities[k]) return false;
                bindings.emplace(var, entities[k]);
            }
        }
        return true;
    }

    // ---- advancing ----

    void advance_one(size_t gi, const Instance& base, const OpInterval& ov, TimeS now,
                     std::vector<Instance>& fresh, std::vector<ActivityEvent>& events) {
        const GraphPlan& p = plans_[gi];
        for (const auto& node : p.graph.nodes) {
            if (!ready(p, base, node.node_id)) continue;
            if (ov.is_action) {
                if (node.kind != NodeKind::Action || node.op != ov.op) continue;
            } else {
                if (node.kind == NodeKind::Action || node.op != ov.op) continue;
                const size_t arity = node.kind == NodeKind::SpatialBinary ? 2 : 1;
                if (ov.entities.size() != arity) continue;
            }

            std::vector<std::vector<size_t>> orientations;
            if (ov.entities.size() == 2) orientations = {{0, 1}, {1, 0}};
            else orientations = {{0}};

            for (const auto& perm : orientations) {
                std::vector<Entity> ents;
                std::vector<std::string> labels;
                for (size_t k : perm) {
                    ents.push_back(ov.entities[k]);
                    labels.push_back(ov.labels[k]);
                }
                auto bindings = base.bindings;
                if (!unify(p, node.node_id, ents, labels, bindings)) continue;
                if (!edge_ok(p, base, node.node_id, ov.interval)) continue;

                Instance fork = base;
                fork.bindings = std::move(bindings);
                fork.matched[node.node_id] = ov.interval;
                fork.matched_entities[node.node_id] = ents;
                fork.avail_ts = std::max(fork.avail_ts, now);
                if (ov.is_action) {
                    // Report availability bounds when the match could be known.
                    const auto res = querier_.query(ov.tubes[0], ov.chunk_index, now);
                    fork.avail_ts = std::max(fork.avail_ts, res.finish);
                }
                fork.last_progress_ts = now;
                if (base.matched.empty()) fork.created_ts = now;

                // Close any checklist window this match bounds, then open the
                // windows the new match enables.
                std::vector<Instance> resolved;
                resolve_closures(gi, fork, node.node_id, now, resolved);
                for (auto& r : resolved) {
                    open_entries(gi, r, now);
                    if (!maybe_emit(gi, r, events)) fresh.push_back(std::move(r));
                }
            }
        }
    }

    // Entries whose closing successor just matched are resolved in node order;
    // every reported chunk that satisfies the edge constraints forks the
    // instance, and a waivable action node may also stay pending.
    void resolve_closures(size_t gi, const Instance& fork, int matched_node, TimeS now,
                          std::vector<Instance>& out) {
        const GraphPlan& p = plans_[gi];
        std::vector<size_t> closing;
        for (size_t i = 0; i < fork.entries.size(); ++i) {
            if (reaches_through_pending(p, fork.matched, fork.entries[i].node, matched_node))
                closing.push_back(i);
        }
        if (closing.empty()) {
            out.push_back(fork);
            return;
        }
        resolve_selected(gi, fork, closing, 0, now, /*trailing=*/false, out);
    }

    bool reaches_through_pending(const GraphPlan& p, const std::map<int, Interval>& matched,
                                 int from, int target) const {
        for (int succ : p.then_succs[static_cast<size_t>(from)]) {
            if (succ == target) return true;
            if (!matched.count(succ) && p.transparent(succ) &&
                reaches_through_pending(p, matched, succ, target))
                return true;
        }
        return false;
    }

    void resolve_entries(size_t gi, const Instance& inst, TimeS now, std::vector<Instance>& out) {
        std::vector<size_t> all(inst.entries.size());
        for (size_t i = 0; i < all.size(); ++i) all[i] = i;
        resolve_selected(gi, inst, all, 0, now, /*trailing=*/true, out);
    }

    void resolve_selected(size_t gi, const Instance& inst, const std::vector<size_t>& selected,
                          size_t pos, TimeS now, bool trailing, std::vector<Instance>& out) {
        if (pos == selected.size()) {
            Instance done = inst;
            std::vector<Entry> remaining;
            std::set<size_t> drop(selected.begin(), selected.end());
            for (size_t i = 0; i < inst.entries.size(); ++i)
                if (!drop.count(i)) remaining.push_back(inst.entries[i]);
            done.entries = std::move(remaining);
            out.push_back(std::move(done));
            return;
        }
        const GraphPlan& p = plans_[gi];
        const Entry& e = inst.entries[selected[pos]];

        // Recompute the window from the current matched set: earlier entries in
        // this resolution may have tightened the lower bound.
        std::vector<TimeS> lo, hi;
        anchor_ancestors(p, inst.matched, e.node, lo);
        anchor_successors(p, inst.matched, e.node, hi);
        const TimeS t1 = lo.empty() ? e.t1 : *std::max_element(lo.begin(), lo.end());
        std::optional<TimeS> t2;
        if (!hi.empty()) t2 = *std::min_element(hi.begin(), hi.end());
        if (!t2 && !trailing)
            throw Error("internal: checklist window closed without a matched successor");

        const bool waivable = !p.or_partners[static_cast<size_t>(e.node)].empty();
        TimeS scan_finish = inst.avail_ts;
        std::vector<std::pair<Entity, const Chunk*>> candidates;
        scan_window(gi, inst, e, t1, t2, now, trailing, scan_finish, candidates);

        bool any = false;
        for (const auto& [entity, chunk] : candidates) {
            auto bindings = inst.bindings;
            if (!unify(p, e.node, {entity}, {"person"}, bindings)) continue;
            if (!edge_ok(p, inst, e.node, chunk->interval)) continue;
            Instance fork = inst;
            fork.bindings = std::move(bindings);
            fork.matched[e.node] = chunk->interval;
            fork.matched_entities[e.node] = {entity};
            fork.avail_ts = std::max(scan_finish, fork.avail_ts);
            fork.last_progress_ts = std::max(fork.last_progress_ts, now);
            any = true;
            resolve_selected(gi, fork, selected, pos + 1, now, trailing, out);
        }
        if (waivable || trailing) {
            // The node may stay unmatched: either an OR partner covers it, or
            // the trailing scan found nothing and the fork simply stays
            // incomplete.
            Instance fork = inst;
            fork.avail_ts = std::max(scan_finish, fork.avail_ts);
            resolve_selected(gi, fork, selected, pos + 1, now, trailing, out);
        } else if (!any) {
            // Required action absent from its window: this advance is off.
            return;
        }
    }

    void scan_window(size_t gi, const Instance& inst, const Entry& e, TimeS t1,
                     std::optional<TimeS> t2, TimeS now, bool trailing, TimeS& scan_finish,
                     std::vector<std::pair<Entity, const Chunk*>>& candidates) {
        const GraphPlan& p = plans_[gi];
        const ClauseNode& node = p.node(e.node);
        std::vector<Entity> entities;
        if (e.entity) {
            entities.push_back(*e.entity);
        } else {
            const auto bound = inst.bindings.find(node.operands[0]);
            if (bound != inst.bindings.end()) entities.push_back(bound->second);
            else entities.assign(person_entities_.begin(), person_entities_.end());
        }
        const Interval window{t1, t2 ? *t2 : std::numeric_limits<TimeS>::infinity()};
        for (const Entity& entity : entities) {
            const auto it = tubes_by_entity_.find(entity);
            if (it == tubes_by_entity_.end()) continue;
            for (TubeId tid : it->second) {
                const TubeView* tv = tube_by_id_.at(tid);
                for (const auto& chunk : tv->chunks) {
                    if (!chunk.interval.overlaps(window)) continue;
                    const TimeS request_sim = trailing
                                                  ? std::max(e.created_sim, chunk.interval.t2)
                                                  : std::max(now, chunk.interval.t2);
                    const auto res = querier_.query(tid, chunk.index, request_sim);
                    scan_finish = std::max(scan_finish, res.finish);
                    if (res.report.reports(node.op, cfg_.tau))
                        candidates.push_back({entity, &chunk});
                }
            }
        }
    }

    // Opens checklist windows for action nodes whose predecessors just became
    // satisfied (deferred scheduling only).
    void open_entries(size_t gi, Instance& inst, TimeS now) {
        const GraphPlan& p = plans_[gi];
        if (p.eager_actions) return;
        for (const auto& node : p.graph.nodes) {
            if (node.kind != NodeKind::Action || node.negated) continue;
            if (inst.matched.count(node.node_id) || inst.entries_opened.count(node.node_id))
                continue;
            if (!preds_satisfied(p, inst.matched, node.node_id)) continue;
            std::vector<TimeS> anchors;
            anchor_ancestors(p, inst.matched, node.node_id, anchors);
            if (anchors.empty()) continue;
            Entry e;
            e.node = node.node_id;
            e.t1 = *std::max_element(anchors.begin(), anchors.end());
            e.created_sim = now;
            const auto bound = inst.bindings.find(node.operands[0]);
            if (bound != inst.bindings.end()) e.entity = bound->second;
            inst.entries.push_back(e);
            inst.entries_opened.insert(node.node_id);
        }
    }

    // ---- completion ----

    // Derives bindings for an arbitrary matched set; used by the subset checks.
    std::map<std::string, Entity> derive_bindings(
        const GraphPlan& p, const std::map<int, std::vector<Entity>>& matched_entities,
        const std::map<int, Interval>& matched) const {
        std::map<std::string, Entity> bindings;
        for (const auto& [id, iv] : matched) {
            const auto ents = matched_entities.find(id);
            if (ents == matched_entities.end()) continue;
            const ClauseNode& n = p.node(id);
            for (size_t k = 0; k < n.operands.size() && k < ents->second.size(); ++k)
                bindings.emplace(n.operands[k], ents->second[k]);
        }
        return bindings;
    }

    bool structurally_complete(const GraphPlan& p, const std::map<int, Interval>& matched) const {
        for (const auto& node : p.graph.nodes) {
            if (node.negated) continue;
            if (matched.count(node.node_id) || waived(p, matched, node.node_id)) continue;
            return false;
        }
        return true;
    }

    // Every matched action node's interval must fall inside the window spanned
    // by its nearest matched THEN neighbors; direct edges are checked
    // elsewhere, this constrains chains that pass through unmatched negated or
    // pending action nodes.
    bool action_windows_ok(const GraphPlan& p, const std::map<int, Interval>& matched) const {
        for (const auto& node : p.graph.nodes) {
            if (node.kind != NodeKind::Action || node.negated) continue;
            const auto it = matched.find(node.node_id);
            if (it == matched.end()) continue;
            std::vector<TimeS> lo, hi;
            anchor_ancestors(p, matched, node.node_id, lo);
            anchor_successors(p, matched, node.node_id, hi);
            const Interval window{
                lo.empty() ? -std::numeric_limits<TimeS>::infinity()
                           : *std::max_element(lo.begin(), lo.end()),
                hi.empty() ? std::numeric_limits<TimeS>::infinity()
                           : *std::min_element(hi.begin(), hi.end())};
            if (!it->second.overlaps(window)) return false;
        }
        return true;
    }

    // Every negated node must have a bounded window free of conflicting
    // matches (or, for actions, of confirming reports).
    bool negation_ok(const GraphPlan& p, const std::map<int, Interval>& matched,
                     const std::map<int, std::vector<Entity>>& matched_entities, TimeS now) {
        const auto bindings = derive_bindings(p, matched_entities, matched);
        for (const auto& node : p.graph.nodes) {
            if (!node.negated) continue;
            std::vector<TimeS> lo, hi;
            anchor_ancestors(p, matched, node.node_id, lo);
            anchor_successors(p, matched, node.node_id, hi);
            if (lo.empty() || hi.empty()) return false;  // window unbounded
            const Interval window{*std::max_element(lo.begin(), lo.end()),
                                  *std::min_element(hi.begin(), hi.end())};
            if (window.t1 > window.t2) return false;  // neighbors out of order
            if (absence_violated(p, node, window, bindings, now)) return false;
        }
        return true;
    }

    bool absence_violated(const GraphPlan& p, const ClauseNode& node, const Interval& window,
                          const std::map<std::string, Entity>& bindings, TimeS now) {
        const auto entity_compatible = [&](size_t k, const Entity& ent,
                                           const std::string& label) {
            const std::string& var = node.operands[k];
            const auto elem = p.graph.variables.find(var);
            if (elem == p.graph.variables.end() || label != elem->second) return false;
            const auto bound = bindings.find(var);
            if (bound != bindings.end()) return bound->second == ent;
            // Unbound operand: wildcard over unclaimed entities of the class.
            for (const auto& [v, e] : bindings)
                if (e == ent) return false;
            return true;
        };

        if (node.kind != NodeKind::Action) {
            for (const auto& ov : *index_) {
                if (ov.is_action || ov.op != node.op) continue;
                if (!ov.interval.overlaps_strictly(window)) continue;
                std::vector<std::vector<size_t>> orientations;
                if (ov.entities.size() == 2 && node.operands.size() == 2)
                    orientations = {{0, 1}, {1, 0}};
                else if (ov.entities.size() == 1 && node.operands.size() == 1)
                    orientations = {{0}};
                else
                    continue;
                for (const auto& perm : orientations) {
                    bool ok = true;
                    for (size_t k = 0; k < perm.size() && ok; ++k)
                        ok = entity_compatible(k, ov.entities[perm[k]], ov.labels[perm[k]]);
                    if (ok && ov.entities.size() == 2 && ov.entities[0] == ov.entities[1]) ok = false;
                    if (ok) return true;
                }
            }
            return false;
        }

        // Negated action: scan reports covering the window.
        for (const Entity& entity : person_entities_) {
            if (!entity_compatible(0, entity, "person")) continue;
            for (TubeId tid : tubes_by_entity_.at(entity)) {
                const TubeView* tv = tube_by_id_.at(tid);
                for (const auto& chunk : tv->chunks) {
                    if (!chunk.interval.overlaps_strictly(window)) continue;
                    const auto res = querier_.query(tid, chunk.index, now);
                    if (res.report.reports(node.op, cfg_.tau)) return true;
                }
            }
        }
        return false;
    }

    bool complete(const GraphPlan& p, const std::map<int, Interval>& matched,
                  const std::map<int, std::vector<Entity>>& matched_entities, TimeS now) {
        return structurally_complete(p, matched) && action_windows_ok(p, matched) &&
               negation_ok(p, matched, matched_entities, now);
    }

    // A match is emitted only when no matched node is redundant; supersets of
    // complete matches are suppressed, which keeps the emitted set independent
    // of arrival order and free of trivial duplicates.
    bool minimal(const GraphPlan& p, const std::map<int, Interval>& matched,
                 const std::map<int, std::vector<Entity>>& matched_entities, TimeS now) {
        for (const auto& [id, iv] : matched) {
            auto reduced = matched;
            reduced.erase(id);
            auto reduced_entities = matched_entities;
            reduced_entities.erase(id);
            if (complete(p, reduced, reduced_entities, now)) return false;
        }
        return true;
    }

    // Structural completion reachable at all, assuming every open entry could
    // still match; prunes hopeless trailing scans.
    bool could_complete(size_t gi, const Instance& inst) const {
        const GraphPlan& p = plans_[gi];
        auto assumed = inst.matched;
        for (const auto& e : inst.entries) assumed[e.node] = Interval{0, 0};
        return structurally_complete(p, assumed);
    }

    // Returns true when the fork completed (and was emitted or suppressed).
    bool maybe_emit(size_t gi, Instance& fork, std::vector<ActivityEvent>& events) {
        const GraphPlan& p = plans_[gi];
        const TimeS now = fork.last_progress_ts;
        if (!complete(p, fork.matched, fork.matched_entities, now)) return false;
        if (!minimal(p, fork.matched, fork.matched_entities, now)) {
            ++stats_.forks_suppressed;
            return true;  // retire silently
        }
        ActivityEvent ev;
        ev.activity = p.graph.name;
        ev.bindings = derive_bindings(p, fork.matched_entities, fork.matched);
        TimeS completion = -std::numeric_limits<TimeS>::infinity();
        for (const auto& [id, iv] : fork.matched) {
            ev.node_intervals[id] = iv;
            completion = std::max(completion, iv.t2);
        }
        ev.completion_ts = completion;
        ev.detection_ts = std::max(completion, fork.avail_ts);
        const std::string sig = event_signature(ev);
        if (emitted_.insert(sig).second) events.push_back(std::move(ev));
        return true;
    }

    // ---- pool management ----

    std::string instance_signature(const Instance& inst) const {
        std::ostringstream os;
        for (const auto& [id, iv] : inst.matched)
            os << id << ":" << fmt_num(iv.t1) << "," << fmt_num(iv.t2) << ";";
        os << "|";
        for (const auto& [var, ent] : inst.bindings) os << var << "=" << to_string(ent) << ";";
        os << "|";
        for (const auto& e : inst.entries) os << e.node << ",";
        os << "|";
        for (int n : inst.entries_opened) os << n << ",";
        return os.str();
    }

    void enforce_cap(size_t gi) {
        auto& pool = instances_[gi];
        while (pool.size() > static_cast<size_t>(cfg_.instance_cap)) {
            size_t victim = 0;
            for (size_t i = 1; i < pool.size(); ++i) {
                if (pool[i].last_progress_ts < pool[victim].last_progress_ts ||
                    (pool[i].last_progress_ts == pool[victim].last_progress_ts &&
                     pool[i].seq < pool[victim].seq))
                    victim = i;
            }
            pool.erase(pool.begin() + static_cast<long>(victim));
            ++stats_.instances_capped;
        }
    }

    void expire(size_t gi, TimeS now) {
        auto& pool = instances_[gi];
        const size_t before = pool.size();
        pool.erase(std::remove_if(pool.begin(), pool.end(),
                                  [&](const Instance& inst) {
                                      return now - inst.last_progress_ts > cfg_.t_expire_s;
                                  }),
                   pool.end());
        stats_.instances_expired += before - pool.size();
    }

    std::vector<GraphPlan> plans_;
    std::vector<TubeView> tubes_;
    const std::vector<OpInterval>* index_;
    ActionQuerier& querier_;
    MatcherConfig cfg_;

    std::map<TubeId, const TubeView*> tube_by_id_;
    std::set<Entity> person_entities_;
    std::map<Entity, std::vector<TubeId>> tubes_by_entity_;

    std::vector<std::vector<Instance>> instances_;
    std::set<std::string> emitted_;
    MatcherStats stats_;
    std::uint64_t next_seq_ = 1;
};

}  // namespace actgraph
