#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "actgraph/matcher.hpp"

namespace actgraph {

// Reference matcher: enumerates every binding assignment and interval
// combination per graph, filters by the edge/window/absence constraints, and
// keeps complete matches with no redundant node. Exponential in graph size —
// intended for small scenarios, generator self-checks, and as the referee the
// streaming matcher is compared against.
class ExhaustiveMatcher {
public:
    ExhaustiveMatcher(std::vector<GraphPlan> plans, std::vector<TubeView> tubes,
                      std::vector<OpInterval> intervals,
                      std::map<std::pair<TubeId, int>, ActionReport> reports, double tau)
        : plans_(std::move(plans)),
          tubes_(std::move(tubes)),
          intervals_(std::move(intervals)),
          reports_(std::move(reports)),
          tau_(tau) {
        for (const auto& t : tubes_) tube_by_id_[t.tube_id] = &t;
    }

    std::vector<ActivityEvent> match_all() {
        std::vector<ActivityEvent> events;
        std::set<std::string> seen;
        for (const auto& p : plans_) {
            Assignment a;
            std::map<std::string, Entity> bindings;
            enumerate(p, 0, a, bindings, seen, events);
        }
        Matcher::sort_events(events);
        return events;
    }

private:
    struct Candidate {
        Interval interval;
        std::vector<Entity> entities;
    };

    using Assignment = std::map<int, Candidate>;

    std::vector<Candidate> node_candidates(const GraphPlan& p, const ClauseNode& node) const {
        std::vector<Candidate> out;
        if (node.negated) return out;
        if (node.kind == NodeKind::Action) {
            for (const auto& t : tubes_) {
                if (t.label != "person") continue;
                for (const auto& chunk : t.chunks) {
                    const auto it = reports_.find({t.tube_id, chunk.index});
                    if (it == reports_.end()) continue;
                    if (it->second.reports(node.op, tau_))
                        out.push_back({chunk.interval, {t.entity}});
                }
            }
            return out;
        }
        const size_t arity = node.kind == NodeKind::SpatialBinary ? 2 : 1;
        for (const auto& ov : intervals_) {
            if (ov.is_action || ov.op != node.op || ov.entities.size() != arity) continue;
            if (arity == 1) {
                out.push_back({ov.interval, {ov.entities[0]}});
            } else {
                out.push_back({ov.interval, {ov.entities[0], ov.entities[1]}});
                out.push_back({ov.interval, {ov.entities[1], ov.entities[0]}});
            }
        }
        return out;
    }

    void enumerate(const GraphPlan& p, int node_id, Assignment& a,
                   std::map<std::string, Entity>& bindings, std::set<std::string>& seen,
                   std::vector<ActivityEvent>& events) {
        if (node_id == static_cast<int>(p.graph.nodes.size())) {
            consider(p, a, seen, events);
            return;
        }
        const ClauseNode& node = p.node(node_id);
        // Skip choice (node left unmatched).
        enumerate(p, node_id + 1, a, bindings, seen, events);
        for (const auto& cand : node_candidates(p, node)) {
            if (!pairwise_consistent(p, a, node_id, cand)) continue;
            std::vector<std::string> added;
            if (!try_bind(p, node, cand, bindings, added)) continue;
            a[node_id] = cand;
            enumerate(p, node_id + 1, a, bindings, seen, events);
            a.erase(node_id);
            for (const auto& var : added) bindings.erase(var);
        }
    }

    bool try_bind(const GraphPlan& p, const ClauseNode& node, const Candidate& cand,
                  std::map<std::string, Entity>& bindings, std::vector<std::string>& added) const {
        const auto undo = [&] {
            for (const auto& var : added) bindings.erase(var);
            added.clear();
        };
        for (size_t k = 0; k < node.operands.size(); ++k) {
            const std::string& var = node.operands[k];
            const auto elem = p.graph.variables.find(var);
            if (elem == p.graph.variables.end() || entity_label(cand.entities[k]) != elem->second) {
                undo();
                return false;
            }
            const auto bound = bindings.find(var);
            if (bound != bindings.end()) {
                if (!(bound->second == cand.entities[k])) {
                    undo();
                    return false;
                }
                continue;
            }
            bool taken = false;
            for (const auto& [v, e] : bindings)
                if (e == cand.entities[k]) taken = true;
            if (taken) {
                undo();
                return false;
            }
            bindings.emplace(var, cand.entities[k]);
            added.push_back(var);
        }
        return true;
    }

    bool pairwise_consistent(const GraphPlan& p, const Assignment& a, int id,
                             const Candidate& cand) const {
        for (int pred : p.then_preds[static_cast<size_t>(id)]) {
            const auto it = a.find(pred);
            if (it != a.end() && !(cand.interval.t1 > it->second.interval.t2)) return false;
        }
        for (int succ : p.then_succs[static_cast<size_t>(id)]) {
            const auto it = a.find(succ);
            if (it != a.end() && !(it->second.interval.t1 > cand.interval.t2)) return false;
        }
        for (int partner : p.and_partners[static_cast<size_t>(id)]) {
            const auto it = a.find(partner);
            if (it != a.end() && !cand.interval.overlaps(it->second.interval)) return false;
        }
        return true;
    }

    // ---- assignment-level checks (mirror the streaming matcher semantics) ----

    static std::map<int, Interval> intervals_of(const Assignment& a) {
        std::map<int, Interval> out;
        for (const auto& [id, c] : a) out[id] = c.interval;
        return out;
    }

    bool bindings_of(const GraphPlan& p, const Assignment& a,
                     std::map<std::string, Entity>& bindings) const {
        for (const auto& [id, cand] : a) {
            const ClauseNode& n = p.node(id);
            for (size_t k = 0; k < n.operands.size(); ++k) {
                const std::string& var = n.operands[k];
                const auto elem = p.graph.variables.find(var);
                if (elem == p.graph.variables.end()) return false;
                if (entity_label(cand.entities[k]) != elem->second) return false;
                const auto bound = bindings.find(var);
                if (bound != bindings.end()) {
                    if (!(bound->second == cand.entities[k])) return false;
                } else {
                    for (const auto& [v, e] : bindings)
                        if (e == cand.entities[k]) return false;
                    bindings.emplace(var, cand.entities[k]);
                }
            }
        }
        return true;
    }

    std::string entity_label(const Entity& e) const {
        if (e.kind != Entity::Kind::ObjectTube) return "person";
        const auto it = tube_by_id_.find(e.id);
        return it == tube_by_id_.end() ? "?" : it->second->label;
    }

    void anchors_below(const GraphPlan& p, const std::map<int, Interval>& matched, int id,
                       std::vector<TimeS>& out) const {
        for (int pred : p.then_preds[static_cast<size_t>(id)]) {
            const auto it = matched.find(pred);
            if (it != matched.end()) out.push_back(it->second.t2);
            else if (p.node(pred).negated || p.node(pred).kind == NodeKind::Action)
                anchors_below(p, matched, pred, out);
        }
    }
    void anchors_above(const GraphPlan& p, const std::map<int, Interval>& matched, int id,
                       std::vector<TimeS>& out) const {
        for (int succ : p.then_succs[static_cast<size_t>(id)]) {
            const auto it = matched.find(succ);
            if (it != matched.end()) out.push_back(it->second.t1);
            else if (p.node(succ).negated || p.node(succ).kind == NodeKind::Action)
                anchors_above(p, matched, succ, out);
        }
    }

    bool waived(const GraphPlan& p, const std::map<int, Interval>& matched, int id) const {
        for (int q : p.or_partners[static_cast<size_t>(id)])
            if (matched.count(q)) return true;
        return false;
    }

    bool structurally_complete(const GraphPlan& p, const std::map<int, Interval>& matched) const {
        for (const auto& node : p.graph.nodes) {
            if (node.negated) continue;
            if (matched.count(node.node_id) || waived(p, matched, node.node_id)) continue;
            return false;
        }
        return true;
    }

    bool action_windows_ok(const GraphPlan& p, const std::map<int, Interval>& matched) const {
        for (const auto& node : p.graph.nodes) {
            if (node.kind != NodeKind::Action || node.negated) continue;
            const auto it = matched.find(node.node_id);
            if (it == matched.end()) continue;
            std::vector<TimeS> lo, hi;
            anchors_below(p, matched, node.node_id, lo);
            anchors_above(p, matched, node.node_id, hi);
            const Interval window{
                lo.empty() ? -std::numeric_limits<TimeS>::infinity()
                           : *std::max_element(lo.begin(), lo.end()),
                hi.empty() ? std::numeric_limits<TimeS>::infinity()
                           : *std::min_element(hi.begin(), hi.end())};
            if (!it->second.overlaps(window)) return false;
        }
        return true;
    }

    bool negation_ok(const GraphPlan& p, const Assignment& a,
                     const std::map<int, Interval>& matched) const {
        std::map<std::string, Entity> bindings;
        if (!bindings_of(p, a, bindings)) return false;
        for (const auto& node : p.graph.nodes) {
            if (!node.negated) continue;
            std::vector<TimeS> lo, hi;
            anchors_below(p, matched, node.node_id, lo);
            anchors_above(p, matched, node.node_id, hi);
            if (lo.empty() || hi.empty()) return false;
            const Interval window{*std::max_element(lo.begin(), lo.end()),
                                  *std::min_element(hi.begin(), hi.end())};
            if (window.t1 > window.t2) return false;
            if (absence_violated(p, node, window, bindings)) return false;
        }
        return true;
    }

    bool absence_violated(const GraphPlan& p, const ClauseNode& node, const Interval& window,
                          const std::map<std::string, Entity>& bindings) const {
        const auto compatible = [&](size_t k, const Entity& ent, const std::string& label) {
            const std::string& var = node.operands[k];
            const auto elem = p.graph.variables.find(var);
            if (elem == p.graph.variables.end() || label != elem->second) return false;
            const auto bound = bindings.find(var);
            if (bound != bindings.end()) return bound->second == ent;
            for (const auto& [v, e] : bindings)
                if (e == ent) return false;
            return true;
        };
        if (node.kind != NodeKind::Action) {
            for (const auto& ov : intervals_) {
                if (ov.is_action || ov.op != node.op) continue;
                if (ov.entities.size() != node.operands.size()) continue;
                if (!ov.interval.overlaps_strictly(window)) continue;
                std::vector<std::vector<size_t>> perms;
                if (ov.entities.size() == 2) perms = {{0, 1}, {1, 0}};
                else perms = {{0}};
                for (const auto& perm : perms) {
                    bool ok = true;
                    for (size_t k = 0; k < perm.size() && ok; ++k)
                        ok = compatible(k, ov.entities[perm[k]], ov.labels[perm[k]]);
                    if (ok && ov.entities.size() == 2 && ov.entities[0] == ov.entities[1]) ok = false;
                    if (ok) return true;
                }
            }
            return false;
        }
        for (const auto& t : tubes_) {
            if (t.label != "person" || !compatible(0, t.entity, "person")) continue;
            for (const auto& chunk : t.chunks) {
                if (!chunk.interval.overlaps_strictly(window)) continue;
                const auto it = reports_.find({t.tube_id, chunk.index});
                if (it != reports_.end() && it->second.reports(node.op, tau_)) return true;
            }
        }
        return false;
    }

    bool complete(const GraphPlan& p, const Assignment& a) const {
        const auto matched = intervals_of(a);
        return structurally_complete(p, matched) && action_windows_ok(p, matched) &&
               negation_ok(p, a, matched);
    }

    void consider(const GraphPlan& p, const Assignment& a, std::set<std::string>& seen,
                  std::vector<ActivityEvent>& events) const {
        if (a.empty() || !complete(p, a)) return;
        // Minimality: no single matched node may be redundant.
        for (const auto& [id, cand] : a) {
            Assignment reduced = a;
            reduced.erase(id);
            if (complete(p, reduced)) return;
        }
        std::map<std::string, Entity> bindings;
        if (!bindings_of(p, a, bindings)) return;

        ActivityEvent ev;
        ev.activity = p.graph.name;
        ev.bindings = std::move(bindings);
        TimeS completion = -std::numeric_limits<TimeS>::infinity();
        for (const auto& [id, cand] : a) {
            ev.node_intervals[id] = cand.interval;
            completion = std::max(completion, cand.interval.t2);
        }
        ev.completion_ts = completion;
        ev.detection_ts = completion;
        const std::string sig = Matcher::event_signature(ev);
        if (seen.insert(sig).second) events.push_back(std::move(ev));
    }

    std::vector<GraphPlan> plans_;
    std::vector<TubeView> tubes_;
    std::vector<OpInterval> intervals_;
    std::map<std::pair<TubeId, int>, ActionReport> reports_;
    double tau_;
    std::map<TubeId, const TubeView*> tube_by_id_;
};

}  // namespace actgraph
