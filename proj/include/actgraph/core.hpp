#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace actgraph {

using TimeS = double;   // seconds on the trace clock
using TubeId = std::int64_t;
using IdentityId = std::int64_t;

// ── errors ──────────────────────────────────────────────────────────────────

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LexError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct CompileError : Error { using Error::Error; };
struct TraceFormatError : Error { using Error::Error; };
struct NonMonotoneTimestamp : TraceFormatError { using TraceFormatError::TraceFormatError; };
struct CacheMissError : Error { using Error::Error; };
struct ScenarioError : Error { using Error::Error; };

// ── closed time interval [t1, t2] ───────────────────────────────────────────

struct Interval {
    TimeS t1 = 0.0;
    TimeS t2 = 0.0;

    bool operator==(const Interval& o) const { return t1 == o.t1 && t2 == o.t2; }
    bool operator<(const Interval& o) const {
        return t1 != o.t1 ? t1 < o.t1 : t2 < o.t2;
    }

    TimeS length() const { return t2 - t1; }

    // Closed-interval overlap; touching endpoints count.
    bool overlaps(const Interval& o) const { return t1 <= o.t2 && o.t1 <= t2; }

    // Overlap with positive measure; used where a shared endpoint must not count
    // as presence (absence checks, stop/move disjointness).
    bool overlaps_strictly(const Interval& o) const { return t1 < o.t2 && o.t1 < t2; }

    bool contains(TimeS t) const { return t1 <= t && t <= t2; }
};

inline std::optional<Interval> intersect(const Interval& a, const Interval& b) {
    const TimeS lo = std::max(a.t1, b.t1);
    const TimeS hi = std::min(a.t2, b.t2);
    if (lo > hi) return std::nullopt;
    return Interval{lo, hi};
}

// ── pixel-space bounding box ────────────────────────────────────────────────

struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    bool operator==(const Box& o) const {
        return x == o.x && y == o.y && w == o.w && h == o.h;
    }

    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }
    double area() const { return w * h; }
    double max_dim() const { return std::max(w, h); }
};

inline double iou(const Box& a, const Box& b) {
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    return uni <= 0.0 ? 0.0 : inter / uni;
}

// Smallest pixel distance between the outer edges of two boxes; 0 when the
// rectangles overlap or touch.
inline double edge_distance(const Box& a, const Box& b) {
    const double dx = std::max({0.0, b.x - (a.x + a.w), a.x - (b.x + b.w)});
    const double dy = std::max({0.0, b.y - (a.y + a.h), a.y - (b.y + b.h)});
    return std::hypot(dx, dy);
}

inline double center_distance(const Box& a, const Box& b) {
    return std::hypot(a.cx() - b.cx(), a.cy() - b.cy());
}

// ── entities bound by rule variables ────────────────────────────────────────
//
// Person variables bind global identities (so cross-camera clauses unify);
// object variables bind tube ids. A person tube whose identity could not be
// established keeps a per-tube anonymous entity.

struct Entity {
    enum class Kind { PersonIdentity, PersonAnon, ObjectTube };

    Kind kind = Kind::ObjectTube;
    std::int64_t id = 0;

    bool operator==(const Entity& o) const { return kind == o.kind && id == o.id; }
    bool operator!=(const Entity& o) const { return !(*this == o); }
    bool operator<(const Entity& o) const {
        return kind != o.kind ? kind < o.kind : id < o.id;
    }
};

inline std::string to_string(const Entity& e) {
    switch (e.kind) {
        case Entity::Kind::PersonIdentity: return "id" + std::to_string(e.id);
        case Entity::Kind::PersonAnon: return "anon" + std::to_string(e.id);
        case Entity::Kind::ObjectTube: return "tube" + std::to_string(e.id);
    }
    return "?";
}

// Fixed-format floating point used by every text emitter so that equal runs
// produce byte-identical files.
inline std::string fmt_time(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

inline std::string fmt_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace actgraph
