#pragma once

#include <chrono>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "actgraph/trace.hpp"

namespace actgraph {

constexpr double kAsFastAsPossible = std::numeric_limits<double>::infinity();

using EventSink = std::function<void(const DetectionEvent&)>;

// Replays loaded streams as a timed feed. With speed = infinity the whole
// trace is delivered single-threaded in global (timestamp, camera_id) order.
// With a finite speed one producer thread per camera paces its own stream by
// the trace timestamps scaled 1/speed; the sink is invoked concurrently and
// must be thread safe. Per-camera delivery order always matches trace order.
inline void replay(const CameraStreams& streams, double speed, const EventSink& sink) {
    if (!(speed > 0.0)) throw Error("replay: speed must be positive");

    if (speed == kAsFastAsPossible) {
        for (const auto& ev : merged_order(streams)) sink(ev);
        return;
    }

    TimeS first_ts = std::numeric_limits<TimeS>::infinity();
    for (const auto& [cam, events] : streams)
        if (!events.empty()) first_ts = std::min(first_ts, events.front().timestamp);
    if (!std::isfinite(first_ts)) return;

    const auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> producers;
    producers.reserve(streams.size());
    for (const auto& [cam, events] : streams) {
        const std::vector<DetectionEvent>* stream = &events;
        producers.emplace_back([stream, first_ts, speed, start, &sink] {
            for (const auto& ev : *stream) {
                const double offset_s = (ev.timestamp - first_ts) / speed;
                std::this_thread::sleep_until(
                    start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                std::chrono::duration<double>(offset_s)));
                sink(ev);
            }
        });
    }
    for (auto& t : producers) t.join();
}

}  // namespace actgraph
