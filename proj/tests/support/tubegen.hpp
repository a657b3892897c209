#pragma once

// Random synthetic tubes for the spatial equivalence suite: piecewise walks
// with pauses, varied frame rates and box sizes, up to 30 seconds.

#include <random>
#include <vector>

#include "actgraph/tube.hpp"

namespace testsupport {

inline actgraph::Tube random_tube(std::mt19937_64& rng, actgraph::TubeId id,
                                  const std::string& camera, const std::string& label = "person") {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    actgraph::Tube t;
    t.tube_id = id;
    t.camera_id = camera;
    t.label = label;
    t.closed = true;

    const double fps = 5.0 + u01(rng) * 15.0;
    const double dt = 1.0 / fps;
    const double start = u01(rng) * 5.0;
    const double duration = 3.0 + u01(rng) * 22.0;
    const double w = 20.0 + u01(rng) * 60.0;
    const double h = 30.0 + u01(rng) * 90.0;
    double x = u01(rng) * 1000.0;
    double y = u01(rng) * 500.0;

    double seg_left = 0.0;
    double vx = 0.0, vy = 0.0;
    std::int64_t frame = 0;
    for (double ts = start; ts <= start + duration + 1e-9; ts += dt, ++frame) {
        if (seg_left <= 0.0) {
            seg_left = 0.5 + u01(rng) * 4.0;
            if (u01(rng) < 0.4) {
                vx = vy = 0.0;  // pause
            } else {
                vx = (u01(rng) * 2.0 - 1.0) * 200.0;
                vy = (u01(rng) * 2.0 - 1.0) * 80.0;
            }
        }
        actgraph::TubeBox b;
        b.ts = ts;
        b.frame_index = frame;
        b.box = {std::max(0.0, x), std::max(0.0, y), w, h};
        t.boxes.push_back(b);
        x += vx * dt;
        y += vy * dt;
        x = std::clamp(x, 0.0, 1200.0);
        y = std::clamp(y, 0.0, 600.0);
        seg_left -= dt;
    }
    return t;
}

}  // namespace testsupport
