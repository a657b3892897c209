#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "actgraph/core.hpp"

namespace actgraph {

struct TravelWindow {
    TimeS min_travel_s = 1.0;
    TimeS max_travel_s = 120.0;
};

struct FrameGeometry {
    double width = 1280.0;
    double height = 720.0;
};

// Undirected camera adjacency with per-edge travel-time bounds. An edge exists
// only where a person or car can move between the two views without crossing a
// third camera; re-identification candidates are scoped by it.
struct CameraTopology {
    std::set<std::string> cameras;
    std::map<std::pair<std::string, std::string>, TravelWindow> edges;  // key ordered (min,max)
    std::map<std::string, FrameGeometry> geometry;

    void add_edge(const std::string& a, const std::string& b, TravelWindow w) {
        if (a == b) throw Error("topology: self-loop on camera " + a);
        if (!(w.min_travel_s > 0) || w.min_travel_s > w.max_travel_s)
            throw Error("topology: need 0 < min_travel <= max_travel for edge " + a + " " + b);
        cameras.insert(a);
        cameras.insert(b);
        edges[ordered(a, b)] = w;
    }

    bool adjacent(const std::string& a, const std::string& b) const {
        return edges.count(ordered(a, b)) != 0;
    }

    const TravelWindow* window(const std::string& a, const std::string& b) const {
        const auto it = edges.find(ordered(a, b));
        return it == edges.end() ? nullptr : &it->second;
    }

    std::vector<std::string> neighbors(const std::string& cam) const {
        std::vector<std::string> out;
        for (const auto& [key, w] : edges) {
            if (key.first == cam) out.push_back(key.second);
            else if (key.second == cam) out.push_back(key.first);
        }
        return out;
    }

    FrameGeometry frame(const std::string& cam) const {
        const auto it = geometry.find(cam);
        return it == geometry.end() ? FrameGeometry{} : it->second;
    }

private:
    static std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }
};

// File format, one entry per line, `#` comments:
//   edge camA camB min_travel max_travel
//   camera camX width height
inline CameraTopology parse_topology(std::istream& in) {
    CameraTopology topo;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string kind;
        if (!(ls >> kind)) continue;
        if (kind == "edge") {
            std::string a, b;
            TravelWindow w;
            if (!(ls >> a >> b >> w.min_travel_s >> w.max_travel_s))
                throw Error("topology line " + std::to_string(lineno) +
                            ": expected 'edge camA camB min max'");
            topo.add_edge(a, b, w);
        } else if (kind == "camera") {
            std::string cam;
            FrameGeometry g;
            if (!(ls >> cam >> g.width >> g.height))
                throw Error("topology line " + std::to_string(lineno) +
                            ": expected 'camera name width height'");
            topo.cameras.insert(cam);
            topo.geometry[cam] = g;
        } else {
            throw Error("topology line " + std::to_string(lineno) + ": unknown entry '" + kind + "'");
        }
    }
    return topo;
}

inline CameraTopology load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open topology file: " + path);
    return parse_topology(in);
}

inline std::string format_topology(const CameraTopology& topo) {
    std::ostringstream os;
    for (const auto& [cam, g] : topo.geometry)
        os << "camera " << cam << " " << fmt_time(g.width) << " " << fmt_time(g.height) << "\n";
    for (const auto& [key, w] : topo.edges)
        os << "edge " << key.first << " " << key.second << " " << fmt_time(w.min_travel_s) << " "
           << fmt_time(w.max_travel_s) << "\n";
    return os.str();
}

}  // namespace actgraph
