#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "actgraph/engine.hpp"
#include "actgraph/metrics.hpp"

namespace actgraph {

struct SweepCell {
    double p_reid = 0.0;
    double p_action = 0.0;
    int tp = 0, fp = 0, fn = 0;
    std::optional<double> precision;
    std::optional<double> recall;
};

// One full run per (p_reid, p_action) grid cell,-repeated over `seeds` runs
// with consecutive seeds; tallies are pooled across the repeats.
inline std::vector<SweepCell> sweep(const RunInputs& in, const EngineConfig& base,
                                    const std::vector<GroundTruthActivity>& gt,
                                    const std::vector<double>& p_reid_grid,
                                    const std::vector<double>& p_action_grid, int seeds,
                                    TimeS tolerance_s = 2.0) {
    if (seeds < 1) throw Error("sweep: need at least one seed");
    std::vector<SweepCell> out;
    for (double pr : p_reid_grid) {
        for (double pa : p_action_grid) {
            SweepCell cell;
            cell.p_reid = pr;
            cell.p_action = pa;
            for (int s = 0; s < seeds; ++s) {
                EngineConfig cfg = base;
                cfg.oracle.p_reid = pr;
                cfg.oracle.p_action = pa;
                cfg.oracle.seed = base.oracle.seed + static_cast<std::uint64_t>(s);
                const RunResult run = run_engine(in, cfg);
                const ScoreReport rep = score(scored_from_run(run), gt, tolerance_s);
                cell.tp += rep.tp;
                cell.fp += rep.fp;
                cell.fn += rep.fn;
            }
            if (cell.tp + cell.fp > 0)
                cell.precision = static_cast<double>(cell.tp) / (cell.tp + cell.fp);
            if (cell.tp + cell.fn > 0)
                cell.recall = static_cast<double>(cell.tp) / (cell.tp + cell.fn);
            out.push_back(cell);
        }
    }
    return out;
}

// Plot-ready matrix: one `p_reid p_action precision recall tp fp fn` row per cell.
inline std::string format_sweep(const std::vector<SweepCell>& cells) {
    std::ostringstream os;
    os << "# p_reid p_action precision recall tp fp fn\n";
    for (const auto& c : cells) {
        os << fmt_num(c.p_reid) << " " << fmt_num(c.p_action) << " "
           << (c.precision ? fmt_num(*c.precision) : "nan") << " "
           << (c.recall ? fmt_num(*c.recall) : "nan") << " " << c.tp << " " << c.fp << " " << c.fn
           << "\n";
    }
    return os.str();
}

}  // namespace actgraph
