// Command line front end: rule inspection, trace generation, trace-driven
// runs, scoring, and accuracy sweeps.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "actgraph/engine.hpp"
#include "actgraph/generator.hpp"
#include "actgraph/metrics.hpp"
#include "actgraph/spatial.hpp"
#include "actgraph/sweep.hpp"

using namespace actgraph;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path);
    if (!out) throw Error("cannot write file: " + path);
    out << content;
}

std::vector<double> parse_grid(const std::string& csv) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ','))
        if (!tok.empty()) out.push_back(std::stod(tok));
    if (out.empty()) throw Error("empty grid: " + csv);
    return out;
}

double parse_speed(const std::string& s) {
    if (s == "inf" || s == "0") return kAsFastAsPossible;
    const double v = std::stod(s);
    if (v <= 0) throw Error("speed must be positive or 'inf'");
    return v;
}

struct RunOpts {
    std::string trace, topology, rules, vocab;
    std::string speed = "inf";
    std::string mode = "lazy";
    std::uint64_t cache_limit = 4ull << 30;
    double p_action = 1.0, p_reid = 1.0, tau = 0.5;
    std::uint64_t seed = 1;
    int gpu_workers = 2;
    double action_cost_ms = 40.0;
    double t_expire = 300.0;
    int instance_cap = 10000;

    void attach(CLI::App* cmd, bool with_engine_knobs = true) {
        cmd->add_option("--trace", trace, "detection trace file")->required();
        cmd->add_option("--topology", topology, "camera topology file")->required();
        cmd->add_option("--rules", rules, "activity rule file")->required();
        cmd->add_option("--vocab", vocab, "vocabulary file")->required();
        if (!with_engine_knobs) return;
        cmd->add_option("--speed", speed, "replay speed multiplier, or 'inf' for batch");
        cmd->add_option("--cache-limit-bytes", cache_limit, "per-camera crop cache limit");
        cmd->add_option("--mode", mode, "lazy|strawman")
            ->check(CLI::IsMember({"lazy", "strawman"}));
        cmd->add_option("--p-action", p_action, "action oracle accuracy in [0,1]");
        cmd->add_option("--p-reid", p_reid, "re-id oracle accuracy in [0,1]");
        cmd->add_option("--tau", tau, "action confidence threshold");
        cmd->add_option("--seed", seed, "oracle seed");
        cmd->add_option("--gpu-workers", gpu_workers, "simulated model workers");
        cmd->add_option("--action-cost-ms", action_cost_ms, "model cost per chunk, ms");
        cmd->add_option("--t-expire", t_expire, "partial-match expiry, seconds");
        cmd->add_option("--instance-cap", instance_cap, "live partial matches per rule");
    }

    RunInputs load_inputs() const {
        RunInputs in;
        std::istringstream trace_in(slurp(trace));
        in.streams = load_trace(trace_in);
        in.topology = load_topology(topology);
        in.vocab = load_vocabulary(vocab);
        in.graphs = compile_rules(parse_rules(slurp(rules)), in.vocab);
        return in;
    }

    EngineConfig engine_config() const {
        EngineConfig cfg;
        cfg.mode = mode == "strawman" ? RunMode::Strawman : RunMode::Lazy;
        cfg.speed = parse_speed(speed);
        cfg.cache_limit_bytes = cache_limit;
        cfg.oracle.p_action = p_action;
        cfg.oracle.p_reid = p_reid;
        cfg.oracle.tau = tau;
        cfg.oracle.seed = seed;
        cfg.oracle.gpu_workers = gpu_workers;
        cfg.oracle.action_cost_s = action_cost_ms / 1000.0;
        cfg.t_expire_s = t_expire;
        cfg.instance_cap = instance_cap;
        return cfg;
    }
};

int cmd_parse(const std::string& rules_path, const std::string& vocab_path) {
    const auto vocab = load_vocabulary(vocab_path);
    const auto graphs = compile_rules(parse_rules(slurp(rules_path)), vocab);
    bool clean = true;
    for (const auto& g : graphs) {
        std::cout << dump(g);
        for (const auto& d : validate(g)) {
            std::cout << "diagnostic " << diagnostic_code_name(d.code) << " " << d.message << "\n";
            clean = false;
        }
        std::cout << "\n";
    }
    return clean ? 0 : 1;
}

int cmd_gen(const std::string& scenario_path, const std::string& rules_path,
            const std::string& vocab_path, const std::string& out_trace,
            const std::string& out_gt, const std::string& out_topology) {
    const auto vocab = load_vocabulary(vocab_path);
    const auto graphs = compile_rules(parse_rules(slurp(rules_path)), vocab);
    const auto scenario = load_scenario(scenario_path);
    const auto out = gen_trace(scenario, vocab, graphs);
    spill(out_trace, out.trace_text);
    spill(out_gt, out.gt_text);
    if (!out_topology.empty()) spill(out_topology, out.topology_text);
    std::cerr << "generated " << out.event_count << " detections, " << out.ground_truth.size()
              << " ground-truth activities\n";
    return 0;
}

int cmd_run(const RunOpts& opts, const std::string& out_events, const std::string& out_acc) {
    const auto result = run_engine(opts.load_inputs(), opts.engine_config());
    spill(out_events, result.event_log_text());
    spill(out_acc, result.accounting_text());
    std::cerr << "processed " << result.trace_events << " detections in "
              << fmt_num(result.wall_seconds) << " s (" << result.events.size() << " events)\n";
    return 0;
}

int cmd_eval(const std::string& events_path, const std::string& gt_path, double tolerance,
             const std::string& accounting_path) {
    std::istringstream ev_in(slurp(events_path));
    const auto events = parse_event_log(ev_in);
    std::istringstream gt_in(slurp(gt_path));
    const auto gts = parse_ground_truth(gt_in);
    const auto rep = score(events, gts, tolerance);
    std::cout << rep.text();
    if (!accounting_path.empty()) {
        // Fold the run counters into the report for one-stop diffing.
        std::istringstream acc(slurp(accounting_path));
        std::string line;
        while (std::getline(acc, line)) {
            if (line.rfind("uploaded_", 0) == 0 || line.rfind("peak_cache", 0) == 0 ||
                line.rfind("oracle_", 0) == 0 || line.rfind("cache_misses", 0) == 0)
                std::cout << line << "\n";
        }
    }
    return 0;
}

int cmd_sweep(const RunOpts& opts, const std::string& gt_path, const std::string& reid_grid,
              const std::string& action_grid, int seeds, const std::string& out_path) {
    std::istringstream gt_in(slurp(gt_path));
    const auto gts = parse_ground_truth(gt_in);
    const auto cells = sweep(opts.load_inputs(), opts.engine_config(), gts,
                             parse_grid(reid_grid), parse_grid(action_grid), seeds);
    spill(out_path, format_sweep(cells));
    return 0;
}

int cmd_dump_tubes(const RunOpts& opts) {
    const auto in = opts.load_inputs();
    CameraFleet fleet(opts.cache_limit);
    Oracle oracle(opts.engine_config().oracle, in.vocab);
    TubeStore store;
    TubeTracker tracker({}, store, fleet, oracle, in.topology);
    for (const auto& ev : merged_order(in.streams)) tracker.ingest_box(ev);
    store.close_all();
    for (TubeId id : store.all_tube_ids()) {
        const Tube& t = store.tube(id);
        std::cout << "# tube " << id << " camera " << t.camera_id << " label " << t.label
                  << " identity " << (t.identity ? std::to_string(*t.identity) : "-") << "\n";
        for (const auto& b : t.boxes) {
            DetectionEvent ev;
            ev.camera_id = t.camera_id;
            ev.frame_index = b.frame_index;
            ev.timestamp = b.ts;
            ev.box = b.box;
            ev.label = t.label;
            ev.gt_identity = b.gt_identity;
            ev.gt_actions = b.gt_actions;
            std::cout << format_trace_line(ev) << "\n";
        }
    }
    return 0;
}

int cmd_probe(const RunOpts& opts, const std::string& op) {
    const auto in = opts.load_inputs();
    CameraFleet fleet(opts.cache_limit);
    Oracle oracle(opts.engine_config().oracle, in.vocab);
    TubeStore store;
    TubeTracker tracker({}, store, fleet, oracle, in.topology);
    for (const auto& ev : merged_order(in.streams)) tracker.ingest_box(ev);
    store.close_all();
    std::map<TubeId, std::vector<Chunk>> chunks;
    for (TubeId id : store.all_tube_ids()) chunks[id] = make_chunks(store.tube(id), 1.0);
    for (const auto& ov : compute_op_intervals(store, chunks, {op}, {})) {
        std::cout << ov.op;
        for (size_t i = 0; i < ov.tubes.size(); ++i)
            std::cout << " tube" << ov.tubes[i] << "(" << to_string(ov.entities[i]) << ")";
        std::cout << " [" << fmt_time(ov.interval.t1) << "," << fmt_time(ov.interval.t2) << "]\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven cross-camera activity detection"};
    app.require_subcommand(1);

    // parse
    auto* parse_cmd = app.add_subcommand("parse", "compile rules and print the graphs");
    std::string rules_path, vocab_path;
    parse_cmd->add_option("--rules", rules_path)->required();
    parse_cmd->add_option("--vocab", vocab_path)->required();

    // gen
    auto* gen_cmd = app.add_subcommand("gen", "generate a trace and ground truth from a scenario");
    std::string scenario_path, gen_rules, gen_vocab, out_trace = "-", out_gt = "-", out_topo;
    gen_cmd->add_option("--scenario", scenario_path)->required();
    gen_cmd->add_option("--rules", gen_rules)->required();
    gen_cmd->add_option("--vocab", gen_vocab)->required();
    gen_cmd->add_option("--out-trace", out_trace);
    gen_cmd->add_option("--out-gt", out_gt);
    gen_cmd->add_option("--out-topology", out_topo);

    // run
    auto* run_cmd = app.add_subcommand("run", "replay a trace and detect activities");
    RunOpts run_opts;
    run_opts.attach(run_cmd);
    std::string out_events = "-", out_acc = "-";
    run_cmd->add_option("--out-events", out_events);
    run_cmd->add_option("--out-accounting", out_acc);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score an event log against ground truth");
    std::string ev_path, gt_path, acc_path;
    double tolerance = 2.0;
    eval_cmd->add_option("--events", ev_path)->required();
    eval_cmd->add_option("--gt", gt_path)->required();
    eval_cmd->add_option("--tolerance", tolerance);
    eval_cmd->add_option("--accounting", acc_path, "fold run counters into the report");

    // sweep
    auto* sweep_cmd = app.add_subcommand("sweep", "grid of runs over oracle accuracies");
    RunOpts sweep_opts;
    sweep_opts.attach(sweep_cmd);
    std::string sweep_gt, reid_grid = "1.0", action_grid = "1.0", sweep_out = "-";
    int sweep_seeds = 1;
    sweep_cmd->add_option("--gt", sweep_gt)->required();
    sweep_cmd->add_option("--p-reid-grid", reid_grid);
    sweep_cmd->add_option("--p-action-grid", action_grid);
    sweep_cmd->add_option("--seeds", sweep_seeds, "runs per cell with consecutive seeds");
    sweep_cmd->add_option("--out", sweep_out);

    // dump-tubes
    auto* dump_cmd = app.add_subcommand("dump-tubes", "print tracked tubes in trace format");
    RunOpts dump_opts;
    dump_opts.attach(dump_cmd, false);
    dump_cmd->add_option("--seed", dump_opts.seed);

    // probe
    auto* probe_cmd = app.add_subcommand("probe", "evaluate one spatial operator over a trace");
    RunOpts probe_opts;
    probe_opts.attach(probe_cmd, false);
    std::string probe_op;
    probe_cmd->add_option("--op", probe_op, "near|approach|stop|move|disappear|same-camera|re-identified")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (parse_cmd->parsed()) return cmd_parse(rules_path, vocab_path);
        if (gen_cmd->parsed()) return cmd_gen(scenario_path, gen_rules, gen_vocab, out_trace, out_gt, out_topo);
        if (run_cmd->parsed()) return cmd_run(run_opts, out_events, out_acc);
        if (eval_cmd->parsed()) return cmd_eval(ev_path, gt_path, tolerance, acc_path);
        if (sweep_cmd->parsed())
            return cmd_sweep(sweep_opts, sweep_gt, reid_grid, action_grid, sweep_seeds, sweep_out);
        if (dump_cmd->parsed()) return cmd_dump_tubes(dump_opts);
        if (probe_cmd->parsed()) return cmd_probe(probe_opts, probe_op);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
