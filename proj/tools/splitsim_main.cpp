#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "splitsim/central_manager.hpp"
#include "splitsim/errors.hpp"
#include "splitsim/log.hpp"
#include "splitsim/memory_reducer.hpp"
#include "splitsim/report.hpp"
#include "splitsim/scenario.hpp"
#include "splitsim/sim_engine.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace splitsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRoundFailure = 3;
constexpr int kExitInfeasibleBudget = 4;

struct CommonArgs {
    std::string scenario_path;
    std::string out_dir = "out";
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool trace_mec = false;
    int jobs = 1;
};

/// Loads the scenario, folds in defaults, and applies --set/--seed overrides
/// on the effective document.
ScenarioConfig resolve_scenario(const CommonArgs& args) {
    ScenarioConfig cfg = load_scenario(args.scenario_path);
    json effective = scenario_to_json(cfg);
    for (const auto& assignment : args.overrides) apply_override(effective, assignment);
    if (args.seed_set) effective["seeds"]["master"] = args.seed;
    return scenario_from_json(effective, "");
}

int run_one(const ScenarioConfig& cfg, const std::string& out_dir, bool trace_mec) {
    Simulation sim(cfg);
    std::ofstream trace;
    if (trace_mec) {
        fs::create_directories(out_dir);
        trace.open((fs::path(out_dir) / "mec_trace.jsonl").string(), std::ios::trunc);
        sim.set_mec_trace(&trace);
    }
    SimulationResult result = sim.run();
    write_reports(result, cfg, out_dir);
    std::cout << "policy " << result.summary.policy << ": " << result.summary.rounds
              << " rounds, median t_system " << result.summary.t_system_median
              << " s, total comm " << result.summary.total_comm_bytes << " B, dropouts "
              << result.summary.total_dropouts << "\n";
    return kExitOk;
}

int cmd_run(const CommonArgs& args) {
    ScenarioConfig cfg = resolve_scenario(args);
    return run_one(cfg, args.out_dir, args.trace_mec);
}

int cmd_sweep(const CommonArgs& args, const std::vector<std::string>& policies,
              const std::vector<std::uint64_t>& seeds) {
    ScenarioConfig base = resolve_scenario(args);
    json base_doc = scenario_to_json(base);

    struct Cell {
        std::string policy;
        std::uint64_t seed;
        std::string dir;
        SimulationSummary summary;
        bool ok = false;
        std::string error;
    };
    std::vector<Cell> cells;
    for (const auto& p : policies) {
        parse_policy(p); // validate early: a typo should fail before any run
        for (std::uint64_t s : seeds) {
            Cell c;
            c.policy = p;
            c.seed = s;
            c.dir = (fs::path(args.out_dir) / (p + "_s" + std::to_string(s))).string();
            cells.push_back(std::move(c));
        }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            Cell& cell = cells[i];
            try {
                json doc = base_doc;
                doc["policy"]["name"] = cell.policy;
                doc["seeds"]["master"] = cell.seed;
                ScenarioConfig cfg = scenario_from_json(doc, "");
                Simulation sim(cfg);
                SimulationResult result = sim.run();
                write_reports(result, cfg, cell.dir);
                cell.summary = result.summary;
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    int jobs = std::max(1, args.jobs);
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::ostringstream agg;
    agg << "policy,seed,status,t_system_mean,t_system_median,t_system_p95,total_comm_bytes,"
           "total_dropouts,final_active_samples\n";
    bool any_failed = false;
    for (const auto& c : cells) {
        if (c.ok) {
            char buf[128];
            std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g", c.summary.t_system_mean,
                          c.summary.t_system_median, c.summary.t_system_p95);
            agg << c.policy << "," << c.seed << ",ok," << buf << "," << c.summary.total_comm_bytes
                << "," << c.summary.total_dropouts << "," << c.summary.final_active_samples << "\n";
        } else {
            any_failed = true;
            agg << c.policy << "," << c.seed << ",failed,,,,,,\n";
            log::error("sweep cell " + c.policy + "/s" + std::to_string(c.seed) +
                       " failed: " + c.error);
        }
    }
    fs::create_directories(args.out_dir);
    std::ofstream out((fs::path(args.out_dir) / "aggregate.csv").string(), std::ios::trunc);
    out << agg.str();
    std::cout << agg.str();
    return any_failed ? kExitRoundFailure : kExitOk;
}

int cmd_select(const CommonArgs& args) {
    ScenarioConfig cfg = resolve_scenario(args);
    Simulation sim(cfg);
    SplitAssignment assignment = sim.select_once(cfg.master_seed);

    json out = json::array();
    for (const auto& e : assignment.selected)
        out.push_back({{"device_id", e.device_id}, {"alpha", 1}, {"cut", e.cut}});
    json doc = {{"assignment", out}, {"predicted_objective", assignment.objective}};
    std::cout << doc.dump(2) << "\n";
    fs::create_directories(args.out_dir);
    std::ofstream f((fs::path(args.out_dir) / "selection.json").string(), std::ios::trunc);
    f << doc.dump(2) << "\n";
    return kExitOk;
}

int cmd_plan_memory(const std::string& model_path, int cut, std::uint64_t budget, int batch,
                    int segment_size) {
    ModelGraph graph = load_model_profile(model_path);
    RecomputationPlan plan = plan_for_budget(graph, cut, batch, segment_size, budget);

    std::printf("%-8s %-12s %-10s %14s %16s\n", "segment", "layers", "strategy", "peak_bytes",
                "overhead_flops");
    for (std::size_t i = 0; i < plan.segments.size(); ++i) {
        const auto& seg = plan.segments[i];
        std::string range =
            std::to_string(seg.spec.start_layer) + "-" + std::to_string(seg.spec.end_layer);
        std::printf("%-8zu %-12s %-10s %14llu %16.6g\n", i, range.c_str(),
                    to_string(seg.strategy), static_cast<unsigned long long>(seg.peak_bytes),
                    seg.extra_forward_flops);
    }
    std::printf("plan peak %llu B (cap %llu B), overhead %.6g FLOPs\n",
                static_cast<unsigned long long>(plan.peak_memory_bytes),
                static_cast<unsigned long long>(plan.cap_bytes), plan.extra_forward_flops);
    return kExitOk;
}

int cmd_fleet_gen(const CommonArgs& args, const std::string& out_file) {
    ScenarioConfig cfg = resolve_scenario(args);
    Fleet fleet = generate_fleet(cfg.fleet, cfg.master_seed);
    fs::path out = out_file.empty() ? fs::path(args.out_dir) / "fleet.json" : fs::path(out_file);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_fleet(fleet, out.string());
    std::cout << "wrote " << fleet.devices.size() << " devices to " << out.string() << "\n";
    return kExitOk;
}

int cmd_report(const std::string& in_path) {
    fs::path p(in_path);
    if (fs::is_directory(p)) p /= "rounds.csv";
    auto rounds = read_rounds_csv(p.string());
    std::cout << render_aggregate_table(aggregate_rounds(rounds));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"splitsim: planning and simulation for memory-constrained split federated learning"};
    app.require_subcommand(1);

    CommonArgs common;
    auto add_common = [&](CLI::App* sub, bool needs_scenario) {
        if (needs_scenario)
            sub->add_option("--scenario", common.scenario_path, "scenario file")->required();
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--set", common.overrides, "override: dotted.key=value (repeatable)");
        sub->add_option("--seed", common.seed, "master seed override")
            ->each([&](const std::string&) { common.seed_set = true; });
        sub->add_flag("--trace-mec", common.trace_mec, "dump MEC cache snapshots per round");
        sub->add_option("--jobs", common.jobs, "parallel sweep cells");
    };

    auto* run = app.add_subcommand("run", "run one scenario, write CSV reports");
    add_common(run, true);

    auto* sweep = app.add_subcommand("sweep", "run a policy x seed grid");
    add_common(sweep, true);
    std::string sweep_policies = "smartsplit";
    std::string sweep_seeds = "1";
    sweep->add_option("--policies", sweep_policies, "comma-separated policy list");
    sweep->add_option("--seeds", sweep_seeds, "comma-separated seed list");

    auto* select = app.add_subcommand("select", "one-shot central selection audit");
    add_common(select, true);

    auto* plan = app.add_subcommand("plan-memory", "plan recomputation for a model and budget");
    std::string plan_model;
    int plan_cut = 1;
    std::uint64_t plan_budget = 0;
    int plan_batch = 1;
    int plan_segment = 0;
    plan->add_option("--model", plan_model, "model profile file")->required();
    plan->add_option("--cut", plan_cut, "device-side cut layer")->required();
    plan->add_option("--budget", plan_budget, "device memory budget in bytes")->required();
    plan->add_option("--batch", plan_batch, "batch size");
    plan->add_option("--segment-size", plan_segment, "checkpoint segment size (0 = sqrt)");

    auto* fleet_gen = app.add_subcommand("fleet-gen", "materialize the generated fleet");
    add_common(fleet_gen, true);
    std::string fleet_out;
    fleet_gen->add_option("--fleet-out", fleet_out, "output fleet file");

    auto* report = app.add_subcommand("report", "recompute aggregates from rounds.csv");
    std::string report_in;
    report->add_option("--in", report_in, "rounds.csv or a run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(common);
        if (sweep->parsed()) {
            auto split_list = [](const std::string& s) {
                std::vector<std::string> out;
                std::istringstream is(s);
                std::string tok;
                while (std::getline(is, tok, ','))
                    if (!tok.empty()) out.push_back(tok);
                return out;
            };
            std::vector<std::uint64_t> seeds;
            for (const auto& s : split_list(sweep_seeds)) seeds.push_back(std::stoull(s));
            return cmd_sweep(common, split_list(sweep_policies), seeds);
        }
        if (select->parsed()) return cmd_select(common);
        if (plan->parsed())
            return cmd_plan_memory(plan_model, plan_cut, plan_budget, plan_batch, plan_segment);
        if (fleet_gen->parsed()) return cmd_fleet_gen(common, fleet_out);
        if (report->parsed()) return cmd_report(report_in);
    } catch (const InfeasiblePlanError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitInfeasibleBudget;
    } catch (const SimulationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRoundFailure;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitConfig;
    }
    return kExitOk;
}
