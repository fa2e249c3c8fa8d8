#include "doctest.h"

#include <stdexcept>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "splitsim/errors.hpp"
#include "splitsim/report.hpp"
#include "splitsim/scenario.hpp"
#include "splitsim/sim_engine.hpp"

using namespace splitsim;

namespace {

std::string profile_path(const char* name) {
    return std::string(SPLITSIM_DATA_DIR) + "/profiles/" + name + ".json";
}

ScenarioConfig small_config(Policy policy, std::uint64_t seed = 42) {
    ScenarioConfig cfg;
    cfg.name = "unit";
    cfg.model_profile_path = profile_path("lenet5");
    cfg.fleet.devices = 12;
    cfg.fleet.classes = {
        {"slow", 4, 2.0e9, 1.0e9, 64ULL << 20},
        {"mid", 4, 8.0e9, 2.0e9, 128ULL << 20},
        {"fast", 4, 2.4e10, 4.0e9, 256ULL << 20},
    };
    cfg.fleet.dirichlet_concentration = 0.5;
    cfg.fleet.dirichlet_classes = 10;
    cfg.fleet.samples_per_device = 120;
    cfg.fleet.wan_bytes_per_second = 2.5e6;
    cfg.fleet.lan_bytes_per_second = 5.0e7;
    cfg.policy.policy = policy;
    cfg.policy.rounds = 3;
    cfg.policy.local_epochs = 1;
    cfg.policy.batch = 8;
    cfg.policy.k = 4;
    cfg.policy.bo.eval_budget = 16;
    cfg.policy.bo.initial_design = 6;
    cfg.policy.bo.candidates_per_iteration = 48;
    cfg.policy.static_cut = 2;
    cfg.master_seed = seed;
    return cfg;
}

double mean_dis(const Fleet& fleet) {
    double sum = 0.0;
    for (const auto& d : fleet.devices) {
        DeviceProfile dev;
        dev.flops_per_second = dev.local_io_bytes_per_second = dev.uplink_bytes_per_second = 1.0;
        dev.class_histogram = d.class_histogram;
        sum += distribution_utility(dev, fleet.class_count);
    }
    return sum / static_cast<double>(fleet.devices.size());
}

} // namespace

TEST_CASE("fleet generation is deterministic in the seed") {
    FleetConfig fc = small_config(Policy::FedAvg).fleet;
    Fleet a = generate_fleet(fc, 7);
    Fleet b = generate_fleet(fc, 7);
    REQUIRE(a.devices.size() == b.devices.size());
    for (std::size_t i = 0; i < a.devices.size(); ++i) {
        CHECK(a.devices[i].class_histogram == b.devices[i].class_histogram);
        CHECK(a.devices[i].flops_per_second == b.devices[i].flops_per_second);
        CHECK(a.devices[i].memory_budget.breakpoints().size() ==
              b.devices[i].memory_budget.breakpoints().size());
    }
    Fleet c = generate_fleet(fc, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.devices.size(); ++i)
        if (a.devices[i].class_histogram != c.devices[i].class_histogram) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("dirichlet concentration controls the distribution skew") {
    FleetConfig fc = small_config(Policy::FedAvg).fleet;
    fc.samples_per_device = 1000;

    // Near-infinite concentration: balanced devices.
    fc.dirichlet_concentration = 1e6;
    double dis_uniform = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        dis_uniform += mean_dis(generate_fleet(fc, seed));
    dis_uniform /= 20.0;
    CHECK(dis_uniform < 0.01);

    // Extreme skew: each device close to single-class, Dis close to ln C.
    fc.dirichlet_concentration = 0.01;
    double dis_skewed = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed)
        dis_skewed += mean_dis(generate_fleet(fc, seed));
    dis_skewed /= 20.0;
    CHECK(dis_skewed > 0.9 * std::log(10.0));
    CHECK(dis_skewed < 1.1 * std::log(10.0));

    // Monotone trend between the extremes.
    fc.dirichlet_concentration = 100.0;
    double dis_mild = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) dis_mild += mean_dis(generate_fleet(fc, seed));
    dis_mild /= 20.0;
    CHECK(dis_skewed > dis_mild);
    CHECK(dis_mild > dis_uniform);
}

TEST_CASE("loss stepping decays toward the floor and never rises") {
    DeviceProfile d;
    d.flops_per_second = d.local_io_bytes_per_second = d.uplink_bytes_per_second = 1.0;
    d.memory_budget = MemoryBudgetTrace::constant(1);
    d.class_histogram = {3};
    d.per_sample_loss = {4.0, 2.0, 0.05};
    d.active_mask = {true, true, false};

    DeviceProfile untouched = d;
    step_losses(untouched, false, 0.5, 0.0);
    CHECK(untouched.per_sample_loss == d.per_sample_loss);

    DeviceProfile frozen = d;
    step_losses(frozen, true, 1.0, 0.0);
    CHECK(frozen.per_sample_loss == d.per_sample_loss);

    step_losses(d, true, 0.5, 0.0);
    CHECK(d.per_sample_loss[0] == doctest::Approx(2.0));
    CHECK(d.per_sample_loss[1] == doctest::Approx(1.0));
    CHECK(d.per_sample_loss[2] == doctest::Approx(0.05)); // inactive: untouched

    // Repeated participation converges geometrically to the floor.
    for (int i = 0; i < 100; ++i) step_losses(d, true, 0.5, 0.3);
    CHECK(d.per_sample_loss[0] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("fedavg on a homogeneous fleet has no straggler gap") {
    ScenarioConfig cfg = small_config(Policy::FedAvg);
    Fleet fleet;
    fleet.class_count = 10;
    for (int i = 0; i < 8; ++i) {
        FleetDevice d;
        d.id = i;
        d.device_class = "same";
        d.flops_per_second = 4e9;
        d.local_io_bytes_per_second = 1e9;
        d.uplink_lan_bytes_per_second = 5e7;
        d.uplink_wan_bytes_per_second = 2.5e6;
        d.memory_budget = MemoryBudgetTrace::constant(1ULL << 30);
        d.class_histogram.assign(10, 12); // identical data -> identical iterations
        fleet.devices.push_back(d);
    }
    cfg.fleet.devices = 8;
    ModelGraph graph = load_model_profile(cfg.model_profile_path);
    Simulation sim(cfg, graph, fleet);
    RoundReport r = sim.run_round(0);
    REQUIRE(!r.devices.empty());
    for (const auto& rec : r.devices) {
        CHECK(rec.cut == graph.layer_count());
        CHECK(rec.total_seconds == doctest::Approx(r.t_system_seconds).epsilon(1e-12));
        CHECK(rec.transfer_seconds == 0.0);
        CHECK(rec.server_compute_seconds == 0.0);
    }
}

TEST_CASE("round reports satisfy the structural invariants") {
    for (Policy policy : {Policy::FedAvg, Policy::Smd, Policy::RSmd, Policy::SmartSplit}) {
        ScenarioConfig cfg = small_config(policy);
        Simulation sim(cfg);
        SimulationResult result = sim.run();
        REQUIRE(result.rounds.size() == 3);
        for (const auto& r : result.rounds) {
            CHECK(static_cast<int>(r.devices.size()) <= std::max(cfg.policy.k, 6)); // pool cap
            int participants = 0;
            double max_total = 0.0;
            for (const auto& rec : r.devices) {
                if (rec.dropout) continue;
                ++participants;
                max_total = std::max(max_total, rec.total_seconds);
            }
            CHECK(participants <= cfg.policy.k);
            CHECK(participants >= 1);
            CHECK(r.t_system_seconds == doctest::Approx(max_total).epsilon(1e-12));
        }
    }
}

TEST_CASE("active samples shrink under pruning policies and stay flat otherwise") {
    ScenarioConfig fed = small_config(Policy::FedAvg);
    Simulation fed_sim(fed);
    std::uint64_t total = fed_sim.fleet().total_samples();
    SimulationResult fr = fed_sim.run();
    for (const auto& r : fr.rounds) CHECK(r.active_samples_total == total);

    ScenarioConfig smart = small_config(Policy::SmartSplit);
    SimulationResult sr = Simulation(smart).run();
    std::uint64_t prev = total;
    for (const auto& r : sr.rounds) {
        CHECK(r.active_samples_total <= prev);
        prev = r.active_samples_total;
    }
    CHECK(sr.rounds.back().active_samples_total < total);
}

TEST_CASE("identical seeds give identical runs") {
    ScenarioConfig cfg = small_config(Policy::SmartSplit, 77);
    SimulationResult a = Simulation(cfg).run();
    SimulationResult b = Simulation(cfg).run();
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].t_system_seconds == b.rounds[i].t_system_seconds);
        CHECK(a.rounds[i].comm_bytes == b.rounds[i].comm_bytes);
        CHECK(a.rounds[i].peak_memory_bytes == b.rounds[i].peak_memory_bytes);
        REQUIRE(a.rounds[i].devices.size() == b.rounds[i].devices.size());
        for (std::size_t j = 0; j < a.rounds[i].devices.size(); ++j) {
            CHECK(a.rounds[i].devices[j].device_id == b.rounds[i].devices[j].device_id);
            CHECK(a.rounds[i].devices[j].cut == b.rounds[i].devices[j].cut);
        }
    }
}

TEST_CASE("recompute-mode ablations share selections and order peak memory") {
    // With generous budgets the four recompute variants see identical
    // objectives, so their selection trajectories coincide and the per-round
    // peaks order none >= speed >= cost-aware >= memory.
    std::map<Policy, SimulationResult> results;
    for (Policy p : {Policy::NSmd, Policy::SSmd, Policy::SmartSplit, Policy::MSmd})
        results.emplace(p, Simulation(small_config(p, 99)).run());

    const auto& none = results.at(Policy::NSmd).rounds;
    const auto& speed = results.at(Policy::SSmd).rounds;
    const auto& cost = results.at(Policy::SmartSplit).rounds;
    const auto& memory = results.at(Policy::MSmd).rounds;
    REQUIRE(none.size() == speed.size());

    for (std::size_t r = 0; r < none.size(); ++r) {
        auto ids = [](const RoundReport& rr) {
            std::vector<std::pair<int, int>> v;
            for (const auto& d : rr.devices) v.emplace_back(d.device_id, d.cut);
            return v;
        };
        CHECK(ids(none[r]) == ids(speed[r]));
        CHECK(ids(none[r]) == ids(cost[r]));
        CHECK(ids(none[r]) == ids(memory[r]));

        CHECK(none[r].peak_memory_bytes >= speed[r].peak_memory_bytes);
        CHECK(speed[r].peak_memory_bytes >= cost[r].peak_memory_bytes);
        CHECK(cost[r].peak_memory_bytes >= memory[r].peak_memory_bytes);

        // Overhead ordering mirrors the memory trade: speed <= cost <= memory.
        auto total_overhead = [](const RoundReport& rr) {
            double o = 0.0;
            for (const auto& d : rr.devices) o += d.overhead_flops;
            return o;
        };
        CHECK(total_overhead(speed[r]) <= total_overhead(cost[r]) + 1e-9);
        CHECK(total_overhead(cost[r]) <= total_overhead(memory[r]) + 1e-9);
        CHECK(total_overhead(none[r]) == 0.0);
    }
}

TEST_CASE("a mid-round budget collapse drops the device but not the round") {
    ScenarioConfig cfg = small_config(Policy::SmartSplit);
    cfg.policy.k = 2;
    cfg.policy.rounds = 2;
    cfg.policy.reselect_pool_factor = 1.0;

    ModelGraph graph = load_model_profile(cfg.model_profile_path);
    Fleet fleet;
    fleet.class_count = 10;
    for (int i = 0; i < 2; ++i) {
        FleetDevice d;
        d.id = i;
        d.device_class = "x";
        d.flops_per_second = 4e9;
        d.local_io_bytes_per_second = 1e9;
        d.uplink_lan_bytes_per_second = 5e7;
        d.uplink_wan_bytes_per_second = 2.5e6;
        d.class_histogram.assign(10, 12);
        // Device 0 loses almost all memory right after the first round
        // starts; the cache still carries the healthy value when round 1 is
        // scheduled.
        if (i == 0)
            d.memory_budget = MemoryBudgetTrace({{0.0, 1ULL << 30}, {1e-6, 100}});
        else
            d.memory_budget = MemoryBudgetTrace::constant(1ULL << 30);
        fleet.devices.push_back(d);
    }
    cfg.fleet.devices = 2;
    Simulation sim(cfg, graph, fleet);
    RoundReport r0 = sim.run_round(0);
    CHECK(r0.dropouts == 0);
    RoundReport r1 = sim.run_round(1);
    CHECK(r1.dropouts == 1);
    bool found = false;
    for (const auto& rec : r1.devices)
        if (rec.device_id == 0) {
            CHECK(rec.dropout);
            found = true;
        }
    CHECK(found);
}

TEST_CASE("a round where everyone drops out is an error") {
    ScenarioConfig cfg = small_config(Policy::SmartSplit);
    cfg.policy.k = 1;
    cfg.policy.rounds = 2;
    cfg.policy.reselect_pool_factor = 1.0;

    ModelGraph graph = load_model_profile(cfg.model_profile_path);
    Fleet fleet;
    fleet.class_count = 10;
    FleetDevice d;
    d.id = 0;
    d.device_class = "x";
    d.flops_per_second = 4e9;
    d.local_io_bytes_per_second = 1e9;
    d.uplink_lan_bytes_per_second = 5e7;
    d.uplink_wan_bytes_per_second = 2.5e6;
    d.class_histogram.assign(10, 12);
    d.memory_budget = MemoryBudgetTrace({{0.0, 1ULL << 30}, {1e-6, 100}});
    fleet.devices.push_back(d);
    cfg.fleet.devices = 1;
    cfg.policy.d_threshold_fraction = 0.0;

    Simulation sim(cfg, graph, fleet);
    CHECK_NOTHROW(sim.run_round(0));
    CHECK_THROWS_AS(sim.run_round(1), SimulationError);
}

TEST_CASE("reports round-trip through the csv reader") {
    ScenarioConfig cfg = small_config(Policy::RSmd);
    SimulationResult result = Simulation(cfg).run();
    const std::string dir = "/tmp/splitsim_test_report";
    std::filesystem::remove_all(dir);
    write_reports(result, cfg, dir);

    auto rows = read_rounds_csv(dir + "/rounds.csv");
    REQUIRE(rows.size() == result.rounds.size());
    ReportAggregate agg = aggregate_rounds(rows);
    CHECK(agg.t_system_mean == doctest::Approx(result.summary.t_system_mean).epsilon(1e-9));
    CHECK(agg.t_system_median == doctest::Approx(result.summary.t_system_median).epsilon(1e-9));
    CHECK(agg.total_comm_bytes == result.summary.total_comm_bytes);
    CHECK(agg.final_active_samples == result.summary.final_active_samples);
    std::filesystem::remove_all(dir);
}

TEST_CASE("scenario loading rejects unknown keys and bad overrides") {
    const std::string path = "/tmp/splitsim_test_scenario.json";
    {
        std::ofstream f(path);
        f << R"({"model": {"profile": ")" << profile_path("lenet5") << R"("},
                "fleet": {"devices": 2, "classes": [
                  {"name": "a", "count": 2, "flops_per_second": 1e9,
                   "local_io_bytes_per_second": 1e8, "memory_budget_bytes": 99999999}]},
                "policy": {"name": "fedavg", "rounds": 1, "k": 1},
                "seeds": {"master": 3}})";
    }
    ScenarioConfig cfg = load_scenario(path);
    CHECK(cfg.policy.policy == Policy::FedAvg);
    CHECK(cfg.master_seed == 3);

    nlohmann::json doc = scenario_to_json(cfg);
    apply_override(doc, "policy.rounds=5");
    apply_override(doc, "policy.name=smd");
    ScenarioConfig cfg2 = scenario_from_json(doc, "");
    CHECK(cfg2.policy.rounds == 5);
    CHECK(cfg2.policy.policy == Policy::Smd);

    CHECK_THROWS_AS(apply_override(doc, "policy.nonexistent=5"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "nonsense"), ConfigError);

    {
        std::ofstream f(path);
        f << R"({"model": {"profile": "x"}, "mystery": 1, "fleet": {"devices": 1},
                "policy": {"name": "fedavg"}})";
    }
    CHECK_THROWS_AS(load_scenario(path), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), ConfigError);
    std::remove(path.c_str());
}

TEST_CASE("fleet files round-trip") {
    FleetConfig fc = small_config(Policy::FedAvg).fleet;
    Fleet fleet = generate_fleet(fc, 5);
    const std::string path = "/tmp/splitsim_test_fleet.json";
    save_fleet(fleet, path);
    Fleet loaded = load_fleet(path);
    REQUIRE(loaded.devices.size() == fleet.devices.size());
    for (std::size_t i = 0; i < fleet.devices.size(); ++i) {
        CHECK(loaded.devices[i].class_histogram == fleet.devices[i].class_histogram);
        CHECK(loaded.devices[i].flops_per_second ==
              doctest::Approx(fleet.devices[i].flops_per_second));
    }
    std::remove(path.c_str());
}
