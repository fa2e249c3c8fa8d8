#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "splitsim/report.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kBin = SPLITSIM_BIN;
const std::string kData = SPLITSIM_DATA_DIR;
const std::string kWork = "/tmp/splitsim_cli";

int run_cmd(const std::string& args, std::string* output = nullptr) {
    const std::string out_file = kWork + "/cmd_output.txt";
    fs::create_directories(kWork);
    std::string cmd = kBin + " " + args + " > " + out_file + " 2>&1";
    int status = std::system(cmd.c_str());
    if (output != nullptr) {
        std::ifstream in(out_file);
        std::stringstream ss;
        ss << in.rdbuf();
        *output = ss.str();
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    return -1;
}

std::string write_scenario(const std::string& name, const std::string& policy, int rounds,
                           std::uint64_t seed) {
    fs::create_directories(kWork);
    const std::string path = kWork + "/" + name;
    std::ofstream f(path);
    f << R"({
  "model": {"profile": ")" << kData << R"(/profiles/lenet5.json"},
  "fleet": {
    "devices": 8,
    "classes": [
      {"name": "slow", "count": 4, "flops_per_second": 2e9,
       "local_io_bytes_per_second": 1e9, "memory_budget_bytes": 67108864},
      {"name": "fast", "count": 4, "flops_per_second": 16e9,
       "local_io_bytes_per_second": 2e9, "memory_budget_bytes": 268435456}
    ],
    "dirichlet": {"concentration": 0.5, "classes": 10, "samples_per_device": 80}
  },
  "policy": {"name": ")" << policy << R"(", "rounds": )" << rounds << R"(, "k": 2,
             "local_epochs": 1, "batch": 8, "static_cut": 2,
             "bo": {"eval_budget": 12, "initial_design": 6, "candidates_per_iteration": 32}},
  "seeds": {"master": )" << seed << R"(}
})";
    return path;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("run produces the documented outputs and exit code 0") {
    fs::remove_all(kWork + "/run1");
    std::string scenario = write_scenario("basic.json", "smd", 2, 5);
    int rc = run_cmd("run --scenario " + scenario + " --out " + kWork + "/run1");
    CHECK(rc == 0);
    CHECK(fs::exists(kWork + "/run1/rounds.csv"));
    CHECK(fs::exists(kWork + "/run1/devices.csv"));
    CHECK(fs::exists(kWork + "/run1/summary.json"));
    CHECK(fs::exists(kWork + "/run1/effective_config.json"));
    auto rows = splitsim::read_rounds_csv(kWork + "/run1/rounds.csv");
    CHECK(rows.size() == 2);
}

TEST_CASE("a missing scenario file exits 2 and names the path") {
    std::string output;
    int rc = run_cmd("run --scenario /nonexistent/scenario.json", &output);
    CHECK(rc == 2);
    CHECK(output.find("/nonexistent/scenario.json") != std::string::npos);
}

TEST_CASE("an unknown override key exits 2 and names the key") {
    std::string scenario = write_scenario("override.json", "smd", 1, 5);
    std::string output;
    int rc = run_cmd("run --scenario " + scenario + " --set policy.bogus=1", &output);
    CHECK(rc == 2);
    CHECK(output.find("policy.bogus") != std::string::npos);
}

TEST_CASE("identical config and seed give byte-identical csv output") {
    std::string scenario = write_scenario("det.json", "r_smd", 3, 11);
    CHECK(run_cmd("run --scenario " + scenario + " --out " + kWork + "/det_a") == 0);
    CHECK(run_cmd("run --scenario " + scenario + " --out " + kWork + "/det_b") == 0);
    CHECK(read_file(kWork + "/det_a/rounds.csv") == read_file(kWork + "/det_b/rounds.csv"));
    CHECK(read_file(kWork + "/det_a/devices.csv") == read_file(kWork + "/det_b/devices.csv"));
}

TEST_CASE("a policy override changes only policy-dependent columns") {
    std::string scenario = write_scenario("diff.json", "smd", 2, 13);
    CHECK(run_cmd("run --scenario " + scenario + " --out " + kWork + "/diff_base") == 0);
    CHECK(run_cmd("run --scenario " + scenario + " --set policy.name=fedavg --out " + kWork +
                  "/diff_fed") == 0);
    auto base = splitsim::read_rounds_csv(kWork + "/diff_base/rounds.csv");
    auto fed = splitsim::read_rounds_csv(kWork + "/diff_fed/rounds.csv");
    REQUIRE(base.size() == fed.size());
    bool latency_differs = false;
    for (std::size_t i = 0; i < base.size(); ++i) {
        CHECK(base[i].round == fed[i].round);
        // Neither policy prunes, so the fleet-level sample count is shared.
        CHECK(base[i].active_samples_total == fed[i].active_samples_total);
        if (base[i].t_system_seconds != fed[i].t_system_seconds) latency_differs = true;
    }
    CHECK(latency_differs);
}

TEST_CASE("plan-memory prints strategies and honors exit code 4") {
    // Four equal-footprint layers: with the cap at the single-layer peak no
    // segment can afford the speed-centric sum, and one byte less is
    // infeasible.
    const std::string profile = kWork + "/flat_profile.json";
    {
        std::ofstream f(profile);
        f << R"({"layers": [
          {"id": 1, "flops_forward": 1e6, "param_bytes": 1000, "activation_bytes": 50000},
          {"id": 2, "flops_forward": 1e6, "param_bytes": 1000, "activation_bytes": 50000},
          {"id": 3, "flops_forward": 1e6, "param_bytes": 1000, "activation_bytes": 50000},
          {"id": 4, "flops_forward": 1e6, "param_bytes": 1000, "activation_bytes": 50000}]})";
    }
    const std::uint64_t params2 = 8000; // params + sgd gradients
    std::string output;

    int rc = run_cmd("plan-memory --model " + profile + " --cut 4 --budget 100000000", &output);
    CHECK(rc == 0);
    CHECK(output.find("speed") != std::string::npos);
    CHECK(output.find("memory") == std::string::npos);

    rc = run_cmd("plan-memory --model " + profile + " --cut 4 --budget " +
                     std::to_string(params2 + 50000),
                 &output);
    CHECK(rc == 0);
    CHECK(output.find("speed") == std::string::npos);
    CHECK(output.find("memory") != std::string::npos);

    rc = run_cmd("plan-memory --model " + profile + " --cut 4 --budget " +
                     std::to_string(params2 + 49999),
                 &output);
    CHECK(rc == 4);
    CHECK(output.find("layer") != std::string::npos);
}

TEST_CASE("select emits an auditable assignment") {
    std::string scenario = write_scenario("select.json", "smartsplit", 1, 17);
    std::string output;
    int rc = run_cmd("select --scenario " + scenario + " --out " + kWork + "/sel", &output);
    CHECK(rc == 0);
    CHECK(fs::exists(kWork + "/sel/selection.json"));
    CHECK(output.find("predicted_objective") != std::string::npos);
    CHECK(output.find("\"cut\"") != std::string::npos);
}

TEST_CASE("sweep runs the grid and its aggregate matches per-cell recomputation") {
    std::string scenario = write_scenario("sweep.json", "smd", 2, 19);
    fs::remove_all(kWork + "/sweep");
    int rc = run_cmd("sweep --scenario " + scenario + " --policies smd,fedavg --seeds 3,4 --jobs 2 --out " +
                     kWork + "/sweep");
    CHECK(rc == 0);
    for (const char* cell : {"smd_s3", "smd_s4", "fedavg_s3", "fedavg_s4"})
        CHECK(fs::exists(kWork + "/sweep/" + std::string(cell) + "/rounds.csv"));
    CHECK(fs::exists(kWork + "/sweep/aggregate.csv"));

    // Check the aggregate's median column against a recomputation from the
    // cell csv.
    std::ifstream agg(kWork + "/sweep/aggregate.csv");
    std::string line;
    std::getline(agg, line); // header
    int checked = 0;
    while (std::getline(agg, line)) {
        std::vector<std::string> fields;
        std::stringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        REQUIRE(fields.size() >= 5);
        const std::string dir = kWork + "/sweep/" + fields[0] + "_s" + fields[1];
        auto rows = splitsim::read_rounds_csv(dir + "/rounds.csv");
        auto recomputed = splitsim::aggregate_rounds(rows);
        CHECK(std::stod(fields[4]) == doctest::Approx(recomputed.t_system_median).epsilon(1e-9));
        ++checked;
    }
    CHECK(checked == 4);

    // Rerunning the sweep regenerates the same cell layout.
    CHECK(run_cmd("sweep --scenario " + scenario + " --policies smd,fedavg --seeds 3,4 --out " +
                  kWork + "/sweep") == 0);
    CHECK(fs::exists(kWork + "/sweep/smd_s3/rounds.csv"));
}

TEST_CASE("fleet-gen materializes a loadable fleet") {
    std::string scenario = write_scenario("fleetgen.json", "smd", 1, 23);
    int rc = run_cmd("fleet-gen --scenario " + scenario + " --fleet-out " + kWork + "/fleet.json");
    CHECK(rc == 0);
    CHECK(fs::exists(kWork + "/fleet.json"));
}

TEST_CASE("report recomputes aggregates from a run directory") {
    std::string scenario = write_scenario("report.json", "smd", 2, 29);
    CHECK(run_cmd("run --scenario " + scenario + " --out " + kWork + "/rep") == 0);
    std::string output;
    int rc = run_cmd("report --in " + kWork + "/rep", &output);
    CHECK(rc == 0);
    CHECK(output.find("t_system median") != std::string::npos);
    CHECK(run_cmd("report --in /nonexistent/rounds.csv") == 2);
}
