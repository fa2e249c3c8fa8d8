#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

namespace splitsim {

enum class Policy {
    FedAvg,
    Fgc,
    Fga,
    Flp,
    SplitflStatic,
    DSft,
    Smd,
    RSmd,
    NSmd,
    SSmd,
    MSmd,
    SmartSplit,
};

Policy parse_policy(const std::string& name);
const char* to_string(Policy policy);
std::vector<std::string> all_policy_names();

/// How a policy composes the building blocks. Derived from the policy name;
/// the multipliers come from the scenario.
struct PolicyTraits {
    bool bo_selection = false;   // BO over devices and cuts vs random devices
    bool full_model = false;     // cut pinned at V (no split)
    bool static_cut = false;     // cut pinned at policy.static_cut
    bool mec_tier = false;       // LAN uplink (vs WAN to the central server)
    bool reselect = false;       // Alg-2 importance re-selection
    bool prune = false;          // sigma-fraction sample pruning
    bool memory_aware = false;   // feasibility checked, dropouts possible
    bool recompute_floor = true; // feasibility assumes recomputation
    int recompute_mode = 0;      // 0 none, 1 speed, 2 memory, 3 cost-aware
    double time_multiplier = 1.0;
    double memory_multiplier = 1.0;
};

struct DeviceClassConfig {
    std::string name;
    int count = 0;
    double flops_per_second = 0.0;
    double local_io_bytes_per_second = 0.0;
    std::uint64_t memory_budget_bytes = 0;
};

struct FleetConfig {
    std::string file; // explicit fleet; empty = generate from classes
    int devices = 0;
    std::vector<DeviceClassConfig> classes;
    double dirichlet_concentration = 0.5;
    int dirichlet_classes = 10;
    int samples_per_device = 500;
    double samples_jitter = 0.2; // relative spread of dataset sizes
    double wan_bytes_per_second = 2.5e6;
    double lan_bytes_per_second = 5.0e7;
    double uplink_jitter = 0.2; // relative per-device bandwidth spread
    int budget_event_count = 4;
    double budget_event_amplitude = 0.15;
    double budget_event_horizon_seconds = 1.0e5;
};

struct ServerConfig {
    double flops_per_second = 1.0e13;
    double io_bytes_per_second = 2.0e10;
};

struct BoConfig {
    int eval_budget = 60;
    int initial_design = 10;
    int candidates_per_iteration = 512;
};

struct BaselineMultipliers {
    double fgc_time = 1.4;
    double fgc_memory = 0.649;
    double fga_time = 1.1;
    double fga_memory = 0.431;
    double flp_time = 1.0;
    double flp_memory = 0.25;
};

struct PolicyConfig {
    Policy policy = Policy::SmartSplit;
    int rounds = 50;
    int local_epochs = 5;
    int batch = 16;
    int k = 10;
    double epsilon = 0.1;
    double sigma_prune = 0.8;
    double lambda = 1.0;
    double d_threshold_fraction = 0.05;
    bool u_split = true;
    int static_cut = 2;
    double reselect_pool_factor = 1.5;
    int recompute_segment_size = 0; // 0 = ceil(sqrt(n))
    double noise_level = 0.0;       // distribution probing fidelity knob
    double aux_fraction = 0.01;
    bool normalize_objective = true;
    bool per_device_latency = false;
    BoConfig bo;
    BaselineMultipliers multipliers;
};

struct DynamicsConfig {
    double initial_loss_mu = 1.0;    // lognormal location of the initial loss
    double initial_loss_sigma = 0.5; // lognormal scale
    double gamma = 0.85;             // per-participation decay factor
    double dis_floor_coupling = 0.05; // loss floor = coupling * Dis(i)
};

struct ScenarioConfig {
    std::string name;
    std::string model_profile_path;
    FleetConfig fleet;
    ServerConfig server;
    PolicyConfig policy;
    DynamicsConfig dynamics;
    std::uint64_t master_seed = 1;

    PolicyTraits traits() const;
    void validate() const;
};

/// Loads a scenario document (sections model/fleet/server/policy/dynamics/
/// seeds). Unknown keys anywhere raise ConfigError naming the key. Relative
/// paths inside the document resolve against the document's directory.
ScenarioConfig load_scenario(const std::string& path);

ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::string& base_dir);

/// Effective configuration with every default filled in.
nlohmann::json scenario_to_json(const ScenarioConfig& config);

/// Applies a `dotted.path=value` override. The path must already exist in
/// the effective document, otherwise ConfigError names it.
void apply_override(nlohmann::json& doc, const std::string& assignment);

} // namespace splitsim
