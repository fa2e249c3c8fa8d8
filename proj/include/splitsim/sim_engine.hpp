#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "splitsim/central_manager.hpp"
#include "splitsim/device_profile.hpp"
#include "splitsim/mec_manager.hpp"
#include "splitsim/memory_reducer.hpp"
#include "splitsim/model_graph.hpp"
#include "splitsim/scenario.hpp"

namespace splitsim {

/// Static description of one fleet member, independent of the policy being
/// simulated. Both uplink rates are kept: MEC-tier policies ride the LAN,
/// two-tier policies the WAN.
struct FleetDevice {
    int id = 0;
    std::string device_class;
    double flops_per_second = 0.0;
    double local_io_bytes_per_second = 0.0;
    double uplink_lan_bytes_per_second = 0.0;
    double uplink_wan_bytes_per_second = 0.0;
    MemoryBudgetTrace memory_budget;
    std::vector<std::uint64_t> class_histogram;
};

struct Fleet {
    std::vector<FleetDevice> devices;
    std::size_t class_count = 0;

    std::uint64_t total_samples() const;
};

/// Samples the fleet from the scenario's class table and Dirichlet partition
/// directive. Deterministic in the master seed and independent of policy.
Fleet generate_fleet(const FleetConfig& config, std::uint64_t master_seed);

Fleet load_fleet(const std::string& path);
void save_fleet(const Fleet& fleet, const std::string& path);

/// Applies one participation step: every active sample decays toward the
/// device's loss floor by factor gamma. Non-participants are untouched.
void step_losses(DeviceProfile& device, bool participated, double gamma, double loss_floor);

/// Per-device, per-round outcome row.
struct DeviceRoundRecord {
    int device_id = 0;
    int cut = 0;
    int iterations = 0;
    double device_compute_seconds = 0.0;
    double transfer_seconds = 0.0;
    double server_compute_seconds = 0.0;
    double overhead_seconds = 0.0;
    double upload_seconds = 0.0;
    double total_seconds = 0.0;
    std::uint64_t peak_memory_bytes = 0;
    std::uint64_t budget_bytes = 0;
    int speed_segments = 0;
    int memory_segments = 0;
    double overhead_flops = 0.0;
    std::uint64_t comm_bytes = 0;
    bool dropout = false;
};

struct RoundReport {
    int round = 0;
    double t_start_seconds = 0.0;
    std::vector<DeviceRoundRecord> devices;
    double t_system_seconds = 0.0;
    std::uint64_t comm_bytes = 0;
    std::uint64_t peak_memory_bytes = 0; // max required peak among selected
    double sum_dis = 0.0;
    double sum_stat = 0.0;
    int dropouts = 0;
    std::uint64_t active_samples_total = 0;
};

struct SimulationSummary {
    int rounds = 0;
    std::string policy;
    double t_system_mean = 0.0;
    double t_system_median = 0.0;
    double t_system_p95 = 0.0;
    std::uint64_t total_comm_bytes = 0;
    int total_dropouts = 0;
    std::uint64_t final_active_samples = 0;
    std::uint64_t peak_memory_max = 0;
    double peak_memory_mean = 0.0;
};

struct SimulationResult {
    std::vector<RoundReport> rounds;
    SimulationSummary summary;
};

/// All-dropout rounds and optimizer infeasibility surface as this error;
/// the CLI maps it to exit code 3.
class SimulationError : public std::runtime_error {
public:
    explicit SimulationError(const std::string& what) : std::runtime_error(what) {}
};

/// One deterministic simulation run. Construction resolves the model and
/// fleet; run() executes the configured rounds.
class Simulation {
public:
    explicit Simulation(ScenarioConfig config);
    Simulation(ScenarioConfig config, ModelGraph graph, Fleet fleet);

    SimulationResult run();
    RoundReport run_round(int round_index);

    const ModelGraph& graph() const noexcept { return graph_; }
    const Fleet& fleet() const noexcept { return fleet_; }
    const MecManager& mec() const noexcept { return mec_; }
    const ScenarioConfig& config() const noexcept { return config_; }
    const std::vector<DeviceProfile>& device_states() const noexcept { return devices_; }

    /// Central selection only (the CLI `select` subcommand); uses the current
    /// caches and simulated time.
    SplitAssignment select_once(std::uint64_t seed);

    /// When set, one JSON line of cache state is appended per round.
    void set_mec_trace(std::ostream* sink) { mec_trace_ = sink; }

private:
    void initialize();
    std::vector<int> central_selection(int round_index, int pool_size, std::vector<int>* cuts);
    SelectionContext build_selection_context(int pool_size) const;
    int iterations_for(const DeviceProfile& device) const;
    double loss_floor(int device_index) const;

    ScenarioConfig config_;
    PolicyTraits traits_;
    ModelGraph graph_;
    Fleet fleet_;
    std::vector<DeviceProfile> devices_; // runtime state, index-aligned with fleet
    std::vector<double> dis_true_;
    MecManager mec_;
    AuxiliaryDataset aux_;
    ExecutionContext server_ctx_;
    std::uint64_t d_threshold_ = 0;
    double sim_time_seconds_ = 0.0;
    int rounds_executed_ = 0;
    std::ostream* mec_trace_ = nullptr;
};

SimulationSummary summarize(const std::vector<RoundReport>& rounds, const std::string& policy);

} // namespace splitsim
