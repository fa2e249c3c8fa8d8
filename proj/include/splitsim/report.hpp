#pragma once

#include <string>
#include <vector>

#include "splitsim/sim_engine.hpp"

namespace splitsim {

/// Fixed column order of rounds.csv; documented in the README and relied on
/// by the `report` subcommand.
extern const char* const kRoundsCsvHeader;
extern const char* const kDevicesCsvHeader;

/// Writes rounds.csv, devices.csv, summary.json (and effective_config.json)
/// into `out_dir` with write-then-rename discipline.
void write_reports(const SimulationResult& result, const ScenarioConfig& config,
                   const std::string& out_dir);

/// Round rows as parsed back from rounds.csv.
struct ParsedRound {
    int round = 0;
    double t_start_seconds = 0.0;
    int participants = 0;
    int dropouts = 0;
    double t_system_seconds = 0.0;
    double sum_dis = 0.0;
    double sum_stat = 0.0;
    std::uint64_t comm_bytes = 0;
    std::uint64_t peak_memory_bytes = 0;
    std::uint64_t active_samples_total = 0;
    std::string selected;
};

std::vector<ParsedRound> read_rounds_csv(const std::string& path);

/// Aggregates recomputed from a parsed rounds.csv; the same statistics the
/// summary carries, so a round-trip can be cross-checked.
struct ReportAggregate {
    int rounds = 0;
    double t_system_mean = 0.0;
    double t_system_median = 0.0;
    double t_system_p95 = 0.0;
    std::uint64_t total_comm_bytes = 0;
    int total_dropouts = 0;
    std::uint64_t final_active_samples = 0;
};

ReportAggregate aggregate_rounds(const std::vector<ParsedRound>& rounds);

std::string render_aggregate_table(const ReportAggregate& aggregate);

} // namespace splitsim
