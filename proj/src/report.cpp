#include "splitsim/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"

#include "splitsim/errors.hpp"

namespace splitsim {

using json = nlohmann::json;
namespace fs = std::filesystem;

const char* const kRoundsCsvHeader =
    "round,t_start_seconds,participants,dropouts,t_system_seconds,sum_dis,sum_stat,"
    "comm_bytes,peak_memory_bytes,active_samples_total,selected";

const char* const kDevicesCsvHeader =
    "round,device_id,cut,iterations,device_compute_seconds,transfer_seconds,"
    "server_compute_seconds,overhead_seconds,upload_seconds,total_seconds,"
    "peak_memory_bytes,budget_bytes,speed_segments,memory_segments,overhead_flops,"
    "comm_bytes,dropout";

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out << content;
    }
    fs::rename(tmp, path);
}

} // namespace

void write_reports(const SimulationResult& result, const ScenarioConfig& config,
                   const std::string& out_dir) {
    fs::create_directories(out_dir);

    std::ostringstream rounds;
    rounds << kRoundsCsvHeader << "\n";
    for (const auto& r : result.rounds) {
        std::string selected;
        for (const auto& d : r.devices) {
            if (!selected.empty()) selected += "|";
            selected += std::to_string(d.device_id) + ":" + std::to_string(d.cut);
        }
        rounds << r.round << "," << fmt_double(r.t_start_seconds) << "," << r.devices.size() << ","
               << r.dropouts << "," << fmt_double(r.t_system_seconds) << ","
               << fmt_double(r.sum_dis) << "," << fmt_double(r.sum_stat) << "," << r.comm_bytes
               << "," << r.peak_memory_bytes << "," << r.active_samples_total << "," << selected
               << "\n";
    }
    atomic_write((fs::path(out_dir) / "rounds.csv").string(), rounds.str());

    std::ostringstream devices;
    devices << kDevicesCsvHeader << "\n";
    for (const auto& r : result.rounds) {
        for (const auto& d : r.devices) {
            devices << r.round << "," << d.device_id << "," << d.cut << "," << d.iterations << ","
                    << fmt_double(d.device_compute_seconds) << "," << fmt_double(d.transfer_seconds)
                    << "," << fmt_double(d.server_compute_seconds) << ","
                    << fmt_double(d.overhead_seconds) << "," << fmt_double(d.upload_seconds) << ","
                    << fmt_double(d.total_seconds) << "," << d.peak_memory_bytes << ","
                    << d.budget_bytes << "," << d.speed_segments << "," << d.memory_segments << ","
                    << fmt_double(d.overhead_flops) << "," << d.comm_bytes << ","
                    << (d.dropout ? 1 : 0) << "\n";
        }
    }
    atomic_write((fs::path(out_dir) / "devices.csv").string(), devices.str());

    json summary;
    summary["rounds"] = result.summary.rounds;
    summary["policy"] = result.summary.policy;
    summary["t_system_seconds"] = {{"mean", result.summary.t_system_mean},
                                   {"median", result.summary.t_system_median},
                                   {"p95", result.summary.t_system_p95}};
    summary["total_comm_bytes"] = result.summary.total_comm_bytes;
    summary["total_dropouts"] = result.summary.total_dropouts;
    summary["final_active_samples"] = result.summary.final_active_samples;
    summary["peak_memory_bytes"] = {{"max", result.summary.peak_memory_max},
                                    {"mean", result.summary.peak_memory_mean}};
    atomic_write((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");

    atomic_write((fs::path(out_dir) / "effective_config.json").string(),
                 scenario_to_json(config).dump(2) + "\n");
}

std::vector<ParsedRound> read_rounds_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open rounds csv");
    std::string header;
    if (!std::getline(in, header)) throw ConfigError(path, "empty csv");
    if (header != kRoundsCsvHeader) throw ConfigError(path, "unexpected rounds.csv header");

    std::vector<ParsedRound> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() < 10) throw ConfigError(path, "malformed row: " + line);
        ParsedRound r;
        r.round = std::stoi(fields[0]);
        r.t_start_seconds = std::stod(fields[1]);
        r.participants = std::stoi(fields[2]);
        r.dropouts = std::stoi(fields[3]);
        r.t_system_seconds = std::stod(fields[4]);
        r.sum_dis = std::stod(fields[5]);
        r.sum_stat = std::stod(fields[6]);
        r.comm_bytes = std::stoull(fields[7]);
        r.peak_memory_bytes = std::stoull(fields[8]);
        r.active_samples_total = std::stoull(fields[9]);
        if (fields.size() > 10) r.selected = fields[10];
        rows.push_back(r);
    }
    return rows;
}

ReportAggregate aggregate_rounds(const std::vector<ParsedRound>& rounds) {
    ReportAggregate agg;
    agg.rounds = static_cast<int>(rounds.size());
    if (rounds.empty()) return agg;

    std::vector<double> lat;
    for (const auto& r : rounds) {
        lat.push_back(r.t_system_seconds);
        agg.total_comm_bytes += r.comm_bytes;
        agg.total_dropouts += r.dropouts;
    }
    std::sort(lat.begin(), lat.end());
    double sum = 0.0;
    for (double v : lat) sum += v;
    agg.t_system_mean = sum / static_cast<double>(lat.size());
    auto pct = [&](double q) {
        double idx = q * static_cast<double>(lat.size() - 1);
        auto lo = static_cast<std::size_t>(idx);
        auto hi = std::min(lo + 1, lat.size() - 1);
        double frac = idx - static_cast<double>(lo);
        return lat[lo] * (1.0 - frac) + lat[hi] * frac;
    };
    agg.t_system_median = pct(0.5);
    agg.t_system_p95 = pct(0.95);
    agg.final_active_samples = rounds.back().active_samples_total;
    return agg;
}

std::string render_aggregate_table(const ReportAggregate& agg) {
    std::ostringstream out;
    out << "rounds                " << agg.rounds << "\n";
    out << "t_system mean (s)     " << fmt_double(agg.t_system_mean) << "\n";
    out << "t_system median (s)   " << fmt_double(agg.t_system_median) << "\n";
    out << "t_system p95 (s)      " << fmt_double(agg.t_system_p95) << "\n";
    out << "total comm (bytes)    " << agg.total_comm_bytes << "\n";
    out << "total dropouts        " << agg.total_dropouts << "\n";
    out << "final active samples  " << agg.final_active_samples << "\n";
    return out.str();
}

} // namespace splitsim
