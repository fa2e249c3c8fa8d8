#include "splitsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "nlohmann/json.hpp"

#include "splitsim/errors.hpp"
#include "splitsim/latency_model.hpp"
#include "splitsim/log.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

using json = nlohmann::json;

namespace {
// Stream tags for seed derivation; every consumer owns a tag so streams
// never alias.
constexpr std::uint64_t kFleetTag = 0x11;
constexpr std::uint64_t kBudgetTag = 0x12;
constexpr std::uint64_t kLossTag = 0x13;
constexpr std::uint64_t kDistTag = 0x14;
constexpr std::uint64_t kSelectTag = 0x21;
constexpr std::uint64_t kScheduleTag = 0x22;
} // namespace

std::uint64_t Fleet::total_samples() const {
    std::uint64_t total = 0;
    for (const auto& d : devices)
        for (std::uint64_t c : d.class_histogram) total += c;
    return total;
}

Fleet generate_fleet(const FleetConfig& config, std::uint64_t master_seed) {
    if (config.classes.empty()) throw ConfigError("fleet.classes", "generation needs device classes");
    Fleet fleet;
    fleet.class_count = static_cast<std::size_t>(config.dirichlet_classes);

    int id = 0;
    for (const auto& cls : config.classes) {
        for (int i = 0; i < cls.count; ++i, ++id) {
            Rng rng(derive_seed(master_seed, kFleetTag, static_cast<std::uint64_t>(id)));
            FleetDevice dev;
            dev.id = id;
            dev.device_class = cls.name;
            dev.flops_per_second = cls.flops_per_second * rng.uniform(0.9, 1.1);
            dev.local_io_bytes_per_second = cls.local_io_bytes_per_second * rng.uniform(0.9, 1.1);
            double uplink_factor =
                rng.uniform(1.0 - config.uplink_jitter, 1.0 + config.uplink_jitter);
            dev.uplink_lan_bytes_per_second = config.lan_bytes_per_second * uplink_factor;
            dev.uplink_wan_bytes_per_second = config.wan_bytes_per_second * uplink_factor;

            // Class mix from the Dirichlet directive, realized as a
            // multinomial draw over the device's sample count.
            std::vector<double> alpha(static_cast<std::size_t>(config.dirichlet_classes),
                                      config.dirichlet_concentration);
            std::vector<double> proportions = rng.dirichlet(alpha);
            double jitter = rng.uniform(1.0 - config.samples_jitter, 1.0 + config.samples_jitter);
            auto samples = static_cast<std::uint64_t>(
                std::max(1.0, std::round(config.samples_per_device * jitter)));
            dev.class_histogram = rng.multinomial(samples, proportions);

            // Budget trace: base level plus step events from app launches
            // and exits.
            Rng budget_rng(derive_seed(master_seed, kBudgetTag, static_cast<std::uint64_t>(id)));
            std::vector<MemoryBudgetTrace::Breakpoint> trace;
            trace.push_back({0.0, cls.memory_budget_bytes});
            std::vector<double> times;
            for (int e = 0; e < config.budget_event_count; ++e)
                times.push_back(budget_rng.uniform(1.0, config.budget_event_horizon_seconds));
            std::sort(times.begin(), times.end());
            for (double t : times) {
                double factor = budget_rng.uniform(1.0 - config.budget_event_amplitude,
                                                   1.0 + config.budget_event_amplitude);
                auto budget = static_cast<std::uint64_t>(
                    std::max(1.0, static_cast<double>(cls.memory_budget_bytes) * factor));
                if (t > trace.back().time_seconds) trace.push_back({t, budget});
            }
            dev.memory_budget = MemoryBudgetTrace(std::move(trace));
            fleet.devices.push_back(std::move(dev));
        }
    }
    return fleet;
}

Fleet load_fleet(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open fleet file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("parse error: ") + e.what());
    }
    if (!doc.contains("devices") || !doc.at("devices").is_array())
        throw ConfigError(path, "fleet file needs a devices array");

    Fleet fleet;
    fleet.class_count = doc.value("classes", 0);
    for (const auto& jd : doc.at("devices")) {
        for (auto it = jd.begin(); it != jd.end(); ++it) {
            static const std::set<std::string> allowed = {
                "id", "class", "flops_per_second", "local_io_bytes_per_second",
                "uplink_lan_bytes_per_second", "uplink_wan_bytes_per_second",
                "memory_budget", "class_histogram"};
            if (allowed.find(it.key()) == allowed.end())
                throw ConfigError("fleet.devices." + it.key(), "unknown key");
        }
        FleetDevice dev;
        dev.id = jd.at("id").get<int>();
        dev.device_class = jd.value("class", std::string{});
        dev.flops_per_second = jd.at("flops_per_second").get<double>();
        dev.local_io_bytes_per_second = jd.at("local_io_bytes_per_second").get<double>();
        dev.uplink_lan_bytes_per_second = jd.at("uplink_lan_bytes_per_second").get<double>();
        dev.uplink_wan_bytes_per_second = jd.at("uplink_wan_bytes_per_second").get<double>();
        std::vector<MemoryBudgetTrace::Breakpoint> trace;
        for (const auto& bp : jd.at("memory_budget"))
            trace.push_back({bp.at(0).get<double>(), bp.at(1).get<std::uint64_t>()});
        dev.memory_budget = MemoryBudgetTrace(std::move(trace));
        dev.class_histogram = jd.at("class_histogram").get<std::vector<std::uint64_t>>();
        fleet.class_count = std::max(fleet.class_count, dev.class_histogram.size());
        fleet.devices.push_back(std::move(dev));
    }
    if (fleet.devices.empty()) throw ConfigError(path, "fleet file has no devices");
    return fleet;
}

void save_fleet(const Fleet& fleet, const std::string& path) {
    json doc;
    doc["classes"] = fleet.class_count;
    json devices = json::array();
    for (const auto& dev : fleet.devices) {
        json trace = json::array();
        for (const auto& bp : dev.memory_budget.breakpoints())
            trace.push_back({bp.time_seconds, bp.budget_bytes});
        devices.push_back({{"id", dev.id},
                           {"class", dev.device_class},
                           {"flops_per_second", dev.flops_per_second},
                           {"local_io_bytes_per_second", dev.local_io_bytes_per_second},
                           {"uplink_lan_bytes_per_second", dev.uplink_lan_bytes_per_second},
                           {"uplink_wan_bytes_per_second", dev.uplink_wan_bytes_per_second},
                           {"memory_budget", trace},
                           {"class_histogram", dev.class_histogram}});
    }
    doc["devices"] = devices;
    std::ofstream out(path);
    if (!out) throw ConfigError(path, "cannot write fleet file");
    out << doc.dump(2) << "\n";
}

void step_losses(DeviceProfile& device, bool participated, double gamma, double loss_floor) {
    if (gamma <= 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must be in (0, 1]");
    if (!participated) return;
    for (std::size_t s = 0; s < device.per_sample_loss.size(); ++s) {
        if (!device.active_mask[s]) continue;
        double updated = loss_floor + (device.per_sample_loss[s] - loss_floor) * gamma;
        device.per_sample_loss[s] = std::min(device.per_sample_loss[s], updated);
    }
}

Simulation::Simulation(ScenarioConfig config)
    : config_(std::move(config)), traits_(config_.traits()),
      graph_(load_model_profile(config_.model_profile_path)),
      fleet_(config_.fleet.file.empty() ? generate_fleet(config_.fleet, config_.master_seed)
                                        : load_fleet(config_.fleet.file)) {
    initialize();
}

Simulation::Simulation(ScenarioConfig config, ModelGraph graph, Fleet fleet)
    : config_(std::move(config)), traits_(config_.traits()), graph_(std::move(graph)),
      fleet_(std::move(fleet)) {
    initialize();
}

double Simulation::loss_floor(int device_index) const {
    return config_.dynamics.dis_floor_coupling * dis_true_[static_cast<std::size_t>(device_index)];
}

void Simulation::initialize() {
    if (config_.policy.k > static_cast<int>(fleet_.devices.size()))
        throw ConfigError("policy.k", "k exceeds the fleet size");
    if (config_.policy.static_cut < 1 || config_.policy.static_cut > graph_.layer_count())
        throw ConfigError("policy.static_cut", "cut outside the model's layer range");
    // Runtime state is indexed by device id.
    for (std::size_t i = 0; i < fleet_.devices.size(); ++i) {
        if (fleet_.devices[i].id != static_cast<int>(i))
            throw ConfigError("fleet.devices.id", "device ids must be contiguous from 0");
    }

    server_ctx_ = ExecutionContext{config_.server.flops_per_second,
                                   config_.server.io_bytes_per_second, config_.policy.batch, true};

    const std::uint64_t total_samples = fleet_.total_samples();
    d_threshold_ = static_cast<std::uint64_t>(config_.policy.d_threshold_fraction *
                                              static_cast<double>(total_samples));
    aux_ = AuxiliaryDataset{
        std::max<std::uint64_t>(
            1, static_cast<std::uint64_t>(config_.policy.aux_fraction *
                                          static_cast<double>(total_samples))),
        fleet_.class_count};

    // Materialize runtime device state. The effective uplink depends on the
    // policy tier: MEC policies exchange activations over the LAN, two-tier
    // policies over the WAN.
    devices_.clear();
    dis_true_.clear();
    for (std::size_t i = 0; i < fleet_.devices.size(); ++i) {
        const FleetDevice& fd = fleet_.devices[i];
        DeviceProfile dev;
        dev.id = fd.id;
        dev.device_class = fd.device_class;
        dev.flops_per_second = fd.flops_per_second;
        dev.local_io_bytes_per_second = fd.local_io_bytes_per_second;
        dev.uplink_bytes_per_second =
            traits_.mec_tier ? fd.uplink_lan_bytes_per_second : fd.uplink_wan_bytes_per_second;
        dev.memory_budget = fd.memory_budget;
        dev.class_histogram = fd.class_histogram;

        std::uint64_t samples = 0;
        for (std::uint64_t c : fd.class_histogram) samples += c;
        dev.per_sample_loss.resize(samples);
        dev.active_mask.assign(samples, true);
        devices_.push_back(std::move(dev));
        dis_true_.push_back(distribution_utility(devices_.back(), fleet_.class_count));
    }

    // Probing phase: initial losses, loss/profile caches, and the simulated
    // distribution estimates the central manager will use.
    for (std::size_t i = 0; i < devices_.size(); ++i) {
        DeviceProfile& dev = devices_[i];
        Rng loss_rng(derive_seed(config_.master_seed, kLossTag, static_cast<std::uint64_t>(dev.id)));
        const double floor = loss_floor(static_cast<int>(i));
        for (auto& loss : dev.per_sample_loss)
            loss = floor + loss_rng.lognormal(config_.dynamics.initial_loss_mu,
                                              config_.dynamics.initial_loss_sigma);
        dev.validate();

        mec_.update_loss_cache(dev.id, dev.per_sample_loss);
        mec_.update_profile_cache(dev.id, ProfileCacheEntry{dev.flops_per_second,
                                                            dev.uplink_bytes_per_second,
                                                            dev.memory_budget.budget_at(0.0), 0.0});
        mec_.store_distribution(
            dev.id, estimate_distribution(dev, aux_, fleet_.class_count, config_.policy.noise_level,
                                          derive_seed(config_.master_seed, kDistTag,
                                                      static_cast<std::uint64_t>(dev.id))));
    }
}

int Simulation::iterations_for(const DeviceProfile& device) const {
    const auto active = static_cast<double>(device.active_sample_count());
    const int per_epoch =
        std::max(1, static_cast<int>(std::ceil(active / static_cast<double>(config_.policy.batch))));
    return config_.policy.local_epochs * per_epoch;
}

SelectionContext Simulation::build_selection_context(int pool_size) const {
    std::vector<SelectionCandidate> candidates;
    candidates.reserve(devices_.size());
    for (const auto& dev : devices_) {
        double dis = distribution_utility(mec_.distribution(dev.id));
        // The central manager plans against the cached budget observation;
        // the live budget may differ by the time the device replans.
        std::uint64_t observed_budget = mec_.profile_entry(dev.id).last_budget_bytes;
        SelectionCandidate c = make_selection_candidate(
            graph_, dev, server_ctx_, config_.policy.batch, config_.policy.u_split,
            /*model_upload=*/true, iterations_for(dev), dis, observed_budget);
        if (!traits_.recompute_floor) {
            // Without on-device recomputation the whole device-side residency
            // must fit.
            for (int j = 1; j <= graph_.layer_count(); ++j)
                c.floor_by_cut[static_cast<std::size_t>(j - 1)] =
                    device_side_memory(graph_, j, config_.policy.batch);
        }
        candidates.push_back(std::move(c));
    }

    SelectionParams params;
    params.k = pool_size;
    params.lambda = config_.policy.lambda;
    params.d_threshold = d_threshold_;
    params.per_device_latency = config_.policy.per_device_latency;
    params.normalize = config_.policy.normalize_objective;
    params.memory_constraint = traits_.memory_aware;
    return SelectionContext(std::move(candidates), graph_.layer_count(), params);
}

std::vector<int> Simulation::central_selection(int round_index, int pool_size,
                                               std::vector<int>* cuts) {
    const int n = static_cast<int>(devices_.size());
    const int v = graph_.layer_count();
    std::vector<int> chosen;
    cuts->assign(static_cast<std::size_t>(n), 0);

    const int cut_for_all = traits_.full_model ? v
                            : traits_.static_cut ? config_.policy.static_cut
                                                 : 0;

    if (traits_.bo_selection) {
        SelectionContext context = build_selection_context(pool_size);
        SplitAssignment assignment;
        try {
            assignment = bo_select(context, config_.policy.bo.eval_budget,
                                   derive_seed(config_.master_seed, kSelectTag,
                                               static_cast<std::uint64_t>(round_index)),
                                   BoOptions{config_.policy.bo.initial_design,
                                             config_.policy.bo.candidates_per_iteration});
        } catch (const InfeasibleSelectionError& e) {
            throw SimulationError("round " + std::to_string(round_index) + ": " + e.what());
        }
        for (const auto& entry : assignment.selected) {
            chosen.push_back(entry.device_id);
            (*cuts)[static_cast<std::size_t>(entry.device_id)] = entry.cut;
        }
    } else {
        Rng rng(derive_seed(config_.master_seed, kSelectTag, static_cast<std::uint64_t>(round_index)));
        for (int idx : rng.sample_without_replacement(n, pool_size)) {
            chosen.push_back(devices_[static_cast<std::size_t>(idx)].id);
            (*cuts)[static_cast<std::size_t>(idx)] = cut_for_all;
        }
        std::sort(chosen.begin(), chosen.end());
    }
    return chosen;
}

RoundReport Simulation::run_round(int round_index) {
    RoundReport report;
    report.round = round_index;
    report.t_start_seconds = sim_time_seconds_;

    const int k = config_.policy.k;
    const int pool_size =
        traits_.reselect
            ? std::min(static_cast<int>(devices_.size()),
                       std::max(k, static_cast<int>(std::ceil(config_.policy.reselect_pool_factor *
                                                              static_cast<double>(k)))))
            : k;

    std::vector<int> cuts;
    std::vector<int> candidates = central_selection(round_index, pool_size, &cuts);

    // MEC tier re-selection by time-evolving importance.
    std::vector<int> participants;
    if (traits_.reselect) {
        participants = mec_.schedule(candidates, config_.policy.epsilon, k,
                                     derive_seed(config_.master_seed, kScheduleTag,
                                                 static_cast<std::uint64_t>(round_index)));
    } else {
        participants = candidates;
    }

    const int batch = config_.policy.batch;
    std::vector<double> totals;
    for (int id : participants) {
        DeviceProfile& dev = devices_[static_cast<std::size_t>(id)];
        const int cut = cuts[static_cast<std::size_t>(id)];
        const int iterations = iterations_for(dev);
        const std::uint64_t budget_now = dev.memory_budget.budget_at(sim_time_seconds_);

        DeviceRoundRecord rec;
        rec.device_id = id;
        rec.cut = cut;
        rec.iterations = iterations;
        rec.budget_bytes = budget_now;

        const std::uint64_t fixed = graph_.param_and_optimizer_bytes_through(cut);
        double overhead_flops = 0.0;

        if (traits_.recompute_mode == 0) {
            // Full residency: every device-side activation is retained, plus
            // the largest transient backward buffer.
            std::uint64_t max_act = 0;
            for (int i = 1; i <= cut; ++i)
                max_act = std::max(max_act, graph_.layer(i).activation_bytes);
            std::uint64_t req = device_side_memory(graph_, cut, batch) +
                                static_cast<std::uint64_t>(batch) * max_act;
            rec.peak_memory_bytes = static_cast<std::uint64_t>(
                static_cast<double>(req) * traits_.memory_multiplier);
        } else if (traits_.recompute_mode == 3) {
            try {
                RecomputationPlan plan = plan_for_budget(
                    graph_, cut, batch, config_.policy.recompute_segment_size, budget_now);
                rec.peak_memory_bytes = fixed + plan.peak_memory_bytes;
                overhead_flops = plan.extra_forward_flops;
                for (const auto& seg : plan.segments)
                    (seg.strategy == RecomputeStrategy::SpeedCentric ? rec.speed_segments
                                                                     : rec.memory_segments)++;
            } catch (const InfeasiblePlanError& e) {
                rec.dropout = true;
                rec.peak_memory_bytes = e.required_bytes();
                log::debug("round " + std::to_string(round_index) + ": device " +
                           std::to_string(id) + " dropped out (" + e.what() + ")");
            }
        } else {
            DeviceChain chain =
                build_device_chain(graph_, cut, batch, config_.policy.recompute_segment_size);
            RecomputationPlan plan = plan_with_strategy(chain.segments, chain.forward_flops,
                                                        traits_.recompute_mode == 1
                                                            ? RecomputeStrategy::SpeedCentric
                                                            : RecomputeStrategy::MemoryCentric);
            rec.peak_memory_bytes = fixed + plan.peak_memory_bytes;
            overhead_flops = plan.extra_forward_flops;
            for (const auto& seg : plan.segments)
                (seg.strategy == RecomputeStrategy::SpeedCentric ? rec.speed_segments
                                                                 : rec.memory_segments)++;
        }

        if (!rec.dropout && traits_.memory_aware && rec.peak_memory_bytes > budget_now)
            rec.dropout = true;

        if (!rec.dropout) {
            SplitLatencyBreakdown per_iter =
                split_round_latency(graph_, cut, dev, server_ctx_, batch, config_.policy.u_split);
            const double iters = static_cast<double>(iterations);
            rec.device_compute_seconds =
                iters * per_iter.device_compute_seconds * traits_.time_multiplier;
            rec.transfer_seconds = iters * per_iter.transfer_seconds;
            rec.server_compute_seconds = iters * per_iter.server_compute_seconds;
            rec.overhead_flops = overhead_flops;
            rec.overhead_seconds =
                iters * overhead_flops / dev.flops_per_second * traits_.time_multiplier;
            rec.upload_seconds = static_cast<double>(graph_.param_bytes_through(cut)) /
                                 dev.uplink_bytes_per_second;
            rec.total_seconds = rec.device_compute_seconds + rec.transfer_seconds +
                                rec.server_compute_seconds + rec.overhead_seconds +
                                rec.upload_seconds;
            rec.comm_bytes = round_comm_bytes(graph_, cut, batch, iterations,
                                              config_.policy.u_split, /*model_upload=*/true);
            totals.push_back(rec.total_seconds);
            report.comm_bytes += rec.comm_bytes;
        } else {
            ++report.dropouts;
        }
        report.sum_dis += distribution_utility(mec_.distribution(id));
        report.sum_stat += statistical_utility(dev);
        report.peak_memory_bytes = std::max(report.peak_memory_bytes, rec.peak_memory_bytes);
        report.devices.push_back(rec);
    }

    if (totals.empty())
        throw SimulationError("round " + std::to_string(round_index) +
                              ": every selected device dropped out");
    report.t_system_seconds = system_latency(totals);

    // Post-round state evolution: losses decay for devices that trained,
    // pruning retires learned samples, and the caches take fresh snapshots.
    for (const auto& rec : report.devices) {
        if (rec.dropout) continue;
        DeviceProfile& dev = devices_[static_cast<std::size_t>(rec.device_id)];
        step_losses(dev, true, config_.dynamics.gamma, loss_floor(rec.device_id));
        if (traits_.prune) prune_learned_samples(dev, config_.policy.sigma_prune);

        std::vector<double> active_losses;
        for (std::size_t s = 0; s < dev.per_sample_loss.size(); ++s)
            if (dev.active_mask[s]) active_losses.push_back(dev.per_sample_loss[s]);
        mec_.update_loss_cache(rec.device_id, active_losses);
    }

    // Profiles are what the devices reported when this round began; the next
    // round's central selection therefore plans against budgets that may be
    // one round stale, and the on-device replanning absorbs the difference.
    for (auto& dev : devices_) {
        mec_.update_profile_cache(dev.id, ProfileCacheEntry{dev.flops_per_second,
                                                            dev.uplink_bytes_per_second,
                                                            dev.memory_budget.budget_at(sim_time_seconds_),
                                                            sim_time_seconds_});
    }
    sim_time_seconds_ += report.t_system_seconds;

    for (const auto& dev : devices_) report.active_samples_total += dev.active_sample_count();

    if (mec_trace_ != nullptr) {
        json row;
        row["round"] = round_index;
        json entries = json::array();
        for (const auto& [id, entry] : mec_.loss_cache()) {
            entries.push_back({{"device_id", id},
                               {"count", entry.latest.count},
                               {"rms", entry.latest.rms},
                               {"budget_bytes", mec_.profile_entry(id).last_budget_bytes}});
        }
        row["loss_cache"] = entries;
        (*mec_trace_) << row.dump() << "\n";
    }
    ++rounds_executed_;
    return report;
}

SimulationResult Simulation::run() {
    SimulationResult result;
    for (int r = 0; r < config_.policy.rounds; ++r) result.rounds.push_back(run_round(r));
    result.summary = summarize(result.rounds, to_string(config_.policy.policy));
    return result;
}

SplitAssignment Simulation::select_once(std::uint64_t seed) {
    SelectionContext context = build_selection_context(config_.policy.k);
    return bo_select(context, config_.policy.bo.eval_budget, seed,
                     BoOptions{config_.policy.bo.initial_design,
                               config_.policy.bo.candidates_per_iteration});
}

namespace {
double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    double idx = q * static_cast<double>(values.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(idx));
    auto hi = static_cast<std::size_t>(std::ceil(idx));
    double frac = idx - std::floor(idx);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
}
} // namespace

SimulationSummary summarize(const std::vector<RoundReport>& rounds, const std::string& policy) {
    SimulationSummary s;
    s.rounds = static_cast<int>(rounds.size());
    s.policy = policy;
    if (rounds.empty()) return s;

    std::vector<double> latencies;
    double peak_sum = 0.0;
    for (const auto& r : rounds) {
        latencies.push_back(r.t_system_seconds);
        s.total_comm_bytes += r.comm_bytes;
        s.total_dropouts += r.dropouts;
        s.peak_memory_max = std::max(s.peak_memory_max, r.peak_memory_bytes);
        peak_sum += static_cast<double>(r.peak_memory_bytes);
    }
    s.t_system_mean =
        std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
    s.t_system_median = percentile(latencies, 0.5);
    s.t_system_p95 = percentile(latencies, 0.95);
    s.final_active_samples = rounds.back().active_samples_total;
    s.peak_memory_mean = peak_sum / static_cast<double>(rounds.size());
    return s;
}

} // namespace splitsim
