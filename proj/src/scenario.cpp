#include "splitsim/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include "splitsim/errors.hpp"

namespace splitsim {

using json = nlohmann::json;

namespace {

const std::map<std::string, Policy>& policy_table() {
    static const std::map<std::string, Policy> table = {
        {"fedavg", Policy::FedAvg},
        {"fgc", Policy::Fgc},
        {"fga", Policy::Fga},
        {"flp", Policy::Flp},
        {"splitfl_static", Policy::SplitflStatic},
        {"d_sft", Policy::DSft},
        {"smd", Policy::Smd},
        {"r_smd", Policy::RSmd},
        {"n_smd", Policy::NSmd},
        {"s_smd", Policy::SSmd},
        {"m_smd", Policy::MSmd},
        {"smartsplit", Policy::SmartSplit},
    };
    return table;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (allowed.find(it.key()) == allowed.end())
            throw ConfigError(where + "." + it.key(), "unknown key");
    }
}

template <typename T>
T get_or(const json& obj, const std::string& key, const T& fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key, e.what());
    }
}

} // namespace

Policy parse_policy(const std::string& name) {
    auto it = policy_table().find(name);
    if (it == policy_table().end())
        throw ConfigError("policy.name", "unknown policy '" + name + "'");
    return it->second;
}

const char* to_string(Policy policy) {
    for (const auto& [name, p] : policy_table())
        if (p == policy) return name.c_str();
    return "unknown";
}

std::vector<std::string> all_policy_names() {
    std::vector<std::string> names;
    for (const auto& [name, p] : policy_table()) names.push_back(name);
    return names;
}

PolicyTraits ScenarioConfig::traits() const {
    PolicyTraits t;
    const auto& m = policy.multipliers;
    switch (policy.policy) {
    case Policy::FedAvg:
        t.full_model = true;
        break;
    case Policy::Fgc:
        t.full_model = true;
        t.time_multiplier = m.fgc_time;
        t.memory_multiplier = m.fgc_memory;
        break;
    case Policy::Fga:
        t.full_model = true;
        t.time_multiplier = m.fga_time;
        t.memory_multiplier = m.fga_memory;
        break;
    case Policy::Flp:
        t.full_model = true;
        t.time_multiplier = m.flp_time;
        t.memory_multiplier = m.flp_memory;
        break;
    case Policy::SplitflStatic:
        t.static_cut = true;
        break;
    case Policy::DSft:
        t.bo_selection = true;
        t.memory_aware = true;
        t.recompute_floor = false; // no on-device recomputation available
        break;
    case Policy::Smd:
        t.static_cut = true;
        t.mec_tier = true;
        break;
    case Policy::RSmd:
        t.static_cut = true;
        t.mec_tier = true;
        t.reselect = true;
        t.prune = true;
        break;
    case Policy::NSmd:
    case Policy::SSmd:
    case Policy::MSmd:
    case Policy::SmartSplit:
        t.bo_selection = true;
        t.mec_tier = true;
        t.reselect = true;
        t.prune = true;
        t.memory_aware = true;
        t.recompute_mode = policy.policy == Policy::NSmd   ? 0
                           : policy.policy == Policy::SSmd ? 1
                           : policy.policy == Policy::MSmd ? 2
                                                           : 3;
        break;
    }
    return t;
}

void ScenarioConfig::validate() const {
    if (model_profile_path.empty()) throw ConfigError("model.profile", "required");
    if (fleet.file.empty()) {
        if (fleet.devices < 1) throw ConfigError("fleet.devices", "must be >= 1");
        if (fleet.classes.empty()) throw ConfigError("fleet.classes", "required for generated fleets");
        int total = 0;
        for (const auto& c : fleet.classes) total += c.count;
        if (total != fleet.devices)
            throw ConfigError("fleet.classes", "class counts must sum to fleet.devices");
        if (fleet.dirichlet_concentration <= 0.0)
            throw ConfigError("fleet.dirichlet.concentration", "must be > 0");
        if (fleet.dirichlet_classes < 2) throw ConfigError("fleet.dirichlet.classes", "must be >= 2");
    }
    if (policy.rounds < 1) throw ConfigError("policy.rounds", "must be >= 1");
    if (policy.k < 1) throw ConfigError("policy.k", "must be >= 1");
    if (policy.batch < 1) throw ConfigError("policy.batch", "must be >= 1");
    if (policy.local_epochs < 1) throw ConfigError("policy.local_epochs", "must be >= 1");
    if (policy.epsilon < 0.0 || policy.epsilon > 1.0)
        throw ConfigError("policy.epsilon", "must be in [0, 1]");
    if (policy.sigma_prune < 0.0 || policy.sigma_prune > 1.0)
        throw ConfigError("policy.sigma_prune", "must be in [0, 1]");
    if (policy.aux_fraction <= 0.0 || policy.aux_fraction > 0.01)
        throw ConfigError("policy.aux_fraction", "auxiliary set must stay within 1% of the data");
    if (policy.reselect_pool_factor < 1.0)
        throw ConfigError("policy.reselect_pool_factor", "must be >= 1");
    if (dynamics.gamma <= 0.0 || dynamics.gamma >= 1.0)
        throw ConfigError("dynamics.gamma", "must be in (0, 1)");
    if (server.flops_per_second <= 0.0 || server.io_bytes_per_second <= 0.0)
        throw ConfigError("server", "rates must be positive");
}

ScenarioConfig scenario_from_json(const json& doc, const std::string& base_dir) {
    reject_unknown(doc, {"name", "model", "fleet", "server", "policy", "dynamics", "seeds"},
                   "scenario");
    ScenarioConfig cfg;
    cfg.name = get_or<std::string>(doc, "name", "", "scenario");

    if (!doc.contains("model")) throw ConfigError("model", "required section");
    reject_unknown(doc.at("model"), {"profile"}, "model");
    cfg.model_profile_path = get_or<std::string>(doc.at("model"), "profile", "", "model");
    if (!cfg.model_profile_path.empty() && !base_dir.empty() &&
        !std::filesystem::path(cfg.model_profile_path).is_absolute())
        cfg.model_profile_path = (std::filesystem::path(base_dir) / cfg.model_profile_path).string();

    if (!doc.contains("fleet")) throw ConfigError("fleet", "required section");
    {
        const json& f = doc.at("fleet");
        reject_unknown(f,
                       {"file", "devices", "classes", "dirichlet", "wan_bytes_per_second",
                        "lan_bytes_per_second", "uplink_jitter", "budget_events"},
                       "fleet");
        cfg.fleet.file = get_or<std::string>(f, "file", "", "fleet");
        if (!cfg.fleet.file.empty() && !base_dir.empty() &&
            !std::filesystem::path(cfg.fleet.file).is_absolute())
            cfg.fleet.file = (std::filesystem::path(base_dir) / cfg.fleet.file).string();
        cfg.fleet.devices = get_or<int>(f, "devices", 0, "fleet");
        if (f.contains("classes")) {
            for (const auto& jc : f.at("classes")) {
                reject_unknown(jc,
                               {"name", "count", "flops_per_second", "local_io_bytes_per_second",
                                "memory_budget_bytes"},
                               "fleet.classes");
                DeviceClassConfig c;
                c.name = get_or<std::string>(jc, "name", "", "fleet.classes");
                c.count = get_or<int>(jc, "count", 0, "fleet.classes");
                c.flops_per_second = get_or<double>(jc, "flops_per_second", 0.0, "fleet.classes");
                c.local_io_bytes_per_second =
                    get_or<double>(jc, "local_io_bytes_per_second", 0.0, "fleet.classes");
                c.memory_budget_bytes =
                    get_or<std::uint64_t>(jc, "memory_budget_bytes", 0, "fleet.classes");
                cfg.fleet.classes.push_back(c);
            }
        }
        if (f.contains("dirichlet")) {
            const json& d = f.at("dirichlet");
            reject_unknown(d, {"concentration", "classes", "samples_per_device", "samples_jitter"},
                           "fleet.dirichlet");
            cfg.fleet.dirichlet_concentration =
                get_or<double>(d, "concentration", 0.5, "fleet.dirichlet");
            cfg.fleet.dirichlet_classes = get_or<int>(d, "classes", 10, "fleet.dirichlet");
            cfg.fleet.samples_per_device =
                get_or<int>(d, "samples_per_device", 500, "fleet.dirichlet");
            cfg.fleet.samples_jitter = get_or<double>(d, "samples_jitter", 0.2, "fleet.dirichlet");
        }
        cfg.fleet.wan_bytes_per_second =
            get_or<double>(f, "wan_bytes_per_second", cfg.fleet.wan_bytes_per_second, "fleet");
        cfg.fleet.lan_bytes_per_second =
            get_or<double>(f, "lan_bytes_per_second", cfg.fleet.lan_bytes_per_second, "fleet");
        cfg.fleet.uplink_jitter = get_or<double>(f, "uplink_jitter", cfg.fleet.uplink_jitter, "fleet");
        if (f.contains("budget_events")) {
            const json& b = f.at("budget_events");
            reject_unknown(b, {"count", "amplitude_fraction", "horizon_seconds"}, "fleet.budget_events");
            cfg.fleet.budget_event_count = get_or<int>(b, "count", 4, "fleet.budget_events");
            cfg.fleet.budget_event_amplitude =
                get_or<double>(b, "amplitude_fraction", 0.15, "fleet.budget_events");
            cfg.fleet.budget_event_horizon_seconds =
                get_or<double>(b, "horizon_seconds", 1.0e5, "fleet.budget_events");
        }
    }

    if (doc.contains("server")) {
        const json& s = doc.at("server");
        reject_unknown(s, {"flops_per_second", "io_bytes_per_second"}, "server");
        cfg.server.flops_per_second =
            get_or<double>(s, "flops_per_second", cfg.server.flops_per_second, "server");
        cfg.server.io_bytes_per_second =
            get_or<double>(s, "io_bytes_per_second", cfg.server.io_bytes_per_second, "server");
    }

    if (!doc.contains("policy")) throw ConfigError("policy", "required section");
    {
        const json& p = doc.at("policy");
        reject_unknown(p,
                       {"name", "rounds", "local_epochs", "batch", "k", "epsilon", "sigma_prune",
                        "lambda", "d_threshold_fraction", "u_split", "static_cut",
                        "reselect_pool_factor", "recompute_segment_size", "noise_level",
                        "aux_fraction", "normalize_objective", "per_device_latency", "bo",
                        "multipliers"},
                       "policy");
        cfg.policy.policy = parse_policy(get_or<std::string>(p, "name", "smartsplit", "policy"));
        cfg.policy.rounds = get_or<int>(p, "rounds", cfg.policy.rounds, "policy");
        cfg.policy.local_epochs = get_or<int>(p, "local_epochs", cfg.policy.local_epochs, "policy");
        cfg.policy.batch = get_or<int>(p, "batch", cfg.policy.batch, "policy");
        cfg.policy.k = get_or<int>(p, "k", cfg.policy.k, "policy");
        cfg.policy.epsilon = get_or<double>(p, "epsilon", cfg.policy.epsilon, "policy");
        cfg.policy.sigma_prune = get_or<double>(p, "sigma_prune", cfg.policy.sigma_prune, "policy");
        cfg.policy.lambda = get_or<double>(p, "lambda", cfg.policy.lambda, "policy");
        cfg.policy.d_threshold_fraction =
            get_or<double>(p, "d_threshold_fraction", cfg.policy.d_threshold_fraction, "policy");
        cfg.policy.u_split = get_or<bool>(p, "u_split", cfg.policy.u_split, "policy");
        cfg.policy.static_cut = get_or<int>(p, "static_cut", cfg.policy.static_cut, "policy");
        cfg.policy.reselect_pool_factor =
            get_or<double>(p, "reselect_pool_factor", cfg.policy.reselect_pool_factor, "policy");
        cfg.policy.recompute_segment_size =
            get_or<int>(p, "recompute_segment_size", cfg.policy.recompute_segment_size, "policy");
        cfg.policy.noise_level = get_or<double>(p, "noise_level", cfg.policy.noise_level, "policy");
        cfg.policy.aux_fraction = get_or<double>(p, "aux_fraction", cfg.policy.aux_fraction, "policy");
        cfg.policy.normalize_objective =
            get_or<bool>(p, "normalize_objective", cfg.policy.normalize_objective, "policy");
        cfg.policy.per_device_latency =
            get_or<bool>(p, "per_device_latency", cfg.policy.per_device_latency, "policy");
        if (p.contains("bo")) {
            const json& b = p.at("bo");
            reject_unknown(b, {"eval_budget", "initial_design", "candidates_per_iteration"},
                           "policy.bo");
            cfg.policy.bo.eval_budget = get_or<int>(b, "eval_budget", cfg.policy.bo.eval_budget, "policy.bo");
            cfg.policy.bo.initial_design =
                get_or<int>(b, "initial_design", cfg.policy.bo.initial_design, "policy.bo");
            cfg.policy.bo.candidates_per_iteration = get_or<int>(
                b, "candidates_per_iteration", cfg.policy.bo.candidates_per_iteration, "policy.bo");
        }
        if (p.contains("multipliers")) {
            const json& m = p.at("multipliers");
            reject_unknown(m, {"fgc_time", "fgc_memory", "fga_time", "fga_memory", "flp_time", "flp_memory"},
                           "policy.multipliers");
            auto& mult = cfg.policy.multipliers;
            mult.fgc_time = get_or<double>(m, "fgc_time", mult.fgc_time, "policy.multipliers");
            mult.fgc_memory = get_or<double>(m, "fgc_memory", mult.fgc_memory, "policy.multipliers");
            mult.fga_time = get_or<double>(m, "fga_time", mult.fga_time, "policy.multipliers");
            mult.fga_memory = get_or<double>(m, "fga_memory", mult.fga_memory, "policy.multipliers");
            mult.flp_time = get_or<double>(m, "flp_time", mult.flp_time, "policy.multipliers");
            mult.flp_memory = get_or<double>(m, "flp_memory", mult.flp_memory, "policy.multipliers");
        }
    }

    if (doc.contains("dynamics")) {
        const json& d = doc.at("dynamics");
        reject_unknown(d, {"initial_loss_mu", "initial_loss_sigma", "gamma", "dis_floor_coupling"},
                       "dynamics");
        cfg.dynamics.initial_loss_mu =
            get_or<double>(d, "initial_loss_mu", cfg.dynamics.initial_loss_mu, "dynamics");
        cfg.dynamics.initial_loss_sigma =
            get_or<double>(d, "initial_loss_sigma", cfg.dynamics.initial_loss_sigma, "dynamics");
        cfg.dynamics.gamma = get_or<double>(d, "gamma", cfg.dynamics.gamma, "dynamics");
        cfg.dynamics.dis_floor_coupling =
            get_or<double>(d, "dis_floor_coupling", cfg.dynamics.dis_floor_coupling, "dynamics");
    }

    if (doc.contains("seeds")) {
        const json& s = doc.at("seeds");
        reject_unknown(s, {"master"}, "seeds");
        cfg.master_seed = get_or<std::uint64_t>(s, "master", cfg.master_seed, "seeds");
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, "cannot open scenario file");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path, std::string("parse error: ") + e.what());
    }
    return scenario_from_json(doc, std::filesystem::path(path).parent_path().string());
}

json scenario_to_json(const ScenarioConfig& cfg) {
    json doc;
    doc["name"] = cfg.name;
    doc["model"] = {{"profile", cfg.model_profile_path}};
    json classes = json::array();
    for (const auto& c : cfg.fleet.classes) {
        classes.push_back({{"name", c.name},
                           {"count", c.count},
                           {"flops_per_second", c.flops_per_second},
                           {"local_io_bytes_per_second", c.local_io_bytes_per_second},
                           {"memory_budget_bytes", c.memory_budget_bytes}});
    }
    doc["fleet"] = {
        {"file", cfg.fleet.file},
        {"devices", cfg.fleet.devices},
        {"classes", classes},
        {"dirichlet",
         {{"concentration", cfg.fleet.dirichlet_concentration},
          {"classes", cfg.fleet.dirichlet_classes},
          {"samples_per_device", cfg.fleet.samples_per_device},
          {"samples_jitter", cfg.fleet.samples_jitter}}},
        {"wan_bytes_per_second", cfg.fleet.wan_bytes_per_second},
        {"lan_bytes_per_second", cfg.fleet.lan_bytes_per_second},
        {"uplink_jitter", cfg.fleet.uplink_jitter},
        {"budget_events",
         {{"count", cfg.fleet.budget_event_count},
          {"amplitude_fraction", cfg.fleet.budget_event_amplitude},
          {"horizon_seconds", cfg.fleet.budget_event_horizon_seconds}}},
    };
    doc["server"] = {{"flops_per_second", cfg.server.flops_per_second},
                     {"io_bytes_per_second", cfg.server.io_bytes_per_second}};
    doc["policy"] = {
        {"name", to_string(cfg.policy.policy)},
        {"rounds", cfg.policy.rounds},
        {"local_epochs", cfg.policy.local_epochs},
        {"batch", cfg.policy.batch},
        {"k", cfg.policy.k},
        {"epsilon", cfg.policy.epsilon},
        {"sigma_prune", cfg.policy.sigma_prune},
        {"lambda", cfg.policy.lambda},
        {"d_threshold_fraction", cfg.policy.d_threshold_fraction},
        {"u_split", cfg.policy.u_split},
        {"static_cut", cfg.policy.static_cut},
        {"reselect_pool_factor", cfg.policy.reselect_pool_factor},
        {"recompute_segment_size", cfg.policy.recompute_segment_size},
        {"noise_level", cfg.policy.noise_level},
        {"aux_fraction", cfg.policy.aux_fraction},
        {"normalize_objective", cfg.policy.normalize_objective},
        {"per_device_latency", cfg.policy.per_device_latency},
        {"bo",
         {{"eval_budget", cfg.policy.bo.eval_budget},
          {"initial_design", cfg.policy.bo.initial_design},
          {"candidates_per_iteration", cfg.policy.bo.candidates_per_iteration}}},
        {"multipliers",
         {{"fgc_time", cfg.policy.multipliers.fgc_time},
          {"fgc_memory", cfg.policy.multipliers.fgc_memory},
          {"fga_time", cfg.policy.multipliers.fga_time},
          {"fga_memory", cfg.policy.multipliers.fga_memory},
          {"flp_time", cfg.policy.multipliers.flp_time},
          {"flp_memory", cfg.policy.multipliers.flp_memory}}},
    };
    doc["dynamics"] = {{"initial_loss_mu", cfg.dynamics.initial_loss_mu},
                       {"initial_loss_sigma", cfg.dynamics.initial_loss_sigma},
                       {"gamma", cfg.dynamics.gamma},
                       {"dis_floor_coupling", cfg.dynamics.dis_floor_coupling}};
    doc["seeds"] = {{"master", cfg.master_seed}};
    return doc;
}

void apply_override(json& doc, const std::string& assignment) {
    auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError(assignment, "override must look like key.path=value");
    std::string path = assignment.substr(0, eq);
    std::string raw = assignment.substr(eq + 1);

    json::json_pointer ptr;
    std::string token;
    std::string pointer_str;
    for (char ch : path) {
        if (ch == '.') {
            pointer_str += "/" + token;
            token.clear();
        } else {
            token += ch;
        }
    }
    pointer_str += "/" + token;
    ptr = json::json_pointer(pointer_str);

    if (!doc.contains(ptr))
        throw ConfigError(path, "override path does not reference an existing config key");

    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw; // plain string value
    }
    doc[ptr] = value;
}

} // namespace splitsim
