#pragma once

// Small selection problem shared by the central-manager tests and the
// acceptance suite: 6 heterogeneous devices, an 8-layer model, 3 picked per
// round. Small enough for the exhaustive oracle, rich enough that the
// optimum is not a corner case.

#include <cstdint>
#include <vector>

#include "splitsim/central_manager.hpp"
#include "splitsim/device_profile.hpp"
#include "splitsim/latency_model.hpp"
#include "splitsim/model_graph.hpp"

namespace toy {

inline splitsim::ModelGraph graph() {
    using splitsim::LayerProfile;
    std::vector<LayerProfile> layers = {
        {1, 4.0e8, 40000, 800000, 1.0},
        {2, 8.0e8, 120000, 400000, 1.0},
        {3, 1.6e9, 400000, 200000, 1.0},
        {4, 1.2e9, 800000, 100000, 1.0},
        {5, 8.0e8, 1600000, 50000, 1.0},
        {6, 6.0e8, 2400000, 25000, 1.0},
        {7, 4.0e8, 3200000, 12000, 1.0},
        {8, 2.0e8, 400000, 4000, 1.0},
    };
    return splitsim::ModelGraph(std::move(layers));
}

struct ToyDevice {
    double flops;
    double io;
    double uplink;
    std::uint64_t budget;
    std::vector<std::uint64_t> hist;
};

inline std::vector<splitsim::DeviceProfile> devices() {
    std::vector<ToyDevice> spec = {
        {2.0e9, 5.0e8, 2.0e6, 4500000, {40, 5, 3, 2}},
        {4.0e9, 1.0e9, 5.0e6, 6500000, {15, 15, 10, 10}},
        {1.0e9, 4.0e8, 1.0e6, 3400000, {1, 1, 47, 1}},
        {1.6e10, 2.0e9, 1.0e7, 25000000, {12, 13, 12, 13}},
        {8.0e9, 1.5e9, 8.0e6, 10000000, {30, 10, 5, 5}},
        {3.0e9, 8.0e8, 4.0e6, 6000000, {5, 35, 5, 5}},
    };
    std::vector<splitsim::DeviceProfile> out;
    for (std::size_t i = 0; i < spec.size(); ++i) {
        splitsim::DeviceProfile d;
        d.id = static_cast<int>(i);
        d.flops_per_second = spec[i].flops;
        d.local_io_bytes_per_second = spec[i].io;
        d.uplink_bytes_per_second = spec[i].uplink;
        d.memory_budget = splitsim::MemoryBudgetTrace::constant(spec[i].budget);
        d.class_histogram = spec[i].hist;
        std::uint64_t n = 0;
        for (auto c : spec[i].hist) n += c;
        d.per_sample_loss.assign(n, 1.0);
        d.active_mask.assign(n, true);
        out.push_back(std::move(d));
    }
    return out;
}

inline splitsim::SelectionContext context(double lambda = 1.0, int k = 3,
                                          std::uint64_t d_threshold = 120) {
    splitsim::ModelGraph g = graph();
    splitsim::ExecutionContext server{1.0e12, 1.0e10, 4, true};
    std::vector<splitsim::SelectionCandidate> candidates;
    for (const auto& dev : devices()) {
        double dis = splitsim::distribution_utility(dev, 4);
        candidates.push_back(splitsim::make_selection_candidate(
            g, dev, server, /*batch=*/4, /*u_split=*/true, /*model_upload=*/true,
            /*iterations=*/13, dis, dev.memory_budget.budget_at(0.0)));
    }
    splitsim::SelectionParams params;
    params.k = k;
    params.lambda = lambda;
    params.d_threshold = d_threshold;
    params.normalize = false;
    return splitsim::SelectionContext(std::move(candidates), g.layer_count(), params);
}

} // namespace toy
