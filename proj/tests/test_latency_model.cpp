#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "splitsim/latency_model.hpp"
#include "splitsim/model_graph.hpp"
#include "splitsim/rng.hpp"

using namespace splitsim;

namespace {

DeviceProfile make_device(double flops, double io, double uplink) {
    DeviceProfile d;
    d.id = 0;
    d.flops_per_second = flops;
    d.local_io_bytes_per_second = io;
    d.uplink_bytes_per_second = uplink;
    d.memory_budget = MemoryBudgetTrace::constant(1ULL << 40);
    d.class_histogram = {1};
    d.per_sample_loss = {1.0};
    d.active_mask = {true};
    return d;
}

ModelGraph toy4() {
    return load_model_profile(std::string(SPLITSIM_DATA_DIR) + "/profiles/toy4.json");
}

} // namespace

TEST_CASE("layer time decomposes into read, compute, write") {
    // Layer 2 reads a 1e6 B predecessor activation, computes 1e9 FLOPs, and
    // writes its own 1e6 B output: 1 + 1 + 1 seconds.
    ModelGraph g({{1, 0.0, 0, 1000000, 1.0}, {2, 1e9, 0, 1000000, 1.0}});
    ExecutionContext ctx{1e9, 1e6, 1, false};
    CHECK(layer_time(g.layer(2), g, ctx) == doctest::Approx(3.0).epsilon(1e-12));

    // The first layer has no predecessors, so the read term vanishes.
    CHECK(layer_time(g.layer(1), g, ctx) == doctest::Approx(1.0).epsilon(1e-12));

    // Training with backward factor 2 triples only the compute term.
    ExecutionContext train = ctx;
    train.training = true;
    CHECK(layer_time(g.layer(2), g, train) == doctest::Approx(1.0 + 3.0 + 1.0).epsilon(1e-12));
}

TEST_CASE("split round latency matches the hand-computed toy4 breakdown") {
    ModelGraph g = toy4();
    DeviceProfile dev = make_device(1e9, 1e8, 1e6);
    ExecutionContext server{1e11, 1e10, 1, true};
    SplitLatencyBreakdown b = split_round_latency(g, 2, dev, server, 2, true);

    CHECK(b.device_compute_seconds == doctest::Approx(18.05).epsilon(1e-9));
    CHECK(b.transfer_seconds == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(b.server_compute_seconds == doctest::Approx(0.30092).epsilon(1e-9));
    CHECK(b.total_seconds == doctest::Approx(20.35092).epsilon(1e-9));
}

TEST_CASE("cut at the last layer degenerates to on-device training") {
    ModelGraph g = toy4();
    DeviceProfile dev = make_device(1e9, 1e8, 1e6);
    ExecutionContext server{1e11, 1e10, 1, true};
    SplitLatencyBreakdown b = split_round_latency(g, g.layer_count(), dev, server, 2, true);
    CHECK(b.transfer_seconds == 0.0);
    CHECK(b.server_compute_seconds == 0.0);
    CHECK(b.total_seconds == b.device_compute_seconds);
}

TEST_CASE("an infinitely fast server leaves device plus transfer") {
    ModelGraph g = toy4();
    DeviceProfile dev = make_device(1e9, 1e8, 1e6);
    ExecutionContext server{1e18, 1e18, 1, true};
    SplitLatencyBreakdown b = split_round_latency(g, 2, dev, server, 2, true);
    CHECK(b.total_seconds ==
          doctest::Approx(b.device_compute_seconds + b.transfer_seconds).epsilon(1e-6));
}

TEST_CASE("breakdown totals are exact sums and u_split doubles transfer") {
    Rng rng(31);
    ExecutionContext server{1e11, 1e10, 1, true};
    for (int i = 0; i < 200; ++i) {
        std::vector<LayerProfile> layers;
        int v = 2 + static_cast<int>(rng.uniform_index(10));
        for (int id = 1; id <= v; ++id)
            layers.push_back({id, rng.uniform(1e6, 1e9), rng.uniform_index(1000000),
                              1 + rng.uniform_index(1000000), 1.0});
        ModelGraph g(std::move(layers));
        DeviceProfile dev = make_device(rng.uniform(1e8, 1e10), rng.uniform(1e7, 1e9),
                                        rng.uniform(1e5, 1e8));
        int cut = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(v)));
        int batch = 1 + static_cast<int>(rng.uniform_index(32));

        SplitLatencyBreakdown with = split_round_latency(g, cut, dev, server, batch, true);
        CHECK(with.total_seconds ==
              doctest::Approx(with.device_compute_seconds + with.transfer_seconds +
                              with.server_compute_seconds)
                  .epsilon(1e-12));

        SplitLatencyBreakdown without = split_round_latency(g, cut, dev, server, batch, false);
        CHECK(without.transfer_seconds == doctest::Approx(with.transfer_seconds / 2.0).epsilon(1e-12));
        CHECK(without.device_compute_seconds == with.device_compute_seconds);
    }
}

TEST_CASE("system latency is the straggler's latency") {
    CHECK(system_latency({3.0}) == 3.0);
    CHECK(system_latency({1.0, 9.0, 4.0}) == 9.0);
    CHECK_THROWS_AS(system_latency({}), std::invalid_argument);

    // Adding a faster device never increases the round latency.
    std::vector<double> fleet = {4.0, 7.0};
    double before = system_latency(fleet);
    fleet.push_back(2.0);
    CHECK(system_latency(fleet) <= before);
}

TEST_CASE("homogeneous fleet: everyone is the straggler") {
    std::vector<double> same(8, 5.5);
    CHECK(system_latency(same) == 5.5);
}

TEST_CASE("round communication accounting") {
    // A 20 B cut activation at batch 2 crosses twice per iteration under
    // u_split: 80 B plus the device-part upload.
    ModelGraph g({{1, 0.0, 300, 20, 1.0}, {2, 0.0, 500, 5, 1.0}});
    CHECK(round_comm_bytes(g, 1, 2, 1, true, true) == 80 + 300);
    CHECK(round_comm_bytes(g, 1, 2, 1, false, false) == 40);

    // Cutting at the last layer leaves only the model upload.
    CHECK(round_comm_bytes(g, 2, 2, 10, true, true) == 800);
    CHECK_THROWS_AS(round_comm_bytes(g, 1, 2, 0, true, true), std::invalid_argument);
}

TEST_CASE("a deep split moves fewer bytes than a full-model upload") {
    ModelGraph g = load_model_profile(std::string(SPLITSIM_DATA_DIR) + "/profiles/vgg16.json");
    // Layer 31 is the last pooling stage: a small activation far from the
    // giant fully-connected parameter mass.
    std::uint64_t split = round_comm_bytes(g, 31, 16, 10, true, true);
    std::uint64_t full = round_comm_bytes(g, g.layer_count(), 16, 10, true, true);
    CHECK(split < full);
}
