#pragma once

#include <cstdint>
#include <vector>

#include "splitsim/device_profile.hpp"
#include "splitsim/model_graph.hpp"

namespace splitsim {

/// Where and how a (sub-)network executes: compute speed, local memory IO
/// bandwidth, batch size, and whether the pass is a training pass (which
/// multiplies compute by the graph's backward factor).
struct ExecutionContext {
    double compute_flops_per_second = 0.0;
    double io_bytes_per_second = 0.0;
    int batch = 1;
    bool training = true;

    void validate() const;
};

/// One end-to-end split iteration, broken into the device sub-network, the
/// boundary transfer, and the server sub-network. total_seconds is always
/// the sum of the three parts.
struct SplitLatencyBreakdown {
    double device_compute_seconds = 0.0;
    double transfer_seconds = 0.0;
    double server_compute_seconds = 0.0;
    double total_seconds = 0.0;
};

/// Execution time of one layer: input fetch + compute + output write.
/// R = batch * sum of predecessor activations / io rate (empty for layer 1),
/// C = batch * flops * (1 + training * backward_factor) / compute rate,
/// W = batch * own activation / io rate.
double layer_time(const LayerProfile& layer, const ModelGraph& graph, const ExecutionContext& ctx);

/// One training iteration under a split at layer `cut`: device runs layers
/// 1..cut, the cut activation crosses the uplink (doubled when u_split is on,
/// activations up plus gradients back), the server runs the rest. cut ==
/// layer_count means no split: transfer and server terms are zero.
SplitLatencyBreakdown split_round_latency(const ModelGraph& graph, int cut,
                                          const DeviceProfile& device,
                                          const ExecutionContext& server_ctx, int batch,
                                          bool u_split, bool training = true);

/// Synchronous round latency: the straggler sets the pace.
double system_latency(const std::vector<double>& per_device_latencies);

/// Bytes exchanged over a round: per-iteration cut activations (doubled for
/// u_split), plus the device-side parameter upload when the policy sends its
/// model part for aggregation. cut == layer_count has no per-iteration term.
std::uint64_t round_comm_bytes(const ModelGraph& graph, int cut, int batch, int iterations,
                               bool u_split, bool model_upload);

} // namespace splitsim
