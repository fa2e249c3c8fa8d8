#include "splitsim/latency_model.hpp"

#include <algorithm>
#include <stdexcept>

namespace splitsim {

void ExecutionContext::validate() const {
    if (compute_flops_per_second <= 0.0 || io_bytes_per_second <= 0.0)
        throw std::invalid_argument("execution context rates must be strictly positive");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
}

double layer_time(const LayerProfile& layer, const ModelGraph& graph, const ExecutionContext& ctx) {
    ctx.validate();
    const double batch = static_cast<double>(ctx.batch);

    double read_bytes = 0.0;
    for (int p : graph.predecessors(layer.id))
        read_bytes += static_cast<double>(graph.layer(p).activation_bytes);
    const double r = batch * read_bytes / ctx.io_bytes_per_second;

    const double flops_factor = ctx.training ? 1.0 + graph.backward_flops_factor() : 1.0;
    const double c = batch * layer.flops_forward * flops_factor / ctx.compute_flops_per_second;

    const double w =
        batch * static_cast<double>(layer.activation_bytes) / ctx.io_bytes_per_second;

    return r + c + w;
}

SplitLatencyBreakdown split_round_latency(const ModelGraph& graph, int cut,
                                          const DeviceProfile& device,
                                          const ExecutionContext& server_ctx, int batch,
                                          bool u_split, bool training) {
    const int v = graph.layer_count();
    if (cut < 1 || cut > v)
        throw std::out_of_range("cut layer " + std::to_string(cut) + " out of range 1.." +
                                std::to_string(v));

    ExecutionContext device_ctx{device.flops_per_second, device.local_io_bytes_per_second, batch,
                                training};

    SplitLatencyBreakdown out;
    for (int u = 1; u <= cut; ++u)
        out.device_compute_seconds += layer_time(graph.layer(u), graph, device_ctx);

    if (cut < v) {
        const double payload = static_cast<double>(cut_activation_bytes(graph, cut, batch));
        out.transfer_seconds = payload * (u_split ? 2.0 : 1.0) / device.uplink_bytes_per_second;

        ExecutionContext srv = server_ctx;
        srv.batch = batch;
        srv.training = training;
        for (int u = cut + 1; u <= v; ++u)
            out.server_compute_seconds += layer_time(graph.layer(u), graph, srv);
    }

    out.total_seconds = out.device_compute_seconds + out.transfer_seconds + out.server_compute_seconds;
    return out;
}

double system_latency(const std::vector<double>& per_device_latencies) {
    if (per_device_latencies.empty())
        throw std::invalid_argument("system latency needs at least one participant");
    return *std::max_element(per_device_latencies.begin(), per_device_latencies.end());
}

std::uint64_t round_comm_bytes(const ModelGraph& graph, int cut, int batch, int iterations,
                               bool u_split, bool model_upload) {
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    std::uint64_t bytes = 0;
    if (cut < graph.layer_count()) {
        bytes += static_cast<std::uint64_t>(iterations) * cut_activation_bytes(graph, cut, batch) *
                 (u_split ? 2u : 1u);
    }
    if (model_upload) bytes += graph.param_bytes_through(cut);
    return bytes;
}

} // namespace splitsim
