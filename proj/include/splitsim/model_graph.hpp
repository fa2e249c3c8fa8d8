#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splitsim {

/// Per-layer cost annotations. Byte fields are per sample; the activation
/// footprint scales linearly with batch size, parameters do not.
/// grad_state_multiplier scales param_bytes into optimizer state
/// (1.0 = plain SGD gradients, 2.0 = gradients plus momentum buffers).
struct LayerProfile {
    int id = 0; // 1-based, contiguous within a graph
    double flops_forward = 0.0;
    std::uint64_t param_bytes = 0;
    std::uint64_t activation_bytes = 0;
    double grad_state_multiplier = 1.0;
};

/// An ordered layer graph. Layers execute in id order; predecessors default
/// to the linear chain (id-1 -> id) and must always point at lower ids, so
/// the edge set is a DAG by construction.
///
/// Forward FLOPs live on the layers; backward cost is modeled as
/// backward_flops_factor * forward (default 2.0) and applied by the latency
/// model when a training pass is simulated.
class ModelGraph {
public:
    ModelGraph(std::vector<LayerProfile> layers, double backward_flops_factor = 2.0);
    ModelGraph(std::vector<LayerProfile> layers, std::vector<std::vector<int>> predecessors,
               double backward_flops_factor = 2.0);

    int layer_count() const noexcept { return static_cast<int>(layers_.size()); }
    const LayerProfile& layer(int id) const; // 1-based
    const std::vector<LayerProfile>& layers() const noexcept { return layers_; }
    const std::vector<int>& predecessors(int id) const;
    double backward_flops_factor() const noexcept { return backward_flops_factor_; }
    const std::string& name() const noexcept { return name_; }
    void set_name(std::string name) { name_ = std::move(name); }

    /// Optimizer-state bytes of one layer: param_bytes * grad_state_multiplier.
    std::uint64_t optimizer_bytes(int id) const;

    std::uint64_t total_param_bytes() const noexcept { return total_param_bytes_; }

    /// Parameter bytes of layers 1..cut.
    std::uint64_t param_bytes_through(int cut) const;

    /// Parameter + optimizer bytes of layers 1..cut.
    std::uint64_t param_and_optimizer_bytes_through(int cut) const;

private:
    void validate() const;

    std::vector<LayerProfile> layers_;
    std::vector<std::vector<int>> predecessors_;
    double backward_flops_factor_;
    std::uint64_t total_param_bytes_ = 0;
    std::string name_;
};

/// Peak memory of an inference pass: all parameters plus the largest single
/// activation (batch-scaled). Intermediate states are discarded after use.
std::uint64_t inference_memory(const ModelGraph& graph, int batch);

/// Peak memory of a training pass: parameters, optimizer state, and every
/// intermediate activation retained for the backward pass.
std::uint64_t training_memory(const ModelGraph& graph, int batch);

/// training_memory restricted to layers 1..cut: the device-side footprint
/// when the model is split after layer `cut`.
/// Throws std::out_of_range unless 1 <= cut <= layer_count.
std::uint64_t device_side_memory(const ModelGraph& graph, int cut, int batch);

/// Batch-scaled output activation size of the split layer; this is the
/// payload crossing the device/server boundary each iteration.
std::uint64_t cut_activation_bytes(const ModelGraph& graph, int cut, int batch);

/// Loads a model profile file (JSON: optional name/backward_flops_factor plus
/// a layer array with fields exactly matching LayerProfile). Unknown keys are
/// rejected with ConfigError.
ModelGraph load_model_profile(const std::string& path);

} // namespace splitsim
