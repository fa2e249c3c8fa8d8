#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splitsim/device_profile.hpp"
#include "splitsim/latency_model.hpp"
#include "splitsim/model_graph.hpp"

namespace splitsim {

/// One selected device with its cut layer.
struct AssignmentEntry {
    int device_id = 0;
    int cut = 0;
};

/// The indicator matrix S in sparse form: the devices with alpha = 1 and
/// their cut layers, sorted by device id.
struct SplitAssignment {
    std::vector<AssignmentEntry> selected;
    double objective = 0.0;
    bool feasible = false;
};

/// Everything the objective needs about one candidate device, with the
/// per-cut round latency precomputed so objective evaluations are O(K).
struct SelectionCandidate {
    int device_id = 0;
    double dis = 0.0;               // distribution utility estimate
    std::uint64_t dataset_size = 0; // counts toward D_threshold
    std::uint64_t budget_bytes = 0; // as observed by the profile cache
    std::vector<double> latency_by_cut;     // index = cut - 1
    std::vector<std::uint64_t> floor_by_cut; // minimal feasible device memory
};

struct SelectionParams {
    int k = 1;                    // selection cardinality
    double lambda = 1.0;          // latency weight in the objective
    std::uint64_t d_threshold = 0;
    double penalty_weight = 1e3;
    bool per_device_latency = false; // ablation: T(i, j_i) instead of T_system
    bool normalize = false;          // unit-scale Dis and latency terms
    bool memory_constraint = true;
};

struct ObjectiveInfo {
    double value = 0.0;
    double t_system = 0.0;
    double sum_dis = 0.0;
    bool feasible = false;
    double memory_violation = 0.0; // relative overshoot summed over devices
    double data_violation = 0.0;   // relative shortfall vs D_threshold
};

/// Immutable per-round view of the selection problem. Latency tables are
/// filled from the latency model; Dis comes from the MEC estimates.
class SelectionContext {
public:
    SelectionContext(std::vector<SelectionCandidate> candidates, int layer_count,
                     SelectionParams params);

    int candidate_count() const noexcept { return static_cast<int>(candidates_.size()); }
    int layer_count() const noexcept { return layer_count_; }
    const SelectionParams& params() const noexcept { return params_; }
    const std::vector<SelectionCandidate>& candidates() const noexcept { return candidates_; }
    const SelectionCandidate& candidate_by_id(int device_id) const;

    /// Eq-9-style objective with soft constraint penalties so the optimizer
    /// can traverse infeasible regions. Lower is better.
    ObjectiveInfo evaluate(const SplitAssignment& assignment) const;
    double objective(const SplitAssignment& assignment) const { return evaluate(assignment).value; }

    double dis_scale() const noexcept { return dis_scale_; }
    double latency_scale() const noexcept { return latency_scale_; }

private:
    std::vector<SelectionCandidate> candidates_;
    std::vector<int> id_to_index_;
    int layer_count_;
    SelectionParams params_;
    double dis_scale_ = 1.0;
    double latency_scale_ = 1.0;
};

/// Builds a candidate's latency table: per-cut device round latency
/// (iterations * one split iteration + the device-part upload) and the
/// minimal memory floor per cut (parameters, optimizer state, and the
/// largest single activation, i.e. what memory-centric recomputation needs).
SelectionCandidate make_selection_candidate(const ModelGraph& graph, const DeviceProfile& device,
                                            const ExecutionContext& server_ctx, int batch,
                                            bool u_split, bool model_upload, int iterations,
                                            double dis, std::uint64_t budget_bytes);

struct BoOptions {
    int initial_design = 10;
    int candidates_per_iteration = 512;
    int hyper_refit_every = 8;
    double epsilon_noise = 1e-6; // GP observation noise
};

/// Bayesian-optimization selection over the joint device/cut space.
/// Each device is one continuous dimension in [0, V]: 0 means deselected,
/// values in (k-1, k] decode to cut k. Candidate points always select
/// exactly params.k devices. Deterministic given the seed; returns the best
/// feasible assignment observed within eval_budget objective evaluations.
/// Throws InfeasibleSelectionError when nothing feasible was found.
SplitAssignment bo_select(const SelectionContext& context, int eval_budget, std::uint64_t seed,
                          const BoOptions& options = {});

/// Exhaustive oracle over all K-subsets and cut vectors. Guarded to
/// N <= 8, V <= 10 to keep the enumeration tractable.
SplitAssignment brute_force_select(const SelectionContext& context);

/// Round latency of one device at a given cut: local iterations of the split
/// pass plus the device-part model upload.
double device_round_latency(const ModelGraph& graph, const DeviceProfile& device,
                            const ExecutionContext& server_ctx, int cut, int batch, bool u_split,
                            int iterations, bool model_upload);

/// Minimal device-side memory at a cut: parameters + optimizer state + the
/// largest single batch-scaled activation of the device part.
std::uint64_t min_device_memory_requirement(const ModelGraph& graph, int cut, int batch);

} // namespace splitsim
