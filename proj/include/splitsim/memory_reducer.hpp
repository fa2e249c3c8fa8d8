#pragma once

#include <cstdint>
#include <vector>

#include "splitsim/model_graph.hpp"

namespace splitsim {

/// A checkpoint segment of the device-side layer chain. Layer ids are
/// 1-based positions within the chain; memory entries are batch-scaled bytes,
/// one per layer in [start_layer, end_layer].
struct SegmentSpec {
    int start_layer = 0;
    int end_layer = 0;
    std::vector<std::uint64_t> forward_bytes;
    std::vector<std::uint64_t> backward_bytes;

    int size() const noexcept { return end_layer - start_layer + 1; }
};

enum class RecomputeStrategy { SpeedCentric, MemoryCentric };

const char* to_string(RecomputeStrategy s);

struct PlannedSegment {
    SegmentSpec spec;
    RecomputeStrategy strategy = RecomputeStrategy::SpeedCentric;
    std::uint64_t peak_bytes = 0;
    double extra_forward_flops = 0.0;
};

/// Output of the planner: a per-segment strategy choice plus the resulting
/// activation peak and total recompute overhead. peak_memory_bytes never
/// exceeds the cap the plan was built against.
struct RecomputationPlan {
    std::vector<PlannedSegment> segments;
    std::uint64_t peak_memory_bytes = 0;
    double extra_forward_flops = 0.0;
    std::uint64_t cap_bytes = 0;
};

/// Device-side chain ready for planning: checkpoint segments plus the
/// batch-scaled forward FLOPs of each chain layer (index = chain id - 1).
struct DeviceChain {
    std::vector<SegmentSpec> segments;
    std::vector<double> forward_flops;
};

/// Builds the chain for layers 1..cut of `graph` at the given batch size.
/// Backward buffers are modeled as mirrors of the forward activations
/// (a layer's gradient has the shape of its output). Checkpoints are placed
/// every `segment_size` layers; 0 picks ceil(sqrt(n)), the classic
/// sublinear-memory spacing.
DeviceChain build_device_chain(const ModelGraph& graph, int cut, int batch, int segment_size = 0);

/// Largest single-layer footprint across all segments: the floor below which
/// no recomputation strategy can fit. Throws on an empty segment list.
std::uint64_t peak_layer_memory(const std::vector<SegmentSpec>& segments);

/// Memory cost of recomputing the segment once and keeping all regenerated
/// activations: sum of forward bytes plus the last layer's backward buffer.
std::uint64_t speed_centric_cost(const SegmentSpec& segment);

/// Memory requirement of per-layer recomputation: the largest single-layer
/// footprint inside the segment.
std::uint64_t memory_centric_cost(const SegmentSpec& segment);

/// Extra forward FLOPs of a speed-centric pass over the segment: each
/// dependency layer (all but the last) is recomputed once.
double speed_centric_overhead(const SegmentSpec& segment, const std::vector<double>& forward_flops);

/// Extra forward FLOPs of memory-centric recomputation: every backward step
/// recomputes its in-segment forward prefix from the checkpoint.
double memory_centric_overhead(const SegmentSpec& segment, const std::vector<double>& forward_flops);

/// Cost-aware planning over the chain: pick speed-centric wherever its
/// memory cost fits under the cap, memory-centric otherwise. Throws
/// InfeasiblePlanError (naming the violating layer) if even the single-layer
/// peak exceeds the cap.
RecomputationPlan plan_recomputation(const std::vector<SegmentSpec>& segments,
                                     const std::vector<double>& forward_flops,
                                     std::uint64_t l_peak_cap);

/// Forces one strategy everywhere; used by the speed-only / memory-only
/// policy ablations. No cap is enforced.
RecomputationPlan plan_with_strategy(const std::vector<SegmentSpec>& segments,
                                     const std::vector<double>& forward_flops,
                                     RecomputeStrategy strategy);

/// Re-derives the cap from a fresh budget (budget minus the device-side
/// parameter and optimizer bytes) and replans over the same segment
/// geometry. Raises InfeasiblePlanError when the budget cannot hold even the
/// memory-centric plan; the engine turns that into a round dropout.
RecomputationPlan replan_on_budget_change(const RecomputationPlan& current,
                                          std::uint64_t new_budget_bytes, const ModelGraph& graph,
                                          int cut, int batch);

/// Convenience composition for the engine: builds the chain for the cut,
/// converts the budget into an activation cap, and plans.
RecomputationPlan plan_for_budget(const ModelGraph& graph, int cut, int batch, int segment_size,
                                  std::uint64_t budget_bytes);

} // namespace splitsim
