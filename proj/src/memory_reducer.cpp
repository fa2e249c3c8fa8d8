#include "splitsim/memory_reducer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "splitsim/errors.hpp"

namespace splitsim {

const char* to_string(RecomputeStrategy s) {
    return s == RecomputeStrategy::SpeedCentric ? "speed" : "memory";
}

DeviceChain build_device_chain(const ModelGraph& graph, int cut, int batch, int segment_size) {
    if (cut < 1 || cut > graph.layer_count()) throw std::out_of_range("cut layer out of range");
    if (batch < 1) throw std::invalid_argument("batch must be >= 1");
    if (segment_size < 0) throw std::invalid_argument("segment size must be >= 0");

    const int n = cut;
    int step = segment_size;
    if (step == 0) step = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    step = std::max(step, 1);

    DeviceChain chain;
    chain.forward_flops.resize(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i)
        chain.forward_flops[static_cast<std::size_t>(i - 1)] =
            static_cast<double>(batch) * graph.layer(i).flops_forward;

    for (int start = 1; start <= n; start += step) {
        SegmentSpec seg;
        seg.start_layer = start;
        seg.end_layer = std::min(start + step - 1, n);
        for (int i = seg.start_layer; i <= seg.end_layer; ++i) {
            std::uint64_t act = static_cast<std::uint64_t>(batch) * graph.layer(i).activation_bytes;
            seg.forward_bytes.push_back(act);
            seg.backward_bytes.push_back(act);
        }
        chain.segments.push_back(std::move(seg));
    }
    return chain;
}

std::uint64_t peak_layer_memory(const std::vector<SegmentSpec>& segments) {
    if (segments.empty()) throw std::invalid_argument("peak_layer_memory on an empty chain");
    std::uint64_t peak = 0;
    for (const auto& seg : segments) {
        for (std::size_t i = 0; i < seg.forward_bytes.size(); ++i)
            peak = std::max({peak, seg.forward_bytes[i], seg.backward_bytes[i]});
    }
    return peak;
}

std::uint64_t speed_centric_cost(const SegmentSpec& segment) {
    if (segment.forward_bytes.empty()) throw std::invalid_argument("empty segment");
    std::uint64_t cost = 0;
    for (std::uint64_t f : segment.forward_bytes) cost += f;
    return cost + segment.backward_bytes.back();
}

std::uint64_t memory_centric_cost(const SegmentSpec& segment) {
    if (segment.forward_bytes.empty()) throw std::invalid_argument("empty segment");
    std::uint64_t cost = 0;
    for (std::size_t i = 0; i < segment.forward_bytes.size(); ++i)
        cost = std::max({cost, segment.forward_bytes[i], segment.backward_bytes[i]});
    return cost;
}

namespace {

double flops_of(const std::vector<double>& forward_flops, int chain_layer) {
    auto idx = static_cast<std::size_t>(chain_layer - 1);
    if (idx >= forward_flops.size())
        throw std::invalid_argument("forward_flops does not cover chain layer " +
                                    std::to_string(chain_layer));
    return forward_flops[idx];
}

} // namespace

double speed_centric_overhead(const SegmentSpec& segment,
                              const std::vector<double>& forward_flops) {
    // The last layer's activation is the segment output held as a checkpoint;
    // only the dependency layers before it are regenerated.
    double overhead = 0.0;
    for (int i = segment.start_layer; i < segment.end_layer; ++i)
        overhead += flops_of(forward_flops, i);
    return overhead;
}

double memory_centric_overhead(const SegmentSpec& segment,
                               const std::vector<double>& forward_flops) {
    // Backward step k regenerates layers start..k-1, so layer i is replayed
    // once per later layer in the segment.
    double overhead = 0.0;
    for (int i = segment.start_layer; i < segment.end_layer; ++i)
        overhead += static_cast<double>(segment.end_layer - i) * flops_of(forward_flops, i);
    return overhead;
}

RecomputationPlan plan_recomputation(const std::vector<SegmentSpec>& segments,
                                     const std::vector<double>& forward_flops,
                                     std::uint64_t l_peak_cap) {
    if (segments.empty()) throw std::invalid_argument("cannot plan an empty chain");

    const std::uint64_t l_peak = peak_layer_memory(segments);
    if (l_peak > l_peak_cap) {
        // Name the layer that makes the cap unreachable.
        for (const auto& seg : segments) {
            for (std::size_t i = 0; i < seg.forward_bytes.size(); ++i) {
                std::uint64_t need = std::max(seg.forward_bytes[i], seg.backward_bytes[i]);
                if (need == l_peak)
                    throw InfeasiblePlanError(seg.start_layer + static_cast<int>(i), need,
                                              l_peak_cap);
            }
        }
    }

    RecomputationPlan plan;
    plan.cap_bytes = l_peak_cap;
    for (const auto& seg : segments) {
        PlannedSegment planned;
        planned.spec = seg;
        const std::uint64_t speed_cost = speed_centric_cost(seg);
        if (speed_cost <= l_peak_cap) {
            planned.strategy = RecomputeStrategy::SpeedCentric;
            planned.peak_bytes = speed_cost;
            planned.extra_forward_flops = speed_centric_overhead(seg, forward_flops);
        } else {
            planned.strategy = RecomputeStrategy::MemoryCentric;
            planned.peak_bytes = memory_centric_cost(seg);
            planned.extra_forward_flops = memory_centric_overhead(seg, forward_flops);
        }
        plan.peak_memory_bytes = std::max(plan.peak_memory_bytes, planned.peak_bytes);
        plan.extra_forward_flops += planned.extra_forward_flops;
        plan.segments.push_back(std::move(planned));
    }
    return plan;
}

RecomputationPlan plan_with_strategy(const std::vector<SegmentSpec>& segments,
                                     const std::vector<double>& forward_flops,
                                     RecomputeStrategy strategy) {
    if (segments.empty()) throw std::invalid_argument("cannot plan an empty chain");
    RecomputationPlan plan;
    plan.cap_bytes = 0;
    for (const auto& seg : segments) {
        PlannedSegment planned;
        planned.spec = seg;
        planned.strategy = strategy;
        if (strategy == RecomputeStrategy::SpeedCentric) {
            planned.peak_bytes = speed_centric_cost(seg);
            planned.extra_forward_flops = speed_centric_overhead(seg, forward_flops);
        } else {
            planned.peak_bytes = memory_centric_cost(seg);
            planned.extra_forward_flops = memory_centric_overhead(seg, forward_flops);
        }
        plan.peak_memory_bytes = std::max(plan.peak_memory_bytes, planned.peak_bytes);
        plan.extra_forward_flops += planned.extra_forward_flops;
        plan.segments.push_back(std::move(planned));
    }
    return plan;
}

RecomputationPlan replan_on_budget_change(const RecomputationPlan& current,
                                          std::uint64_t new_budget_bytes, const ModelGraph& graph,
                                          int cut, int batch) {
    const std::uint64_t fixed = graph.param_and_optimizer_bytes_through(cut);
    if (current.segments.empty()) throw std::invalid_argument("replan of an empty plan");

    // Keep the existing checkpoint geometry; refresh memories and flops from
    // the graph so a batch change is reflected too.
    std::vector<SegmentSpec> segments;
    std::vector<double> forward_flops(static_cast<std::size_t>(cut));
    for (int i = 1; i <= cut; ++i)
        forward_flops[static_cast<std::size_t>(i - 1)] =
            static_cast<double>(batch) * graph.layer(i).flops_forward;
    for (const auto& planned : current.segments) {
        SegmentSpec seg;
        seg.start_layer = planned.spec.start_layer;
        seg.end_layer = std::min(planned.spec.end_layer, cut);
        if (seg.start_layer > cut) break;
        for (int i = seg.start_layer; i <= seg.end_layer; ++i) {
            std::uint64_t act = static_cast<std::uint64_t>(batch) * graph.layer(i).activation_bytes;
            seg.forward_bytes.push_back(act);
            seg.backward_bytes.push_back(act);
        }
        segments.push_back(std::move(seg));
    }

    if (new_budget_bytes <= fixed) {
        std::uint64_t l_peak = peak_layer_memory(segments);
        throw InfeasiblePlanError(1, fixed + l_peak, new_budget_bytes);
    }
    return plan_recomputation(segments, forward_flops, new_budget_bytes - fixed);
}

RecomputationPlan plan_for_budget(const ModelGraph& graph, int cut, int batch, int segment_size,
                                  std::uint64_t budget_bytes) {
    DeviceChain chain = build_device_chain(graph, cut, batch, segment_size);
    const std::uint64_t fixed = graph.param_and_optimizer_bytes_through(cut);
    if (budget_bytes <= fixed) {
        std::uint64_t l_peak = peak_layer_memory(chain.segments);
        throw InfeasiblePlanError(1, fixed + l_peak, budget_bytes);
    }
    return plan_recomputation(chain.segments, chain.forward_flops, budget_bytes - fixed);
}

} // namespace splitsim
