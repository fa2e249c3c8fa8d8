#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace splitsim {

/// Piecewise-constant memory budget over simulated time. Intervals are
/// left-closed: the budget at a breakpoint time is the new value, which
/// matches "an app launch grabs memory at time t" semantics.
class MemoryBudgetTrace {
public:
    struct Breakpoint {
        double time_seconds;
        std::uint64_t budget_bytes;
    };

    MemoryBudgetTrace() = default;
    explicit MemoryBudgetTrace(std::vector<Breakpoint> breakpoints);

    static MemoryBudgetTrace constant(std::uint64_t budget_bytes);

    /// Budget of the last breakpoint with time <= t.
    /// Throws std::out_of_range for negative t.
    std::uint64_t budget_at(double t) const;

    const std::vector<Breakpoint>& breakpoints() const noexcept { return breakpoints_; }

private:
    std::vector<Breakpoint> breakpoints_;
};

/// One mobile device: compute/bandwidth profile, dynamic memory budget,
/// class histogram, and per-sample loss state. The engine mutates losses
/// and the active mask between rounds; everything else is fixed.
struct DeviceProfile {
    int id = 0;
    double flops_per_second = 0.0;
    double local_io_bytes_per_second = 0.0;
    double uplink_bytes_per_second = 0.0;
    MemoryBudgetTrace memory_budget;
    std::vector<std::uint64_t> class_histogram;
    std::vector<double> per_sample_loss;
    std::vector<bool> active_mask; // pruned samples are false
    std::string device_class;

    std::uint64_t dataset_size() const noexcept { return per_sample_loss.size(); }
    std::uint64_t active_sample_count() const;
    void validate() const;
};

/// Kullback-Leibler divergence sum(p * ln(p/q)), with 0*ln(0/q) = 0.
/// Preconditions: equal length, both normalized within 1e-9, and q > 0
/// wherever p > 0; violations throw std::invalid_argument.
double kld(const std::vector<double>& p, const std::vector<double>& q);

/// Dis(i): KLD between the device's class distribution and the uniform
/// distribution over `global_classes` classes. Lower means more balanced.
double distribution_utility(const DeviceProfile& device, std::size_t global_classes);

/// Same computation for an externally estimated distribution.
double distribution_utility(const std::vector<double>& class_distribution);

/// Stat(i) = |D_active| * sqrt(mean of squared losses over active samples).
/// Pruned samples do not contribute. Throws if no sample is active.
double statistical_utility(const DeviceProfile& device);

} // namespace splitsim
