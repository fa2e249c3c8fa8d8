#include "splitsim/device_profile.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace splitsim {

MemoryBudgetTrace::MemoryBudgetTrace(std::vector<Breakpoint> breakpoints)
    : breakpoints_(std::move(breakpoints)) {
    if (breakpoints_.empty()) throw std::invalid_argument("budget trace needs breakpoints");
    if (breakpoints_.front().time_seconds != 0.0)
        throw std::invalid_argument("budget trace must start at t = 0");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
        if (breakpoints_[i].time_seconds <= breakpoints_[i - 1].time_seconds)
            throw std::invalid_argument("budget trace times must be strictly increasing");
    }
}

MemoryBudgetTrace MemoryBudgetTrace::constant(std::uint64_t budget_bytes) {
    return MemoryBudgetTrace({{0.0, budget_bytes}});
}

std::uint64_t MemoryBudgetTrace::budget_at(double t) const {
    if (t < 0.0) throw std::out_of_range("budget lookup at negative time");
    if (breakpoints_.empty()) throw std::logic_error("empty budget trace");
    std::uint64_t budget = breakpoints_.front().budget_bytes;
    for (const auto& bp : breakpoints_) {
        if (bp.time_seconds <= t)
            budget = bp.budget_bytes;
        else
            break;
    }
    return budget;
}

std::uint64_t DeviceProfile::active_sample_count() const {
    return static_cast<std::uint64_t>(std::count(active_mask.begin(), active_mask.end(), true));
}

void DeviceProfile::validate() const {
    if (flops_per_second <= 0.0 || local_io_bytes_per_second <= 0.0 || uplink_bytes_per_second <= 0.0)
        throw std::invalid_argument("device rates must be strictly positive");
    std::uint64_t hist_total =
        std::accumulate(class_histogram.begin(), class_histogram.end(), std::uint64_t{0});
    if (hist_total != per_sample_loss.size())
        throw std::invalid_argument("dataset_size must equal the class histogram total");
    if (active_mask.size() != per_sample_loss.size())
        throw std::invalid_argument("active mask must cover every sample");
    for (double l : per_sample_loss)
        if (l < 0.0) throw std::invalid_argument("losses must be nonnegative");
}

double kld(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kld: length mismatch");
    if (p.empty()) throw std::invalid_argument("kld: empty distributions");
    double sum_p = 0.0, sum_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw std::invalid_argument("kld: negative probability");
        sum_p += p[i];
        sum_q += q[i];
    }
    if (std::abs(sum_p - 1.0) > 1e-9 || std::abs(sum_q - 1.0) > 1e-9)
        throw std::invalid_argument("kld: inputs must sum to 1 within 1e-9");
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue; // 0 * ln(0/q) = 0
        if (q[i] == 0.0) throw std::invalid_argument("kld: p > 0 where q = 0");
        d += p[i] * std::log(p[i] / q[i]);
    }
    // Rounding can produce a tiny negative value for p ~ q.
    return std::max(d, 0.0);
}

double distribution_utility(const DeviceProfile& device, std::size_t global_classes) {
    if (global_classes == 0) throw std::invalid_argument("global class set must be nonempty");
    std::uint64_t total =
        std::accumulate(device.class_histogram.begin(), device.class_histogram.end(), std::uint64_t{0});
    if (total == 0) throw std::invalid_argument("device has an empty dataset");
    if (device.class_histogram.size() > global_classes)
        throw std::invalid_argument("device histogram has more classes than the global set");
    std::vector<double> p(global_classes, 0.0);
    for (std::size_t i = 0; i < device.class_histogram.size(); ++i)
        p[i] = static_cast<double>(device.class_histogram[i]) / static_cast<double>(total);
    std::vector<double> uniform(global_classes, 1.0 / static_cast<double>(global_classes));
    return kld(p, uniform);
}

double distribution_utility(const std::vector<double>& class_distribution) {
    std::vector<double> uniform(class_distribution.size(),
                                1.0 / static_cast<double>(class_distribution.size()));
    return kld(class_distribution, uniform);
}

double statistical_utility(const DeviceProfile& device) {
    double sum_sq = 0.0;
    std::uint64_t n = 0;
    for (std::size_t s = 0; s < device.per_sample_loss.size(); ++s) {
        if (!device.active_mask[s]) continue;
        sum_sq += device.per_sample_loss[s] * device.per_sample_loss[s];
        ++n;
    }
    if (n == 0) throw std::invalid_argument("statistical utility needs at least one active sample");
    return static_cast<double>(n) * std::sqrt(sum_sq / static_cast<double>(n));
}

} // namespace splitsim
