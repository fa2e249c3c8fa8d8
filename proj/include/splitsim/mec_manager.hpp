#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "splitsim/device_profile.hpp"

namespace splitsim {

/// Summary of one probing-loss upload: enough to evaluate the statistical
/// utility without ever shipping raw per-sample losses off the device.
struct LossSummary {
    std::uint64_t count = 0;
    double mean = 0.0;
    double rms = 0.0;
};

/// Latest loss summary per device plus a short history ring.
struct LossCacheEntry {
    LossSummary latest;
    std::deque<LossSummary> history; // newest at the back, capacity H
};

/// System profile as last observed by the MEC tier. The budget observation
/// is what central selection sees; the device's live budget may have moved
/// since, which is exactly the gap the on-device replanning covers.
struct ProfileCacheEntry {
    double flops_per_second = 0.0;
    double uplink_bytes_per_second = 0.0;
    std::uint64_t last_budget_bytes = 0;
    double timestamp = 0.0;
};

/// Tiny public dataset used to probe class distributions.
struct AuxiliaryDataset {
    std::uint64_t size = 0;
    std::size_t class_count = 0;
};

/// Simulated distribution probing: the true normalized histogram perturbed
/// by Dirichlet noise with concentration true_p * aux.size / noise_level.
/// noise_level 0 returns the exact distribution. Deterministic given seed.
std::vector<double> estimate_distribution(const DeviceProfile& device, const AuxiliaryDataset& aux,
                                          std::size_t global_classes, double noise_level,
                                          std::uint64_t seed);

/// Epsilon-greedy re-selection: one epsilon draw per scheduling event picks
/// either a uniform K-subset or the top-K candidates by Stat (ties broken by
/// ascending id). Returns ids sorted ascending. Deterministic given seed.
std::vector<int> importance_schedule(const std::vector<std::pair<int, double>>& candidate_stats,
                                     double epsilon, int k, std::uint64_t seed);

/// Marks inactive the lowest-loss samples until only the (1 - sigma) target
/// fraction remains active (never below one sample). Pruned samples are
/// never reactivated. Returns how many samples this call pruned.
std::uint64_t prune_learned_samples(DeviceProfile& device, double sigma_fraction);

/// The MEC tier: loss/profile caches keyed by device id and the ops that
/// read them.
class MecManager {
public:
    explicit MecManager(int history_depth = 5) : history_depth_(history_depth) {}

    void update_loss_cache(int device_id, const std::vector<double>& losses);
    void update_profile_cache(int device_id, const ProfileCacheEntry& observation);

    bool has_loss_entry(int device_id) const;
    const LossCacheEntry& loss_entry(int device_id) const;
    const ProfileCacheEntry& profile_entry(int device_id) const;

    /// Stat(i) from the cached summary: count * rms. Throws when the device
    /// has never reported a loss.
    double estimate_importance(int device_id) const;

    /// Cached distribution estimates (filled by the engine's probing phase).
    void store_distribution(int device_id, std::vector<double> distribution);
    const std::vector<double>& distribution(int device_id) const;
    bool has_distribution(int device_id) const;

    /// Scheduling over cached importances.
    std::vector<int> schedule(const std::vector<int>& candidates, double epsilon, int k,
                              std::uint64_t seed) const;

    const std::map<int, LossCacheEntry>& loss_cache() const noexcept { return loss_cache_; }
    const std::map<int, ProfileCacheEntry>& profile_cache() const noexcept { return profile_cache_; }

private:
    int history_depth_;
    std::map<int, LossCacheEntry> loss_cache_;
    std::map<int, ProfileCacheEntry> profile_cache_;
    std::map<int, std::vector<double>> distributions_;
};

} // namespace splitsim
