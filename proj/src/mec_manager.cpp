#include "splitsim/mec_manager.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "splitsim/rng.hpp"

namespace splitsim {

std::vector<double> estimate_distribution(const DeviceProfile& device, const AuxiliaryDataset& aux,
                                          std::size_t global_classes, double noise_level,
                                          std::uint64_t seed) {
    if (global_classes == 0) throw std::invalid_argument("global class set must be nonempty");
    std::uint64_t total =
        std::accumulate(device.class_histogram.begin(), device.class_histogram.end(), std::uint64_t{0});
    if (total == 0) throw std::invalid_argument("cannot probe a device with no data");
    if (noise_level < 0.0) throw std::invalid_argument("noise level must be >= 0");

    std::vector<double> truth(global_classes, 0.0);
    for (std::size_t i = 0; i < device.class_histogram.size() && i < global_classes; ++i)
        truth[i] = static_cast<double>(device.class_histogram[i]) / static_cast<double>(total);

    if (noise_level == 0.0) return truth;

    // Dirichlet concentration grows with the auxiliary set: a larger probe
    // basis pins the estimate closer to the truth. Classes absent from the
    // device stay at exactly zero.
    std::vector<double> alpha(global_classes, 0.0);
    for (std::size_t i = 0; i < global_classes; ++i)
        alpha[i] = truth[i] * static_cast<double>(aux.size) / noise_level;
    Rng rng(seed);
    return rng.dirichlet(alpha);
}

std::vector<int> importance_schedule(const std::vector<std::pair<int, double>>& candidate_stats,
                                     double epsilon, int k, std::uint64_t seed) {
    if (candidate_stats.empty()) throw std::invalid_argument("scheduling needs candidates");
    if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon must be in [0, 1]");
    if (k < 1) throw std::invalid_argument("k must be >= 1");

    const int n = static_cast<int>(candidate_stats.size());
    const int take = std::min(k, n);
    Rng rng(seed);
    std::vector<int> chosen;

    if (rng.uniform() < epsilon) {
        for (int idx : rng.sample_without_replacement(n, take))
            chosen.push_back(candidate_stats[static_cast<std::size_t>(idx)].first);
    } else {
        std::vector<std::pair<int, double>> sorted = candidate_stats;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        for (int i = 0; i < take; ++i) chosen.push_back(sorted[static_cast<std::size_t>(i)].first);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
}

std::uint64_t prune_learned_samples(DeviceProfile& device, double sigma_fraction) {
    if (sigma_fraction < 0.0 || sigma_fraction > 1.0)
        throw std::invalid_argument("sigma must be in [0, 1]");
    const std::uint64_t n = device.dataset_size();
    if (n == 0) return 0;

    auto target = static_cast<std::uint64_t>(
        std::ceil((1.0 - sigma_fraction) * static_cast<double>(n)));
    target = std::max<std::uint64_t>(target, 1);

    std::uint64_t active = device.active_sample_count();
    std::uint64_t pruned = 0;
    while (active > target) {
        // Drop the lowest-loss active sample; ties resolve to the lowest index.
        std::size_t victim = device.per_sample_loss.size();
        double lowest = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < device.per_sample_loss.size(); ++s) {
            if (device.active_mask[s] && device.per_sample_loss[s] < lowest) {
                lowest = device.per_sample_loss[s];
                victim = s;
            }
        }
        if (victim == device.per_sample_loss.size()) break;
        device.active_mask[victim] = false;
        --active;
        ++pruned;
    }
    return pruned;
}

void MecManager::update_loss_cache(int device_id, const std::vector<double>& losses) {
    LossSummary summary;
    summary.count = losses.size();
    if (!losses.empty()) {
        double sum = 0.0, sum_sq = 0.0;
        for (double l : losses) {
            sum += l;
            sum_sq += l * l;
        }
        summary.mean = sum / static_cast<double>(losses.size());
        summary.rms = std::sqrt(sum_sq / static_cast<double>(losses.size()));
    }
    auto& entry = loss_cache_[device_id];
    entry.latest = summary;
    entry.history.push_back(summary);
    while (entry.history.size() > static_cast<std::size_t>(history_depth_)) entry.history.pop_front();
}

void MecManager::update_profile_cache(int device_id, const ProfileCacheEntry& observation) {
    auto it = profile_cache_.find(device_id);
    if (it != profile_cache_.end() && observation.timestamp < it->second.timestamp)
        throw std::invalid_argument("profile cache timestamps must be nondecreasing");
    profile_cache_[device_id] = observation;
}

bool MecManager::has_loss_entry(int device_id) const {
    return loss_cache_.find(device_id) != loss_cache_.end();
}

const LossCacheEntry& MecManager::loss_entry(int device_id) const {
    auto it = loss_cache_.find(device_id);
    if (it == loss_cache_.end())
        throw std::invalid_argument("no loss cache entry for device " + std::to_string(device_id));
    return it->second;
}

const ProfileCacheEntry& MecManager::profile_entry(int device_id) const {
    auto it = profile_cache_.find(device_id);
    if (it == profile_cache_.end())
        throw std::invalid_argument("no profile cache entry for device " + std::to_string(device_id));
    return it->second;
}

double MecManager::estimate_importance(int device_id) const {
    const auto& entry = loss_entry(device_id);
    return static_cast<double>(entry.latest.count) * entry.latest.rms;
}

void MecManager::store_distribution(int device_id, std::vector<double> distribution) {
    distributions_[device_id] = std::move(distribution);
}

const std::vector<double>& MecManager::distribution(int device_id) const {
    auto it = distributions_.find(device_id);
    if (it == distributions_.end())
        throw std::invalid_argument("no distribution estimate for device " + std::to_string(device_id));
    return it->second;
}

bool MecManager::has_distribution(int device_id) const {
    return distributions_.find(device_id) != distributions_.end();
}

std::vector<int> MecManager::schedule(const std::vector<int>& candidates, double epsilon, int k,
                                      std::uint64_t seed) const {
    std::vector<std::pair<int, double>> stats;
    stats.reserve(candidates.size());
    for (int id : candidates) stats.emplace_back(id, estimate_importance(id));
    return importance_schedule(stats, epsilon, k, seed);
}

} // namespace splitsim
