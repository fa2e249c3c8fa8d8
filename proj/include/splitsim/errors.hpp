#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace splitsim {

/// Scenario/profile/fleet configuration problem. Carries the offending key
/// so the CLI can name it in the error message (exit code 2).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error("config error at '" + key + "': " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A recomputation plan cannot fit the memory cap. Names the layer whose
/// single-layer footprint makes the cap unreachable.
class InfeasiblePlanError : public std::runtime_error {
public:
    InfeasiblePlanError(int layer_id, std::uint64_t required_bytes, std::uint64_t cap_bytes)
        : std::runtime_error("infeasible memory cap: layer " + std::to_string(layer_id) +
                             " needs " + std::to_string(required_bytes) + " B but cap is " +
                             std::to_string(cap_bytes) + " B"),
          layer_id_(layer_id), required_bytes_(required_bytes), cap_bytes_(cap_bytes) {}

    int layer_id() const noexcept { return layer_id_; }
    std::uint64_t required_bytes() const noexcept { return required_bytes_; }
    std::uint64_t cap_bytes() const noexcept { return cap_bytes_; }

private:
    int layer_id_;
    std::uint64_t required_bytes_;
    std::uint64_t cap_bytes_;
};

/// No feasible assignment found within the optimizer's evaluation budget.
/// The message lists the constraints that were binding most often.
class InfeasibleSelectionError : public std::runtime_error {
public:
    explicit InfeasibleSelectionError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace splitsim
