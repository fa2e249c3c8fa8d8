#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace splitsim {

/// Gaussian-process surrogate with a squared-exponential kernel and
/// per-dimension length scales. Targets are standardized internally; the
/// signal variance is pinned to 1 in standardized space and only the shared
/// length-scale multiplier is fit (coarse grid over the marginal likelihood).
class GaussianProcess {
public:
    GaussianProcess(int dims, double noise_variance);

    void set_length_scales(std::vector<double> scales);
    const std::vector<double>& length_scales() const noexcept { return length_scales_; }

    void add_observation(const Eigen::VectorXd& x, double y);
    int observation_count() const noexcept { return static_cast<int>(targets_.size()); }

    /// Picks length scales gamma * dim_range[d] from the gamma grid by
    /// maximizing the log marginal likelihood.
    void fit_length_scales(const std::vector<double>& gamma_grid,
                           const std::vector<double>& dim_ranges);

    struct Prediction {
        double mean = 0.0;
        double variance = 0.0; // latent (noise-free), clamped at 0
    };
    Prediction predict(const Eigen::VectorXd& x) const;

    double log_marginal_likelihood() const;

    /// Expected improvement for minimization given the incumbent best target.
    /// Degenerate predictive variance falls back to max(best - mean, 0).
    static double expected_improvement(const Prediction& p, double best_y);

private:
    void refactor() const;
    double kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

    int dims_;
    double noise_variance_;
    std::vector<double> length_scales_;
    std::vector<Eigen::VectorXd> points_;
    std::vector<double> targets_;

    // Cached factorization, rebuilt lazily after observations change.
    mutable bool dirty_ = true;
    mutable double y_mean_ = 0.0;
    mutable double y_scale_ = 1.0;
    mutable Eigen::MatrixXd chol_lower_;
    mutable Eigen::VectorXd alpha_;
};

} // namespace splitsim
