#include "splitsim/gp.hpp"

#include <cmath>
#include <stdexcept>

namespace splitsim {

namespace {
constexpr double kJitter = 1e-10;
constexpr double kVarianceFloor = 1e-12;

double standard_normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

double standard_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
} // namespace

GaussianProcess::GaussianProcess(int dims, double noise_variance)
    : dims_(dims), noise_variance_(noise_variance), length_scales_(static_cast<std::size_t>(dims), 1.0) {
    if (dims < 1) throw std::invalid_argument("GP needs at least one dimension");
    if (noise_variance < 0.0) throw std::invalid_argument("noise variance must be >= 0");
}

void GaussianProcess::set_length_scales(std::vector<double> scales) {
    if (static_cast<int>(scales.size()) != dims_)
        throw std::invalid_argument("length scale count must match dimensionality");
    for (double s : scales)
        if (s <= 0.0) throw std::invalid_argument("length scales must be strictly positive");
    length_scales_ = std::move(scales);
    dirty_ = true;
}

void GaussianProcess::add_observation(const Eigen::VectorXd& x, double y) {
    if (x.size() != dims_) throw std::invalid_argument("observation dimensionality mismatch");
    points_.push_back(x);
    targets_.push_back(y);
    dirty_ = true;
}

double GaussianProcess::kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    double d2 = 0.0;
    for (int i = 0; i < dims_; ++i) {
        double d = (a[i] - b[i]) / length_scales_[static_cast<std::size_t>(i)];
        d2 += d * d;
    }
    return std::exp(-0.5 * d2);
}

void GaussianProcess::refactor() const {
    const int n = observation_count();
    if (n == 0) return;

    double sum = 0.0;
    for (double y : targets_) sum += y;
    y_mean_ = sum / n;
    double var = 0.0;
    for (double y : targets_) var += (y - y_mean_) * (y - y_mean_);
    y_scale_ = n > 1 ? std::sqrt(var / (n - 1)) : 1.0;
    if (y_scale_ <= 0.0) y_scale_ = 1.0;

    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double v = kernel(points_[static_cast<std::size_t>(i)], points_[static_cast<std::size_t>(j)]);
            k(i, j) = v;
            k(j, i) = v;
        }
        k(i, i) += noise_variance_ / (y_scale_ * y_scale_) + kJitter;
    }

    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        // Retry with a stronger diagonal; kernel matrices of near-duplicate
        // points can lose positive definiteness in floating point.
        k.diagonal().array() += 1e-6;
        llt.compute(k);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("GP covariance factorization failed");
    }
    chol_lower_ = llt.matrixL();

    Eigen::VectorXd y_std(n);
    for (int i = 0; i < n; ++i) y_std[i] = (targets_[static_cast<std::size_t>(i)] - y_mean_) / y_scale_;
    alpha_ = chol_lower_.transpose().triangularView<Eigen::Upper>().solve(
        chol_lower_.triangularView<Eigen::Lower>().solve(y_std));
    dirty_ = false;
}

GaussianProcess::Prediction GaussianProcess::predict(const Eigen::VectorXd& x) const {
    if (x.size() != dims_) throw std::invalid_argument("query dimensionality mismatch");
    const int n = observation_count();
    if (n == 0) return {0.0, 1.0};
    if (dirty_) refactor();

    Eigen::VectorXd k_star(n);
    for (int i = 0; i < n; ++i) k_star[i] = kernel(points_[static_cast<std::size_t>(i)], x);

    Eigen::VectorXd v = chol_lower_.triangularView<Eigen::Lower>().solve(k_star);
    double mean_std = k_star.dot(alpha_);
    double var_std = 1.0 - v.squaredNorm();
    if (var_std < 0.0) var_std = 0.0;

    Prediction p;
    p.mean = y_mean_ + y_scale_ * mean_std;
    p.variance = var_std * y_scale_ * y_scale_;
    return p;
}

double GaussianProcess::log_marginal_likelihood() const {
    const int n = observation_count();
    if (n == 0) return 0.0;
    if (dirty_) refactor();

    Eigen::VectorXd y_std(n);
    for (int i = 0; i < n; ++i) y_std[i] = (targets_[static_cast<std::size_t>(i)] - y_mean_) / y_scale_;
    double fit = -0.5 * y_std.dot(alpha_);
    double logdet = 0.0;
    for (int i = 0; i < n; ++i) logdet += std::log(chol_lower_(i, i));
    return fit - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

void GaussianProcess::fit_length_scales(const std::vector<double>& gamma_grid,
                                        const std::vector<double>& dim_ranges) {
    if (static_cast<int>(dim_ranges.size()) != dims_)
        throw std::invalid_argument("dim_ranges must match dimensionality");
    if (gamma_grid.empty() || observation_count() < 2) return;

    double best_gamma = gamma_grid.front();
    double best_lml = -std::numeric_limits<double>::infinity();
    for (double gamma : gamma_grid) {
        std::vector<double> scales(static_cast<std::size_t>(dims_));
        for (int d = 0; d < dims_; ++d)
            scales[static_cast<std::size_t>(d)] = gamma * dim_ranges[static_cast<std::size_t>(d)];
        set_length_scales(scales);
        double lml = log_marginal_likelihood();
        if (lml > best_lml) {
            best_lml = lml;
            best_gamma = gamma;
        }
    }
    std::vector<double> scales(static_cast<std::size_t>(dims_));
    for (int d = 0; d < dims_; ++d)
        scales[static_cast<std::size_t>(d)] = best_gamma * dim_ranges[static_cast<std::size_t>(d)];
    set_length_scales(scales);
}

double GaussianProcess::expected_improvement(const Prediction& p, double best_y) {
    const double improvement = best_y - p.mean;
    if (p.variance <= kVarianceFloor) return std::max(improvement, 0.0);
    const double sigma = std::sqrt(p.variance);
    const double z = improvement / sigma;
    return improvement * standard_normal_cdf(z) + sigma * standard_normal_pdf(z);
}

} // namespace splitsim
