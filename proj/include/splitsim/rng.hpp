#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace splitsim {

// All randomness flows through this header. std::mt19937_64 output is
// bit-exact by the standard, and the samplers below avoid the
// implementation-defined std::*_distribution classes, so a given seed
// produces the same stream on every platform. That is what makes the
// byte-identical-CSV determinism contract portable.

/// SplitMix64 step; used to derive independent stream seeds from a master
/// seed plus a tag, so adding a new consumer never shifts existing streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index = 0) {
    std::uint64_t s = master;
    std::uint64_t a = splitmix64(s);
    s ^= tag * 0xff51afd7ed558ccdULL;
    std::uint64_t b = splitmix64(s);
    s ^= index * 0xc4ceb9fe1a85ec53ULL;
    std::uint64_t c = splitmix64(s);
    return a ^ (b + 0x9e3779b97f4a7c15ULL) ^ c;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection sampling keeps the draw unbiased.
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    /// Standard normal via Marsaglia polar; one spare is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    double lognormal(double mu, double sigma) { return std::exp(normal(mu, sigma)); }

    /// Gamma(shape, 1) via Marsaglia-Tsang, with the boost trick for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            double u = uniform();
            while (u == 0.0) u = uniform();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        double d = shape - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Dirichlet sample with per-component concentrations; zero concentration
    /// pins that component to exactly zero.
    std::vector<double> dirichlet(const std::vector<double>& alpha) {
        std::vector<double> out(alpha.size(), 0.0);
        double sum = 0.0;
        for (std::size_t i = 0; i < alpha.size(); ++i) {
            if (alpha[i] > 0.0) {
                out[i] = gamma(alpha[i]);
                sum += out[i];
            }
        }
        if (sum > 0.0) {
            for (double& x : out) x /= sum;
        }
        return out;
    }

    /// n draws from the categorical distribution given by `probs` (need not
    /// be normalized), returned as per-category counts.
    std::vector<std::uint64_t> multinomial(std::uint64_t n, const std::vector<double>& probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        std::vector<std::uint64_t> counts(probs.size(), 0);
        for (std::uint64_t k = 0; k < n; ++k) {
            double r = uniform() * total;
            double acc = 0.0;
            std::size_t idx = probs.size() - 1;
            for (std::size_t i = 0; i < probs.size(); ++i) {
                acc += probs[i];
                if (r < acc) {
                    idx = i;
                    break;
                }
            }
            ++counts[idx];
        }
        return counts;
    }

    /// Uniform k-subset of [0, n) by partial Fisher-Yates; the result keeps
    /// draw order (the first element alone is uniform over [0, n)).
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        if (k > n) k = n;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(uniform_index(static_cast<std::uint64_t>(n - i)));
            std::swap(pool[i], pool[j]);
        }
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace splitsim
