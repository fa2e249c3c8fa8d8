#include "splitsim/central_manager.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

#include "splitsim/errors.hpp"
#include "splitsim/gp.hpp"
#include "splitsim/log.hpp"
#include "splitsim/rng.hpp"

namespace splitsim {

double device_round_latency(const ModelGraph& graph, const DeviceProfile& device,
                            const ExecutionContext& server_ctx, int cut, int batch, bool u_split,
                            int iterations, bool model_upload) {
    SplitLatencyBreakdown breakdown =
        split_round_latency(graph, cut, device, server_ctx, batch, u_split, true);
    double total = static_cast<double>(iterations) * breakdown.total_seconds;
    if (model_upload)
        total += static_cast<double>(graph.param_bytes_through(cut)) / device.uplink_bytes_per_second;
    return total;
}

std::uint64_t min_device_memory_requirement(const ModelGraph& graph, int cut, int batch) {
    std::uint64_t max_act = 0;
    for (int i = 1; i <= cut; ++i) max_act = std::max(max_act, graph.layer(i).activation_bytes);
    return graph.param_and_optimizer_bytes_through(cut) +
           static_cast<std::uint64_t>(batch) * max_act;
}

SelectionCandidate make_selection_candidate(const ModelGraph& graph, const DeviceProfile& device,
                                            const ExecutionContext& server_ctx, int batch,
                                            bool u_split, bool model_upload, int iterations,
                                            double dis, std::uint64_t budget_bytes) {
    SelectionCandidate c;
    c.device_id = device.id;
    c.dis = dis;
    c.dataset_size = device.dataset_size();
    c.budget_bytes = budget_bytes;
    const int v = graph.layer_count();
    c.latency_by_cut.resize(static_cast<std::size_t>(v));
    c.floor_by_cut.resize(static_cast<std::size_t>(v));
    for (int j = 1; j <= v; ++j) {
        c.latency_by_cut[static_cast<std::size_t>(j - 1)] = device_round_latency(
            graph, device, server_ctx, j, batch, u_split, iterations, model_upload);
        c.floor_by_cut[static_cast<std::size_t>(j - 1)] =
            min_device_memory_requirement(graph, j, batch);
    }
    return c;
}

SelectionContext::SelectionContext(std::vector<SelectionCandidate> candidates, int layer_count,
                                   SelectionParams params)
    : candidates_(std::move(candidates)), layer_count_(layer_count), params_(params) {
    if (candidates_.empty()) throw std::invalid_argument("selection needs candidates");
    if (layer_count_ < 1) throw std::invalid_argument("layer count must be >= 1");
    if (params_.k < 1 || params_.k > candidate_count())
        throw std::invalid_argument("k must be in 1..candidate count");

    int max_id = 0;
    for (const auto& c : candidates_) max_id = std::max(max_id, c.device_id);
    id_to_index_.assign(static_cast<std::size_t>(max_id) + 1, -1);
    for (std::size_t i = 0; i < candidates_.size(); ++i) {
        if (id_to_index_[static_cast<std::size_t>(candidates_[i].device_id)] != -1)
            throw std::invalid_argument("duplicate device id among candidates");
        id_to_index_[static_cast<std::size_t>(candidates_[i].device_id)] = static_cast<int>(i);
    }

    if (params_.normalize) {
        // Deterministic unit scales shared by every optimizer that touches
        // this context: mean Dis across candidates, and the straggler
        // latency at the middle cut.
        double dis_sum = 0.0;
        double lat_max = 0.0;
        const std::size_t mid = static_cast<std::size_t>((layer_count_ + 1) / 2 - 1);
        for (const auto& c : candidates_) {
            dis_sum += c.dis;
            lat_max = std::max(lat_max, c.latency_by_cut[mid]);
        }
        dis_scale_ = std::max(dis_sum / static_cast<double>(candidates_.size()), 1e-12);
        latency_scale_ = std::max(lat_max, 1e-12);
    }
}

const SelectionCandidate& SelectionContext::candidate_by_id(int device_id) const {
    if (device_id < 0 || device_id >= static_cast<int>(id_to_index_.size()) ||
        id_to_index_[static_cast<std::size_t>(device_id)] < 0)
        throw std::invalid_argument("unknown candidate device id " + std::to_string(device_id));
    return candidates_[static_cast<std::size_t>(id_to_index_[static_cast<std::size_t>(device_id)])];
}

ObjectiveInfo SelectionContext::evaluate(const SplitAssignment& assignment) const {
    if (assignment.selected.empty())
        throw std::invalid_argument("assignment must select at least one device");

    ObjectiveInfo info;
    std::uint64_t data_total = 0;
    for (const auto& entry : assignment.selected) {
        if (entry.cut < 1 || entry.cut > layer_count_)
            throw std::out_of_range("cut layer out of range in assignment");
        const auto& c = candidate_by_id(entry.device_id);
        const auto cut_idx = static_cast<std::size_t>(entry.cut - 1);
        info.sum_dis += c.dis;
        info.t_system = std::max(info.t_system, c.latency_by_cut[cut_idx]);
        data_total += c.dataset_size;
        if (params_.memory_constraint && c.floor_by_cut[cut_idx] > c.budget_bytes) {
            info.memory_violation +=
                static_cast<double>(c.floor_by_cut[cut_idx] - c.budget_bytes) /
                std::max<double>(static_cast<double>(c.budget_bytes), 1.0);
        }
    }
    if (data_total < params_.d_threshold) {
        info.data_violation = static_cast<double>(params_.d_threshold - data_total) /
                              static_cast<double>(params_.d_threshold);
    }

    // Eq-9 form, taken literally: the (shared) system latency appears inside
    // the per-device sum. The per_device_latency switch substitutes T(i, j_i)
    // and exists for ablations only.
    double value = 0.0;
    for (const auto& entry : assignment.selected) {
        const auto& c = candidate_by_id(entry.device_id);
        double latency_term =
            params_.per_device_latency
                ? c.latency_by_cut[static_cast<std::size_t>(entry.cut - 1)] / latency_scale_
                : info.t_system / latency_scale_;
        value += c.dis / dis_scale_ + params_.lambda * latency_term;
    }

    info.feasible = info.memory_violation == 0.0 && info.data_violation == 0.0;
    if (!info.feasible)
        value += params_.penalty_weight * (info.memory_violation + info.data_violation);
    info.value = value;
    return info;
}

namespace {

// Encoding helpers: one dimension per candidate, 0 = deselected,
// (k-1, k] = cut k.
int decode_cut(double x, int v) {
    int cut = static_cast<int>(std::ceil(x));
    return std::clamp(cut, 1, v);
}

SplitAssignment decode(const Eigen::VectorXd& x, const SelectionContext& ctx) {
    SplitAssignment a;
    for (int i = 0; i < ctx.candidate_count(); ++i) {
        if (x[i] > 0.0) {
            a.selected.push_back(
                {ctx.candidates()[static_cast<std::size_t>(i)].device_id, decode_cut(x[i], ctx.layer_count())});
        }
    }
    return a;
}

Eigen::VectorXd random_point(const SelectionContext& ctx, Rng& rng) {
    const int n = ctx.candidate_count();
    const int v = ctx.layer_count();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int idx : rng.sample_without_replacement(n, ctx.params().k))
        x[idx] = static_cast<double>(v) * (1.0 - rng.uniform()); // (0, V]
    return x;
}

Eigen::VectorXd mutate_point(const Eigen::VectorXd& base, const SelectionContext& ctx, Rng& rng) {
    const int n = ctx.candidate_count();
    const int v = ctx.layer_count();
    Eigen::VectorXd x = base;
    std::vector<int> on, off;
    for (int i = 0; i < n; ++i) (x[i] > 0.0 ? on : off).push_back(i);
    if (on.empty()) return random_point(ctx, rng);

    if (!off.empty() && rng.uniform() < 0.35) {
        // Swap one participant.
        int drop = on[static_cast<std::size_t>(rng.uniform_index(on.size()))];
        int add = off[static_cast<std::size_t>(rng.uniform_index(off.size()))];
        x[add] = x[drop];
        x[drop] = 0.0;
    } else {
        // Jitter one cut.
        int dim = on[static_cast<std::size_t>(rng.uniform_index(on.size()))];
        double step = rng.normal(0.0, static_cast<double>(v) / 6.0);
        x[dim] = std::clamp(x[dim] + step, 1e-9, static_cast<double>(v));
    }
    return x;
}

// One-step neighborhood of an assignment: every single-device swap at the
// same cut and every exact re-pin of one participant's cut. Capped by random
// subsampling when the fleet is large.
std::vector<Eigen::VectorXd> neighborhood(const Eigen::VectorXd& base, const SelectionContext& ctx,
                                          Rng& rng, std::size_t cap) {
    const int n = ctx.candidate_count();
    const int v = ctx.layer_count();
    std::vector<int> on, off;
    for (int i = 0; i < n; ++i) (base[i] > 0.0 ? on : off).push_back(i);

    std::vector<Eigen::VectorXd> out;
    for (int drop : on) {
        for (int add : off) {
            Eigen::VectorXd x = base;
            x[add] = x[drop];
            x[drop] = 0.0;
            out.push_back(std::move(x));
        }
    }
    for (int dim : on) {
        for (int cut = 1; cut <= v; ++cut) {
            Eigen::VectorXd x = base;
            x[dim] = static_cast<double>(cut) - 0.5;
            out.push_back(std::move(x));
        }
    }
    if (out.size() > cap) {
        for (std::size_t i = 0; i < cap; ++i) {
            std::size_t j = i + rng.uniform_index(out.size() - i);
            std::swap(out[i], out[j]);
        }
        out.resize(cap);
    }
    return out;
}

} // namespace

SplitAssignment bo_select(const SelectionContext& context, int eval_budget, std::uint64_t seed,
                          const BoOptions& options) {
    const int n = context.candidate_count();
    const int v = context.layer_count();
    if (eval_budget < options.initial_design)
        throw std::invalid_argument("eval budget must cover the initial design");

    Rng rng(seed);
    std::vector<double> dim_ranges(static_cast<std::size_t>(n), static_cast<double>(v));
    std::vector<double> gamma_grid;
    for (int i = 0; i <= 10; ++i) gamma_grid.push_back(std::pow(10.0, -1.0 + 0.2 * i));

    std::vector<Eigen::VectorXd> xs;
    std::vector<double> ys;
    SplitAssignment best_feasible;
    double best_feasible_value = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_feasible_x = Eigen::VectorXd::Zero(n);
    double best_observed = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_observed_x = Eigen::VectorXd::Zero(n);
    long memory_rejections = 0;
    long data_rejections = 0;

    auto observe = [&](const Eigen::VectorXd& x) {
        SplitAssignment a = decode(x, context);
        ObjectiveInfo info = context.evaluate(a);
        a.objective = info.value;
        a.feasible = info.feasible;
        xs.push_back(x);
        ys.push_back(info.value);
        if (info.memory_violation > 0.0) ++memory_rejections;
        if (info.data_violation > 0.0) ++data_rejections;
        if (info.value < best_observed) {
            best_observed = info.value;
            best_observed_x = x;
        }
        if (info.feasible && info.value < best_feasible_value) {
            best_feasible_value = info.value;
            best_feasible = a;
            best_feasible_x = x;
        }
    };

    // Constraint penalties put heavy outliers into the target stream; a GP
    // standardized over them would flatten the feasible region's structure.
    // The surrogate therefore models log(y), winsorized at an upper
    // quantile, which keeps resolution where the optimum lives.
    auto warp = [](double y) { return std::log(std::max(y, 1e-9)); };
    std::vector<double> fit_scales;
    auto build_surrogate = [&](GaussianProcess& gp, bool refit_scales) {
        std::vector<double> sorted = ys;
        std::sort(sorted.begin(), sorted.end());
        double cap = sorted[static_cast<std::size_t>(0.9 * (sorted.size() - 1))];
        for (std::size_t i = 0; i < xs.size(); ++i)
            gp.add_observation(xs[i], warp(std::min(ys[i], cap)));
        if (refit_scales || fit_scales.empty()) {
            gp.fit_length_scales(gamma_grid, dim_ranges);
            fit_scales = gp.length_scales();
        } else {
            gp.set_length_scales(fit_scales);
        }
    };

    // Latin-hypercube-style initial design: every point selects exactly K
    // devices; the cut coordinate of each device walks a per-device shuffled
    // stratum sequence so the design spreads over the cut range.
    const int design = std::min(options.initial_design, eval_budget);
    std::vector<std::vector<int>> strata(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) {
        std::vector<int> order(static_cast<std::size_t>(design));
        std::iota(order.begin(), order.end(), 0);
        for (int i = design - 1; i > 0; --i) {
            int j = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        strata[static_cast<std::size_t>(d)] = std::move(order);
    }
    for (int p = 0; p < design; ++p) {
        Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
        for (int idx : rng.sample_without_replacement(n, context.params().k)) {
            double stratum = static_cast<double>(strata[static_cast<std::size_t>(idx)][static_cast<std::size_t>(p)]);
            double u = (stratum + rng.uniform()) / static_cast<double>(design);
            x[idx] = std::max(u * static_cast<double>(v), 1e-9);
        }
        observe(x);
    }

    for (int eval = design; eval < eval_budget; ++eval) {
        GaussianProcess gp(n, options.epsilon_noise);
        bool refit = options.hyper_refit_every > 0 &&
                     (eval - design) % options.hyper_refit_every == 0;
        build_surrogate(gp, refit);

        const Eigen::VectorXd& anchor =
            std::isfinite(best_feasible_value) ? best_feasible_x : best_observed_x;

        std::vector<Eigen::VectorXd> candidates = neighborhood(
            anchor, context, rng, static_cast<std::size_t>(options.candidates_per_iteration) / 2);
        while (static_cast<int>(candidates.size()) < options.candidates_per_iteration) {
            candidates.push_back(candidates.size() % 2 == 0 ? random_point(context, rng)
                                                            : mutate_point(anchor, context, rng));
        }

        Eigen::VectorXd best_candidate = Eigen::VectorXd::Zero(n);
        double best_ei = -1.0;
        const double incumbent = warp(best_observed);
        for (const auto& x : candidates) {
            double ei = GaussianProcess::expected_improvement(gp.predict(x), incumbent);
            if (ei > best_ei) {
                best_ei = ei;
                best_candidate = x;
            }
        }
        observe(best_candidate);
    }

    if (!std::isfinite(best_feasible_value)) {
        std::string report = "no feasible assignment within " + std::to_string(eval_budget) +
                             " evaluations (memory constraint binding in " +
                             std::to_string(memory_rejections) + ", data threshold binding in " +
                             std::to_string(data_rejections) + ")";
        throw InfeasibleSelectionError(report);
    }
    log::debug("bo_select: best objective " + std::to_string(best_feasible_value));
    return best_feasible;
}

SplitAssignment brute_force_select(const SelectionContext& context) {
    const int n = context.candidate_count();
    const int v = context.layer_count();
    const int k = context.params().k;
    if (n > 8 || v > 10)
        throw std::invalid_argument("brute force guard: needs N <= 8 and V <= 10");

    std::vector<int> subset(static_cast<std::size_t>(k));
    SplitAssignment best;
    double best_value = std::numeric_limits<double>::infinity();

    // Enumerate K-subsets, then all cut vectors per subset.
    std::vector<int> cuts(static_cast<std::size_t>(k), 1);
    auto eval_subset = [&]() {
        std::fill(cuts.begin(), cuts.end(), 1);
        for (;;) {
            SplitAssignment a;
            for (int i = 0; i < k; ++i) {
                a.selected.push_back(
                    {context.candidates()[static_cast<std::size_t>(subset[static_cast<std::size_t>(i)])].device_id,
                     cuts[static_cast<std::size_t>(i)]});
            }
            ObjectiveInfo info = context.evaluate(a);
            if (info.value < best_value) {
                best_value = info.value;
                a.objective = info.value;
                a.feasible = info.feasible;
                best = a;
            }
            int pos = 0;
            while (pos < k) {
                if (++cuts[static_cast<std::size_t>(pos)] <= v) break;
                cuts[static_cast<std::size_t>(pos)] = 1;
                ++pos;
            }
            if (pos == k) break;
        }
    };

    // Lexicographic subset traversal keeps the result deterministic.
    std::function<void(int, int)> choose = [&](int start, int depth) {
        if (depth == k) {
            eval_subset();
            return;
        }
        for (int i = start; i <= n - (k - depth); ++i) {
            subset[static_cast<std::size_t>(depth)] = i;
            choose(i + 1, depth + 1);
        }
    };
    choose(0, 0);

    if (!best.feasible)
        throw InfeasibleSelectionError("exhaustive search found no feasible assignment");
    return best;
}

} // namespace splitsim
