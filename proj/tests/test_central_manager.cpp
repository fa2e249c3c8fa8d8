#include "doctest.h"

#include <stdexcept>

#include <cmath>

#include "splitsim/central_manager.hpp"
#include "splitsim/errors.hpp"
#include "splitsim/gp.hpp"
#include "splitsim/rng.hpp"
#include "support/toy_scenario.hpp"

using namespace splitsim;

namespace {

SelectionCandidate candidate(int id, double dis, std::vector<double> latencies,
                             std::uint64_t dataset, std::uint64_t budget) {
    SelectionCandidate c;
    c.device_id = id;
    c.dis = dis;
    c.dataset_size = dataset;
    c.budget_bytes = budget;
    c.latency_by_cut = std::move(latencies);
    c.floor_by_cut.assign(c.latency_by_cut.size(), 0);
    return c;
}

} // namespace

TEST_CASE("GP interpolates observations when noise is zero") {
    GaussianProcess gp(2, 0.0);
    gp.set_length_scales({1.0, 1.0});
    Rng rng(61);
    std::vector<Eigen::VectorXd> xs;
    std::vector<double> ys;
    for (int i = 0; i < 12; ++i) {
        Eigen::VectorXd x(2);
        x << rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0);
        double y = std::sin(x[0]) + 0.3 * x[1];
        gp.add_observation(x, y);
        xs.push_back(x);
        ys.push_back(y);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        auto p = gp.predict(xs[i]);
        CHECK(p.mean == doctest::Approx(ys[i]).epsilon(1e-6));
        CHECK(p.variance >= 0.0);
        CHECK(p.variance <= 1e-6);
    }
}

TEST_CASE("expected improvement is nonnegative and vanishes at a certain incumbent") {
    CHECK(GaussianProcess::expected_improvement({2.0, 0.0}, 2.0) == 0.0);
    CHECK(GaussianProcess::expected_improvement({3.0, 0.0}, 2.0) == 0.0);
    CHECK(GaussianProcess::expected_improvement({1.0, 0.0}, 2.0) == 1.0);

    Rng rng(67);
    for (int i = 0; i < 1000; ++i) {
        GaussianProcess::Prediction p{rng.uniform(-5.0, 5.0), rng.uniform(0.0, 4.0)};
        CHECK(GaussianProcess::expected_improvement(p, rng.uniform(-5.0, 5.0)) >= 0.0);
    }
}

TEST_CASE("hyperparameter grid fit improves the marginal likelihood") {
    GaussianProcess gp(1, 1e-6);
    Rng rng(71);
    for (int i = 0; i < 20; ++i) {
        Eigen::VectorXd x(1);
        x << rng.uniform(0.0, 10.0);
        gp.add_observation(x, std::cos(x[0]));
    }
    gp.set_length_scales({100.0}); // deliberately bad
    double before = gp.log_marginal_likelihood();
    gp.fit_length_scales({0.1, 0.2, 0.5, 1.0, 2.0}, {10.0});
    CHECK(gp.log_marginal_likelihood() >= before);
}

TEST_CASE("objective evaluates the Eq-9 form") {
    // One selected device with Dis 0 and a 2 s round: objective 2.
    std::vector<SelectionCandidate> cands = {candidate(0, 0.0, {2.0}, 100, 1 << 20)};
    SelectionParams params;
    params.k = 1;
    params.lambda = 1.0;
    params.d_threshold = 0;
    SelectionContext ctx(cands, 1, params);
    SplitAssignment a;
    a.selected = {{0, 1}};
    CHECK(ctx.objective(a) == doctest::Approx(2.0));
    CHECK(ctx.evaluate(a).feasible);
}

TEST_CASE("with lambda zero the objective reduces to summed Dis") {
    std::vector<SelectionCandidate> cands;
    std::vector<double> dis = {0.9, 0.1, 0.5, 0.3, 0.7};
    for (int i = 0; i < 5; ++i)
        cands.push_back(candidate(i, dis[static_cast<std::size_t>(i)], {1.0, 5.0}, 100, 1 << 20));
    SelectionParams params;
    params.k = 3;
    params.lambda = 0.0;
    SelectionContext ctx(cands, 2, params);

    SplitAssignment best = brute_force_select(ctx);
    std::vector<int> ids;
    for (const auto& e : best.selected) ids.push_back(e.device_id);
    std::sort(ids.begin(), ids.end());
    CHECK(ids == std::vector<int>{1, 2, 3}); // the three smallest Dis values
    CHECK(best.objective == doctest::Approx(0.1 + 0.3 + 0.5));
}

TEST_CASE("scaling lambda preserves ordering at equal summed Dis") {
    std::vector<SelectionCandidate> cands = {
        candidate(0, 0.4, {1.0, 3.0}, 100, 1 << 20),
        candidate(1, 0.4, {2.0, 6.0}, 100, 1 << 20),
    };
    for (double lambda : {0.5, 1.0, 2.0, 4.0}) {
        SelectionParams params;
        params.k = 1;
        params.lambda = lambda;
        SelectionContext ctx(cands, 2, params);
        SplitAssignment fast{{{0, 1}}, 0.0, false};
        SplitAssignment slow{{{1, 1}}, 0.0, false};
        CHECK(ctx.objective(fast) < ctx.objective(slow));
    }
}

TEST_CASE("constraint violations are penalized, not fatal") {
    std::vector<SelectionCandidate> cands = {candidate(0, 0.1, {1.0}, 10, 1 << 20)};
    cands[0].floor_by_cut = {1 << 21}; // exceeds the budget
    SelectionParams params;
    params.k = 1;
    params.d_threshold = 100; // also short on data
    SelectionContext ctx(cands, 1, params);
    SplitAssignment a{{{0, 1}}, 0.0, false};
    ObjectiveInfo info = ctx.evaluate(a);
    CHECK_FALSE(info.feasible);
    CHECK(info.memory_violation > 0.0);
    CHECK(info.data_violation > 0.0);
    CHECK(info.value > 100.0); // penalty dominates
}

TEST_CASE("bo_select returns the single feasible point") {
    // V = 3, but only the first cut fits the budget.
    std::vector<SelectionCandidate> cands = {candidate(0, 0.2, {1.0, 0.5, 0.4}, 100, 1000)};
    cands[0].floor_by_cut = {900, 1500, 2000};
    SelectionParams params;
    params.k = 1;
    SelectionContext ctx(cands, 3, params);
    SplitAssignment a = bo_select(ctx, 12, 3, BoOptions{4, 64});
    REQUIRE(a.selected.size() == 1);
    CHECK(a.selected[0].cut == 1);
    CHECK(a.feasible);
}

TEST_CASE("bo_select reports infeasibility with binding constraints") {
    std::vector<SelectionCandidate> cands = {candidate(0, 0.2, {1.0}, 10, 100)};
    cands[0].floor_by_cut = {500};
    SelectionParams params;
    params.k = 1;
    params.d_threshold = 1000;
    SelectionContext ctx(cands, 1, params);
    CHECK_THROWS_AS(bo_select(ctx, 10, 3, BoOptions{4, 16}), InfeasibleSelectionError);
}

TEST_CASE("every bo_select output satisfies the hard constraints") {
    SelectionContext ctx = toy::context();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        SplitAssignment a = bo_select(ctx, 40, seed, BoOptions{8, 128});
        CHECK(a.feasible);
        CHECK(a.selected.size() == 3);
        std::uint64_t data = 0;
        for (const auto& e : a.selected) {
            CHECK(e.cut >= 1);
            CHECK(e.cut <= 8);
            const auto& c = ctx.candidate_by_id(e.device_id);
            CHECK(c.floor_by_cut[static_cast<std::size_t>(e.cut - 1)] <= c.budget_bytes);
            data += c.dataset_size;
        }
        CHECK(data >= 120);
    }
}

TEST_CASE("a larger evaluation budget never returns a worse objective") {
    SelectionContext ctx = toy::context();
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        double small = bo_select(ctx, 20, seed, BoOptions{8, 64}).objective;
        double large = bo_select(ctx, 60, seed, BoOptions{8, 64}).objective;
        CHECK(large <= small + 1e-12);
    }
}

TEST_CASE("the exhaustive oracle lower-bounds bo_select") {
    SelectionContext ctx = toy::context();
    SplitAssignment oracle = brute_force_select(ctx);
    CHECK(oracle.feasible);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SplitAssignment a = bo_select(ctx, 50, seed, BoOptions{10, 128});
        CHECK(oracle.objective <= a.objective + 1e-12);
    }
}

TEST_CASE("brute force refuses oversized spaces") {
    std::vector<SelectionCandidate> cands;
    for (int i = 0; i < 9; ++i) cands.push_back(candidate(i, 0.1, std::vector<double>(3, 1.0), 10, 1 << 20));
    SelectionParams params;
    params.k = 2;
    SelectionContext ctx(cands, 3, params);
    CHECK_THROWS_AS(brute_force_select(ctx), std::invalid_argument);
}

TEST_CASE("identical devices make any K-subset optimal") {
    std::vector<SelectionCandidate> cands;
    for (int i = 0; i < 5; ++i) cands.push_back(candidate(i, 0.25, {4.0, 2.0, 1.0}, 100, 1 << 20));
    SelectionParams params;
    params.k = 2;
    SelectionContext ctx(cands, 3, params);
    SplitAssignment best = brute_force_select(ctx);
    // objective = K * (Dis + lambda * T) with the per-device optimal cut.
    CHECK(best.objective == doctest::Approx(2.0 * (0.25 + 1.0)));
    for (const auto& e : best.selected) CHECK(e.cut == 3);
}
