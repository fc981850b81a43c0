#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "sknap/bounds.hpp"
#include "sknap/dp.hpp"
#include "sknap/model.hpp"
#include "sknap/poisson.hpp"
#include "sknap/rng.hpp"
#include "sknap/switchover.hpp"

using namespace sknap;

namespace {

model::ProblemInstance study_mix(int inventory, double horizon) {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.8, 0.65, 0.45};
    inst.rates = {0.2, 0.3, 0.1, 0.4};
    inst.inventory = inventory;
    inst.horizon = horizon;
    inst.batches.push_back(model::BatchDistribution::unit(inventory));
    return inst;
}

} // namespace

TEST_CASE("abundant regime accepts everyone") {
    auto inst = study_mix(25, 20.0);
    auto rep = bounds::revenue_bounds(inst);
    // total volume Lambda_4 T = 20 <= W = 25
    CHECK(rep.regime_class == 4);
    const double volume = 20.0;
    CHECK(rep.upper == doctest::Approx(0.685 * volume).epsilon(1e-12));
    CHECK(rep.lower ==
          doctest::Approx(0.685 * poisson::expected_min(volume, 25)).epsilon(1e-12));
    CHECK(rep.lower <= rep.upper);
}

TEST_CASE("balanced regime splits a class at the marginal time") {
    auto inst = study_mix(15, 20.0);
    // Lambda_2 T = 10 <= 15 < Lambda_3 T = 12?  12 <= 15 < 20 -> k = 3.
    auto rep = bounds::revenue_bounds(inst);
    CHECK(rep.regime_class == 3);
    // marginal time: Lambda_3 T + lambda_4 t = W  ->  12 + 0.4 t = 15
    CHECK(rep.marginal_time == doctest::Approx((15.0 - 12.0) / 0.4).epsilon(1e-12));
    const double head = 0.2 * 1.0 + 0.3 * 0.8 + 0.1 * 0.65;
    CHECK(rep.upper ==
          doctest::Approx(head * 20.0 + 0.4 * 0.45 * rep.marginal_time).epsilon(1e-12));
    CHECK(rep.lower > 0.0);
    CHECK(rep.lower <= rep.upper);
}

TEST_CASE("scarce regime sells out at the top price") {
    auto inst = study_mix(3, 20.0);
    inst.rates = {0.5, 0.3, 0.1, 0.1};
    // Lambda_1 T = 10 > 3: scarce
    auto rep = bounds::revenue_bounds(inst);
    CHECK(rep.regime_class == 0);
    CHECK(rep.upper == doctest::Approx(1.0 * 3.0).epsilon(1e-12));
    CHECK(rep.lower == doctest::Approx(poisson::expected_min(10.0, 3)).epsilon(1e-12));
    CHECK(rep.lower < rep.upper);
    CHECK(rep.lower > 0.9 * rep.upper); // nearly all mass sells at volume 10 vs 3
}

TEST_CASE("bounds reject non-unit order sizes") {
    auto inst = study_mix(10, 20.0);
    inst.batches[0] = model::BatchDistribution::negative_binomial(4, 0.33, 10);
    CHECK_THROWS_AS(bounds::revenue_bounds(inst), std::invalid_argument);
}

TEST_CASE("bounds sandwich the exact optimum") {
    rng::CounterRng gen(41, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        model::ProblemInstance inst;
        const std::size_t m = 1 + static_cast<std::size_t>(gen.next_u64() % 4);
        double price = 1.0;
        for (std::size_t i = 0; i < m; ++i) {
            inst.prices.push_back(price);
            price *= 0.5 + 0.45 * gen.uniform();
            inst.rates.push_back(0.1 + 0.6 * gen.uniform());
        }
        inst.inventory = 3 + static_cast<int>(gen.next_u64() % 25);
        inst.horizon = 5.0 + 25.0 * gen.uniform();
        inst.batches.push_back(model::BatchDistribution::unit(inst.inventory));

        auto rep = bounds::revenue_bounds(inst);
        // fine-grained value iteration as the truth
        const double lam = inst.total_rate();
        const double n = std::ceil(20.0 * inst.horizon * lam);
        const double delta = inst.horizon / std::max(1.0, n);
        auto table = dp::solve(model::discretize(inst, delta));
        const double exact = table.optimal_value();
        CAPTURE(trial);
        // the discrete chain undershoots the continuous optimum slightly
        CHECK(rep.lower <= exact + 0.01 * std::max(1.0, exact));
        CHECK(exact <= rep.upper + 1e-6);
    }
}

TEST_CASE("lower bound is achieved by an admissible policy") {
    // the balanced-regime lower bound is the value of an explicit switch-over
    // schedule, so the optimized schedule can only do better
    for (int W : {8, 15, 18}) {
        auto inst = study_mix(W, 20.0);
        auto rep = bounds::revenue_bounds(inst);
        auto sol = switchover::solve_unit(inst);
        CHECK(sol.revenue >= rep.lower - 1e-9);
        CHECK(sol.revenue <= rep.upper + 1e-9);
    }
}

TEST_CASE("gap study scales toward a square-root law") {
    // balanced scaling: horizon grows so expected demand stays equal to
    // inventory (total rate of the study mix is 1), where the absolute gap
    // between the certainty bound and the tuned switch policy grows like
    // sqrt(W) instead of vanishing.
    auto base = study_mix(25, 25.0);
    auto study = bounds::gap_study(base, {25, 50, 100, 200, 400});
    REQUIRE(study.rows.size() == 5);
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        const auto& row = study.rows[i];
        CHECK(row.horizon == doctest::Approx(1.0 * row.inventory).epsilon(1e-12));
        CHECK(row.lower <= row.switch_revenue + 1e-9);
        CHECK(row.switch_revenue <= row.upper + 1e-9);
        CHECK(row.rel_gap ==
              doctest::Approx((row.upper - row.switch_revenue) / row.upper)
                  .epsilon(1e-12));
        if (i > 0) CHECK(row.rel_gap < study.rows[i - 1].rel_gap);
    }
    CHECK(study.slope > 0.35);
    CHECK(study.slope < 0.65);
}

TEST_CASE("gap study requires a sizable base") {
    auto base = study_mix(25, 20.0);
    base.inventory = 0;
    base.batches = {model::BatchDistribution::unit(0)};
    CHECK_THROWS_AS(bounds::gap_study(base, {10, 20}), std::invalid_argument);
}
