#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

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

model::ProblemInstance random_unit_instance(rng::CounterRng& gen) {
    model::ProblemInstance inst;
    const std::size_t m = 1 + static_cast<std::size_t>(gen.next_u64() % 5);
    double price = 1.0 + gen.uniform();
    for (std::size_t i = 0; i < m; ++i) {
        inst.prices.push_back(price);
        price *= 0.4 + 0.55 * gen.uniform();
        inst.rates.push_back(0.05 + 2.0 * gen.uniform());
    }
    inst.inventory = 1 + static_cast<int>(gen.next_u64() % 80);
    inst.horizon = 1.0 + 39.0 * gen.uniform();
    inst.batches.push_back(model::BatchDistribution::unit(inst.inventory));
    return inst;
}

/// Cumulative expected admitted orders for cumulative switch times t.
std::vector<double> mu_from_times(const model::ProblemInstance& inst,
                                  const std::vector<double>& t) {
    std::vector<double> mu(t.size(), 0.0);
    double prev_t = 0.0;
    double acc = 0.0;
    for (std::size_t l = 0; l < t.size(); ++l) {
        acc += inst.cumulative_rate(l + 1) * (t[l] - prev_t);
        mu[l] = acc;
        prev_t = t[l];
    }
    return mu;
}

} // namespace

TEST_CASE("averaged prices and telescoping weights on the study mix") {
    auto inst = study_mix(20, 20.0);
    auto avg = switchover::averaged_prices(inst);
    REQUIRE(avg.p1k.size() == 4);
    CHECK(avg.p1k[0] == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(avg.p1k[1] == doctest::Approx(0.88).epsilon(1e-13));
    CHECK(avg.p1k[2] == doctest::Approx(0.505 / 0.6).epsilon(1e-13));
    CHECK(avg.p1k[3] == doctest::Approx(0.685).epsilon(1e-13));

    REQUIRE(avg.pi.size() == 4);
    CHECK(avg.pi[0] == doctest::Approx(1.0 - 0.88).epsilon(1e-12));
    CHECK(avg.pi[3] == doctest::Approx(0.685).epsilon(1e-13));
    // weights telescope back to the top price
    double sum = 0.0;
    for (double w : avg.pi) {
        CHECK(w > 0.0);
        sum += w;
    }
    CHECK(sum == doctest::Approx(avg.p1k[0]).epsilon(1e-12));

    auto direct = switchover::averaged_prices(inst.prices, inst.rates);
    for (std::size_t l = 0; l < 4; ++l) CHECK(direct.p1k[l] == avg.p1k[l]);
}

TEST_CASE("budget weights and the time identity") {
    auto inst = study_mix(20, 20.0);
    auto c = switchover::budget_weights(inst);
    REQUIRE(c.size() == 4);
    CHECK(c[0] == doctest::Approx(1.0 / 0.2 - 1.0 / 0.5).epsilon(1e-13));
    CHECK(c[1] == doctest::Approx(1.0 / 0.5 - 1.0 / 0.6).epsilon(1e-13));
    CHECK(c[2] == doctest::Approx(1.0 / 0.6 - 1.0).epsilon(1e-13));
    CHECK(c[3] == doctest::Approx(1.0).epsilon(1e-13));

    // sum_l c_l mu_l == sum_l y_l for any segment lengths y (Abel summation)
    rng::CounterRng gen(7, 0, 0);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> y(4), t(4);
        double acc = 0.0;
        for (std::size_t l = 0; l < 4; ++l) {
            y[l] = 5.0 * gen.uniform();
            acc += y[l];
            t[l] = acc;
        }
        auto mu = mu_from_times(inst, t);
        double lhs = 0.0;
        for (std::size_t l = 0; l < 4; ++l) lhs += c[l] * mu[l];
        CHECK(lhs == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("unit kernel matches the Poisson shortfall") {
    auto kernel = switchover::unit_kernel(12);
    CHECK(kernel.remaining(0.0) == doctest::Approx(12.0).epsilon(1e-13));
    CHECK(kernel.response(0.0) == doctest::Approx(1.0).epsilon(1e-13));
    for (double mu : {0.3, 1.0, 5.0, 12.0, 40.0}) {
        auto eval = poisson::shortfall(12, mu);
        CHECK(kernel.remaining(mu) == doctest::Approx(eval.value).epsilon(1e-13));
        CHECK(kernel.response(mu) == doctest::Approx(-eval.derivative).epsilon(1e-13));
        CHECK(kernel.response(mu) > 0.0);
    }
    // response is non-increasing
    CHECK(kernel.response(1.0) >= kernel.response(2.0));
    CHECK(kernel.response(2.0) >= kernel.response(10.0));
}

TEST_CASE("objective keeps the revenue identity") {
    auto inst = study_mix(15, 20.0);
    auto kernel = switchover::unit_kernel(15);
    auto avg = switchover::averaged_prices(inst);
    rng::CounterRng gen(11, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> mu(4);
        double acc = 0.0;
        for (auto& v : mu) {
            acc += 6.0 * gen.uniform();
            v = acc;
        }
        auto obj = switchover::objective(inst, kernel, mu);
        CHECK(obj.revenue + obj.weighted_shortfall ==
              doctest::Approx(avg.p1k[0] * 15.0).epsilon(1e-12));
        double direct = 0.0;
        for (std::size_t l = 0; l < 4; ++l) direct += avg.pi[l] * kernel.remaining(mu[l]);
        CHECK(obj.weighted_shortfall == doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("two-class solution beats a fine time grid") {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.6};
    inst.rates = {0.5, 0.5};
    inst.inventory = 5;
    inst.horizon = 8.0;
    inst.batches.push_back(model::BatchDistribution::unit(5));

    auto sol = switchover::solve_unit(inst);
    auto kernel = switchover::unit_kernel(5);
    double best = -1.0;
    for (int i = 0; i <= 160; ++i) {
        const double t1 = 0.05 * i;
        auto mu = mu_from_times(inst, {t1, 8.0});
        best = std::max(best, switchover::objective(inst, kernel, mu).revenue);
    }
    CHECK(sol.revenue >= best - 1e-9);
    CHECK(sol.revenue <= best + 1e-3);
}

TEST_CASE("three-class solution beats a fine time grid") {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.7, 0.5};
    inst.rates = {0.3, 0.4, 0.3};
    inst.inventory = 6;
    inst.horizon = 8.0;
    inst.batches.push_back(model::BatchDistribution::unit(6));

    auto sol = switchover::solve_unit(inst);
    auto kernel = switchover::unit_kernel(6);
    double best = -1.0;
    for (int i = 0; i <= 160; ++i) {
        for (int j = i; j <= 160; ++j) {
            auto mu = mu_from_times(inst, {0.05 * i, 0.05 * j, 8.0});
            best = std::max(best, switchover::objective(inst, kernel, mu).revenue);
        }
    }
    CHECK(sol.revenue >= best - 1e-9);
    CHECK(sol.revenue <= best + 1e-3);
}

TEST_CASE("first-order conditions hold on random instances") {
    rng::CounterRng gen(13, 0, 0);
    auto kernel_cache = [](int W) { return switchover::unit_kernel(W); };
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = random_unit_instance(gen);
        auto sol = switchover::solve_unit(inst);
        auto kernel = kernel_cache(inst.inventory);
        auto kkt = switchover::kkt_check(inst, kernel, sol);
        CAPTURE(trial);
        CHECK(kkt.max_residual <= 1e-8);

        // solution shape: ordered mu, times within the horizon
        for (std::size_t l = 0; l + 1 < sol.mu.size(); ++l) {
            CHECK(sol.mu[l] <= sol.mu[l + 1] + 1e-12);
            CHECK(sol.t[l] <= sol.t[l + 1] + 1e-12);
        }
        CHECK(sol.t.front() >= -1e-12);
        CHECK(sol.t.back() <= inst.horizon + 1e-9);
        if (sol.constraint_binding) {
            CHECK(sol.t.back() == doctest::Approx(inst.horizon).epsilon(1e-9));
        }
    }
}

TEST_CASE("marginal time cost per unit of price weight is non-increasing") {
    // ratio c_l / pi_l ordered over the merged-class ladder
    rng::CounterRng gen(19, 0, 0);
    for (int trial = 0; trial < 1000; ++trial) {
        auto inst = random_unit_instance(gen);
        auto avg = switchover::averaged_prices(inst);
        auto c = switchover::budget_weights(inst);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l + 1 < c.size(); ++l) {
            if (avg.pi[l] <= 0.0) continue;
            const double ratio = c[l] / avg.pi[l];
            CAPTURE(trial);
            CAPTURE(l);
            CHECK(ratio <= prev * (1.0 + 1e-12) + 1e-12);
            prev = ratio;
        }
    }
}

TEST_CASE("acceptance rates are proper fractions ordered by class") {
    auto inst = study_mix(20, 20.0);
    auto kernel = switchover::unit_kernel(20);
    auto sol = switchover::optimize_switch_times(inst, kernel);
    auto alpha = switchover::acceptance_rates(inst, kernel, sol);
    REQUIRE(alpha.size() == 4);
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        CHECK(alpha[k] >= -1e-9);
        CHECK(alpha[k] <= 1.0 + 1e-9);
    }
    for (std::size_t k = 0; k + 1 < alpha.size(); ++k) {
        CHECK(alpha[k] >= alpha[k + 1] - 1e-9);
    }
}

TEST_CASE("single class fills the whole horizon") {
    model::ProblemInstance inst;
    inst.prices = {0.9};
    inst.rates = {0.6};
    inst.inventory = 8;
    inst.horizon = 10.0;
    inst.batches.push_back(model::BatchDistribution::unit(8));
    auto sol = switchover::solve_unit(inst);
    REQUIRE(sol.mu.size() == 1);
    CHECK(sol.mu[0] == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(sol.t[0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(sol.revenue ==
          doctest::Approx(0.9 * (8.0 - poisson::shortfall(8, 6.0).value)).epsilon(1e-9));
}

TEST_CASE("abundant inventory opens every class immediately") {
    auto inst = study_mix(60, 20.0); // total demand 20 against 60 units
    auto sol = switchover::solve_unit(inst);
    for (std::size_t l = 0; l + 1 < sol.t.size(); ++l) CHECK(sol.t[l] <= 1e-6);
    auto avg = switchover::averaged_prices(inst);
    const double fcfs =
        avg.p1k.back() * (60.0 - poisson::shortfall(60, inst.total_rate() * 20.0).value);
    CHECK(sol.revenue == doctest::Approx(fcfs).epsilon(1e-8));
}

TEST_CASE("solve_unit rejects batch instances") {
    model::ProblemInstance inst;
    inst.prices = {1.0};
    inst.rates = {0.5};
    inst.inventory = 10;
    inst.horizon = 5.0;
    inst.batches.push_back(model::BatchDistribution::negative_binomial(4, 0.33, 10));
    CHECK_THROWS_AS(switchover::solve_unit(inst), std::invalid_argument);
}
