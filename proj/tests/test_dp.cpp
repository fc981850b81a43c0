#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "sknap/dp.hpp"
#include "sknap/model.hpp"
#include "sknap/rng.hpp"

using namespace sknap;

namespace {

/// Literal expectimax recursion with no reordering of terms, used as an
/// independent oracle for the production solver.
double expectimax(const model::DiscretizedInstance& d, int period, int remaining,
                  std::vector<std::vector<double>>& memo) {
    if (period > d.periods) return 0.0;
    double& slot = memo[static_cast<std::size_t>(period)][static_cast<std::size_t>(remaining)];
    if (!std::isnan(slot)) return slot;
    const double keep = expectimax(d, period + 1, remaining, memo);
    double value = d.theta0 * keep;
    for (std::size_t i = 0; i < d.theta.size(); ++i) {
        for (std::size_t j = 0; j < d.theta[i].size(); ++j) {
            const double mass = d.theta[i][j];
            if (mass == 0.0) continue;
            double best = keep; // reject
            if (static_cast<int>(j) <= remaining) {
                const double take =
                    d.prices[i] * static_cast<double>(j) +
                    expectimax(d, period + 1, remaining - static_cast<int>(j), memo);
                best = std::max(best, take);
            }
            value += mass * best;
        }
    }
    slot = value;
    return value;
}

double expectimax_value(const model::DiscretizedInstance& d) {
    std::vector<std::vector<double>> memo(
        static_cast<std::size_t>(d.periods) + 2,
        std::vector<double>(static_cast<std::size_t>(d.inventory) + 1,
                            std::numeric_limits<double>::quiet_NaN()));
    return expectimax(d, 1, d.inventory, memo);
}

/// Enumerate every deterministic accept/reject rule of a small instance — one
/// bit per (period, class, size, remaining) decision point — and return the
/// best expected revenue.  Exponential in the number of decision points;
/// callers keep that count at or below ~22 bits.
double best_policy_by_enumeration(const model::DiscretizedInstance& d) {
    const int T = d.periods;
    const int W = d.inventory;
    const std::size_t m = d.theta.size();
    const std::size_t cols = d.theta[0].size();

    // bit index per decision point, -1 where no decision exists
    auto slot = [&](int n, std::size_t i, std::size_t j, int r) -> std::size_t {
        return (((static_cast<std::size_t>(n - 1) * m + i) * cols + j) *
                    static_cast<std::size_t>(W + 1) +
                static_cast<std::size_t>(r));
    };
    std::vector<int> bit(static_cast<std::size_t>(T) * m * cols * (W + 1), -1);
    int bits = 0;
    for (int n = 1; n <= T; ++n) {
        for (int r = 1; r <= W; ++r) {
            for (std::size_t i = 0; i < m; ++i) {
                for (int j = 1; j <= r; ++j) {
                    if (d.theta[i][static_cast<std::size_t>(j)] == 0.0) continue;
                    bit[slot(n, i, static_cast<std::size_t>(j), r)] = bits++;
                }
            }
        }
    }
    REQUIRE(bits <= 22);

    const std::uint64_t combos = std::uint64_t{1} << bits;
    double best = 0.0;
    std::vector<double> value(static_cast<std::size_t>(W) + 1, 0.0);
    std::vector<double> next(value.size(), 0.0);
    for (std::uint64_t mask = 0; mask < combos; ++mask) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int n = T; n >= 1; --n) {
            for (int r = 0; r <= W; ++r) {
                const double keep = next[static_cast<std::size_t>(r)];
                double v = d.theta0 * keep;
                for (std::size_t i = 0; i < m; ++i) {
                    for (std::size_t j = 0; j < cols; ++j) {
                        const double mass = d.theta[i][j];
                        if (mass == 0.0) continue;
                        bool take = false;
                        if (j >= 1 && static_cast<int>(j) <= r) {
                            const int b = bit[slot(n, i, j, r)];
                            take = b >= 0 && ((mask >> b) & 1);
                        }
                        if (take) {
                            v += mass * (d.prices[i] * static_cast<double>(j) +
                                         next[static_cast<std::size_t>(r) - j]);
                        } else {
                            v += mass * keep;
                        }
                    }
                }
                value[static_cast<std::size_t>(r)] = v;
            }
            std::swap(value, next);
        }
        best = std::max(best, next[static_cast<std::size_t>(W)]);
    }
    return best;
}

model::ProblemInstance random_unit_instance(rng::CounterRng& gen, std::size_t max_classes,
                                            int max_inventory) {
    model::ProblemInstance inst;
    const std::size_t m = 1 + static_cast<std::size_t>(gen.next_u64() % max_classes);
    double price = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
        inst.prices.push_back(price);
        price *= 0.5 + 0.45 * gen.uniform();
        inst.rates.push_back(0.1 + 0.9 * gen.uniform());
    }
    inst.inventory = 1 + static_cast<int>(gen.next_u64() % static_cast<std::uint64_t>(max_inventory));
    inst.horizon = 4.0 + 12.0 * gen.uniform();
    inst.batches.push_back(model::BatchDistribution::unit(inst.inventory));
    return inst;
}

} // namespace

TEST_CASE("value table layout and boundary") {
    dp::ValueTable t(3, 2);
    CHECK(t.periods() == 3);
    CHECK(t.inventory() == 2);
    t.at(1, 2) = 5.0;
    CHECK(t.at(1, 2) == 5.0);
    CHECK(t.at(4, 2) == 0.0); // boundary row
    CHECK_THROWS_AS(t.at(0, 0), std::out_of_range);
    CHECK_THROWS_AS(t.at(1, 3), std::out_of_range);
    CHECK_THROWS_AS(t.at(5, 0), std::out_of_range);
}

TEST_CASE("solver equals a literal expectimax recursion") {
    rng::CounterRng gen(91, 0, 0);
    for (int trial = 0; trial < 30; ++trial) {
        auto inst = random_unit_instance(gen, 3, 5);
        if (trial % 3 == 0) {
            inst.batches[0] = model::BatchDistribution::negative_binomial(2, 0.55, inst.inventory);
        } else if (trial % 3 == 1) {
            inst.batches[0] =
                model::BatchDistribution::discretized_exponential(1.7, inst.inventory);
        }
        auto disc = model::discretize(inst, model::default_delta(inst));
        auto table = dp::solve(disc);
        const double oracle = expectimax_value(disc);
        CHECK(std::abs(table.optimal_value() - oracle) < 1e-12 * std::max(1.0, oracle));
        // spot-check interior states too
        const int mid = std::max(1, disc.periods / 2);
        std::vector<std::vector<double>> memo(
            static_cast<std::size_t>(disc.periods) + 2,
            std::vector<double>(static_cast<std::size_t>(disc.inventory) + 1,
                                std::numeric_limits<double>::quiet_NaN()));
        for (int d = 0; d <= disc.inventory; ++d) {
            CHECK(std::abs(table.at(mid, d) - expectimax(disc, mid, d, memo)) < 1e-12);
        }
    }
}

TEST_CASE("solver beats every explicitly enumerated decision rule") {
    // Small instances where all 2^bits deterministic rules can be evaluated.
    std::vector<model::ProblemInstance> cases;
    {
        model::ProblemInstance a;
        a.prices = {1.0, 0.4};
        a.rates = {0.3, 0.5};
        a.inventory = 2;
        a.horizon = 2.0;
        a.batches.push_back(model::BatchDistribution::unit(2));
        cases.push_back(a);
    }
    {
        model::ProblemInstance b;
        b.prices = {1.0};
        b.rates = {0.9};
        b.inventory = 3;
        b.horizon = 3.0;
        b.batches.push_back(model::BatchDistribution::negative_binomial(1, 0.5, 3));
        cases.push_back(b);
    }
    {
        model::ProblemInstance c;
        c.prices = {1.0, 0.55};
        c.rates = {0.3, 0.6};
        c.inventory = 2;
        c.horizon = 2.0;
        c.batches.push_back(model::BatchDistribution::discretized_exponential(1.2, 2));
        cases.push_back(c);
    }
    for (const auto& inst : cases) {
        auto disc = model::discretize(inst, 1.0);
        auto table = dp::solve(disc);
        const double enumerated = best_policy_by_enumeration(disc);
        CHECK(table.optimal_value() == doctest::Approx(enumerated).epsilon(1e-12));
    }
}

TEST_CASE("parallel and serial solvers agree bitwise") {
    rng::CounterRng gen(17, 0, 0);
    for (int trial = 0; trial < 5; ++trial) {
        auto inst = random_unit_instance(gen, 4, 20);
        if (trial % 2 == 0) {
            inst.batches[0] = model::BatchDistribution::negative_binomial(4, 0.33, inst.inventory);
        }
        auto disc = model::discretize(inst, model::default_delta(inst));
        auto par = dp::solve(disc);
        auto ser = dp::solve_serial(disc);
        for (int n = 1; n <= disc.periods + 1; ++n) {
            for (int d = 0; d <= disc.inventory; ++d) {
                REQUIRE(par.at(n, d) == ser.at(n, d));
            }
        }
    }
}

TEST_CASE("accept() respects feasibility and exact ties") {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.5};
    inst.rates = {0.4, 0.6};
    inst.inventory = 3;
    inst.horizon = 4.0;
    inst.batches.push_back(model::BatchDistribution::unit(3));
    auto disc = model::discretize(inst, 0.5);
    auto table = dp::solve(disc);

    // infeasible quantity is always rejected
    CHECK_FALSE(dp::accept(table, disc, 1, 2, 0, 3));
    CHECK_FALSE(dp::accept(table, disc, 1, 0, 0, 1));
    // top class in the final period with stock on hand is always worth taking
    CHECK(dp::accept(table, disc, disc.periods, 3, 0, 1));
    // acceptance matches the value comparison state by state
    for (int n = 1; n <= disc.periods; ++n) {
        for (int d = 1; d <= disc.inventory; ++d) {
            for (std::size_t k = 0; k < 2; ++k) {
                const bool want =
                    disc.prices[k] + table.at(n + 1, d - 1) >= table.at(n + 1, d);
                CHECK(dp::accept(table, disc, n, d, k, 1) == want);
            }
        }
    }
    CHECK_THROWS_AS(dp::accept(table, disc, 0, 1, 0, 1), std::out_of_range);
    CHECK_THROWS_AS(dp::accept(table, disc, 1, 4, 0, 1), std::out_of_range);
}

TEST_CASE("unit-batch thresholds are clean and monotone") {
    rng::CounterRng gen(23, 0, 0);
    for (int trial = 0; trial < 25; ++trial) {
        auto inst = random_unit_instance(gen, 4, 12);
        auto disc = model::discretize(inst, model::default_delta(inst));
        auto table = dp::solve(disc);
        auto profile = dp::extract_thresholds(table, disc);
        CHECK(profile.violations.empty());
        REQUIRE(profile.first_accept.size() == inst.classes());
        for (const auto& row : profile.first_accept) {
            REQUIRE(static_cast<int>(row.size()) == inst.inventory + 1);
            CHECK(row[0] == disc.periods + 1); // nothing sells from an empty shelf
            // more stock on hand opens a class earlier (or at the same time)
            for (int d = 1; d < inst.inventory; ++d) {
                CHECK(row[static_cast<std::size_t>(d + 1)] <= row[static_cast<std::size_t>(d)]);
            }
        }
        // higher-price classes open no later than lower-price ones
        for (std::size_t k = 0; k + 1 < inst.classes(); ++k) {
            for (int d = 0; d <= inst.inventory; ++d) {
                CHECK(profile.first_accept[k][static_cast<std::size_t>(d)] <=
                      profile.first_accept[k + 1][static_cast<std::size_t>(d)]);
            }
        }
    }
}

TEST_CASE("value tables are concave in stock and submodular in time") {
    rng::CounterRng gen(29, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = random_unit_instance(gen, 3, 15);
        auto disc = model::discretize(inst, model::default_delta(inst));
        auto table = dp::solve(disc);
        auto report = dp::structure_report(table);
        CHECK(report.max_concavity_violation <= 1e-9);
        CHECK(report.max_submodularity_violation <= 1e-9);
    }
}

TEST_CASE("csv dump is stable") {
    model::ProblemInstance inst;
    inst.prices = {1.0};
    inst.rates = {1.0};
    inst.inventory = 1;
    inst.horizon = 1.0;
    inst.batches.push_back(model::BatchDistribution::unit(1));
    auto disc = model::discretize(inst, 0.5);
    auto table = dp::solve(disc);
    std::ostringstream out;
    dp::write_csv(table, out);
    // V(2,1) = 0.5, V(1,1) = 0.5 + 0.5*0.5 = 0.75
    CHECK(out.str() == "period,remaining,value\n"
                       "1,0,0\n"
                       "1,1,0.75\n"
                       "2,0,0\n"
                       "2,1,0.5\n"
                       "3,0,0\n"
                       "3,1,0\n");
}
