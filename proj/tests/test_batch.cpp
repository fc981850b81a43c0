#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "sknap/batch.hpp"
#include "sknap/model.hpp"
#include "sknap/poisson.hpp"
#include "sknap/rng.hpp"
#include "sknap/switchover.hpp"

using namespace sknap;

namespace {

model::ProblemInstance homogeneous_negbin(int inventory, double horizon) {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.8, 0.65, 0.45};
    inst.rates = {0.2, 0.3, 0.1, 0.4};
    inst.inventory = inventory;
    inst.horizon = horizon;
    inst.batches.push_back(
        model::BatchDistribution::negative_binomial(4, 0.33, inventory));
    return inst;
}

} // namespace

TEST_CASE("transition matrix rows are stochastic and zero is absorbing") {
    auto b = model::BatchDistribution::negative_binomial(2, 0.4, 8);
    auto M = batch::transition_matrix(b, 8);
    for (int d = 0; d <= 8; ++d) {
        double row = 0.0;
        for (int c = 0; c <= 8; ++c) {
            CHECK(M.at(d, c) >= 0.0);
            row += M.at(d, c);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
    }
    // nothing leaves the empty state
    CHECK(M.at(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    for (int c = 1; c <= 8; ++c) CHECK(M.at(0, c) == 0.0);
    // from d, an order of size j <= d lands on d - j
    CHECK(M.at(5, 2) == doctest::Approx(b.pmf[3]).epsilon(1e-13));
    // oversize orders (and size zero) leave the state unchanged
    double stay = b.pmf[0] + b.overflow;
    for (std::size_t j = 6; j < b.pmf.size(); ++j) stay += b.pmf[j];
    CHECK(M.at(5, 5) == doctest::Approx(stay).epsilon(1e-12));
}

TEST_CASE("unit transition matrix is the pure shift") {
    auto M = batch::transition_matrix(model::BatchDistribution::unit(4), 4);
    for (int d = 1; d <= 4; ++d) {
        for (int c = 0; c <= 4; ++c) {
            CHECK(M.at(d, c) == doctest::Approx(c == d - 1 ? 1.0 : 0.0).epsilon(1e-13));
        }
    }
}

TEST_CASE("apply and apply_transposed are adjoint") {
    auto b = model::BatchDistribution::discretized_exponential(2.5, 6);
    auto M = batch::transition_matrix(b, 6);
    rng::CounterRng gen(31, 0, 0);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(7), y(7);
        for (auto& v : x) v = gen.uniform();
        for (auto& v : y) v = gen.uniform();
        auto Mx = M.apply(x);
        auto yM = M.apply_transposed(y);
        double lhs = std::inner_product(y.begin(), y.end(), Mx.begin(), 0.0);
        double rhs = std::inner_product(yM.begin(), yM.end(), x.begin(), 0.0);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("unit-batch remaining kernel reduces to the Poisson shortfall") {
    auto M = batch::transition_matrix(model::BatchDistribution::unit(15), 15);
    batch::RemainingKernel kernel(M, 40.0);
    for (double mu : {0.0, 0.5, 3.0, 15.0, 40.0}) {
        auto eval = kernel.eval(mu);
        auto ref = poisson::shortfall(15, mu);
        CHECK(std::abs(eval.value - ref.value) < 1e-10);
        CHECK(std::abs(eval.derivative - ref.derivative) < 1e-10);
        CHECK(std::abs(eval.second_derivative - ref.second_derivative) < 1e-10);
    }
}

TEST_CASE("kernel derivatives match finite differences") {
    auto b = model::BatchDistribution::negative_binomial(4, 0.33, 20);
    auto M = batch::transition_matrix(b, 20);
    batch::RemainingKernel kernel(M, 30.0);
    const double h = 1e-5;
    for (double mu : {0.4, 2.0, 7.0, 18.0}) {
        auto mid = kernel.eval(mu);
        auto lo = kernel.eval(mu - h);
        auto hi = kernel.eval(mu + h);
        CHECK(mid.derivative ==
              doctest::Approx((hi.value - lo.value) / (2.0 * h)).epsilon(1e-6));
        CHECK(mid.second_derivative ==
              doctest::Approx((hi.value - 2.0 * mid.value + lo.value) / (h * h))
                  .epsilon(1e-4));
        // decreasing and convex in the order volume
        CHECK(mid.derivative <= 1e-12);
        CHECK(mid.second_derivative >= -1e-12);
    }
    CHECK(kernel.eval(0.0).value == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("expected remaining matches Monte Carlo for a heavy-tailed batch") {
    const int W = 40;
    auto b = model::BatchDistribution::discretized_exponential(12.0, W);
    auto M = batch::transition_matrix(b, W);
    const double mu = 2.0;
    auto eval = batch::expected_remaining(M, mu);

    // simulate: Poisson(mu) orders, each consuming a sampled size if it fits
    rng::CounterRng gen(57, 0, 0);
    const int reps = 100000;
    const double q = std::exp(-1.0 / 12.0);
    double sum = 0.0, sumsq = 0.0;
    for (int repl = 0; repl < reps; ++repl) {
        int d = W;
        int orders = rng::poisson_sample(mu, gen);
        for (int k = 0; k < orders; ++k) {
            // geometric sample by inversion
            double u = gen.uniform();
            int size = static_cast<int>(std::floor(std::log1p(-u) / std::log(q)));
            if (size <= d) d -= size;
        }
        sum += d;
        sumsq += static_cast<double>(d) * d;
    }
    const double mean = sum / reps;
    const double var = (sumsq - sum * mean) / (reps - 1);
    const double ci99 = 2.576 * std::sqrt(var / reps);
    CHECK(std::abs(eval.value - mean) <= ci99);
}

TEST_CASE("truncation threshold changes nothing measurable") {
    auto b = model::BatchDistribution::negative_binomial(4, 0.33, 25);
    auto M = batch::transition_matrix(b, 25);
    batch::RemainingKernel tight(M, 20.0, 1e-12);
    batch::RemainingKernel loose(M, 20.0, 1e-13);
    for (double mu : {0.5, 4.0, 11.0, 20.0}) {
        CHECK(std::abs(tight(mu) - loose(mu)) < 1e-9);
    }
}

TEST_CASE("evaluation beyond mu_max stays finite and small") {
    auto b = model::BatchDistribution::negative_binomial(4, 0.33, 10);
    auto M = batch::transition_matrix(b, 10);
    batch::RemainingKernel kernel(M, 5.0);
    auto eval = kernel.eval(50.0);
    CHECK(std::isfinite(eval.value));
    CHECK(eval.value >= -1e-9);
    CHECK(eval.value <= kernel.eval(5.0).value);
}

TEST_CASE("kernel_for dispatches and guards heterogeneity") {
    auto unit = homogeneous_negbin(10, 20.0);
    unit.batches[0] = model::BatchDistribution::unit(10);
    auto ku = batch::kernel_for(unit);
    CHECK(ku.remaining(3.0) == doctest::Approx(poisson::shortfall(10, 3.0).value).epsilon(1e-12));

    auto hom = homogeneous_negbin(10, 20.0);
    auto kb = batch::kernel_for(hom);
    auto M = batch::transition_matrix(hom.batches[0], 10);
    CHECK(kb.remaining(3.0) ==
          doctest::Approx(batch::expected_remaining(M, 3.0).value).epsilon(1e-9));

    auto het = hom;
    het.batches = {model::BatchDistribution::unit(10),
                   model::BatchDistribution::unit(10),
                   model::BatchDistribution::negative_binomial(4, 0.33, 10),
                   model::BatchDistribution::unit(10)};
    CHECK_THROWS_AS(batch::kernel_for(het), std::invalid_argument);
}

TEST_CASE("homogeneous solver beats a coarse grid and satisfies first-order checks") {
    auto inst = homogeneous_negbin(20, 20.0);
    auto sol = batch::solve_homogeneous(inst);
    auto kernel = batch::kernel_for(inst);

    auto kkt = switchover::kkt_check(inst, kernel, sol);
    CHECK(kkt.max_residual <= 1e-8);

    // grid over cumulative (t1, t2, t3), step 1.0 (coarse but global)
    double best = -1.0;
    for (int i = 0; i <= 20; ++i) {
        for (int j = i; j <= 20; ++j) {
            for (int k = j; k <= 20; ++k) {
                std::vector<double> t = {1.0 * i, 1.0 * j, 1.0 * k, 20.0};
                std::vector<double> mu(4);
                double prev = 0.0, acc = 0.0;
                for (std::size_t l = 0; l < 4; ++l) {
                    acc += inst.cumulative_rate(l + 1) * (t[l] - prev);
                    mu[l] = acc;
                    prev = t[l];
                }
                best = std::max(best,
                                switchover::objective(inst, kernel, mu).revenue);
            }
        }
    }
    CHECK(sol.revenue >= best - 1e-9);
    CHECK(sol.revenue <= best + 0.05); // coarse grid: generous upper margin

    // revenue identity
    auto avg = switchover::averaged_prices(inst);
    CHECK(sol.revenue + sol.weighted_shortfall ==
          doctest::Approx(avg.p1k[0] * 20.0).epsilon(1e-10));
}

TEST_CASE("segment mixtures are stochastic and start at the top class") {
    auto inst = homogeneous_negbin(8, 10.0);
    inst.batches = {model::BatchDistribution::unit(8),
                    model::BatchDistribution::negative_binomial(4, 0.33, 8),
                    model::BatchDistribution::discretized_exponential(3.0, 8),
                    model::BatchDistribution::unit(8)};
    auto mats = batch::mixture_matrices(inst);
    REQUIRE(mats.size() == 4);
    auto M1 = batch::transition_matrix(inst.batches[0], 8);
    for (int d = 0; d <= 8; ++d) {
        for (int c = 0; c <= 8; ++c) {
            CHECK(mats[0].at(d, c) == doctest::Approx(M1.at(d, c)).epsilon(1e-13));
        }
        for (const auto& G : mats) {
            double row = 0.0;
            for (int c = 0; c <= 8; ++c) row += G.at(d, c);
            CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("ordered product collapses to the summed generator for shared batches") {
    auto inst = homogeneous_negbin(12, 20.0);
    std::vector<double> y = {2.0, 5.0, 3.0, 10.0};
    batch::PriceDependentOptions product_form;
    batch::PriceDependentOptions sum_form;
    sum_form.sum_form = true;
    const double a = batch::price_dependent_objective(inst, y, product_form);
    const double b = batch::price_dependent_objective(inst, y, sum_form);
    CHECK(a == doctest::Approx(b).epsilon(1e-9));

    // and both agree with the shared-batch kernel objective at the same times
    auto kernel = batch::kernel_for(inst);
    std::vector<double> mu(4);
    double acc = 0.0;
    double t = 0.0;
    std::vector<double> tv(4);
    for (std::size_t l = 0; l < 4; ++l) {
        t += y[l];
        tv[l] = t;
    }
    double prev = 0.0;
    for (std::size_t l = 0; l < 4; ++l) {
        acc += inst.cumulative_rate(l + 1) * (tv[l] - prev);
        mu[l] = acc;
        prev = tv[l];
    }
    const double direct = switchover::objective(inst, kernel, mu).weighted_shortfall;
    CHECK(a == doctest::Approx(direct).epsilon(1e-8));
}

TEST_CASE("price-dependent objective rejects infeasible segment lengths") {
    auto inst = homogeneous_negbin(10, 10.0);
    CHECK_THROWS_AS(batch::price_dependent_objective(inst, {1.0, 2.0, 3.0}),
                    std::invalid_argument); // wrong arity
    CHECK_THROWS_AS(batch::price_dependent_objective(inst, {-1.0, 2.0, 3.0, 4.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(batch::price_dependent_objective(inst, {4.0, 4.0, 4.0, 4.0}),
                    std::invalid_argument); // exceeds the horizon
}

TEST_CASE("price-dependent revenue keeps the identity") {
    auto inst = homogeneous_negbin(10, 10.0);
    std::vector<double> y = {1.0, 2.0, 3.0, 4.0};
    auto avg = switchover::averaged_prices(inst);
    CHECK(batch::price_dependent_revenue(inst, y) +
              batch::price_dependent_objective(inst, y) ==
          doctest::Approx(avg.p1k[0] * 10.0).epsilon(1e-10));
}

TEST_CASE("price-dependent solver recovers the homogeneous optimum") {
    auto inst = homogeneous_negbin(20, 20.0);
    auto shared = batch::solve_homogeneous(inst);
    auto general = batch::solve_price_dependent(inst);
    CHECK(general.converged);
    CHECK(general.revenue ==
          doctest::Approx(shared.revenue).epsilon(1e-3)); // relative
    CHECK(general.t.back() <= 20.0 + 1e-9);
}

TEST_CASE("heterogeneous batches solve cleanly") {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.8, 0.65};
    inst.rates = {0.3, 0.3, 0.4};
    inst.inventory = 30;
    inst.horizon = 20.0;
    inst.batches = {model::BatchDistribution::unit(30),
                    model::BatchDistribution::negative_binomial(4, 0.33, 30),
                    model::BatchDistribution::discretized_exponential(3.0, 30)};
    auto sol = batch::solve_price_dependent(inst);
    CHECK(sol.converged);
    CHECK(sol.stationarity_residual < 0.05);
    CHECK(sol.revenue > 0.0);
    double total = 0.0;
    for (double v : sol.y) {
        CHECK(v >= -1e-12);
        total += v;
    }
    CHECK(total <= 20.0 + 1e-9);

    // no feasible perturbation of the returned y improves the objective much
    const double base = batch::price_dependent_objective(inst, sol.y);
    for (std::size_t l = 0; l < sol.y.size(); ++l) {
        for (double step : {0.05, -0.05}) {
            auto y = sol.y;
            y[l] += step;
            if (y[l] < 0.0) continue;
            double sum = std::accumulate(y.begin(), y.end(), 0.0);
            if (sum > inst.horizon) continue;
            CHECK(batch::price_dependent_objective(inst, y) >= base - 1e-4);
        }
    }
}
