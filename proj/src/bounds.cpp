#include "sknap/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "sknap/poisson.hpp"
#include "sknap/switchover.hpp"

namespace sknap::bounds {

BoundsReport revenue_bounds(const model::ProblemInstance& inst) {
    model::require_valid(inst);
    if (!inst.unit_batch())
        throw std::invalid_argument("revenue_bounds: closed forms need unit order sizes");

    const std::size_t m = inst.classes();
    const double W = inst.inventory;
    const double T = inst.horizon;
    const auto ap = switchover::averaged_prices(inst);

    BoundsReport rep;
    if (inst.cumulative_rate(1) * T > W) {
        // Scarce: the top class alone outstrips the inventory.  Anticipating
        // every arrival sells everything at p_1; serving only class 1 is a
        // realizable switch-over policy.
        rep.regime_class = 0;
        rep.upper = inst.prices[0] * W;
        rep.lower = inst.prices[0] *
                    poisson::expected_min(inst.cumulative_rate(1) * T, inst.inventory);
        return rep;
    }
    if (inst.total_rate() * T <= W) {
        // Abundant: even accepting everyone cannot exhaust the inventory.
        rep.regime_class = static_cast<int>(m);
        rep.upper = ap.p1k[m - 1] * inst.total_rate() * T;
        rep.lower =
            ap.p1k[m - 1] * poisson::expected_min(inst.total_rate() * T, inst.inventory);
        return rep;
    }

    // Balanced: classes 1..k fit within W over the whole horizon and class
    // k+1 fits for the last t time units, chosen so the volumes add up to W.
    std::size_t k = 1;
    while (inst.cumulative_rate(k + 1) * T <= W) ++k;
    const double t = (W - inst.cumulative_rate(k) * T) / inst.rates[k];
    rep.regime_class = static_cast<int>(k);
    rep.marginal_time = t;

    double head = 0.0;
    for (std::size_t i = 0; i < k; ++i) head += inst.rates[i] * inst.prices[i];
    rep.upper = head * T + inst.rates[k] * inst.prices[k] * t;

    // Value of the switch-over policy t_1 = ... = t_k = 0, t_{k+1} = T - t.
    const double mu_head = inst.cumulative_rate(k) * (T - t);
    const double mu_all = inst.cumulative_rate(k) * T + inst.rates[k] * t;
    rep.lower = ap.p1k[k - 1] * W -
                (ap.p1k[k - 1] - ap.p1k[k]) *
                    poisson::shortfall(inst.inventory, mu_head).value -
                ap.p1k[k] * poisson::shortfall(inst.inventory, mu_all).value;
    return rep;
}

GapStudy gap_study(const model::ProblemInstance& base,
                   const std::vector<int>& inventories) {
    model::require_valid(base);
    if (base.inventory <= 0)
        throw std::invalid_argument("gap_study: base instance needs positive inventory");
    const double ratio = base.horizon / static_cast<double>(base.inventory);

    GapStudy study;
    for (int W : inventories) {
        model::ProblemInstance scaled = base;
        scaled.inventory = W;
        scaled.horizon = ratio * static_cast<double>(W);
        scaled.batches = {model::BatchDistribution::unit(W)};

        GapStudyRow row;
        row.inventory = W;
        row.horizon = scaled.horizon;
        const auto rep = revenue_bounds(scaled);
        row.upper = rep.upper;
        row.lower = rep.lower;
        row.switch_revenue = switchover::solve_unit(scaled).revenue;
        row.rel_gap = (rep.upper - row.switch_revenue) / rep.upper;
        study.rows.push_back(row);
    }

    // Least-squares slope of log(absolute gap) on log(W).
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    const double n = static_cast<double>(study.rows.size());
    for (const auto& row : study.rows) {
        const double x = std::log(static_cast<double>(row.inventory));
        const double y = std::log(std::max(row.upper - row.switch_revenue, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    if (study.rows.size() >= 2) study.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return study;
}

} // namespace sknap::bounds
