#include "sknap/switchover.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sknap/poisson.hpp"

namespace sknap::switchover {

AveragedPrices averaged_prices(std::span<const double> prices,
                               std::span<const double> rates) {
    const std::size_t m = prices.size();
    if (m == 0 || rates.size() != m)
        throw std::invalid_argument("averaged_prices: need matching non-empty arrays");
    AveragedPrices ap;
    ap.p1k.resize(m);
    ap.pi.resize(m);
    double weighted = 0.0, lam = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        weighted += rates[l] * prices[l];
        lam += rates[l];
        ap.p1k[l] = weighted / lam;
    }
    for (std::size_t l = 0; l + 1 < m; ++l) ap.pi[l] = ap.p1k[l] - ap.p1k[l + 1];
    ap.pi[m - 1] = ap.p1k[m - 1];
    return ap;
}

AveragedPrices averaged_prices(const model::ProblemInstance& inst) {
    return averaged_prices(inst.prices, inst.rates);
}

std::vector<double> budget_weights(const model::ProblemInstance& inst) {
    const std::size_t m = inst.classes();
    std::vector<double> c(m);
    for (std::size_t l = 0; l + 1 < m; ++l)
        c[l] = 1.0 / inst.cumulative_rate(l + 1) - 1.0 / inst.cumulative_rate(l + 2);
    c[m - 1] = 1.0 / inst.cumulative_rate(m);
    return c;
}

Kernel unit_kernel(int inventory) {
    Kernel k;
    k.remaining = [inventory](double mu) { return poisson::shortfall(inventory, mu).value; };
    k.response = [inventory](double mu) { return poisson::cdf(inventory - 1, mu); };
    return k;
}

Objective objective(const model::ProblemInstance& inst, const Kernel& kernel,
                    std::span<const double> mu) {
    const auto ap = averaged_prices(inst);
    if (mu.size() != ap.pi.size())
        throw std::invalid_argument("objective: mu size must match the class count");
    double shortfall = 0.0;
    for (std::size_t l = 0; l < mu.size(); ++l) shortfall += ap.pi[l] * kernel.remaining(mu[l]);
    return Objective{shortfall, ap.p1k[0] * inst.inventory - shortfall};
}

namespace {

// Inner solve of pi_l * psi(mu) = target for a non-increasing psi with
// pi_l * psi(0) > target; returns the bisection midpoint.
double invert_response(const std::function<double(double)>& psi, double pi_l,
                       double target) {
    double lo = 0.0, hi = 1.0;
    while (pi_l * psi(hi) > target) {
        hi *= 2.0;
        if (hi > 1e18) return hi; // response never drops to the target
    }
    for (int it = 0; it < 300; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (pi_l * psi(mid) > target) lo = mid;
        else hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

// ratio[l] = pi_l psi(0) / c_l is the eta at which class l prices out.
// Comparing eta against the precomputed ratio (rather than re-multiplying by
// c_l) keeps the cutoff exact at eta = max ratio, where a one-ulp rounding of
// the product would otherwise re-activate the class at the flat-response edge.
std::vector<double> mu_of_eta(double eta, const std::vector<double>& pi,
                              const std::vector<double>& c,
                              const std::vector<double>& ratio,
                              const std::function<double(double)>& psi) {
    const std::size_t m = pi.size();
    std::vector<double> mu(m, 0.0);
    for (std::size_t l = 0; l < m; ++l) {
        if (eta >= ratio[l]) continue; // class priced out at this eta
        mu[l] = invert_response(psi, pi[l], eta * c[l]);
    }
    return mu;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

SwitchOverSolution optimize_switch_times(const model::ProblemInstance& inst,
                                         const Kernel& kernel) {
    model::require_valid(inst);
    const std::size_t m = inst.classes();
    const double T = inst.horizon;
    const auto ap = averaged_prices(inst);
    const auto c = budget_weights(inst);
    const auto& psi = kernel.response;
    const double psi0 = psi(0.0);

    SwitchOverSolution sol;
    sol.mu.assign(m, 0.0);
    sol.nu.assign(m, 0.0);

    // Price-out thresholds per class; above the largest every class is zero.
    std::vector<double> ratio(m);
    double eta_max = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        ratio[l] = ap.pi[l] * psi0 / c[l];
        eta_max = std::max(eta_max, ratio[l]);
    }

    if (eta_max <= 0.0) {
        // Nothing to sell (e.g. zero inventory): stay at mu = 0 with slack.
        sol.constraint_binding = false;
        sol.constraint_residual = -T;
    } else {
        // Outer bisection on eta: dot(c, mu(eta)) decreases from dot(c, mu(0))
        // to 0 at eta_max.  Bracket downward from eta_max by halving.
        double lo = eta_max, hi = eta_max;
        bool bracketed = false;
        while (lo > 1e-300) {
            if (dot(c, mu_of_eta(lo, ap.pi, c, ratio, psi)) >= T) {
                bracketed = true;
                break;
            }
            hi = lo;
            lo *= 0.5;
        }
        if (!bracketed) {
            // Even eta -> 0 cannot fill the horizon: the budget stays slack.
            sol.eta = 0.0;
            sol.mu = mu_of_eta(0.0, ap.pi, c, ratio, psi);
            sol.constraint_binding = false;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (dot(c, mu_of_eta(mid, ap.pi, c, ratio, psi)) >= T) lo = mid;
                else hi = mid;
                if (hi - lo < 1e-15 * eta_max) break;
            }
            // Take the feasible (under-budget) side.  Any leftover budget
            // stems from a jump of mu(eta): where the response is numerically
            // flat, the marginal class absorbs budget without moving its
            // marginal value.  Hand the deficit to the class that keeps the
            // smallest stationarity residual at its landing point.
            sol.eta = hi;
            sol.mu = mu_of_eta(hi, ap.pi, c, ratio, psi);
            sol.constraint_binding = true;
            double deficit = T - dot(c, sol.mu);
            std::vector<bool> blocked(m, false);
            for (std::size_t round = 0; round < m && deficit > 1e-12 * std::max(1.0, T);
                 ++round) {
                std::size_t best = m;
                double best_res = std::numeric_limits<double>::infinity();
                double best_add = 0.0;
                for (std::size_t l = 0; l < m; ++l) {
                    if (blocked[l]) continue;
                    const double cap =
                        (l + 1 < m) ? sol.mu[l + 1] : std::numeric_limits<double>::infinity();
                    if (sol.mu[l] >= cap) continue;
                    const double add = std::min(deficit / c[l], cap - sol.mu[l]);
                    const double res =
                        std::abs(ap.pi[l] * psi(sol.mu[l] + add) - sol.eta * c[l]);
                    if (res < best_res) {
                        best_res = res;
                        best = l;
                        best_add = add;
                    }
                }
                if (best == m) break;
                sol.mu[best] += best_add;
                deficit -= best_add * c[best];
                blocked[best] = true;
            }
        }
        sol.constraint_residual = dot(c, sol.mu) - T;
    }

    // Multipliers of the ordering constraints: zero above the last all-zero
    // class, then the downward stationarity recursion through the zero block.
    std::size_t last_zero = 0; // 1-based; 0 when every class is active
    for (std::size_t l = 0; l < m; ++l)
        if (sol.mu[l] == 0.0) last_zero = l + 1;
    for (std::size_t l1 = last_zero; l1 >= 1; --l1) {
        const std::size_t l = l1 - 1;
        const double above = (l1 == last_zero) ? 0.0 : sol.nu[l + 1];
        sol.nu[l] = above + sol.eta * c[l] - ap.pi[l] * psi(sol.mu[l]);
        if (std::abs(sol.nu[l]) < 1e-15) sol.nu[l] = 0.0;
    }

    // Segment lengths and cumulative switch times from the cumulative volumes.
    sol.y.assign(m, 0.0);
    sol.t.assign(m, 0.0);
    double prev_mu = 0.0, t_acc = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        sol.y[l] = (sol.mu[l] - prev_mu) / inst.cumulative_rate(l + 1);
        prev_mu = sol.mu[l];
        t_acc += sol.y[l];
        sol.t[l] = t_acc;
    }

    const auto obj = objective(inst, kernel, sol.mu);
    sol.weighted_shortfall = obj.weighted_shortfall;
    sol.revenue = obj.revenue;
    return sol;
}

SwitchOverSolution solve_unit(const model::ProblemInstance& inst) {
    model::require_valid(inst);
    if (!inst.unit_batch())
        throw std::invalid_argument("solve_unit: instance must have unit order sizes");
    return optimize_switch_times(inst, unit_kernel(inst.inventory));
}

KktReport kkt_check(const model::ProblemInstance& inst, const Kernel& kernel,
                    const SwitchOverSolution& sol) {
    const std::size_t m = inst.classes();
    const auto ap = averaged_prices(inst);
    const auto c = budget_weights(inst);
    const double T = inst.horizon;

    KktReport rep;
    double cmu = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        cmu += c[l] * sol.mu[l];
        const double nu_next = (l + 1 < m) ? sol.nu[l + 1] : 0.0;
        const double stat =
            ap.pi[l] * kernel.response(sol.mu[l]) - sol.eta * c[l] + sol.nu[l] - nu_next;
        rep.stationarity = std::max(rep.stationarity, std::abs(stat));

        const double prev = (l == 0) ? 0.0 : sol.mu[l - 1];
        rep.primal = std::max(rep.primal, prev - sol.mu[l]);
        rep.dual = std::max(rep.dual, -sol.nu[l]);
        rep.complementarity =
            std::max(rep.complementarity, std::abs(sol.nu[l] * (sol.mu[l] - prev)));
    }
    rep.primal = std::max(rep.primal, cmu - T);
    rep.dual = std::max(rep.dual, -sol.eta);
    rep.constraint_slack = T - cmu;
    rep.complementarity = std::max(rep.complementarity, std::abs(sol.eta * (cmu - T)));
    rep.max_residual = std::max({rep.stationarity, rep.primal, rep.dual, rep.complementarity});
    return rep;
}

std::vector<double> acceptance_rates(const model::ProblemInstance& inst,
                                     const Kernel& kernel,
                                     const SwitchOverSolution& sol) {
    const std::size_t m = inst.classes();
    std::vector<double> alpha(m, 0.0);
    // Expected units sold in segment l and the class-k share lambda_k/Lambda_l
    // of them, normalized by the units class k offers over the horizon.
    std::vector<double> sold(m);
    double prev = kernel.remaining(0.0);
    for (std::size_t l = 0; l < m; ++l) {
        const double cur = kernel.remaining(sol.mu[l]);
        sold[l] = prev - cur;
        prev = cur;
    }
    for (std::size_t k = 0; k < m; ++k) {
        double units = 0.0;
        for (std::size_t l = k; l < m; ++l)
            units += sold[l] / inst.cumulative_rate(l + 1);
        alpha[k] = units / (inst.horizon * inst.batch_for(k).mean);
    }
    return alpha;
}

} // namespace sknap::switchover
