#ifndef SKNAP_SWITCHOVER_HPP
#define SKNAP_SWITCHOVER_HPP

#include <functional>
#include <span>
#include <vector>

#include "sknap/model.hpp"

namespace sknap::switchover {

/// Averaged prices over the classes admitted together:
/// p1k[l] = sum_{i<=l} lambda_i p_i / Lambda_l, and the telescoping weights
/// pi[l] = p1k[l] - p1k[l+1] (pi[m] = p1k[m]).  All 0-based storage for
/// 1-based class indices l+1.
struct AveragedPrices {
    std::vector<double> p1k;
    std::vector<double> pi;
};

AveragedPrices averaged_prices(const model::ProblemInstance& inst);
AveragedPrices averaged_prices(std::span<const double> prices,
                               std::span<const double> rates);

/// Time-budget weights c_l = 1/Lambda_l - 1/Lambda_{l+1}, c_m = 1/Lambda_m;
/// the switch-time identity is sum_l c_l mu_l = sum_l y_l.
std::vector<double> budget_weights(const model::ProblemInstance& inst);

/// Expected-leftover kernel shared by the unit and batch solvers.
/// remaining(mu) = expected unsold inventory after a Poisson(mu) stream of
/// orders; response(mu) = -remaining'(mu), positive and non-increasing.
struct Kernel {
    std::function<double(double)> remaining;
    std::function<double(double)> response;
};

/// Poisson unit-demand kernel: remaining = shortfall, response = F_{W-1}.
Kernel unit_kernel(int inventory);

struct Objective {
    double weighted_shortfall; ///< sum_l pi_l * remaining(mu_l), minimized
    double revenue;            ///< p1k[0] * W - weighted_shortfall
};

Objective objective(const model::ProblemInstance& inst, const Kernel& kernel,
                    std::span<const double> mu);

/// Optimized switch-over policy.  mu are cumulative expected admitted orders
/// at the segment ends, y the segment lengths, t the cumulative switch times
/// (t[m-1] = T when the budget binds), eta the budget multiplier and nu the
/// ordering multipliers of mu_{l-1} <= mu_l.
struct SwitchOverSolution {
    std::vector<double> mu, y, t, nu;
    double eta = 0.0;
    double weighted_shortfall = 0.0;
    double revenue = 0.0;
    bool constraint_binding = false;
    double constraint_residual = 0.0;   ///< sum(c mu) - T after the solve
    bool converged = true;              ///< false only for gradient-based solvers
    double stationarity_residual = 0.0; ///< first-order residual for those solvers
};

/// Minimize sum_l pi_l * remaining(mu_l) subject to sum c_l mu_l <= T and
/// 0 <= mu_1 <= ... <= mu_m.  Bisection on eta over the per-class equations
/// pi_l * response(mu_l) = eta c_l with the zero-class rule, then a budget
/// absorption pass for the numerically flat region of response().
SwitchOverSolution optimize_switch_times(const model::ProblemInstance& inst,
                                         const Kernel& kernel);

/// Unit-demand convenience wrapper; requires a unit-batch instance.
SwitchOverSolution solve_unit(const model::ProblemInstance& inst);

/// Karush-Kuhn-Tucker residuals of a candidate solution under a kernel.
struct KktReport {
    double stationarity = 0.0;    ///< max_l |pi_l response(mu_l) - eta c_l + nu_l - nu_{l+1}|
    double primal = 0.0;          ///< constraint and ordering violations
    double dual = 0.0;            ///< negativity of eta or nu
    double complementarity = 0.0; ///< eta * (sum c mu - T) and nu_l (mu_l - mu_{l-1})
    double max_residual = 0.0;
    double constraint_slack = 0.0; ///< T - sum c mu (positive when not binding)
};

KktReport kkt_check(const model::ProblemInstance& inst, const Kernel& kernel,
                    const SwitchOverSolution& sol);

/// Per-class fraction of arriving units that the policy accepts:
/// alpha_k = sum_{l>=k} [remaining(mu_{l-1}) - remaining(mu_l)] (lambda_k / Lambda_l)
///           / (lambda_k T E[Q_k]).
std::vector<double> acceptance_rates(const model::ProblemInstance& inst,
                                     const Kernel& kernel,
                                     const SwitchOverSolution& sol);

} // namespace sknap::switchover

#endif
