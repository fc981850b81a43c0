#include "sknap/batch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>

#include "sknap/rng.hpp"

namespace sknap::batch {

double TransitionMatrix::at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * (inventory + 1) + col];
}

double& TransitionMatrix::at(int row, int col) {
    return values[static_cast<std::size_t>(row) * (inventory + 1) + col];
}

std::vector<double> TransitionMatrix::apply(const std::vector<double>& x) const {
    const int n = inventory + 1;
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (int r = 0; r < n; ++r) {
        double s = 0.0;
        const double* row = &values[static_cast<std::size_t>(r) * n];
        for (int c = 0; c <= r; ++c) s += row[c] * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = s;
    }
    return y;
}

std::vector<double> TransitionMatrix::apply_transposed(const std::vector<double>& x) const {
    const int n = inventory + 1;
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (int r = 0; r < n; ++r) {
        const double xr = x[static_cast<std::size_t>(r)];
        if (xr == 0.0) continue;
        const double* row = &values[static_cast<std::size_t>(r) * n];
        for (int c = 0; c <= r; ++c) y[static_cast<std::size_t>(c)] += xr * row[c];
    }
    return y;
}

TransitionMatrix transition_matrix(const model::BatchDistribution& batch, int inventory) {
    if (inventory < 0) throw std::invalid_argument("transition_matrix: inventory must be >= 0");
    TransitionMatrix M;
    M.inventory = inventory;
    M.values.assign(static_cast<std::size_t>(inventory + 1) * (inventory + 1), 0.0);
    for (int d = 0; d <= inventory; ++d) {
        double leave = 0.0;
        for (int j = 1; j <= d && j < static_cast<int>(batch.pmf.size()); ++j) {
            const double q = batch.pmf[static_cast<std::size_t>(j)];
            M.at(d, d - j) = q;
            leave += q;
        }
        M.at(d, d) = 1.0 - leave; // zero-size and oversize orders leave d unchanged
    }
    return M;
}

TransitionMatrix mix(const std::vector<TransitionMatrix>& mats,
                     const std::vector<double>& weights) {
    if (mats.empty() || mats.size() != weights.size())
        throw std::invalid_argument("mix: need matching non-empty matrices and weights");
    TransitionMatrix out;
    out.inventory = mats[0].inventory;
    out.values.assign(mats[0].values.size(), 0.0);
    for (std::size_t i = 0; i < mats.size(); ++i) {
        if (mats[i].inventory != out.inventory)
            throw std::invalid_argument("mix: matrices must share the inventory size");
        for (std::size_t j = 0; j < out.values.size(); ++j)
            out.values[j] += weights[i] * mats[i].values[j];
    }
    return out;
}

namespace {

// Smallest K with P(N(mu) <= K) >= 1 - eps.
std::size_t poisson_terms(double mu, double eps) {
    if (!(mu > 0.0)) return 0;
    const double lmu = std::log(mu);
    double cum = 0.0;
    std::size_t k = 0;
    const std::size_t guard = static_cast<std::size_t>(mu + 60.0 * std::sqrt(mu + 100.0)) + 200;
    while (k < guard) {
        cum += std::exp(static_cast<double>(k) * lmu - mu - std::lgamma(static_cast<double>(k) + 1.0));
        if (cum >= 1.0 - eps && static_cast<double>(k) >= mu) break;
        ++k;
    }
    return k;
}

// Poisson(mu) weights for k = 0..kmax, log-space when exp(-mu) underflows.
std::vector<double> poisson_weights(double mu, std::size_t kmax) {
    std::vector<double> w(kmax + 1, 0.0);
    if (mu == 0.0) {
        w[0] = 1.0;
        return w;
    }
    if (mu <= 700.0) {
        double term = std::exp(-mu);
        for (std::size_t k = 0; k <= kmax; ++k) {
            w[k] = term;
            term *= mu / static_cast<double>(k + 1);
        }
    } else {
        const double lmu = std::log(mu);
        for (std::size_t k = 0; k <= kmax; ++k)
            w[k] = std::exp(static_cast<double>(k) * lmu - mu -
                            std::lgamma(static_cast<double>(k) + 1.0));
    }
    return w;
}

} // namespace

RemainingKernel::RemainingKernel(const TransitionMatrix& matrix, double mu_max,
                                 double truncation_epsilon)
    : mu_max_(mu_max) {
    if (!(mu_max >= 0.0)) throw std::invalid_argument("RemainingKernel: mu_max must be >= 0");
    const std::size_t kmax = poisson_terms(mu_max, truncation_epsilon);
    // Two extra iterates so first and second differences exist at k = kmax.
    a_.reserve(kmax + 3);
    const int n = matrix.inventory + 1;
    std::vector<double> x(static_cast<std::size_t>(n));
    for (int d = 0; d < n; ++d) x[static_cast<std::size_t>(d)] = static_cast<double>(d);
    a_.push_back(x.back());
    for (std::size_t k = 0; k + 1 < kmax + 3; ++k) {
        x = matrix.apply(x);
        a_.push_back(x.back());
    }
}

RemainingKernel::Eval RemainingKernel::eval(double mu) const {
    if (!(mu >= 0.0)) throw std::invalid_argument("RemainingKernel::eval: mu must be >= 0");
    // Terms past the cache carry Poisson mass < epsilon for mu <= mu_max;
    // beyond mu_max the dropped tail only pushes the (already tiny) result
    // further toward its limit.
    const std::size_t kmax = a_.size() - 3;
    const auto w = poisson_weights(mu, kmax);
    double g = 0.0, d1 = 0.0, d2 = 0.0;
    for (std::size_t k = 0; k <= kmax; ++k) {
        g += w[k] * a_[k];
        d1 -= w[k] * (a_[k] - a_[k + 1]);
        d2 += w[k] * (a_[k] - 2.0 * a_[k + 1] + a_[k + 2]);
    }
    return Eval{g, d1, d2};
}

RemainingKernel::Eval expected_remaining(const TransitionMatrix& matrix, double mu,
                                         double truncation_epsilon) {
    return RemainingKernel(matrix, mu, truncation_epsilon).eval(mu);
}

switchover::Kernel as_kernel(const RemainingKernel& kernel) {
    switchover::Kernel k;
    k.remaining = [&kernel](double mu) { return kernel.eval(mu).value; };
    k.response = [&kernel](double mu) { return -kernel.eval(mu).derivative; };
    return k;
}

namespace {

double shared_kernel_mu_max(const model::ProblemInstance& inst) {
    // Generous cover for every volume the eta search can probe: several times
    // the most any policy admits, plus room for the deep-slack regime.
    return 4.0 * std::max(inst.total_rate() * inst.horizon,
                          static_cast<double>(inst.inventory) + 1.0) +
           64.0;
}

} // namespace

switchover::Kernel kernel_for(const model::ProblemInstance& inst,
                              double truncation_epsilon) {
    model::require_valid(inst);
    if (inst.unit_batch()) return switchover::unit_kernel(inst.inventory);
    if (!inst.homogeneous())
        throw std::invalid_argument(
            "kernel_for: price-dependent batches have no shared kernel; use "
            "solve_price_dependent");
    auto kernel = std::make_shared<RemainingKernel>(
        transition_matrix(inst.batch_for(0), inst.inventory), shared_kernel_mu_max(inst),
        truncation_epsilon);
    switchover::Kernel k;
    k.remaining = [kernel](double mu) { return kernel->eval(mu).value; };
    k.response = [kernel](double mu) { return -kernel->eval(mu).derivative; };
    return k;
}

switchover::SwitchOverSolution solve_homogeneous(const model::ProblemInstance& inst,
                                                 double truncation_epsilon) {
    return switchover::optimize_switch_times(inst, kernel_for(inst, truncation_epsilon));
}

std::vector<TransitionMatrix> mixture_matrices(const model::ProblemInstance& inst) {
    model::require_valid(inst);
    const std::size_t m = inst.classes();
    std::vector<TransitionMatrix> per_class;
    per_class.reserve(m);
    for (std::size_t i = 0; i < m; ++i)
        per_class.push_back(transition_matrix(inst.batch_for(i), inst.inventory));

    std::vector<TransitionMatrix> gammas;
    gammas.reserve(m);
    for (std::size_t l = 0; l < m; ++l) {
        const double lam_l = inst.cumulative_rate(l + 1);
        std::vector<TransitionMatrix> head(per_class.begin(), per_class.begin() + l + 1);
        std::vector<double> w(l + 1);
        for (std::size_t j = 0; j <= l; ++j) w[j] = inst.rates[j] / lam_l;
        gammas.push_back(mix(head, w));
    }
    return gammas;
}

namespace {

// rho <- exp(volume (M - I)) rho by uniformization: the Poisson-weighted
// series of row actions, truncated at tail mass eps.
void propagate(std::vector<double>& rho, const TransitionMatrix& M, double volume,
               double eps) {
    if (volume <= 0.0) return;
    const std::size_t kmax = poisson_terms(volume, eps);
    const auto w = poisson_weights(volume, kmax);
    std::vector<double> acc(rho.size(), 0.0);
    std::vector<double> iter = rho;
    for (std::size_t k = 0; k <= kmax; ++k) {
        for (std::size_t d = 0; d < rho.size(); ++d) acc[d] += w[k] * iter[d];
        if (k < kmax) iter = M.apply_transposed(iter);
    }
    rho = std::move(acc);
}

double expected_state(const std::vector<double>& rho) {
    double e = 0.0;
    for (std::size_t d = 0; d < rho.size(); ++d) e += static_cast<double>(d) * rho[d];
    return e;
}

void check_feasible_y(const model::ProblemInstance& inst, const std::vector<double>& y) {
    if (y.size() != inst.classes())
        throw std::invalid_argument("segment lengths: size must match the class count");
    double total = 0.0;
    for (double v : y) {
        if (v < -1e-9) throw std::invalid_argument("segment lengths: negative entry");
        total += std::max(v, 0.0);
    }
    if (total > inst.horizon * (1.0 + 1e-9) + 1e-9)
        throw std::invalid_argument("segment lengths: sum exceeds the horizon");
}

} // namespace

double price_dependent_objective(const model::ProblemInstance& inst,
                                 const std::vector<double>& y,
                                 const PriceDependentOptions& opts) {
    model::require_valid(inst);
    check_feasible_y(inst, y);
    const std::size_t m = inst.classes();
    const auto gammas = mixture_matrices(inst);
    const auto ap = switchover::averaged_prices(inst);

    std::vector<double> rho(static_cast<std::size_t>(inst.inventory) + 1, 0.0);
    rho.back() = 1.0;

    double objective = 0.0;
    if (!opts.sum_form) {
        // Ordered product: push the state distribution through the segments.
        for (std::size_t l = 0; l < m; ++l) {
            const double volume = inst.cumulative_rate(l + 1) * std::max(y[l], 0.0);
            propagate(rho, gammas[l], volume, opts.truncation_epsilon);
            objective += ap.pi[l] * expected_state(rho);
        }
    } else {
        // exp of the summed generators: mu_l B with B the volume-weighted
        // mixture of the segment matrices (the matrices' order is lost; equal
        // to the ordered product only when the Gamma_l commute).
        for (std::size_t l = 0; l < m; ++l) {
            double mu_l = 0.0;
            for (std::size_t k = 0; k <= l; ++k)
                mu_l += inst.cumulative_rate(k + 1) * std::max(y[k], 0.0);
            double g;
            if (mu_l <= 0.0) {
                g = static_cast<double>(inst.inventory);
            } else {
                std::vector<TransitionMatrix> head(gammas.begin(), gammas.begin() + l + 1);
                std::vector<double> w(l + 1);
                for (std::size_t k = 0; k <= l; ++k)
                    w[k] = inst.cumulative_rate(k + 1) * std::max(y[k], 0.0) / mu_l;
                const TransitionMatrix B = mix(head, w);
                std::vector<double> r(static_cast<std::size_t>(inst.inventory) + 1, 0.0);
                r.back() = 1.0;
                propagate(r, B, mu_l, opts.truncation_epsilon);
                g = expected_state(r);
            }
            objective += ap.pi[l] * g;
        }
    }
    return objective;
}

double price_dependent_revenue(const model::ProblemInstance& inst,
                               const std::vector<double>& y,
                               const PriceDependentOptions& opts) {
    const auto ap = switchover::averaged_prices(inst);
    return ap.p1k[0] * inst.inventory - price_dependent_objective(inst, y, opts);
}

namespace {

// Euclidean projection onto {y >= 0, sum y <= budget}.
std::vector<double> project_box_simplex(std::vector<double> y, double budget) {
    for (double& v : y) v = std::max(v, 0.0);
    double total = std::accumulate(y.begin(), y.end(), 0.0);
    if (total <= budget) return y;
    // Project onto the simplex {sum = budget, y >= 0}: shift every active
    // coordinate down by the largest theta keeping them positive.
    std::vector<double> u = y;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        const double cand = (cum - budget) / static_cast<double>(k + 1);
        if (u[k] > cand) theta = cand;
        else break;
    }
    for (double& v : y) v = std::max(v - theta, 0.0);
    return y;
}

} // namespace

switchover::SwitchOverSolution solve_price_dependent(const model::ProblemInstance& inst,
                                                     const PriceDependentOptions& opts) {
    model::require_valid(inst);
    const std::size_t m = inst.classes();
    const double T = inst.horizon;

    auto objective_of = [&](const std::vector<double>& y) {
        return price_dependent_objective(inst, y, opts);
    };

    // Starting ladders: equal-spaced, everything-late, everything-early, the
    // shared-batch warm start, then random feasible points.
    std::vector<std::vector<double>> starts;
    starts.emplace_back(m, T / static_cast<double>(m));
    {
        std::vector<double> late(m, 0.0);
        late.back() = T;
        starts.push_back(std::move(late));
        std::vector<double> early(m, 0.0);
        early.front() = T;
        starts.push_back(std::move(early));
    }
    {
        // Rate-weighted average of the per-class batch laws as a shared batch.
        model::ProblemInstance shared = inst;
        std::vector<double> pmf(static_cast<std::size_t>(inst.inventory) + 1, 0.0);
        double overflow = 0.0, mean = 0.0;
        const double lam = inst.total_rate();
        for (std::size_t i = 0; i < m; ++i) {
            const auto& b = inst.batch_for(i);
            const double w = inst.rates[i] / lam;
            for (std::size_t j = 0; j < pmf.size(); ++j) pmf[j] += w * b.pmf[j];
            overflow += w * b.overflow;
            mean += w * b.mean;
        }
        shared.batches = {model::BatchDistribution::from_pmf(pmf, overflow, mean)};
        try {
            starts.push_back(solve_homogeneous(shared, opts.truncation_epsilon).y);
        } catch (const std::exception&) {
            // warm start is best-effort only
        }
    }
    rng::CounterRng gen(opts.seed, 0, 0);
    while (starts.size() < static_cast<std::size_t>(std::max(opts.starts, 1))) {
        std::vector<double> y(m);
        double total = 0.0;
        for (double& v : y) {
            v = gen.uniform();
            total += v;
        }
        const double scale = T * (0.35 + 0.6 * gen.uniform()) / std::max(total, 1e-12);
        for (double& v : y) v *= scale;
        starts.push_back(project_box_simplex(std::move(y), T));
    }

    std::vector<double> best_y;
    double best_obj = std::numeric_limits<double>::infinity();
    bool best_converged = false;

    for (auto y : starts) {
        y = project_box_simplex(std::move(y), T);
        double f = objective_of(y);
        bool converged = false;
        double step = std::max(T / static_cast<double>(m), 1.0);
        for (int it = 0; it < opts.max_iterations; ++it) {
            // Central-difference gradient with projected probe points.
            std::vector<double> grad(m, 0.0);
            for (std::size_t k = 0; k < m; ++k) {
                const double h = 1e-5 * std::max(1.0, y[k]);
                auto up = y, dn = y;
                up[k] += h;
                dn[k] -= h;
                up = project_box_simplex(std::move(up), T);
                dn = project_box_simplex(std::move(dn), T);
                const double span = up[k] - dn[k];
                grad[k] = span > 0.0 ? (objective_of(up) - objective_of(dn)) / span : 0.0;
            }

            bool improved = false;
            double trial_step = step;
            for (int bt = 0; bt < 40; ++bt) {
                std::vector<double> cand(m);
                for (std::size_t k = 0; k < m; ++k) cand[k] = y[k] - trial_step * grad[k];
                cand = project_box_simplex(std::move(cand), T);
                const double fc = objective_of(cand);
                if (fc < f - 1e-15) {
                    const double drop = f - fc;
                    y = std::move(cand);
                    f = fc;
                    step = trial_step * 2.0;
                    improved = true;
                    if (drop < opts.tolerance) converged = true;
                    break;
                }
                trial_step *= 0.5;
            }
            if (!improved) {
                converged = true;
                break;
            }
            if (converged) break;
        }
        if (f < best_obj) {
            best_obj = f;
            best_y = y;
            best_converged = converged;
        }
    }

    const auto ap = switchover::averaged_prices(inst);
    switchover::SwitchOverSolution sol;
    sol.y = best_y;
    sol.mu.assign(m, 0.0);
    sol.t.assign(m, 0.0);
    sol.nu.assign(m, 0.0);
    double mu_acc = 0.0, t_acc = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        mu_acc += inst.cumulative_rate(l + 1) * best_y[l];
        t_acc += best_y[l];
        sol.mu[l] = mu_acc;
        sol.t[l] = t_acc;
    }
    sol.weighted_shortfall = best_obj;
    sol.revenue = ap.p1k[0] * inst.inventory - best_obj;
    sol.converged = best_converged;
    sol.constraint_binding = t_acc >= T - 1e-6;
    sol.constraint_residual = t_acc - T;

    // First-order report: the projected-gradient displacement at a small step.
    {
        const double s = 1e-6 * std::max(1.0, T);
        std::vector<double> grad(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            const double h = 1e-5 * std::max(1.0, best_y[k]);
            auto up = best_y, dn = best_y;
            up[k] += h;
            dn[k] -= h;
            up = project_box_simplex(std::move(up), T);
            dn = project_box_simplex(std::move(dn), T);
            const double span = up[k] - dn[k];
            grad[k] = span > 0.0 ? (objective_of(up) - objective_of(dn)) / span : 0.0;
        }
        std::vector<double> moved(m);
        for (std::size_t k = 0; k < m; ++k) moved[k] = best_y[k] - s * grad[k];
        moved = project_box_simplex(std::move(moved), T);
        double res = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            res = std::max(res, std::abs(moved[k] - best_y[k]) / s);
        sol.stationarity_residual = res;
    }
    return sol;
}

} // namespace sknap::batch
