#include "sknap/pricing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "sknap/batch.hpp"
#include "sknap/poisson.hpp"
#include "sknap/rng.hpp"

namespace sknap::pricing {

namespace {

constexpr double kRateCap = 1e9; // keeps power demand finite as price -> 0

} // namespace

DemandFunction::Eval DemandFunction::at(double price) const {
    switch (kind) {
    case DemandKind::linear: {
        const double rate = a - b * price;
        if (rate <= 0.0) return Eval{0.0, 0.0, true};
        return Eval{rate, -b, false};
    }
    case DemandKind::exponential: {
        const double rate = a * std::exp(-b * price);
        return Eval{rate, -b * rate, false};
    }
    case DemandKind::power: {
        if (price <= 0.0) return Eval{kRateCap, 0.0, true};
        const double rate = a * std::pow(price, -b);
        if (rate >= kRateCap) return Eval{kRateCap, 0.0, true};
        return Eval{rate, -(b / price) * rate, false};
    }
    }
    throw std::logic_error("DemandFunction: unknown kind");
}

DemandFunction::Eval DemandFunction::at(std::size_t segment, double price) const {
    Eval e = at(price);
    if (!period_scale.empty()) {
        const double s = period_scale.at(segment);
        e.rate *= s;
        e.derivative *= s;
    }
    return e;
}

double DemandFunction::choke_price() const {
    if (kind == DemandKind::linear) return a / b;
    return std::numeric_limits<double>::infinity();
}

namespace {

void check_frame(const PricingFrame& frame) {
    if (frame.inventory < 0) throw std::invalid_argument("pricing: inventory must be >= 0");
    if (frame.segments < 1) throw std::invalid_argument("pricing: need at least one segment");
    if (!(frame.list_price > 0.0))
        throw std::invalid_argument("pricing: list price must be > 0");
    if (!(frame.demand.a > 0.0) || !(frame.demand.b > 0.0))
        throw std::invalid_argument("pricing: demand parameters must be > 0");
    if (!frame.demand.period_scale.empty() &&
        frame.demand.period_scale.size() != static_cast<std::size_t>(frame.segments))
        throw std::invalid_argument("pricing: period_scale size must match segments");
    if (frame.batch.pmf.size() != static_cast<std::size_t>(frame.inventory) + 1)
        throw std::invalid_argument("pricing: batch pmf must cover sizes 0..inventory");
}

// Leftover kernel closed over the frame's batch: closed-form Poisson
// shortfall for unit orders, Poisson-mixed matrix powers otherwise.
struct LeftoverKernel {
    std::shared_ptr<batch::RemainingKernel> matrix_kernel; // null for unit batch
    int inventory = 0;

    struct GE {
        double value;
        double derivative;
    };
    GE operator()(double mu) const {
        if (!matrix_kernel) {
            const auto h = poisson::shortfall(inventory, mu);
            return GE{h.value, h.derivative};
        }
        const auto g = matrix_kernel->eval(mu);
        return GE{g.value, g.derivative};
    }
};

LeftoverKernel make_kernel(const PricingFrame& frame) {
    LeftoverKernel k;
    k.inventory = frame.inventory;
    if (!frame.batch.is_unit()) {
        k.matrix_kernel = std::make_shared<batch::RemainingKernel>(
            batch::transition_matrix(frame.batch, frame.inventory),
            8.0 * (frame.inventory + 1.0) + 64.0);
    }
    return k;
}

std::vector<double> prices_from_r(const std::vector<double>& r) {
    std::vector<double> p(r.size());
    double suffix = 0.0;
    for (std::size_t i = r.size(); i-- > 0;) {
        suffix += r[i];
        p[i] = suffix;
    }
    return p;
}

std::vector<double> r_from_prices(const std::vector<double>& p) {
    std::vector<double> r(p.size());
    for (std::size_t i = 0; i + 1 < p.size(); ++i) r[i] = p[i] - p[i + 1];
    r.back() = p.back();
    return r;
}

std::vector<double> volumes(const PricingFrame& frame, const std::vector<double>& p) {
    std::vector<double> mu(p.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        acc += frame.demand.at(i, p[i]).rate;
        mu[i] = acc;
    }
    return mu;
}

// Leftover cost sum_i r_i G(mu_i).
double leftover_cost(const PricingFrame& frame, const LeftoverKernel& kernel,
                     const std::vector<double>& r) {
    const auto p = prices_from_r(r);
    const auto mu = volumes(frame, p);
    double cost = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) cost += r[i] * kernel(mu[i]).value;
    return cost;
}

// Analytic gradient of the leftover cost:
//   d/dr_j = G(mu_j) + sum_i r_i G'(mu_i) Gamma'_{min(i,j)},
// Gamma'_l = sum_{k<=l} gamma'(p_k) (each price p_k = r_k + ... + r_m moves
// with every r_j, j >= k, hence the min).
std::vector<double> leftover_gradient(const PricingFrame& frame,
                                      const LeftoverKernel& kernel,
                                      const std::vector<double>& r) {
    const std::size_t m = r.size();
    const auto p = prices_from_r(r);
    std::vector<double> gprime(m), gval(m), cum_deriv(m);
    {
        double acc_rate = 0.0, acc_deriv = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const auto e = frame.demand.at(k, p[k]);
            acc_rate += e.rate;
            acc_deriv += e.derivative;
            cum_deriv[k] = acc_deriv;
            const auto ge = kernel(acc_rate);
            gval[k] = ge.value;
            gprime[k] = ge.derivative;
        }
    }
    std::vector<double> grad(m);
    for (std::size_t j = 0; j < m; ++j) {
        double s = gval[j];
        for (std::size_t i = 0; i < m; ++i)
            s += r[i] * gprime[i] * cum_deriv[std::min(i, j)];
        grad[j] = s;
    }
    return grad;
}

// Euclidean projection onto the scaled simplex {r >= 0, sum r = total}.
std::vector<double> project_simplex(std::vector<double> r, double total) {
    std::vector<double> u = r;
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) {
        cum += u[k];
        const double cand = (cum - total) / static_cast<double>(k + 1);
        if (u[k] > cand) theta = cand;
        else break;
    }
    for (double& v : r) v = std::max(v - theta, 0.0);
    return r;
}

// Multiplier estimate and stationarity residual of the simplex first-order
// conditions at r: active coordinates share d/dr_j = eta, inactive ones sit
// at d/dr_j >= eta.
void fill_kkt(const PricingFrame& frame, const LeftoverKernel& kernel,
              PricingSolution& sol) {
    const auto grad = leftover_gradient(frame, kernel, sol.r);
    double eta = 0.0;
    std::size_t active = 0;
    for (std::size_t j = 0; j < sol.r.size(); ++j) {
        if (sol.r[j] > 1e-12) {
            eta += grad[j];
            ++active;
        }
    }
    eta = active ? eta / static_cast<double>(active) : grad[0];
    double res = 0.0;
    for (std::size_t j = 0; j < sol.r.size(); ++j) {
        if (sol.r[j] > 1e-12) res = std::max(res, std::abs(grad[j] - eta));
        else res = std::max(res, std::max(0.0, eta - grad[j]));
    }
    sol.eta = eta;
    sol.kkt_residual = res;
}

PricingSolution finish_solution(const PricingFrame& frame, const LeftoverKernel& kernel,
                                std::vector<double> r, std::string method) {
    PricingSolution sol;
    sol.r = std::move(r);
    sol.prices = prices_from_r(sol.r);
    sol.objective = frame.list_price * frame.inventory - leftover_cost(frame, kernel, sol.r);
    sol.method = std::move(method);
    fill_kkt(frame, kernel, sol);
    return sol;
}

} // namespace

double pricing_objective(const PricingFrame& frame, const std::vector<double>& prices) {
    check_frame(frame);
    if (prices.size() != static_cast<std::size_t>(frame.segments))
        throw std::invalid_argument("pricing_objective: prices size must match segments");
    if (std::abs(prices[0] - frame.list_price) > 1e-9 * std::max(1.0, frame.list_price))
        throw std::invalid_argument("pricing_objective: prices[0] must equal the list price");
    for (std::size_t i = 0; i + 1 < prices.size(); ++i) {
        if (prices[i] < prices[i + 1] - 1e-12)
            throw std::invalid_argument("pricing_objective: prices must be non-increasing");
    }
    if (prices.back() < -1e-12)
        throw std::invalid_argument("pricing_objective: prices must be >= 0");

    const auto kernel = make_kernel(frame);
    return frame.list_price * frame.inventory -
           leftover_cost(frame, kernel, r_from_prices(prices));
}

PricingSolution solve_pricing_exact(const PricingFrame& frame, const ExactOptions& opts) {
    check_frame(frame);
    const std::size_t m = static_cast<std::size_t>(frame.segments);
    const double p1 = frame.list_price;
    const auto kernel = make_kernel(frame);

    if (m == 1) {
        auto sol = finish_solution(frame, kernel, {p1}, "exact");
        return sol;
    }

    // Deterministic starts: caller warm start, uniform, geometric ladders
    // both ways, the approximate solution, then random simplex points.
    std::vector<std::vector<double>> starts;
    if (opts.warm_start.size() == m) {
        bool finite = true;
        for (double v : opts.warm_start) finite = finite && std::isfinite(v);
        if (finite) starts.push_back(opts.warm_start);
    }
    starts.emplace_back(m, p1 / static_cast<double>(m));
    for (double ratio : {0.3, 0.5, 0.7}) {
        std::vector<double> fwd(m), rev(m);
        double w = 1.0, total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            fwd[i] = w;
            total += w;
            w *= ratio;
        }
        for (std::size_t i = 0; i < m; ++i) {
            fwd[i] *= p1 / total;
            rev[m - 1 - i] = fwd[i];
        }
        starts.push_back(std::move(fwd));
        starts.push_back(std::move(rev));
    }
    try {
        starts.push_back(solve_pricing_approx(frame).r);
    } catch (const std::exception&) {
        // warm start is best-effort
    }
    rng::CounterRng gen(opts.seed, 0, 0);
    while (starts.size() < static_cast<std::size_t>(std::max(opts.starts, 1))) {
        std::vector<double> r(m);
        double total = 0.0;
        for (double& v : r) {
            v = -std::log(std::max(gen.uniform(), 1e-300)); // exponential spacings
            total += v;
        }
        for (double& v : r) v *= p1 / total;
        starts.push_back(std::move(r));
    }

    std::vector<double> best_r;
    double best_cost = std::numeric_limits<double>::infinity();
    bool any_converged = false;

    for (auto r : starts) {
        r = project_simplex(std::move(r), p1);
        double f = leftover_cost(frame, kernel, r);
        bool converged = false;
        double step = p1;
        for (int it = 0; it < opts.max_iterations; ++it) {
            const auto grad = leftover_gradient(frame, kernel, r);
            bool improved = false;
            double trial = step;
            for (int bt = 0; bt < 50; ++bt) {
                std::vector<double> cand(m);
                for (std::size_t k = 0; k < m; ++k) cand[k] = r[k] - trial * grad[k];
                cand = project_simplex(std::move(cand), p1);
                const double fc = leftover_cost(frame, kernel, cand);
                if (fc < f - 1e-16) {
                    const double drop = f - fc;
                    r = std::move(cand);
                    f = fc;
                    step = trial * 2.0;
                    improved = true;
                    if (drop < opts.tolerance) converged = true;
                    break;
                }
                trial *= 0.5;
            }
            if (!improved) {
                converged = true;
                break;
            }
            if (converged) break;
        }
        any_converged = any_converged || converged;
        if (f < best_cost) {
            best_cost = f;
            best_r = r;
        }
    }

    auto sol = finish_solution(frame, kernel, std::move(best_r), "exact");
    if (!any_converged) sol.warning = "no start met the descent tolerance";
    return sol;
}

namespace {

struct ChainResult {
    std::vector<double> r;
    double excess = 0.0; // sum r - scaled list price
    bool negative_step = false;
    bool price_underflow = false;

    bool valid() const { return !negative_step && !price_underflow; }
};

// The approximation recursion at scaled list price P1 = C p1: given r_1,
// each later step follows from stationarity with the second-order term
// dropped.  Failure modes: a price driven to zero or below (sum of steps
// exceeded P1), or a negative step (recursion left the feasible region).
ChainResult recursion_chain(const PricingFrame& frame, const LeftoverKernel& kernel,
                            double scaled_p1, double r1) {
    const std::size_t m = static_cast<std::size_t>(frame.segments);
    ChainResult out;
    out.r.assign(m, 0.0);
    out.r[0] = r1;
    double used = r1;
    double price = scaled_p1;
    double mu_prev = frame.demand.at(0, price).rate;
    double g_prev = kernel(mu_prev).value;
    for (std::size_t j = 1; j < m; ++j) {
        price = scaled_p1 - used;
        if (price <= 0.0) {
            out.price_underflow = true;
            return out;
        }
        const auto de = frame.demand.at(j, price);
        const double mu_j = mu_prev + de.rate;
        const auto ge = kernel(mu_j);
        const double denom = de.derivative * ge.derivative; // product of two negatives
        double rj;
        if (std::abs(denom) < 1e-300) {
            rj = 0.0; // 0/0 regime: both sold out and demand saturated
        } else {
            rj = (g_prev - ge.value) / denom;
        }
        if (rj < 0.0) {
            out.negative_step = true;
            return out;
        }
        out.r[j] = rj;
        used += rj;
        mu_prev = mu_j;
        g_prev = ge.value;
    }
    out.excess = used - scaled_p1;
    return out;
}

// Best root of excess(r_1) = 0 on (0, scaled_p1], judged by the true
// objective after descaling.  Returns the descaled step vector, or empty.
std::vector<double> best_recursion_root(const PricingFrame& frame,
                                        const LeftoverKernel& kernel, double C) {
    const double P1 = C * frame.list_price;
    constexpr int kGrid = 400;
    std::vector<double> grid(kGrid), excess(kGrid);
    std::vector<bool> ok(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        grid[i] = P1 * (static_cast<double>(i) + 1.0) / kGrid;
        const auto res = recursion_chain(frame, kernel, P1, grid[i]);
        ok[i] = res.valid();
        excess[i] = res.excess;
    }

    std::vector<double> best;
    double best_cost = std::numeric_limits<double>::infinity();
    auto consider = [&](double r1) {
        auto res = recursion_chain(frame, kernel, P1, r1);
        if (!res.valid()) return;
        for (double& v : res.r) v /= C;
        // Descale and re-normalize the tiny bisection slack onto r_1.
        double total = std::accumulate(res.r.begin(), res.r.end(), 0.0);
        res.r[0] += frame.list_price - total;
        if (res.r[0] < 0.0) return;
        const double cost = leftover_cost(frame, kernel, res.r);
        if (cost < best_cost) {
            best_cost = cost;
            best = res.r;
        }
    };

    for (int i = 0; i + 1 < kGrid; ++i) {
        if (!ok[i] || !ok[i + 1]) continue;
        const bool crosses_up = excess[i] < 0.0 && excess[i + 1] >= 0.0;
        const bool crosses_down = excess[i] >= 0.0 && excess[i + 1] < 0.0;
        if (!crosses_up && !crosses_down) continue;
        double lo = grid[i], hi = grid[i + 1];
        for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto res = recursion_chain(frame, kernel, P1, mid);
            const bool below = res.valid() ? (res.excess < 0.0) : crosses_up;
            if (below == crosses_up) lo = mid;
            else hi = mid;
        }
        consider(0.5 * (lo + hi));
    }
    return best;
}

// Certainty-equivalence ladder: all markdown segments share the price
// maximizing (p - nu) gamma(p), with the shadow cost nu raised until the
// expected unit demand fits the inventory.
std::vector<double> fluid_ladder(const PricingFrame& frame) {
    const std::size_t m = static_cast<std::size_t>(frame.segments);
    const double p1 = frame.list_price;
    std::vector<double> prices(m, p1);
    if (m == 1) return prices;

    const double mean = frame.batch.mean;
    auto scale = [&](std::size_t j) {
        return frame.demand.period_scale.empty() ? 1.0 : frame.demand.period_scale[j];
    };

    // Capacity left for the markdown segments after the committed full-price
    // segment, in orders.
    const double cap_rest =
        static_cast<double>(frame.inventory) / mean - frame.demand.at(0, p1).rate;
    if (cap_rest <= 0.0) return prices; // no room to discount anything

    // argmax_p (p - nu) gamma(p), clamped into (0, p1].
    auto price_of_nu = [&](double nu) {
        double p;
        switch (frame.demand.kind) {
        case DemandKind::linear: p = 0.5 * (frame.demand.a / frame.demand.b + nu); break;
        case DemandKind::exponential: p = nu + 1.0 / frame.demand.b; break;
        case DemandKind::power:
            if (frame.demand.b <= 1.0) return p1; // revenue rate increasing in p
            p = nu * frame.demand.b / (frame.demand.b - 1.0);
            break;
        default: p = p1;
        }
        return std::clamp(p, 1e-12, p1);
    };
    auto demand_rest = [&](double nu) {
        const double p = price_of_nu(nu);
        double total = 0.0;
        for (std::size_t j = 1; j < m; ++j) total += scale(j) * frame.demand.at(p).rate;
        return total;
    };

    double nu = 0.0;
    if (demand_rest(0.0) > cap_rest) {
        double lo = 0.0, hi = 1.0;
        while (demand_rest(hi) > cap_rest && hi < 1e12) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (demand_rest(mid) > cap_rest) lo = mid;
            else hi = mid;
        }
        nu = hi;
    }
    const double markdown = price_of_nu(nu);
    for (std::size_t j = 1; j < m; ++j) prices[j] = markdown;
    return prices;
}

} // namespace

PricingSolution solve_pricing_approx(const PricingFrame& frame) {
    check_frame(frame);
    const auto kernel = make_kernel(frame);
    const std::size_t m = static_cast<std::size_t>(frame.segments);

    if (m == 1) {
        auto sol = finish_solution(frame, kernel, {frame.list_price}, "approximate");
        sol.note = "recursion";
        return sol;
    }

    // Literal pipeline: recursion at C = 1, then the scaled retries.
    std::vector<double> recursion_r = best_recursion_root(frame, kernel, 1.0);
    std::string route = "recursion";
    if (recursion_r.empty()) {
        for (double C = 10.0; C <= 1e4; C *= 2.0) {
            recursion_r = best_recursion_root(frame, kernel, C);
            if (!recursion_r.empty()) {
                std::ostringstream os;
                os << "recursion(C=" << C << ")";
                route = os.str();
                break;
            }
        }
    }

    // Certainty-equivalence ladder, judged under the same true objective.
    const auto fluid_r = r_from_prices(fluid_ladder(frame));

    const double fluid_cost = leftover_cost(frame, kernel, fluid_r);
    const double rec_cost = recursion_r.empty()
                                ? std::numeric_limits<double>::infinity()
                                : leftover_cost(frame, kernel, recursion_r);

    PricingSolution sol;
    if (rec_cost <= fluid_cost) {
        sol = finish_solution(frame, kernel, std::move(recursion_r), "approximate");
        sol.note = route;
    } else {
        sol = finish_solution(frame, kernel, fluid_r, "approximate");
        sol.note = "fluid";
        if (recursion_r.empty())
            sol.warning = "stationarity recursion found no feasible ladder; "
                          "using certainty-equivalence prices";
    }
    return sol;
}

ListPriceSolution solve_pricing_with_p1(const PricingFrame& frame, double p1_low,
                                        double p1_high, const ExactOptions& opts) {
    if (!(p1_low > 0.0) || !(p1_high > p1_low))
        throw std::invalid_argument("solve_pricing_with_p1: need 0 < p1_low < p1_high");

    auto solve_at = [&](double p1) {
        PricingFrame f = frame;
        f.list_price = p1;
        return solve_pricing_exact(f, opts);
    };

    // Coarse grid, then two refinement rounds around the best point.
    const int kCoarse = 33;
    double best_p1 = p1_low;
    double best_obj = -std::numeric_limits<double>::infinity();
    auto probe = [&](double p1) {
        const auto s = solve_at(p1);
        if (s.objective > best_obj) {
            best_obj = s.objective;
            best_p1 = p1;
        }
    };
    const double coarse_step = (p1_high - p1_low) / (kCoarse - 1);
    for (int i = 0; i < kCoarse; ++i) probe(p1_low + coarse_step * i);

    double span = coarse_step;
    for (int round = 0; round < 3; ++round) {
        const double lo = std::max(p1_low, best_p1 - span);
        const double hi = std::min(p1_high, best_p1 + span);
        for (int i = 0; i <= 16; ++i) probe(lo + (hi - lo) * i / 16.0);
        span = (hi - lo) / 8.0;
    }

    if (best_p1 <= p1_low + 1e-12 || best_p1 >= p1_high - 1e-12) {
        const auto lo_sol = solve_at(p1_low);
        const auto hi_sol = solve_at(p1_high);
        std::ostringstream os;
        os << "eta = inventory not attained inside [" << p1_low << ", " << p1_high
           << "]: eta(" << p1_low << ") = " << lo_sol.eta << ", eta(" << p1_high
           << ") = " << hi_sol.eta << " vs inventory " << frame.inventory;
        throw std::runtime_error(os.str());
    }

    ListPriceSolution out;
    out.list_price = best_p1;
    out.solution = solve_at(best_p1);
    out.eta_gap = std::abs(out.solution.eta - static_cast<double>(frame.inventory));
    return out;
}

} // namespace sknap::pricing
