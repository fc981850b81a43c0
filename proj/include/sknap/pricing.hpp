#ifndef SKNAP_PRICING_HPP
#define SKNAP_PRICING_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "sknap/model.hpp"

namespace sknap::pricing {

enum class DemandKind {
    linear,      ///< gamma(p) = a - b p, clamped at 0
    exponential, ///< gamma(p) = a e^{-b p}
    power,       ///< gamma(p) = a p^{-b}
};

/// Price-to-arrival-rate map, optionally modulated per segment.
struct DemandFunction {
    DemandKind kind = DemandKind::linear;
    double a = 0.0;
    double b = 0.0;
    /// Optional per-segment multipliers gamma(i, p) = scale[i] * gamma(p);
    /// empty means 1 everywhere.
    std::vector<double> period_scale;

    struct Eval {
        double rate;       ///< gamma(p) >= 0
        double derivative; ///< gamma'(p) (0 in the linear clamped region)
        bool clamped;      ///< linear demand hit its zero floor
    };

    Eval at(double price) const;
    Eval at(std::size_t segment, double price) const; ///< segment is 0-based
    /// Smallest price with zero demand (linear: a/b; otherwise +infinity).
    double choke_price() const;
};

/// A markdown-pricing problem: the horizon splits into `segments` unit-length
/// segments, segment i charging price p_i with p_1 = list_price and
/// p_1 >= p_2 >= ... >= p_segments >= 0.  Demand in segment i is a Poisson
/// stream with rate demand(p_i); each order consumes batch-distributed units.
struct PricingFrame {
    int inventory = 0;
    int segments = 0;
    double list_price = 0.0;
    DemandFunction demand;
    model::BatchDistribution batch; ///< order-size law (unit by default)
};

struct PricingSolution {
    std::vector<double> prices; ///< non-increasing, prices[0] = list_price
    std::vector<double> r;      ///< markdown steps, r_i = p_i - p_{i+1} >= 0
    double objective = 0.0;     ///< expected revenue under the price path
    double eta = 0.0;           ///< multiplier of sum r = list_price
    double kkt_residual = 0.0;
    std::string method;         ///< "exact" or "approximate"
    std::string note;           ///< approximate route taken ("recursion", "fluid", ...)
    std::string warning;        ///< non-empty when a fallback was needed
};

/// Expected revenue of a price path.  With mu_i = sum_{k<=i} gamma(p_k) the
/// cumulative order volume and G the expected-remaining kernel of the batch,
///   revenue = p_1 W - sum_i r_i G(mu_i),  r as in PricingSolution.
double pricing_objective(const PricingFrame& frame,
                         const std::vector<double>& prices);

struct ExactOptions {
    int starts = 16;
    int max_iterations = 600;
    double tolerance = 1e-10;
    std::uint64_t seed = 20260814;
    /// Optional extra starting point (a prior solution's r), tried first.
    std::vector<double> warm_start;
};

/// Minimize the leftover cost sum_i r_i G(mu_i) over the simplex r >= 0,
/// sum r = list_price, by projected gradient with the analytic gradient
///   d/d r_j = G(mu_j) + sum_i r_i G'(mu_i) dmu_i/dr_j,
/// from many deterministic and random starting ladders.  Descent is
/// monotone, so the result never falls below the best start (in particular
/// never below the approximate solution used as one start).
PricingSolution solve_pricing_exact(const PricingFrame& frame,
                                    const ExactOptions& opts = {});

/// Fast approximation: propagate the stationarity recursion
///   r_j = [G(mu_{j-1}) - G(mu_j)] / (gamma'(p_j) G'(mu_j))
/// from a root search on r_1 (with the C-scaled list price retried when no
/// root exists), then compare against a certainty-equivalence ladder
/// (deterministic-demand revenue maximization) evaluated under the true
/// objective; the better of the two is returned, its route in `note`.
PricingSolution solve_pricing_approx(const PricingFrame& frame);

/// Markdown pricing with a free list price: maximize
///   F(p_1) = p_1 W - L*(p_1)
/// where L*(p_1) is the optimal leftover cost at list price p_1.  At an
/// interior optimum the budget multiplier satisfies eta = W (envelope
/// condition); `eta_gap` reports |eta - W| at the returned price.  Throws
/// std::runtime_error with the bracket endpoints and their eta values when
/// the maximum sits on the bracket boundary (eta = W unattained inside).
struct ListPriceSolution {
    double list_price = 0.0;
    PricingSolution solution;
    double eta_gap = 0.0;
};

ListPriceSolution solve_pricing_with_p1(const PricingFrame& frame,
                                        double p1_low, double p1_high,
                                        const ExactOptions& opts = {});

} // namespace sknap::pricing

#endif
