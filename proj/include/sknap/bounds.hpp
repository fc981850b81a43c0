#ifndef SKNAP_BOUNDS_HPP
#define SKNAP_BOUNDS_HPP

#include <cstdint>
#include <vector>

#include "sknap/model.hpp"

namespace sknap::bounds {

/// Closed-form bounds on the optimal expected revenue of a unit-demand
/// instance.  The demand regime is classified by where inventory W falls
/// against the cumulative demand volumes Lambda_l T:
///   scarce    Lambda_1 T > W      sell everything at the top price
///   abundant  Lambda_m T <= W     accept everyone
///   balanced  otherwise           classes 1..regime_class fit, the next
///                                 class fits for marginal_time more units
struct BoundsReport {
    double upper = 0.0;
    double lower = 0.0;
    int regime_class = 0;       ///< largest k with Lambda_k T <= W (0 when scarce)
    double marginal_time = 0.0; ///< t with Lambda_k T + lambda_{k+1} t = W
};

BoundsReport revenue_bounds(const model::ProblemInstance& inst);

/// One inventory point of the asymptotic study: demand scaled with W so the
/// relative gap (upper - lower) / upper decays like W^{-1/2}.
struct GapStudyRow {
    int inventory = 0;
    double horizon = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    double switch_revenue = 0.0; ///< optimized switch-over policy value
    double rel_gap = 0.0;        ///< (upper - switch_revenue) / upper
};

struct GapStudy {
    std::vector<GapStudyRow> rows;
    /// Least-squares slope of log(upper - switch_revenue) against log(W);
    /// about +1/2 when the absolute gap grows at the square-root rate (so
    /// the relative gap vanishes).
    double slope = 0.0;
};

/// Scale the base instance to each inventory in `inventories`, holding the
/// demand-to-capacity ratio fixed (horizon scales linearly with W).
GapStudy gap_study(const model::ProblemInstance& base,
                   const std::vector<int>& inventories);

} // namespace sknap::bounds

#endif
