#ifndef SKNAP_DP_HPP
#define SKNAP_DP_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "sknap/model.hpp"

namespace sknap::dp {

/// Optimal expected revenue-to-go V(n, d) for periods n = 1..periods+1 and
/// remaining inventory d = 0..inventory.  Row periods+1 is the zero boundary.
class ValueTable {
public:
    ValueTable(int periods, int inventory);

    double at(int period, int remaining) const;
    double& at(int period, int remaining);
    int periods() const { return periods_; }
    int inventory() const { return inventory_; }
    double optimal_value() const { return at(1, inventory_); }

private:
    int periods_;
    int inventory_;
    std::vector<double> values_;
};

/// Backward recursion
///   V(n, d) = V(n+1, d) + sum_i sum_{1<=j<=d} theta_ij
///             * max(p_i j + V(n+1, d-j) - V(n+1, d), 0)
/// with V(periods+1, .) = 0.  Work is O(periods * W * m * support); the
/// inventory loop of each period is independent and runs under OpenMP.
ValueTable solve(const model::DiscretizedInstance& inst);

/// Identical arithmetic on one thread; kept as the reference implementation
/// (results are bitwise equal to solve()).
ValueTable solve_serial(const model::DiscretizedInstance& inst);

/// Accept/reject for an order of size qty from class cls (0-based) in period
/// n with d units left: accepted iff qty <= d and
/// p_cls * qty + V(n+1, d-qty) >= V(n+1, d) (ties accept).
/// Throws std::out_of_range for states outside the table.
bool accept(const ValueTable& table, const model::DiscretizedInstance& inst,
            int period, int remaining, std::size_t cls, int qty);

/// First accepting period per (class, inventory) for a unit-batch instance,
/// plus any violations of the threshold structure (acceptance must be an
/// up-set in n).  first_accept[k][d] = periods+1 when class k is never
/// accepted at inventory d (always the case at d = 0).
struct ThresholdProfile {
    std::vector<std::vector<int>> first_accept; ///< classes x (W + 1)
    std::vector<std::string> violations;
};

/// Requires a unit-batch discretization (all size mass at j = 1).
ThresholdProfile extract_thresholds(const ValueTable& table,
                                    const model::DiscretizedInstance& inst);

/// Structural diagnostics on a solved table: maximum violation of concavity
/// in d (second difference > 0) and of the decreasing marginal value of
/// inventory over time (V(n,d) - V(n,d-1) must not grow as n advances).
struct StructureReport {
    double max_concavity_violation = 0.0;
    double max_submodularity_violation = 0.0;
};

StructureReport structure_report(const ValueTable& table);

/// CSV dump: period,remaining,value rows.
void write_csv(const ValueTable& table, std::ostream& out);

} // namespace sknap::dp

#endif
