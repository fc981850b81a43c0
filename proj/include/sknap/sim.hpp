#ifndef SKNAP_SIM_HPP
#define SKNAP_SIM_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sknap/dp.hpp"
#include "sknap/model.hpp"

namespace sknap::sim {

/// One arriving order inside a replication.
struct Event {
    double time = 0.0;
    std::size_t cls = 0; ///< 0-based class
    int quantity = 0;    ///< drawn order size (inventory + 1 encodes overflow)
};

enum class PolicyKind {
    switch_over, ///< admit class i while time > t_{i-1}
    fcfs,        ///< admit every class from time 0
    equal_spaced,///< switch-over with t_k = k T / m
    dp_table,    ///< follow a solved value table's accept rule
};

/// Admission policy evaluated against a common event stream.
struct Policy {
    PolicyKind kind = PolicyKind::fcfs;
    std::string label;
    /// switch_over: cumulative opening times t_1..t_m (class 1 opens at 0;
    /// t_m is unused for admission and conventionally T).
    std::vector<double> switch_times;
    /// dp_table: the solved table and the discretization it was built on.
    std::shared_ptr<const dp::ValueTable> table;
    std::shared_ptr<const model::DiscretizedInstance> discretization;

    static Policy switch_over_policy(std::vector<double> times,
                                     std::string label = "switch_over");
    static Policy fcfs_policy();
    static Policy equal_spaced_policy(const model::ProblemInstance& inst);
    static Policy dp_policy(std::shared_ptr<const dp::ValueTable> table,
                            std::shared_ptr<const model::DiscretizedInstance> disc);
};

struct SimEstimate {
    double mean = 0.0;
    double ci99 = 0.0; ///< 2.576 * stddev / sqrt(replications)
    std::uint64_t replications = 0;
    std::uint64_t seed = 0;
    /// Accepted units per class divided by expected offered units
    /// (lambda_i T E[Q_i]).
    std::vector<double> per_class_acceptance;
};

/// Draw the order stream of one replication: per class, a Poisson count of
/// arrivals, i.i.d. uniform arrival times on [0, T] and order sizes from the
/// class batch law, merged in time order.  Identical (seed, replication)
/// always yields identical events regardless of thread placement.
std::vector<Event> replication_events(const model::ProblemInstance& inst,
                                      std::uint64_t seed,
                                      std::uint64_t replication);

/// Revenue of one policy on one event stream.
double play(const model::ProblemInstance& inst, const Policy& policy,
            std::span<const Event> events,
            std::vector<double>* accepted_units = nullptr);

/// Monte Carlo estimate over `replications` independent event streams.
/// Replications run under OpenMP; the per-replication revenues are reduced
/// with pairwise summation so the estimate is bitwise identical to
/// simulate_serial().
SimEstimate simulate(const model::ProblemInstance& inst, const Policy& policy,
                     std::uint64_t replications, std::uint64_t seed);

/// Single-threaded reference with identical results.
SimEstimate simulate_serial(const model::ProblemInstance& inst,
                            const Policy& policy, std::uint64_t replications,
                            std::uint64_t seed);

/// Per-replication revenues (replication index = position); the raw material
/// behind simulate() and the common-random-number comparisons.
std::vector<double> replicate_revenues(const model::ProblemInstance& inst,
                                       const Policy& policy,
                                       std::uint64_t replications,
                                       std::uint64_t seed);

/// All policies against the same event streams (common random numbers).
struct PolicyComparison {
    struct Row {
        std::string label;
        SimEstimate estimate;
        double pct_off_best = 0.0;  ///< 100 (best - mean) / best
        double diff_mean = 0.0;     ///< mean of (best - this) paired per replication
        double diff_ci99 = 0.0;     ///< CI on that paired difference
    };
    std::vector<Row> rows;
    std::size_t best = 0; ///< index of the highest-mean row
};

PolicyComparison compare(const model::ProblemInstance& inst,
                         const std::vector<Policy>& policies,
                         std::uint64_t replications, std::uint64_t seed);

/// Numerically stable sum used for the replication reduction; exposed for
/// the reproducibility tests.
double pairwise_sum(std::span<const double> values);

} // namespace sknap::sim

#endif
