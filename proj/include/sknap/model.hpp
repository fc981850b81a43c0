#ifndef SKNAP_MODEL_HPP
#define SKNAP_MODEL_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace sknap::model {

/// Order-size distribution truncated to the sellable range.  pmf[j] is
/// P(Q = j) for j = 0..W; overflow collects all mass above W (such orders
/// can never be filled and only consume an arrival).  mean is the true mean
/// of the untruncated distribution and is what per-unit acceptance rates
/// divide by.
struct BatchDistribution {
    std::vector<double> pmf;
    double overflow = 0.0;
    double mean = 0.0;

    static BatchDistribution unit(int inventory);
    static BatchDistribution negative_binomial(int r, double p, int inventory);
    /// P(Q = n) = e^{-n/scale} (1 - e^{-1/scale}), n >= 0.
    static BatchDistribution discretized_exponential(double scale, int inventory);
    static BatchDistribution from_pmf(std::vector<double> pmf, double overflow,
                                      std::optional<double> mean = std::nullopt);

    bool is_unit() const;
};

/// A demand instance: classes ordered by strictly decreasing price, Poisson
/// arrival streams, order-size distributions (one shared or one per class),
/// inventory W and horizon T.
struct ProblemInstance {
    std::vector<double> prices;            ///< p_1 > p_2 > ... > p_m > 0
    std::vector<double> rates;             ///< lambda_i > 0
    std::vector<BatchDistribution> batches; ///< size 1 (shared) or prices.size()
    int inventory = 0;                     ///< W >= 0
    double horizon = 0.0;                  ///< T > 0

    std::size_t classes() const { return prices.size(); }
    bool homogeneous() const { return batches.size() == 1; }
    const BatchDistribution& batch_for(std::size_t cls) const; ///< cls is 0-based
    bool unit_batch() const;
    /// Lambda_l = lambda_1 + ... + lambda_l (l is 1-based; l = classes() allowed).
    double cumulative_rate(std::size_t l) const;
    double total_rate() const { return cumulative_rate(classes()); }
};

/// Violation messages, empty when the instance is well-formed.
std::vector<std::string> validate(const ProblemInstance& inst);

/// validate() and throw std::invalid_argument listing every violation.
void require_valid(const ProblemInstance& inst);

/// Discrete-period approximation: theta[i][j] = lambda_i * delta * P(Q_i = j)
/// for j = 0..W, overflow mass at column W+1, and theta0 = 1 - delta * sum(lambda)
/// for the no-arrival event.  Periods run n = 1..periods.
struct DiscretizedInstance {
    std::vector<double> prices;
    std::vector<std::vector<double>> theta; ///< classes x (W + 2)
    double theta0 = 0.0;
    int periods = 0;
    int inventory = 0;
    double delta = 0.0;

    /// Probability that a period-n arrival cannot be supplied from d units:
    /// sum over classes of mass at sizes > d (overflow included).
    double blocked_mass(int remaining) const;
};

/// Largest delta with delta * sum(lambda) <= 0.2 and T/delta integral.
double default_delta(const ProblemInstance& inst);

/// Requires delta > 0, delta * sum(lambda) <= 1 and T/delta integral to 1e-9.
DiscretizedInstance discretize(const ProblemInstance& inst, double delta);

/// Parse an instance from JSON text (see README for the schema).
/// Throws std::invalid_argument with a field path on malformed input.
ProblemInstance instance_from_json(const std::string& text);
ProblemInstance load_instance(const std::string& path);

/// Parse a standalone order-size distribution from JSON text (the same
/// object shape as an instance's "batch" field), truncated to inventory.
BatchDistribution batch_from_json(const std::string& text, int inventory);

} // namespace sknap::model

#endif
