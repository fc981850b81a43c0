#ifndef SKNAP_BATCH_HPP
#define SKNAP_BATCH_HPP

#include <cstdint>
#include <vector>

#include "sknap/model.hpp"
#include "sknap/switchover.hpp"

namespace sknap::batch {

/// Dense row-major (W+1) x (W+1) stochastic matrix over remaining-inventory
/// states 0..W.  Row d holds the one-order transition out of d.
struct TransitionMatrix {
    int inventory = 0;
    std::vector<double> values; ///< (W+1)^2, row-major

    double at(int row, int col) const;
    double& at(int row, int col);
    /// Column action M x (the value-vector iterate behind the a_k cache).
    std::vector<double> apply(const std::vector<double>& x) const;
    /// Row action x^T M (the state-distribution iterate).
    std::vector<double> apply_transposed(const std::vector<double>& x) const;
};

/// One-order inventory transition for a batch distribution: from d, an order
/// of size j <= d moves to d - j with probability pmf[j]; orders larger than
/// d (overflow included) leave the state unchanged, as does j = 0.
TransitionMatrix transition_matrix(const model::BatchDistribution& batch,
                                   int inventory);

/// Convex mixture sum_i w_i M_i of same-size transition matrices.
TransitionMatrix mix(const std::vector<TransitionMatrix>& mats,
                     const std::vector<double>& weights);

/// Expected remaining inventory after Poisson(mu) orders through a fixed
/// transition matrix:
///   G(mu) = sum_k e^{-mu} mu^k / k! * a_k,   a_k = (M^k w)[W], w_d = d.
/// The a_k sequence is mu-independent and precomputed once up to the Poisson
/// tail cut for mu_max, so each eval is one pass over the retained terms.
/// value/derivative/second_derivative follow from the Poisson weight
/// derivatives: G' = -sum_k pois(k) (a_k - a_{k+1}), G'' likewise one step
/// further.
class RemainingKernel {
public:
    RemainingKernel(const TransitionMatrix& matrix, double mu_max,
                    double truncation_epsilon = 1e-12);

    struct Eval {
        double value;
        double derivative;
        double second_derivative;
    };

    Eval eval(double mu) const;
    double operator()(double mu) const { return eval(mu).value; }

    double mu_max() const { return mu_max_; }
    std::size_t terms() const { return a_.size(); }

private:
    std::vector<double> a_;
    double mu_max_;
};

/// One-off evaluation of G(mu) = z^T e^{-mu} e^{mu M} w and its first two
/// derivatives (builds a throwaway term cache sized for this mu).
RemainingKernel::Eval expected_remaining(const TransitionMatrix& matrix, double mu,
                                         double truncation_epsilon = 1e-12);

/// switchover::Kernel view of a RemainingKernel (shares the a_k cache; the
/// RemainingKernel must outlive the view).
switchover::Kernel as_kernel(const RemainingKernel& kernel);

/// Kernel for an instance whose classes share one order-size distribution:
/// closed-form Poisson shortfall for unit batches, RemainingKernel otherwise.
/// mu_max defaults to total_rate * horizon (the most any policy can admit).
switchover::Kernel kernel_for(const model::ProblemInstance& inst,
                              double truncation_epsilon = 1e-12);

/// Switch-over optimizer for homogeneous (shared-batch) instances: the unit
/// solver's eta bisection with the batch remaining kernel.
switchover::SwitchOverSolution solve_homogeneous(
    const model::ProblemInstance& inst, double truncation_epsilon = 1e-12);

struct PriceDependentOptions {
    int starts = 8;               ///< multi-start count for the y search
    int max_iterations = 400;     ///< projected-gradient iterations per start
    double tolerance = 1e-9;      ///< objective-improvement stop
    bool sum_form = false;        ///< exp of summed generators instead of the
                                  ///< ordered product (equal when the class
                                  ///< generators commute)
    std::uint64_t seed = 20260814;
    double truncation_epsilon = 1e-12;
};

/// Per-segment admitted-order mixtures Gamma_l = sum_{j<=l} (lambda_j /
/// Lambda_l) M_j; Gamma_1 = M_1.
std::vector<TransitionMatrix> mixture_matrices(const model::ProblemInstance& inst);

/// Switch-over cost sum_l pi_l G_l(y) for segment lengths y when each class
/// brings its own order-size distribution.  The admitted-order mix changes
/// at every switch time, so G_l propagates the state distribution through
/// the ordered product of segment kernels
///   exp(Lambda_1 y_1 (Gamma_1 - I)) ... exp(Lambda_l y_l (Gamma_l - I)),
/// each factor evaluated by uniformization.  With sum_form set, the product
/// is replaced by the exponential of the summed generators (equal whenever
/// the Gamma_l commute, e.g. identical batches).  Rejects infeasible y.
double price_dependent_objective(const model::ProblemInstance& inst,
                                 const std::vector<double>& y,
                                 const PriceDependentOptions& opts = {});

/// Revenue counterpart: p1k_1 W - price_dependent_objective(y).
double price_dependent_revenue(const model::ProblemInstance& inst,
                               const std::vector<double>& y,
                               const PriceDependentOptions& opts = {});

/// Minimize price_dependent_objective over y >= 0, sum y <= T by multi-start
/// projected gradient with central-difference gradients (starts include
/// equal-spaced segments and the shared-batch warm start).  Fills mu with
/// the cumulative order volumes Lambda_l y_l summed, t/y with the switch
/// schedule, and flags converged = false when no start met the tolerance.
switchover::SwitchOverSolution solve_price_dependent(
    const model::ProblemInstance& inst, const PriceDependentOptions& opts = {});

} // namespace sknap::batch

#endif
