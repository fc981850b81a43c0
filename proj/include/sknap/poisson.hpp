#ifndef SKNAP_POISSON_HPP
#define SKNAP_POISSON_HPP

namespace sknap::poisson {

/// P(N(mu) = n); zero for n < 0.
double pmf(int n, double mu);

/// F_n(mu) = P(N(mu) <= n); zero for n < 0, clamped to [0, 1].
/// Uses the forward term recurrence; switches to log-space terms for
/// mu > 700 where exp(-mu) underflows.
double cdf(int n, double mu);

struct ShortfallEval {
    double value;             ///< E[(W - N(mu))^+]
    double derivative;        ///< d/dmu = -F_{W-1}(mu)
    double second_derivative; ///< d2/dmu2 = pmf(W-1, mu)
};

/// Expected unsold inventory out of W after Poisson(mu) unit demands:
/// H(mu) = W F_W(mu) - mu F_{W-1}(mu), with H(0) = W and H -> 0 as mu grows.
ShortfallEval shortfall(int inventory, double mu);

/// shortfall(a, a).value / sqrt(a / (2 pi)); approaches 1 for large a.
double shortfall_asymptotic_ratio(double a);

/// E[min(N(a), W)] = W - shortfall(W, a).value.
double expected_min(double a, int inventory);

} // namespace sknap::poisson

#endif
