#include "sknap/poisson.hpp"

#include <cmath>
#include <stdexcept>

namespace sknap::poisson {

double pmf(int n, double mu) {
    if (n < 0) return 0.0;
    if (!(mu >= 0.0)) throw std::invalid_argument("poisson::pmf: mu must be >= 0");
    if (mu == 0.0) return n == 0 ? 1.0 : 0.0;
    return std::exp(n * std::log(mu) - mu - std::lgamma(n + 1.0));
}

double cdf(int n, double mu) {
    if (n < 0) return 0.0;
    if (!(mu >= 0.0)) throw std::invalid_argument("poisson::cdf: mu must be >= 0");
    if (mu == 0.0) return 1.0;

    double sum = 0.0;
    if (mu <= 700.0) {
        double term = std::exp(-mu);
        sum = term;
        for (int k = 1; k <= n; ++k) {
            term *= mu / static_cast<double>(k);
            sum += term;
        }
    } else {
        // exp(-mu) underflows; accumulate each term in log space instead.
        const double lmu = std::log(mu);
        for (int k = 0; k <= n; ++k) {
            sum += std::exp(k * lmu - mu - std::lgamma(k + 1.0));
        }
    }
    if (sum > 1.0) sum = 1.0;
    if (sum < 0.0) sum = 0.0;
    return sum;
}

ShortfallEval shortfall(int inventory, double mu) {
    if (inventory < 0) throw std::invalid_argument("shortfall: inventory must be >= 0");
    // H(mu) = W F_W(mu) - mu F_{W-1}(mu); H' = -F_{W-1}; H'' = pmf(W-1, mu).
    const double w = static_cast<double>(inventory);
    const double fw = cdf(inventory, mu);
    const double fwm1 = cdf(inventory - 1, mu);
    return ShortfallEval{w * fw - mu * fwm1, -fwm1, pmf(inventory - 1, mu)};
}

double shortfall_asymptotic_ratio(double a) {
    const int w = static_cast<int>(std::llround(a));
    const double h = shortfall(w, a).value;
    return h / std::sqrt(a / (2.0 * M_PI));
}

double expected_min(double a, int inventory) {
    return static_cast<double>(inventory) - shortfall(inventory, a).value;
}

} // namespace sknap::poisson
