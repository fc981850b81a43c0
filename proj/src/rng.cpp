#include "sknap/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace sknap::rng {

namespace {

// splitmix64 finalizer: a bijective 64-bit mix with full avalanche.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replication,
                       std::uint64_t stream) {
    // Hash the three key components sequentially so nearby (rep, stream)
    // pairs land in unrelated cycles.
    std::uint64_t k = mix64(seed);
    k = mix64(k ^ (replication * 0xd6e8feb86659fd93ULL));
    k = mix64(k ^ (stream * 0xa0761d6478bd642fULL));
    key_ = k;
}

std::uint64_t CounterRng::next_u64() {
    return mix64(key_ ^ mix64(counter_++ + 0x2545f4914f6cdd1dULL));
}

double CounterRng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

long poisson_sample(double mu, CounterRng& rng) {
    if (!(mu >= 0.0)) throw std::invalid_argument("poisson_sample: mu must be >= 0");
    if (mu == 0.0) return 0;
    if (mu <= 10.0) {
        // Sequential inversion over the cdf.
        double p = std::exp(-mu);
        double cum = p;
        long k = 0;
        const double u = rng.uniform();
        while (u > cum && k < 1000) {
            ++k;
            p *= mu / static_cast<double>(k);
            cum += p;
        }
        return k;
    }

    // Transformed rejection with squeeze (PTRS), valid for mu >= 10.
    const double smu = std::sqrt(mu);
    const double b = 0.931 + 2.53 * smu;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);

    for (;;) {
        double u = rng.uniform() - 0.5;
        double v = rng.uniform();
        double us = 0.5 - std::abs(u);
        double kf = std::floor((2.0 * a / us + b) * u + mu + 0.43);
        if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
        if (kf < 0.0 || (us < 0.013 && v > us)) continue;
        double k = kf;
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * std::log(mu) - mu - std::lgamma(k + 1.0)) {
            return static_cast<long>(kf);
        }
    }
}

} // namespace sknap::rng
