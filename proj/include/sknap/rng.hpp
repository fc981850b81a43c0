#ifndef SKNAP_RNG_HPP
#define SKNAP_RNG_HPP

#include <cstdint>

namespace sknap::rng {

/// Counter-based generator keyed by (seed, replication, stream).
///
/// Output i depends only on the key and the counter value, so any event in
/// any replication can be regenerated independently of everything else.
/// This is what makes common-random-number simulation reproducible under
/// OpenMP: replication r always consumes exactly the same draws no matter
/// which thread runs it.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint64_t stream);

    std::uint64_t next_u64();

    /// Uniform draw in [0, 1) with 53 random bits.
    double uniform();

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Poisson(mu) sample: sequential inversion for mu <= 10, transformed
/// rejection (PTRS) above.  Deterministic given the generator state.
long poisson_sample(double mu, CounterRng& rng);

} // namespace sknap::rng

#endif
