#include "sknap/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sknap/rng.hpp"

namespace sknap::sim {

Policy Policy::switch_over_policy(std::vector<double> times, std::string label) {
    Policy p;
    p.kind = PolicyKind::switch_over;
    p.label = std::move(label);
    p.switch_times = std::move(times);
    return p;
}

Policy Policy::fcfs_policy() {
    Policy p;
    p.kind = PolicyKind::fcfs;
    p.label = "fcfs";
    return p;
}

Policy Policy::equal_spaced_policy(const model::ProblemInstance& inst) {
    Policy p;
    p.kind = PolicyKind::equal_spaced;
    p.label = "equal_spaced";
    const std::size_t m = inst.classes();
    p.switch_times.resize(m);
    for (std::size_t k = 0; k < m; ++k)
        p.switch_times[k] = inst.horizon * static_cast<double>(k + 1) / static_cast<double>(m);
    return p;
}

Policy Policy::dp_policy(std::shared_ptr<const dp::ValueTable> table,
                         std::shared_ptr<const model::DiscretizedInstance> disc) {
    if (!table || !disc) throw std::invalid_argument("dp_policy: table and discretization required");
    Policy p;
    p.kind = PolicyKind::dp_table;
    p.label = "dp";
    p.table = std::move(table);
    p.discretization = std::move(disc);
    return p;
}

namespace {

// Stream ids per class: counts, arrival times, order sizes.
constexpr std::uint64_t kStreamsPerClass = 4;

std::vector<double> size_cdf(const model::BatchDistribution& batch) {
    std::vector<double> cdf(batch.pmf.size() + 1);
    double acc = 0.0;
    for (std::size_t j = 0; j < batch.pmf.size(); ++j) {
        acc += batch.pmf[j];
        cdf[j] = acc;
    }
    cdf[batch.pmf.size()] = acc + batch.overflow; // overflow bucket
    return cdf;
}

int draw_size(const std::vector<double>& cdf, double u) {
    // First index with cdf > u; the last bucket encodes an oversize order.
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
    return static_cast<int>(std::distance(cdf.begin(), it));
}

} // namespace

std::vector<Event> replication_events(const model::ProblemInstance& inst,
                                      std::uint64_t seed, std::uint64_t replication) {
    const std::size_t m = inst.classes();
    std::vector<Event> events;
    for (std::size_t i = 0; i < m; ++i) {
        rng::CounterRng count_rng(seed, replication, kStreamsPerClass * i);
        rng::CounterRng time_rng(seed, replication, kStreamsPerClass * i + 1);
        rng::CounterRng size_rng(seed, replication, kStreamsPerClass * i + 2);

        const long n = rng::poisson_sample(inst.rates[i] * inst.horizon, count_rng);
        if (n <= 0) continue;
        std::vector<double> times(static_cast<std::size_t>(n));
        for (double& t : times) t = time_rng.uniform() * inst.horizon;
        std::sort(times.begin(), times.end());

        const auto cdf = size_cdf(inst.batch_for(i));
        for (std::size_t k = 0; k < times.size(); ++k) {
            Event e;
            e.time = times[k];
            e.cls = i;
            e.quantity = draw_size(cdf, size_rng.uniform());
            events.push_back(e);
        }
    }
    // Stable sort on time alone: ties fall back to class-major insertion
    // order, so the stream is identical however the replication is scheduled.
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.time < b.time; });
    return events;
}

double play(const model::ProblemInstance& inst, const Policy& policy,
            std::span<const Event> events, std::vector<double>* accepted_units) {
    if (policy.kind == PolicyKind::dp_table && (!policy.table || !policy.discretization))
        throw std::invalid_argument("play: dp policy without a table");
    if ((policy.kind == PolicyKind::switch_over || policy.kind == PolicyKind::equal_spaced) &&
        policy.switch_times.size() != inst.classes())
        throw std::invalid_argument("play: switch times must cover every class");

    if (accepted_units) accepted_units->assign(inst.classes(), 0.0);

    int d = inst.inventory;
    double revenue = 0.0;
    for (const Event& e : events) {
        if (d == 0) break;
        if (e.quantity < 1 || e.quantity > d) continue; // zero-size or cannot fill
        bool admit = false;
        switch (policy.kind) {
        case PolicyKind::fcfs: admit = true; break;
        case PolicyKind::switch_over:
        case PolicyKind::equal_spaced:
            admit = e.cls == 0 || e.time >= policy.switch_times[e.cls - 1];
            break;
        case PolicyKind::dp_table: {
            const auto& disc = *policy.discretization;
            int period = static_cast<int>(std::floor(e.time / disc.delta)) + 1;
            period = std::min(period, disc.periods);
            admit = dp::accept(*policy.table, disc, period, d, e.cls, e.quantity);
            break;
        }
        }
        if (!admit) continue;
        revenue += inst.prices[e.cls] * e.quantity;
        d -= e.quantity;
        if (accepted_units) (*accepted_units)[e.cls] += e.quantity;
    }
    return revenue;
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

struct Accumulated {
    std::vector<double> revenues;              // per replication
    std::vector<std::vector<double>> accepted; // class -> per replication units
};

template <bool Parallel>
Accumulated run_replications(const model::ProblemInstance& inst, const Policy& policy,
                             std::uint64_t replications, std::uint64_t seed) {
    const std::size_t m = inst.classes();
    Accumulated acc;
    acc.revenues.assign(replications, 0.0);
    acc.accepted.assign(m, std::vector<double>(replications, 0.0));

    const long long reps = static_cast<long long>(replications);
#ifdef SKNAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 64) if (Parallel)
#endif
    for (long long rep = 0; rep < reps; ++rep) {
        const auto events =
            replication_events(inst, seed, static_cast<std::uint64_t>(rep));
        std::vector<double> units;
        acc.revenues[static_cast<std::size_t>(rep)] = play(inst, policy, events, &units);
        for (std::size_t i = 0; i < m; ++i)
            acc.accepted[i][static_cast<std::size_t>(rep)] = units[i];
    }
    return acc;
}

SimEstimate summarize(const model::ProblemInstance& inst, const Accumulated& acc,
                      std::uint64_t seed) {
    const std::size_t n = acc.revenues.size();
    SimEstimate est;
    est.replications = n;
    est.seed = seed;
    est.mean = pairwise_sum(acc.revenues) / static_cast<double>(n);
    if (n > 1) {
        std::vector<double> sq(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = acc.revenues[i] - est.mean;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(n - 1);
        est.ci99 = 2.576 * std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
    }
    est.per_class_acceptance.assign(inst.classes(), 0.0);
    for (std::size_t i = 0; i < inst.classes(); ++i) {
        const double offered =
            inst.rates[i] * inst.horizon * inst.batch_for(i).mean * static_cast<double>(n);
        est.per_class_acceptance[i] =
            offered > 0.0 ? pairwise_sum(acc.accepted[i]) / offered : 0.0;
    }
    return est;
}

} // namespace

std::vector<double> replicate_revenues(const model::ProblemInstance& inst,
                                       const Policy& policy, std::uint64_t replications,
                                       std::uint64_t seed) {
    return run_replications<true>(inst, policy, replications, seed).revenues;
}

SimEstimate simulate(const model::ProblemInstance& inst, const Policy& policy,
                     std::uint64_t replications, std::uint64_t seed) {
    model::require_valid(inst);
    if (replications == 0) throw std::invalid_argument("simulate: need replications >= 1");
    return summarize(inst, run_replications<true>(inst, policy, replications, seed), seed);
}

SimEstimate simulate_serial(const model::ProblemInstance& inst, const Policy& policy,
                            std::uint64_t replications, std::uint64_t seed) {
    model::require_valid(inst);
    if (replications == 0) throw std::invalid_argument("simulate: need replications >= 1");
    return summarize(inst, run_replications<false>(inst, policy, replications, seed), seed);
}

PolicyComparison compare(const model::ProblemInstance& inst,
                         const std::vector<Policy>& policies, std::uint64_t replications,
                         std::uint64_t seed) {
    model::require_valid(inst);
    if (policies.empty()) throw std::invalid_argument("compare: need at least one policy");
    if (replications == 0) throw std::invalid_argument("compare: need replications >= 1");

    const std::size_t np = policies.size();
    const std::size_t m = inst.classes();
    std::vector<Accumulated> acc(np);
    for (auto& a : acc) {
        a.revenues.assign(replications, 0.0);
        a.accepted.assign(m, std::vector<double>(replications, 0.0));
    }

    // One event stream per replication, shared by every policy (common
    // random numbers), so policy differences are paired per replication.
    const long long reps = static_cast<long long>(replications);
#ifdef SKNAP_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 64)
#endif
    for (long long rep = 0; rep < reps; ++rep) {
        const auto events =
            replication_events(inst, seed, static_cast<std::uint64_t>(rep));
        std::vector<double> units;
        for (std::size_t p = 0; p < np; ++p) {
            acc[p].revenues[static_cast<std::size_t>(rep)] =
                play(inst, policies[p], events, &units);
            for (std::size_t i = 0; i < m; ++i)
                acc[p].accepted[i][static_cast<std::size_t>(rep)] = units[i];
        }
    }

    PolicyComparison cmp;
    cmp.rows.resize(np);
    for (std::size_t p = 0; p < np; ++p) {
        cmp.rows[p].label = policies[p].label;
        cmp.rows[p].estimate = summarize(inst, acc[p], seed);
        if (cmp.rows[p].estimate.mean > cmp.rows[cmp.best].estimate.mean) cmp.best = p;
    }
    const auto& best_rev = acc[cmp.best].revenues;
    for (std::size_t p = 0; p < np; ++p) {
        auto& row = cmp.rows[p];
        const double best_mean = cmp.rows[cmp.best].estimate.mean;
        row.pct_off_best =
            best_mean != 0.0 ? 100.0 * (best_mean - row.estimate.mean) / best_mean : 0.0;
        std::vector<double> diff(replications);
        for (std::size_t i = 0; i < replications; ++i)
            diff[i] = best_rev[i] - acc[p].revenues[i];
        const double dmean = pairwise_sum(diff) / static_cast<double>(replications);
        row.diff_mean = dmean;
        if (replications > 1) {
            std::vector<double> sq(replications);
            for (std::size_t i = 0; i < replications; ++i) {
                const double d = diff[i] - dmean;
                sq[i] = d * d;
            }
            const double var = pairwise_sum(sq) / static_cast<double>(replications - 1);
            row.diff_ci99 = 2.576 * std::sqrt(std::max(var, 0.0) /
                                              static_cast<double>(replications));
        }
    }
    return cmp;
}

} // namespace sknap::sim
