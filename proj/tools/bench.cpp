// Timing harness for the OpenMP kernels against their single-threaded
// reference implementations.  Prints one line per case with both wall times
// and the speedup; the results must agree bitwise, which is asserted here as
// well so the benchmark doubles as a smoke test.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "sknap/batch.hpp"
#include "sknap/dp.hpp"
#include "sknap/model.hpp"
#include "sknap/sim.hpp"

#ifdef SKNAP_HAVE_OPENMP
#include <omp.h>
#endif

namespace {

using namespace sknap;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point start) {
    return std::chrono::duration<double>(clock_type::now() - start).count();
}

model::ProblemInstance bench_instance(int inventory, double horizon) {
    model::ProblemInstance inst;
    inst.prices = {1.0, 0.8, 0.65, 0.45};
    inst.rates = {0.2, 0.3, 0.1, 0.4};
    inst.batches.push_back(model::BatchDistribution::negative_binomial(4, 0.33, inventory));
    inst.inventory = inventory;
    inst.horizon = horizon;
    return inst;
}

void report(const char* name, double serial, double parallel, bool identical) {
    std::printf("%-28s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name,
                serial, parallel, serial / parallel,
                identical ? "bitwise-equal" : "MISMATCH");
    if (!identical) std::exit(1);
}

void bench_dp(int inventory, double horizon) {
    auto inst = bench_instance(inventory, horizon);
    auto disc = model::discretize(inst, model::default_delta(inst));

    auto start = clock_type::now();
    auto serial_table = dp::solve_serial(disc);
    double serial = seconds_since(start);

    start = clock_type::now();
    auto parallel_table = dp::solve(disc);
    double parallel = seconds_since(start);

    bool identical = true;
    for (int n = 1; n <= disc.periods + 1 && identical; ++n) {
        for (int d = 0; d <= disc.inventory; ++d) {
            if (serial_table.at(n, d) != parallel_table.at(n, d)) {
                identical = false;
                break;
            }
        }
    }
    std::string name = "dp W=" + std::to_string(inventory);
    report(name.c_str(), serial, parallel, identical);
}

void bench_sim(int inventory, double horizon, std::uint64_t reps) {
    auto inst = bench_instance(inventory, horizon);
    auto sw = batch::solve_homogeneous(inst);
    auto policy = sim::Policy::switch_over_policy(sw.t);

    auto start = clock_type::now();
    auto serial_est = sim::simulate_serial(inst, policy, reps, 20260814);
    double serial = seconds_since(start);

    start = clock_type::now();
    auto parallel_est = sim::simulate(inst, policy, reps, 20260814);
    double parallel = seconds_since(start);

    bool identical = serial_est.mean == parallel_est.mean &&
                     serial_est.ci99 == parallel_est.ci99;
    std::string name = "sim reps=" + std::to_string(reps);
    report(name.c_str(), serial, parallel, identical);
}

} // namespace

int main(int argc, char** argv) {
    int scale = argc > 1 ? std::atoi(argv[1]) : 1;
    if (scale < 1) scale = 1;
#ifdef SKNAP_HAVE_OPENMP
    std::printf("OpenMP enabled, max threads %d\n", omp_get_max_threads());
#else
    std::printf("OpenMP not available; both columns run single-threaded\n");
#endif
    bench_dp(400 * scale, 80.0);
    bench_sim(40, 20.0, 200000ULL * static_cast<std::uint64_t>(scale));
    return 0;
}
