#include "sknap/dp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "sknap/io.hpp"

namespace sknap::dp {

ValueTable::ValueTable(int periods, int inventory)
    : periods_(periods), inventory_(inventory),
      values_(static_cast<std::size_t>(periods + 1) * (inventory + 1), 0.0) {
    if (periods < 1 || inventory < 0)
        throw std::invalid_argument("ValueTable: need periods >= 1, inventory >= 0");
}

double ValueTable::at(int period, int remaining) const {
    if (period < 1 || period > periods_ + 1 || remaining < 0 || remaining > inventory_)
        throw std::out_of_range("ValueTable::at: state outside the table");
    return values_[static_cast<std::size_t>(period - 1) * (inventory_ + 1) + remaining];
}

double& ValueTable::at(int period, int remaining) {
    if (period < 1 || period > periods_ + 1 || remaining < 0 || remaining > inventory_)
        throw std::out_of_range("ValueTable::at: state outside the table");
    return values_[static_cast<std::size_t>(period - 1) * (inventory_ + 1) + remaining];
}

namespace {

template <bool Parallel>
ValueTable solve_impl(const model::DiscretizedInstance& inst) {
    const int T = inst.periods;
    const int W = inst.inventory;
    const std::size_t m = inst.theta.size();
    ValueTable table(T, W);

    for (int n = T; n >= 1; --n) {
        const double* next = &table.at(n + 1, 0);
        double* cur = &table.at(n, 0);
        // States of one period depend only on period n + 1, so the inventory
        // loop is embarrassingly parallel.
#ifdef SKNAP_HAVE_OPENMP
#pragma omp parallel for schedule(static) if (Parallel && W >= 64)
#endif
        for (int d = 0; d <= W; ++d) {
            double v = next[d];
            for (std::size_t i = 0; i < m; ++i) {
                const double p = inst.prices[i];
                const std::vector<double>& th = inst.theta[i];
                for (int j = 1; j <= d; ++j) {
                    const double gain = p * j + next[d - j] - next[d];
                    if (gain > 0.0) v += th[static_cast<std::size_t>(j)] * gain;
                }
            }
            cur[d] = v;
        }
    }
    return table;
}

} // namespace

ValueTable solve(const model::DiscretizedInstance& inst) { return solve_impl<true>(inst); }

ValueTable solve_serial(const model::DiscretizedInstance& inst) {
    return solve_impl<false>(inst);
}

bool accept(const ValueTable& table, const model::DiscretizedInstance& inst,
            int period, int remaining, std::size_t cls, int qty) {
    if (cls >= inst.theta.size()) throw std::out_of_range("accept: class index past m");
    if (period < 1 || period > table.periods() || remaining < 0 ||
        remaining > table.inventory())
        throw std::out_of_range("accept: state outside the table");
    if (qty < 1 || qty > remaining) return false;
    return inst.prices[cls] * qty + table.at(period + 1, remaining - qty) >=
           table.at(period + 1, remaining);
}

ThresholdProfile extract_thresholds(const ValueTable& table,
                                    const model::DiscretizedInstance& inst) {
    for (const auto& row : inst.theta) {
        for (std::size_t j = 2; j < row.size(); ++j) {
            if (row[j] != 0.0)
                throw std::invalid_argument("extract_thresholds: needs a unit-batch instance");
        }
    }

    const int T = table.periods();
    const int W = table.inventory();
    const std::size_t m = inst.theta.size();

    ThresholdProfile prof;
    prof.first_accept.assign(m, std::vector<int>(static_cast<std::size_t>(W) + 1, T + 1));
    for (std::size_t k = 0; k < m; ++k) {
        for (int d = 1; d <= W; ++d) {
            int first = T + 1;
            bool seen_accept = false;
            for (int n = 1; n <= T; ++n) {
                const bool acc = accept(table, inst, n, d, k, 1);
                if (acc && !seen_accept) {
                    first = n;
                    seen_accept = true;
                } else if (!acc && seen_accept) {
                    prof.violations.push_back(
                        "class " + std::to_string(k + 1) + ", inventory " + std::to_string(d) +
                        ": acceptance lapses at period " + std::to_string(n));
                    seen_accept = false; // keep scanning; later lapses reported too
                }
            }
            prof.first_accept[k][static_cast<std::size_t>(d)] = first;
        }
    }
    return prof;
}

StructureReport structure_report(const ValueTable& table) {
    StructureReport rep;
    const int T = table.periods();
    const int W = table.inventory();
    for (int n = 1; n <= T + 1; ++n) {
        for (int d = 2; d <= W; ++d) {
            // Concavity in d: V(n,d) - V(n,d-1) <= V(n,d-1) - V(n,d-2).
            const double excess = (table.at(n, d) - table.at(n, d - 1)) -
                                  (table.at(n, d - 1) - table.at(n, d - 2));
            rep.max_concavity_violation = std::max(rep.max_concavity_violation, excess);
        }
    }
    for (int n = 1; n <= T; ++n) {
        for (int d = 1; d <= W; ++d) {
            // Marginal value of a unit must not grow as time runs out.
            const double excess = (table.at(n + 1, d) - table.at(n + 1, d - 1)) -
                                  (table.at(n, d) - table.at(n, d - 1));
            rep.max_submodularity_violation =
                std::max(rep.max_submodularity_violation, excess);
        }
    }
    return rep;
}

void write_csv(const ValueTable& table, std::ostream& out) {
    io::CsvWriter csv(out);
    const std::string names[] = {"period", "remaining", "value"};
    csv.header(names);
    for (int n = 1; n <= table.periods() + 1; ++n) {
        for (int d = 0; d <= table.inventory(); ++d) {
            csv.field(n).field(d).field(table.at(n, d)).end_row();
        }
    }
}

} // namespace sknap::dp
