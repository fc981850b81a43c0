#include "sknap/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace sknap::model {

namespace {

constexpr double kPmfTol = 1e-9;

void normalize_tail(BatchDistribution& b) {
    // Guard against tiny negative round-off in the overflow mass.
    if (b.overflow < 0.0 && b.overflow > -kPmfTol) b.overflow = 0.0;
}

} // namespace

BatchDistribution BatchDistribution::unit(int inventory) {
    if (inventory < 0) throw std::invalid_argument("unit batch: inventory must be >= 0");
    BatchDistribution b;
    b.pmf.assign(static_cast<std::size_t>(inventory) + 1, 0.0);
    if (inventory >= 1) {
        b.pmf[1] = 1.0;
        b.overflow = 0.0;
    } else {
        b.overflow = 1.0; // nothing fits; every order overflows
    }
    b.mean = 1.0;
    return b;
}

BatchDistribution BatchDistribution::negative_binomial(int r, double p, int inventory) {
    if (r <= 0 || !(p > 0.0) || !(p < 1.0) || inventory < 0)
        throw std::invalid_argument("negative_binomial: need r > 0, 0 < p < 1, inventory >= 0");
    // P(0) = p^r, P(k+1) = P(k) (1-p)(k+r)/(k+1); counts failures before the
    // r-th success, mean r(1-p)/p.
    BatchDistribution b;
    b.pmf.assign(static_cast<std::size_t>(inventory) + 1, 0.0);
    double mass = std::pow(p, r);
    double kept = 0.0;
    for (int k = 0; k <= inventory; ++k) {
        b.pmf[static_cast<std::size_t>(k)] = mass;
        kept += mass;
        mass *= (1.0 - p) * (k + r) / (k + 1.0);
    }
    b.overflow = 1.0 - kept;
    normalize_tail(b);
    b.mean = r * (1.0 - p) / p;
    return b;
}

BatchDistribution BatchDistribution::discretized_exponential(double scale, int inventory) {
    if (!(scale > 0.0) || inventory < 0)
        throw std::invalid_argument("discretized_exponential: need scale > 0, inventory >= 0");
    // P(n) = e^{-n/s} (1 - e^{-1/s}), a geometric law with mean 1/(e^{1/s} - 1).
    BatchDistribution b;
    b.pmf.assign(static_cast<std::size_t>(inventory) + 1, 0.0);
    const double q = std::exp(-1.0 / scale);
    double mass = 1.0 - q;
    double kept = 0.0;
    for (int n = 0; n <= inventory; ++n) {
        b.pmf[static_cast<std::size_t>(n)] = mass;
        kept += mass;
        mass *= q;
    }
    b.overflow = 1.0 - kept;
    normalize_tail(b);
    b.mean = q / (1.0 - q);
    return b;
}

BatchDistribution BatchDistribution::from_pmf(std::vector<double> pmf, double overflow,
                                              std::optional<double> mean) {
    BatchDistribution b;
    b.pmf = std::move(pmf);
    b.overflow = overflow;
    if (mean) {
        b.mean = *mean;
    } else {
        double m = 0.0;
        for (std::size_t j = 0; j < b.pmf.size(); ++j) m += static_cast<double>(j) * b.pmf[j];
        b.mean = m; // overflow contribution unknown; caller supplies the true mean if needed
    }
    return b;
}

bool BatchDistribution::is_unit() const {
    if (overflow > kPmfTol) return false;
    for (std::size_t j = 0; j < pmf.size(); ++j) {
        const double expect = (j == 1) ? 1.0 : 0.0;
        if (std::abs(pmf[j] - expect) > kPmfTol) return false;
    }
    return pmf.size() >= 2;
}

const BatchDistribution& ProblemInstance::batch_for(std::size_t cls) const {
    if (batches.empty()) throw std::logic_error("batch_for: no batch distributions set");
    return batches.size() == 1 ? batches[0] : batches.at(cls);
}

bool ProblemInstance::unit_batch() const {
    return std::all_of(batches.begin(), batches.end(),
                       [](const BatchDistribution& b) { return b.is_unit(); });
}

double ProblemInstance::cumulative_rate(std::size_t l) const {
    if (l > rates.size()) throw std::out_of_range("cumulative_rate: class index past m");
    return std::accumulate(rates.begin(), rates.begin() + static_cast<std::ptrdiff_t>(l), 0.0);
}

std::vector<std::string> validate(const ProblemInstance& inst) {
    std::vector<std::string> errs;
    const std::size_t m = inst.prices.size();
    if (m == 0) errs.push_back("prices: at least one class required");
    if (inst.rates.size() != m)
        errs.push_back("rates: size must match prices");
    if (!(inst.horizon > 0.0)) errs.push_back("horizon: must be > 0");
    if (inst.inventory < 0) errs.push_back("inventory: must be >= 0");

    for (std::size_t i = 0; i < m; ++i) {
        if (!(inst.prices[i] > 0.0)) {
            errs.push_back("prices[" + std::to_string(i) + "]: must be > 0");
        }
        if (i + 1 < m && !(inst.prices[i] > inst.prices[i + 1])) {
            errs.push_back("prices[" + std::to_string(i) +
                           "]: classes must have strictly decreasing prices");
        }
    }
    for (std::size_t i = 0; i < inst.rates.size(); ++i) {
        if (!(inst.rates[i] > 0.0)) {
            errs.push_back("rates[" + std::to_string(i) + "]: must be > 0");
        }
    }

    if (inst.batches.empty()) {
        errs.push_back("batches: at least one distribution required");
    } else if (inst.batches.size() != 1 && inst.batches.size() != m) {
        errs.push_back("batches: size must be 1 (shared) or match prices");
    }
    for (std::size_t i = 0; i < inst.batches.size(); ++i) {
        const auto& b = inst.batches[i];
        const std::string tag = "batches[" + std::to_string(i) + "]";
        if (b.pmf.size() != static_cast<std::size_t>(inst.inventory) + 1)
            errs.push_back(tag + ": pmf must cover sizes 0..inventory");
        double total = b.overflow;
        bool negative = b.overflow < -kPmfTol;
        for (double v : b.pmf) {
            total += v;
            negative = negative || v < -kPmfTol;
        }
        if (negative) errs.push_back(tag + ": negative probability mass");
        if (std::abs(total - 1.0) > 1e-6)
            errs.push_back(tag + ": pmf + overflow must sum to 1");
        if (!(b.mean > 0.0)) errs.push_back(tag + ": mean order size must be > 0");
    }
    return errs;
}

void require_valid(const ProblemInstance& inst) {
    const auto errs = validate(inst);
    if (errs.empty()) return;
    std::string msg = "invalid instance:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw std::invalid_argument(msg);
}

double DiscretizedInstance::blocked_mass(int remaining) const {
    double blocked = 0.0;
    for (const auto& row : theta) {
        for (std::size_t j = static_cast<std::size_t>(remaining) + 1; j < row.size(); ++j)
            blocked += row[j];
    }
    return blocked;
}

double default_delta(const ProblemInstance& inst) {
    require_valid(inst);
    const double lam = inst.total_rate();
    // Smallest integral period count with delta * lam <= 0.2.
    const double n = std::ceil(5.0 * inst.horizon * lam);
    return inst.horizon / std::max(1.0, n);
}

DiscretizedInstance discretize(const ProblemInstance& inst, double delta) {
    require_valid(inst);
    if (!(delta > 0.0)) throw std::invalid_argument("discretize: delta must be > 0");
    const double lam = inst.total_rate();
    if (delta * lam > 1.0 + 1e-12)
        throw std::invalid_argument("discretize: delta * total rate exceeds 1");
    const double ratio = inst.horizon / delta;
    const double periods = std::round(ratio);
    if (std::abs(ratio - periods) > 1e-9 * std::max(1.0, ratio))
        throw std::invalid_argument("discretize: horizon must be an integer number of periods");

    DiscretizedInstance d;
    d.prices = inst.prices;
    d.periods = static_cast<int>(periods);
    d.inventory = inst.inventory;
    d.delta = delta;
    d.theta0 = 1.0 - delta * lam;

    const std::size_t m = inst.classes();
    d.theta.assign(m, std::vector<double>(static_cast<std::size_t>(inst.inventory) + 2, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        const auto& b = inst.batch_for(i);
        const double w = inst.rates[i] * delta;
        for (std::size_t j = 0; j < b.pmf.size(); ++j) d.theta[i][j] = w * b.pmf[j];
        d.theta[i][static_cast<std::size_t>(inst.inventory) + 1] = w * b.overflow;
    }
    return d;
}

namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
    throw std::invalid_argument("config field '" + path + "': " + why);
}

double require_number(const json& j, const std::string& path) {
    if (!j.is_number()) bad_field(path, "expected a number");
    return j.get<double>();
}

int require_int(const json& j, const std::string& path) {
    if (!j.is_number_integer()) bad_field(path, "expected an integer");
    return j.get<int>();
}

std::vector<double> require_number_array(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) bad_field(path, "expected a non-empty array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        out.push_back(require_number(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

BatchDistribution parse_batch(const json& j, int inventory, const std::string& path) {
    if (!j.is_object()) bad_field(path, "expected an object");
    const std::string kind = j.value("kind", std::string("unit"));
    if (kind == "unit") {
        return BatchDistribution::unit(inventory);
    }
    if (kind == "negative_binomial") {
        if (!j.contains("r") || !j.contains("p")) bad_field(path, "needs fields r and p");
        return BatchDistribution::negative_binomial(require_int(j["r"], path + ".r"),
                                                    require_number(j["p"], path + ".p"),
                                                    inventory);
    }
    if (kind == "discretized_exponential") {
        if (!j.contains("scale")) bad_field(path, "needs field scale");
        return BatchDistribution::discretized_exponential(
            require_number(j["scale"], path + ".scale"), inventory);
    }
    if (kind == "pmf") {
        if (!j.contains("pmf")) bad_field(path, "needs field pmf");
        auto pmf = require_number_array(j["pmf"], path + ".pmf");
        double overflow = j.value("overflow", 0.0);
        std::optional<double> mean;
        if (j.contains("mean")) mean = require_number(j["mean"], path + ".mean");
        if (!mean) {
            double m = 0.0;
            for (std::size_t n = 0; n < pmf.size(); ++n) m += static_cast<double>(n) * pmf[n];
            mean = m;
        }
        // Mass at sizes past the inventory can never be filled: fold it into
        // overflow rather than dropping it.
        const std::size_t cap = static_cast<std::size_t>(inventory) + 1;
        for (std::size_t n = cap; n < pmf.size(); ++n) overflow += pmf[n];
        pmf.resize(cap, 0.0);
        return BatchDistribution::from_pmf(std::move(pmf), overflow, mean);
    }
    bad_field(path + ".kind", "unknown batch kind '" + kind + "'");
}

} // namespace

ProblemInstance instance_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config root must be a JSON object");

    ProblemInstance inst;
    for (const char* field : {"prices", "rates", "inventory", "horizon"}) {
        if (!j.contains(field)) bad_field(field, "missing");
    }
    inst.prices = require_number_array(j["prices"], "prices");
    inst.rates = require_number_array(j["rates"], "rates");
    inst.inventory = require_int(j["inventory"], "inventory");
    inst.horizon = require_number(j["horizon"], "horizon");

    if (j.contains("batch")) {
        inst.batches.push_back(parse_batch(j["batch"], inst.inventory, "batch"));
    } else if (j.contains("batches")) {
        const auto& arr = j["batches"];
        if (!arr.is_array() || arr.empty()) bad_field("batches", "expected a non-empty array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            inst.batches.push_back(
                parse_batch(arr[i], inst.inventory, "batches[" + std::to_string(i) + "]"));
        }
    } else {
        inst.batches.push_back(BatchDistribution::unit(inst.inventory));
    }

    require_valid(inst);
    return inst;
}

ProblemInstance load_instance(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return instance_from_json(buf.str());
}

BatchDistribution batch_from_json(const std::string& text, int inventory) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("batch is not valid JSON: ") + e.what());
    }
    return parse_batch(j, inventory, "batch");
}

} // namespace sknap::model
